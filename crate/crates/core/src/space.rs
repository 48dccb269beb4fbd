//! Program space: integer token weights, exact prefix probabilities and the
//! depth-first visiting order.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::One;

use crate::isa::{Alphabet, Op, TokenId};

/// Exact non-negative rational.
pub type Prob = Ratio<BigUint>;

/// Upper bound for any single token weight.
pub const WEIGHT_CAP: u32 = 1 << 20;

pub fn prob_one() -> Prob {
    Prob::one()
}

pub fn prob(num: u64, den: u64) -> Prob {
    Prob::new(BigUint::from(num), BigUint::from(den))
}

/// Conditional distribution over the next token: `w[i] / total`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeightTable {
    w: Vec<u32>,
    total: u64,
    /// Token ids by descending weight, ties by ascending id.
    order: Vec<TokenId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightError {
    Empty,
    OutOfRange { token: usize, weight: u64 },
}

impl fmt::Display for WeightError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightError::Empty => f.write_str("weight table is empty"),
            WeightError::OutOfRange { token, weight } => {
                write!(f, "weight {weight} for token {token} outside 1..={WEIGHT_CAP}")
            }
        }
    }
}

/// A self-edit of the continuation distribution, issued by `boost`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbabilityEdit {
    pub target: i64,
    pub multiplier: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EditError {
    BadToken(i64),
    BadMultiplier(i64),
}

impl WeightTable {
    pub fn uniform(len: usize) -> WeightTable {
        WeightTable { w: alloc::vec![1; len], total: len as u64, order: (0..len).map(|i| i as TokenId).collect() }
    }

    fn reorder(&mut self) {
        let w = &self.w;
        self.order.sort_by(|&a, &b| w[b as usize].cmp(&w[a as usize]).then(a.cmp(&b)));
    }

    pub fn from_weights(w: Vec<u32>) -> Result<WeightTable, WeightError> {
        if w.is_empty() {
            return Err(WeightError::Empty);
        }
        for (token, &weight) in w.iter().enumerate() {
            if weight == 0 || weight > WEIGHT_CAP {
                return Err(WeightError::OutOfRange { token, weight: weight as u64 });
            }
        }
        let total = w.iter().map(|&x| x as u64).sum();
        let order = (0..w.len()).map(|i| i as TokenId).collect();
        let mut t = WeightTable { w, total, order };
        t.reorder();
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn weight(&self, t: TokenId) -> u32 {
        self.w[t as usize]
    }

    pub fn weights(&self) -> &[u32] {
        &self.w
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `w[t] / total`, exactly.
    pub fn token_probability(&self, t: TokenId) -> Prob {
        prob(self.w[t as usize] as u64, self.total)
    }

    /// Multiplies one weight, clamping at [`WEIGHT_CAP`].
    pub fn apply(&mut self, edit: ProbabilityEdit) -> Result<(), EditError> {
        if edit.target < 0 || edit.target as u64 >= self.w.len() as u64 {
            return Err(EditError::BadToken(edit.target));
        }
        if edit.multiplier < 1 {
            return Err(EditError::BadMultiplier(edit.multiplier));
        }
        let slot = &mut self.w[edit.target as usize];
        let old = *slot as u64;
        let new = old.saturating_mul(edit.multiplier as u64).min(WEIGHT_CAP as u64);
        *slot = new as u32;
        self.total = self.total - old + new;
        if new != old {
            self.reorder();
        }
        Ok(())
    }

    /// Sets one weight directly, clamped into `1..=WEIGHT_CAP`.
    pub fn set(&mut self, t: TokenId, weight: u32) {
        let weight = weight.clamp(1, WEIGHT_CAP);
        let slot = &mut self.w[t as usize];
        self.total = self.total - *slot as u64 + weight as u64;
        *slot = weight;
        self.reorder();
    }

    /// The `rank`-th entry of [`WeightTable::ordered_continuations`].
    pub fn nth_continuation(&self, rank: usize) -> Option<TokenId> {
        self.order.get(rank).copied()
    }

    /// Tokens by descending weight, ties by ascending id.
    pub fn ordered_continuations(&self) -> Vec<TokenId> {
        self.order.clone()
    }
}

/// A growing token sequence together with its probability under the weights
/// in force at each extension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prefix {
    tokens: Vec<Op>,
    prob: Prob,
}

impl Default for Prefix {
    fn default() -> Self {
        Prefix::new()
    }
}

impl Prefix {
    pub fn new() -> Prefix {
        Prefix { tokens: Vec::new(), prob: Prob::one() }
    }

    /// A prefix taken as given, with probability one.
    pub fn given(tokens: Vec<Op>) -> Prefix {
        Prefix { tokens, prob: Prob::one() }
    }

    pub fn tokens(&self) -> &[Op] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn probability(&self) -> &Prob {
        &self.prob
    }

    pub fn extend(&self, alphabet: &Alphabet, t: TokenId, table: &WeightTable) -> Prefix {
        let mut next = self.clone();
        next.push(alphabet, t, table);
        next
    }

    pub fn push(&mut self, alphabet: &Alphabet, t: TokenId, table: &WeightTable) {
        self.prob *= table.token_probability(t);
        self.tokens.push(alphabet.op(t));
    }

    pub fn pop(&mut self, alphabet: &Alphabet, table: &WeightTable) -> Option<Op> {
        let op = self.tokens.pop()?;
        let t = alphabet.id(op).expect("prefix token belongs to the alphabet");
        self.prob /= table.token_probability(t);
        Some(op)
    }
}

/// Probability of a whole token string under a fixed table.
pub fn sequence_probability(alphabet: &Alphabet, table: &WeightTable, ops: &[Op]) -> Option<Prob> {
    let mut p = Prob::one();
    for &op in ops {
        p *= table.token_probability(alphabet.id(op)?);
    }
    Some(p)
}
