//! Levin search with a doubling time limit, and its adaptive variant.
//!
//! In the phase with limit `T` every program `q` gets `floor(P(q)·T)` steps.
//! Programs are grown as prefixes and tested in order of decreasing
//! probability, shorter first on ties; a child resumes from its parent's
//! machine state, so shared prefixes execute once per phase.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::isa::{Alphabet, Op};
use crate::space::{Prefix, Prob, WeightTable, WEIGHT_CAP};
use crate::store::FrozenStore;
use crate::task::Task;
use crate::vm::{ExecOutcome, MachineState};

/// `floor(P·T)`.
pub fn phase_budget(prob: &Prob, t: u64) -> u64 {
    let v = prob.numer() * BigUint::from(t) / prob.denom();
    v.to_u64().unwrap_or(u64::MAX)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Found {
    pub program: Vec<Op>,
    pub prob: Prob,
    /// Steps the program itself took.
    pub steps: u64,
    /// Limit `T` of the successful phase.
    pub phase_limit: u64,
    /// All steps executed over all phases.
    pub total_steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LsearchError {
    CeilingExhausted { steps: u64 },
    /// A whole phase ran without hitting a budget: no program solves the task.
    SpaceExhausted { steps: u64 },
}

impl fmt::Display for LsearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LsearchError::CeilingExhausted { steps } => write!(f, "step ceiling reached after {steps} steps"),
            LsearchError::SpaceExhausted { steps } => write!(f, "program space exhausted after {steps} steps"),
        }
    }
}

struct Cand {
    prefix: Prefix,
    state: MachineState,
    seq: u64,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    // max-heap: most probable first, then shorter, then older
    fn cmp(&self, other: &Self) -> Ordering {
        self.prefix
            .probability()
            .cmp(other.prefix.probability())
            .then(other.prefix.len().cmp(&self.prefix.len()))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Runs Levin search on one task until success or until `ceiling` steps.
pub fn lsearch(
    task: &Task,
    alphabet: &Alphabet,
    table: &WeightTable,
    store: &FrozenStore,
    ceiling: u64,
) -> Result<Found, LsearchError> {
    let mut total = 0u64;
    let mut limit = 1u64;
    loop {
        let mut cut = false;
        let mut seq = 0u64;
        let mut heap = BinaryHeap::new();
        heap.push(Cand { prefix: Prefix::new(), state: task.initial_state(table), seq });
        while let Some(mut c) = heap.pop() {
            let budget = phase_budget(c.prefix.probability(), limit);
            let Some(left) = budget.checked_sub(c.state.steps) else {
                cut = true;
                continue;
            };
            let before = c.state.steps;
            let outcome = c.state.run(c.prefix.tokens(), store, left.min(ceiling - total));
            total += c.state.steps - before;
            match outcome {
                ExecOutcome::Halted if task.accepts(&c.state.out) => {
                    return Ok(Found {
                        program: c.prefix.tokens().to_vec(),
                        prob: c.prefix.probability().clone(),
                        steps: c.state.steps,
                        phase_limit: limit,
                        total_steps: total,
                    });
                }
                ExecOutcome::RequestToken => {
                    let table = c.state.weights().clone();
                    for t in table.ordered_continuations() {
                        seq += 1;
                        let prefix = c.prefix.extend(alphabet, t, &table);
                        if phase_budget(prefix.probability(), limit) <= c.state.steps {
                            cut = true;
                            continue;
                        }
                        heap.push(Cand { prefix, state: c.state.clone(), seq });
                    }
                }
                ExecOutcome::BudgetExhausted => cut = true,
                ExecOutcome::Halted | ExecOutcome::Error(_) => {}
            }
            if total >= ceiling {
                return Err(LsearchError::CeilingExhausted { steps: total });
            }
        }
        if !cut {
            return Err(LsearchError::SpaceExhausted { steps: total });
        }
        limit = limit.checked_mul(2).ok_or(LsearchError::CeilingExhausted { steps: total })?;
    }
}

/// Growth multiplier of the adaptive update.
pub const ALS_K: u64 = 2;

/// Raises the weight of every distinct token of `solver`:
/// `w ← floor(w·(1 + γ·K))`, clamped to the weight cap.
pub fn als_update(table: &WeightTable, alphabet: &Alphabet, solver: &[Op], gamma: Ratio<u64>) -> WeightTable {
    assert!(*gamma.numer() < *gamma.denom(), "learning rate must be below 1");
    let mut out = table.clone();
    let mut seen = [false; Op::ALL.len()];
    for &op in solver {
        let Some(t) = alphabet.id(op) else { continue };
        if core::mem::replace(&mut seen[op as usize], true) {
            continue;
        }
        let w = table.weight(t) as u128;
        let (g, d) = (*gamma.numer() as u128, *gamma.denom() as u128);
        let grown = w * (d + g * ALS_K as u128) / d;
        out.set(t, grown.min(WEIGHT_CAP as u128) as u32);
    }
    out
}

/// Outcome of one task in an adaptive run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlsStep {
    pub result: Result<Found, LsearchError>,
    pub table: WeightTable,
}

/// Solves `tasks` in order, updating the table after every success.
pub fn adaptive_lsearch(
    tasks: &[Task],
    alphabet: &Alphabet,
    table: &WeightTable,
    gamma: Ratio<u64>,
    ceiling: u64,
) -> Vec<AlsStep> {
    let store = FrozenStore::new();
    let mut table = table.clone();
    let mut out = Vec::with_capacity(tasks.len());
    for task in tasks {
        let result = lsearch(task, alphabet, &table, &store, ceiling);
        if let Ok(found) = &result {
            table = als_update(&table, alphabet, &found.program, gamma);
        }
        out.push(AlsStep { result, table: table.clone() });
    }
    out
}
