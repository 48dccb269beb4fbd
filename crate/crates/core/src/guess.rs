//! Sampling programs by coin tossing with an adaptive time limit.
//!
//! Each run starts with limit `t = 1`. Whenever more than `t` instructions
//! have executed, a coin decides between doubling `t` and stopping. Whenever
//! the machine wants a token that is not on the input tape yet, a coin supplies
//! the next program bit and `t` is halved. Tokens are read as fixed-width,
//! most significant bit first codes over the alphabet; a code past the end of
//! the alphabet is a fault.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::isa::{Alphabet, Op};
use crate::space::WeightTable;
use crate::store::FrozenStore;
use crate::vm::{ExecOutcome, Fault, MachineState, Step};

/// Source of fair coin tosses. `None` means no more tosses are available.
pub trait CoinSource {
    fn toss(&mut self) -> Option<bool>;
}

/// Pseudorandom coins, one independent stream per sample index.
pub struct ChaChaCoins {
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl ChaChaCoins {
    pub fn new(seed: u64, stream: u64) -> ChaChaCoins {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        ChaChaCoins { rng, buf: 0, left: 0 }
    }
}

impl CoinSource for ChaChaCoins {
    fn toss(&mut self) -> Option<bool> {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let b = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        Some(b)
    }
}

/// A fixed list of tosses, `true` for heads.
#[derive(Clone, Debug, Default)]
pub struct ScriptedCoins {
    tosses: Vec<bool>,
    pos: usize,
}

impl ScriptedCoins {
    pub fn new(tosses: &[bool]) -> ScriptedCoins {
        ScriptedCoins { tosses: tosses.to_vec(), pos: 0 }
    }

    pub fn used(&self) -> usize {
        self.pos
    }
}

impl CoinSource for ScriptedCoins {
    fn toss(&mut self) -> Option<bool> {
        let b = *self.tosses.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuessEnd {
    /// The time-limit coin came up tails.
    Exit,
    Halted,
    Fault(Fault),
    /// A bit group decoded past the end of the alphabet.
    InvalidCode(u32),
    /// The safety cap on executed instructions was reached.
    Capped,
    /// The coin source ran dry; the run can be resumed.
    OutOfCoins,
}

/// The reference machine for sampling: an alphabet and a few fixed limits.
#[derive(Clone, Debug)]
pub struct GuessMachine {
    pub alphabet: Alphabet,
    pub out_cap: usize,
    pub max_steps: u64,
}

impl GuessMachine {
    pub fn new(alphabet: Alphabet) -> GuessMachine {
        GuessMachine { alphabet, out_cap: 64, max_steps: 1 << 24 }
    }

    /// Four tokens, all codes valid, with both halting and non-halting programs.
    pub fn small() -> GuessMachine {
        GuessMachine::new(Alphabet::new(&[Op::C2, Op::Out1, Op::Dup, Op::BzBack]).expect("distinct ops"))
    }

    pub fn start(&self) -> GuessRun {
        GuessRun {
            state: MachineState::new(WeightTable::uniform(self.alphabet.len()), self.out_cap),
            program: Vec::new(),
            pending: 0,
            pending_bits: 0,
            bits: Vec::new(),
            t_exp: 0,
            tosses: 0,
            checks: 0,
            heads: 0,
        }
    }

    pub fn sample(&self, coins: &mut impl CoinSource) -> GuessTrace {
        let mut run = self.start();
        let end = run.resume(self, coins);
        run.finish(end)
    }

    /// Sample `index` of the run seeded with `seed`; independent of any
    /// other sample and of the order samples are drawn in.
    pub fn sample_seeded(&self, seed: u64, index: u64) -> GuessTrace {
        self.sample(&mut ChaChaCoins::new(seed, index))
    }
}

/// A run in progress.
#[derive(Clone, Debug)]
pub struct GuessRun {
    state: MachineState,
    program: Vec<Op>,
    pending: u32,
    pending_bits: u32,
    bits: Vec<bool>,
    t_exp: i64,
    tosses: u64,
    checks: u64,
    heads: u64,
}

impl GuessRun {
    pub fn output(&self) -> &[i64] {
        &self.state.out
    }

    pub fn tosses(&self) -> u64 {
        self.tosses
    }

    fn over_limit(&self) -> bool {
        let n = self.state.steps;
        match self.t_exp {
            e if e < 0 => n >= 1,
            e if e >= 64 => false,
            e => n > 1u64 << e,
        }
    }

    /// Continues until the run ends or `coins` runs dry.
    pub fn resume(&mut self, m: &GuessMachine, coins: &mut impl CoinSource) -> GuessEnd {
        let store = FrozenStore::new();
        let width = m.alphabet.bits_per_token();
        loop {
            while self.over_limit() {
                let Some(heads) = coins.toss() else { return GuessEnd::OutOfCoins };
                self.tosses += 1;
                self.checks += 1;
                if !heads {
                    return GuessEnd::Exit;
                }
                self.heads += 1;
                self.t_exp += 1;
            }
            if self.state.steps >= m.max_steps {
                return GuessEnd::Capped;
            }
            if self.state.wants_token(&self.program) {
                let Some(bit) = coins.toss() else { return GuessEnd::OutOfCoins };
                self.tosses += 1;
                self.bits.push(bit);
                self.pending = self.pending << 1 | bit as u32;
                self.pending_bits += 1;
                self.t_exp -= 1;
                if self.pending_bits == width {
                    let code = core::mem::take(&mut self.pending);
                    self.pending_bits = 0;
                    if code as usize >= m.alphabet.len() {
                        return GuessEnd::InvalidCode(code);
                    }
                    self.program.push(m.alphabet.op(code as u8));
                }
                continue;
            }
            match self.state.step(&self.program, &store) {
                Step::Continue | Step::Done(ExecOutcome::RequestToken) => {}
                Step::Done(ExecOutcome::Halted) => return GuessEnd::Halted,
                Step::Done(ExecOutcome::Error(f)) => return GuessEnd::Fault(f),
                Step::Done(ExecOutcome::BudgetExhausted) => unreachable!("single steps carry no budget"),
            }
        }
    }

    pub fn finish(self, end: GuessEnd) -> GuessTrace {
        GuessTrace {
            end,
            program: self.program,
            bits: self.bits,
            output: self.state.out,
            executed: self.state.steps,
            t_exp: self.t_exp,
            tosses: self.tosses,
            checks: self.checks,
            heads: self.heads,
        }
    }
}

/// Everything observable about one finished sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuessTrace {
    pub end: GuessEnd,
    pub program: Vec<Op>,
    /// Program bits read from the input tape.
    pub bits: Vec<bool>,
    pub output: Vec<i64>,
    pub executed: u64,
    /// Final limit as a power of two; may be negative.
    pub t_exp: i64,
    pub tosses: u64,
    /// Tosses made at time-limit checks and how many of them were heads.
    pub checks: u64,
    pub heads: u64,
}

/// Thresholds `2, 4, ..., 2^12`.
pub const TAIL_POINTS: [u64; 12] = {
    let mut t = [0u64; 12];
    let mut i = 0;
    while i < 12 {
        t[i] = 2 << i;
        i += 1;
    }
    t
};

#[derive(Clone, Debug, PartialEq)]
pub struct TailRow {
    pub t: u64,
    /// Fraction of samples that ran more than `t` instructions.
    pub fraction: f64,
}

/// Runtime tail of a sample, plus `max_t t·fraction(t)`.
pub fn speed_prior_tail(runtimes: &[u64]) -> (Vec<TailRow>, f64) {
    let n = runtimes.len().max(1) as f64;
    let rows: Vec<TailRow> = TAIL_POINTS
        .iter()
        .map(|&t| TailRow { t, fraction: runtimes.iter().filter(|&&r| r > t).count() as f64 / n })
        .collect();
    let peak = rows.iter().map(|r| r.t as f64 * r.fraction).fold(0.0, f64::max);
    (rows, peak)
}

/// Fraction of traces whose output begins with `x`.
pub fn prefix_frequency(traces: &[GuessTrace], x: &[i64]) -> f64 {
    let hits = traces.iter().filter(|t| t.output.starts_with(x)).count();
    hits as f64 / traces.len().max(1) as f64
}
