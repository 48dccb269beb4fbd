//! Experiment domains: the language 1^k 2^k, Towers of Hanoi, and planted
//! toy tasks with a known solver.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::isa::{Alphabet, Op};
use crate::space::{Prob, WeightTable};
use crate::store::FrozenStore;
use crate::vm::{ExecOutcome, MachineState};

/// What a task accepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Goal {
    /// `k` ones followed by `k` twos.
    OneTwo(u32),
    /// A legal move list taking `k` disks from peg 0 to peg 2, emitted as
    /// flat `from, to` pairs.
    Hanoi(u32),
    /// Exactly this output.
    Exact(Vec<i64>),
}

/// One problem: initial machine inputs plus a success predicate on the output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub stack: Vec<i64>,
    pub inputs: Vec<i64>,
    pub counter: i64,
    pub out_cap: usize,
    pub goal: Goal,
}

impl Task {
    pub fn initial_state(&self, weights: &WeightTable) -> MachineState {
        MachineState::new(weights.clone(), self.out_cap)
            .with_stack(&self.stack)
            .with_inputs(&self.inputs)
            .with_counter(self.counter)
    }

    /// Success predicate for a halted run. Linear in `out.len()`.
    pub fn accepts(&self, out: &[i64]) -> bool {
        match &self.goal {
            Goal::OneTwo(k) => verify_1k2k(out, *k),
            Goal::Hanoi(k) => decode_moves(out).is_some_and(|m| verify_hanoi(&m, *k)),
            Goal::Exact(want) => out == want.as_slice(),
        }
    }

    /// Whether the last symbol of `out` is still consistent with an accepted
    /// output, given that every earlier symbol was. Output is append-only, so
    /// a false here means the run can never succeed.
    pub fn viable_last(&self, out: &[i64]) -> bool {
        let Some(i) = out.len().checked_sub(1) else { return true };
        let v = out[i];
        match &self.goal {
            Goal::OneTwo(k) => v == if (i as u64) < *k as u64 { 1 } else { 2 },
            Goal::Hanoi(k) => {
                let (from, to) = optimal_move(*k, (i / 2) as u64 + 1);
                v == if i % 2 == 0 { from } else { to } as i64
            }
            Goal::Exact(want) => want.get(i) == Some(&v),
        }
    }
}

pub fn make_1k2k(k: u32) -> Task {
    Task {
        id: alloc::format!("1k2k/{k}"),
        stack: alloc::vec![k as i64],
        inputs: alloc::vec![k as i64],
        counter: k.max(1) as i64,
        out_cap: 2 * k as usize,
        goal: Goal::OneTwo(k),
    }
}

pub fn verify_1k2k(out: &[i64], k: u32) -> bool {
    let k = k as usize;
    out.len() == 2 * k && out[..k].iter().all(|&v| v == 1) && out[k..].iter().all(|&v| v == 2)
}

/// Disks start on peg 0; the stack holds `k, 0, 1, 2` with the target peg on
/// top, so a recursive solver can permute the peg triple in place.
pub fn make_hanoi(k: u32) -> Task {
    assert!((1..=40).contains(&k), "hanoi size {k} out of range");
    Task {
        id: alloc::format!("hanoi/{k}"),
        stack: alloc::vec![k as i64, 0, 1, 2],
        inputs: alloc::vec![k as i64],
        counter: k as i64,
        out_cap: 2 * ((1usize << k) - 1),
        goal: Goal::Hanoi(k),
    }
}

/// Pairs up a flat output; `None` for odd length or pegs outside 0..=2.
pub fn decode_moves(out: &[i64]) -> Option<Vec<(u8, u8)>> {
    if !out.len().is_multiple_of(2) {
        return None;
    }
    out.chunks(2)
        .map(|c| match (c[0], c[1]) {
            (a @ 0..=2, b @ 0..=2) => Some((a as u8, b as u8)),
            _ => None,
        })
        .collect()
}

/// Simulates the moves; true iff all are legal and every disk ends on peg 2.
pub fn verify_hanoi(moves: &[(u8, u8)], k: u32) -> bool {
    let mut pegs: [Vec<u32>; 3] = [(1..=k).rev().collect(), Vec::new(), Vec::new()];
    for &(from, to) in moves {
        if from > 2 || to > 2 || from == to {
            return false;
        }
        let Some(&disk) = pegs[from as usize].last() else { return false };
        if pegs[to as usize].last().is_some_and(|&top| top < disk) {
            return false;
        }
        pegs[from as usize].pop();
        pegs[to as usize].push(disk);
    }
    pegs[0].is_empty() && pegs[1].is_empty()
}

/// The classical recursive solution.
pub fn hanoi_oracle(k: u32) -> Vec<(u8, u8)> {
    fn go(k: u32, from: u8, via: u8, to: u8, out: &mut Vec<(u8, u8)>) {
        if k == 0 {
            return;
        }
        go(k - 1, from, to, via, out);
        out.push((from, to));
        go(k - 1, via, from, to, out);
    }
    let mut out = Vec::with_capacity((1usize << k) - 1);
    go(k, 0, 1, 2, &mut out);
    out
}

/// Move `m` (1-based) of the optimal `k`-disk solution, in closed form.
fn optimal_move(k: u32, m: u64) -> (u8, u8) {
    let from = ((m & (m - 1)) % 3) as u8;
    let to = (((m | (m - 1)) + 1) % 3) as u8;
    // The closed form targets peg 2 for odd k and peg 1 for even k.
    if k.is_multiple_of(2) {
        let swap = |p: u8| [0, 2, 1][p as usize];
        (swap(from), swap(to))
    } else {
        (from, to)
    }
}

/// A task built around a known solver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Planted {
    pub task: Task,
    pub program: Vec<Op>,
    /// Steps the solver takes on the task.
    pub steps: u64,
    /// Probability of the solver under the self-computed distribution.
    pub prob: Prob,
}

/// Runs `program` token by token on a blank machine and wraps its output in an
/// exact-output task. `None` unless the program consumes every token and then
/// halts within `max_steps`.
pub fn planted_task(
    id: &str,
    program: &[Op],
    alphabet: &Alphabet,
    table: &WeightTable,
    store: &FrozenStore,
    max_steps: u64,
) -> Option<Planted> {
    let mut state = MachineState::new(table.clone(), 1 << 16);
    let mut prob = crate::space::prob_one();
    for len in 0..=program.len() {
        let left = max_steps.checked_sub(state.steps)?;
        match state.run(&program[..len], store, left) {
            ExecOutcome::RequestToken if len < program.len() => {
                prob *= state.weights().token_probability(alphabet.id(program[len])?);
            }
            ExecOutcome::Halted if len == program.len() => {
                let mut name = String::from(id);
                if name.is_empty() {
                    for op in program {
                        let _ = write!(name, "{op}.");
                    }
                    name.pop();
                }
                let out = state.out.clone();
                let task = Task {
                    id: name,
                    stack: Vec::new(),
                    inputs: Vec::new(),
                    counter: 1,
                    out_cap: out.len(),
                    goal: Goal::Exact(out),
                };
                return Some(Planted { task, program: program.to_vec(), steps: state.steps, prob });
            }
            _ => return None,
        }
    }
    None
}
