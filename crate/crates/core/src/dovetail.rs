//! Dovetailed execution of every program.
//!
//! Programs are numbered from 1 in length-lexicographic order over the
//! alphabet. In phase `i` the programs `1..=i` run in turn, program `j` for
//! `2^(i-j)` steps, each resuming where it stopped. A program is a fixed token
//! string; reaching its end counts as halting. Steps granted to a program
//! that already stopped are spent idle, so the schedule depends on the
//! program index alone.

use alloc::vec::Vec;

use crate::isa::{Alphabet, Op};
use crate::space::WeightTable;
use crate::store::FrozenStore;
use crate::vm::{ExecOutcome, MachineState};

/// Program number `index` (1-based) in length-lexicographic order.
pub fn program_at(alphabet: &Alphabet, index: u64) -> Vec<Op> {
    assert!(index >= 1, "programs are numbered from 1");
    let m = alphabet.len() as u64;
    let mut n = index;
    let mut digits = Vec::new();
    // bijective base m
    while n > 0 {
        let d = (n - 1) % m;
        digits.push(alphabet.op(d as u8));
        n = (n - 1) / m;
    }
    digits.reverse();
    digits
}

/// One contiguous slice of the schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub phase: u32,
    pub index: u64,
    /// Global time at the start of the slice.
    pub start: u64,
    pub granted: u64,
    /// Steps the program had executed before this slice.
    pub before: u64,
    /// Steps it executed during the slice; the rest of the slice was idle.
    pub used: u64,
    /// Output symbols produced during the slice.
    pub new_output: Vec<i64>,
}

struct Slot {
    program: Vec<Op>,
    state: MachineState,
    done: bool,
}

pub struct Dovetailer {
    alphabet: Alphabet,
    table: WeightTable,
    out_cap: usize,
    slots: Vec<Slot>,
    phase: u32,
    next: u64,
    /// Part of the current slice already granted by an earlier call.
    partial: u64,
    clock: u64,
}

impl Dovetailer {
    pub fn new(alphabet: Alphabet, out_cap: usize) -> Dovetailer {
        let table = WeightTable::uniform(alphabet.len());
        Dovetailer { alphabet, table, out_cap, slots: Vec::new(), phase: 1, next: 1, partial: 0, clock: 0 }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Runs until the global clock reaches `until`, reporting every slice to
    /// `sink`. A slice cut short by `until` is reported with what it was
    /// granted so far and resumes on the next call.
    pub fn run(&mut self, until: u64, mut sink: impl FnMut(&Allocation)) {
        let store = FrozenStore::new();
        while self.clock < until {
            let j = self.next;
            if self.slots.len() < j as usize {
                let program = program_at(&self.alphabet, j);
                let state = MachineState::new(self.table.clone(), self.out_cap);
                self.slots.push(Slot { program, state, done: false });
            }
            let full = 1u64 << (self.phase as u64 - j).min(63);
            let slot = &mut self.slots[j as usize - 1];
            let already = self.partial;
            let granted = (full - already).min(until - self.clock);
            let before = slot.state.steps;
            let out_before = slot.state.out.len();
            if !slot.done {
                match slot.state.run(&slot.program, &store, granted) {
                    ExecOutcome::BudgetExhausted => {}
                    _ => slot.done = true,
                }
            }
            let used = slot.state.steps - before;
            let alloc = Allocation {
                phase: self.phase,
                index: j,
                start: self.clock,
                granted,
                before,
                used,
                new_output: slot.state.out[out_before..].to_vec(),
            };
            self.clock += granted;
            self.partial = if already + granted < full { already + granted } else { 0 };
            if self.partial == 0 {
                self.next += 1;
                if self.next > self.phase as u64 {
                    self.phase += 1;
                    self.next = 1;
                }
            }
            sink(&alloc);
        }
    }
}
