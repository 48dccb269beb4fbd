//! Incremental search for a sequence of tasks.
//!
//! Each task `n+1` is attacked by two searches that share the step budget in
//! alternating quanta. Search A grows programs from scratch and tests them on
//! every task `1..=n+1`; search B only grows continuations of the most recently
//! frozen program and tests them on task `n+1` alone. Whatever solves first is
//! frozen and becomes callable through `getf`.
//!
//! Inside one search every candidate prefix `q` is held to the budget
//! `Σ_r t(q,r) ≤ P(q)·T/n`, where `T` is that search's own clock. A prefix whose
//! next instruction would break the budget is parked and resumes once the clock
//! has caught up; when every live prefix is parked the clock jumps forward to
//! the earliest resume point. Among runnable prefixes the one whose next
//! instruction became affordable first runs next (deeper prefixes win ties),
//! so the scheduler never gives a prefix more time than its probability buys.

use alloc::collections::BinaryHeap;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::isa::{Alphabet, Op};
use crate::space::{Prefix, Prob, WeightTable};
use crate::store::FrozenStore;
use crate::task::Task;
use crate::vm::{ExecOutcome, MachineState, Step};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    pub alphabet: Alphabet,
    pub weights: WeightTable,
    /// The `n` of the budget rule; at least 1.
    pub n_factor: u64,
    /// Global step ceiling over the whole sequence.
    pub ceiling: u64,
    /// Steps per scheduling turn when both searches are live.
    pub quantum: u64,
}

impl SearchConfig {
    pub fn new(alphabet: Alphabet, weights: WeightTable) -> SearchConfig {
        SearchConfig { alphabet, weights, n_factor: 1, ceiling: 1 << 32, quantum: 1 << 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// Exhaustive search on all tasks so far.
    A,
    /// Continuations of the last frozen program, current task only.
    B,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchError {
    CeilingExhausted { task: usize },
    /// Both searches ran out of candidates.
    SpaceExhausted { task: usize },
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::CeilingExhausted { task } => write!(f, "step ceiling reached while solving task {task}"),
            SearchError::SpaceExhausted { task } => write!(f, "no program solves task {task}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub task: usize,
    pub program: Vec<Op>,
    /// Probability of the program within the search that found it. For B this
    /// is the probability of the suffix given the frozen prefix.
    pub prob: Prob,
    pub side: Side,
    /// Address in the frozen store.
    pub addr: usize,
    pub steps_a: u64,
    pub steps_b: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveReport {
    pub solutions: Vec<Solution>,
    /// Steps charged to the task that was being searched when the run stopped.
    pub unsolved_steps: (u64, u64),
    pub total_steps: u64,
    /// Instructions actually executed; the rest of `total_steps` was spent
    /// waiting for budgets to catch up.
    pub executed: u64,
    pub store: FrozenStore,
    pub error: Option<SearchError>,
}

impl SolveReport {
    pub fn solved(&self) -> bool {
        self.error.is_none()
    }
}

/// Instrumentation hooks; every method defaults to doing nothing.
pub trait Observer {
    /// Called after every executed instruction.
    fn executed(&mut self, _ev: &Executed<'_>) {}
    /// A candidate halted on a task, successfully or not.
    fn halted(&mut self, _side: Side, _task: usize, _program: &[Op], _accepted: bool) {}
    /// A new candidate prefix started executing.
    fn entered(&mut self, _side: Side, _prefix: &Prefix, _time: u64, _clock: u64) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

pub struct Executed<'a> {
    pub side: Side,
    pub tokens: &'a [Op],
    pub prob: &'a Prob,
    /// Σ over active tasks of steps used by this prefix, after the instruction.
    pub time: u64,
    /// The search clock, after the instruction.
    pub clock: u64,
    pub n_factor: u64,
}

/// True iff `time > P·clock/n`, compared exactly.
pub fn backtrack_trigger(time: u64, prob: &Prob, clock: u64, n_factor: u64) -> bool {
    BigUint::from(time) * prob.denom() * BigUint::from(n_factor) > prob.numer() * BigUint::from(clock)
}

fn to_u64_sat(v: &BigUint) -> u64 {
    v.to_u64().unwrap_or(u64::MAX)
}

/// Earliest clock value (after an instruction) at which a prefix that has
/// already used `time` steps may execute one more.
fn release(time: u64, prob: &Prob, n_factor: u64) -> u64 {
    if time == 0 {
        return 0;
    }
    let lhs = BigUint::from(time) * BigUint::from(n_factor) * prob.denom();
    let num = prob.numer();
    to_u64_sat(&((lhs + num - 1u32) / num))
}

/// Number of further instructions a prefix at (`time`, `clock`) may run while
/// staying within budget and not overtaking a competitor released at `rival`.
fn allowance(time: u64, clock: u64, prob: &Prob, n_factor: u64, rival: Option<u64>) -> u64 {
    let c = BigUint::from(n_factor) * prob.denom();
    let num = prob.numer().clone();
    // instruction d (1-based) is affordable iff c·(time+d−1) ≤ num·(clock+d)
    let fits = if c <= num {
        // probability one with n = 1: the budget grows as fast as the clock
        if time <= clock + 1 {
            u64::MAX
        } else {
            0
        }
    } else {
        let rhs = &num * BigUint::from(clock) + &c;
        let lhs = &c * BigUint::from(time);
        if rhs < lhs {
            0
        } else {
            to_u64_sat(&((rhs - lhs) / (&c - &num)))
        }
    };
    let ahead = match rival {
        None => u64::MAX,
        Some(r) => {
            // release(time+d−1) ≤ r iff c·(time+d−1) ≤ num·r
            let cap = num * BigUint::from(r) / &c;
            let cap = to_u64_sat(&cap);
            if cap < time {
                0
            } else {
                (cap - time).saturating_add(1)
            }
        }
    };
    fits.min(ahead)
}

#[derive(Clone, Debug)]
struct Run {
    task: usize,
    state: MachineState,
    waiting: bool,
}

/// Expanded nodes whose prefix ran for at most this many steps drop their
/// run states and rebuild them by replaying the prefix when a child is made.
const REPLAY_BELOW: u64 = 1024;

/// Continuations of a node whose runs all asked for a token.
#[derive(Clone, Debug)]
struct Expansion {
    table: Arc<WeightTable>,
    next: usize,
    /// Run states were dropped; replay the prefix to rebuild them.
    replay: bool,
}

#[derive(Clone, Debug)]
struct Node {
    prefix: Prefix,
    runs: Vec<Run>,
    time: u64,
    depth: u32,
    cursor: usize,
    children: Option<Expansion>,
}

impl Node {
    fn next_child_prob(&self) -> Option<Prob> {
        let e = self.children.as_ref()?;
        let t = e.table.nth_continuation(e.next)?;
        Some(self.prefix.probability() * e.table.token_probability(t))
    }

    fn key(&self, n_factor: u64) -> Option<u64> {
        match &self.children {
            Some(_) => self.next_child_prob().map(|p| release(self.time, &p, n_factor)),
            None => Some(release(self.time, self.prefix.probability(), n_factor)),
        }
    }
}

type HeapKey = Reverse<(u64, Reverse<u32>, u64, usize)>;

/// Shared read-only context of one search.
struct Ctx<'a> {
    tasks: &'a [Task],
    store: &'a FrozenStore,
    alphabet: &'a Alphabet,
    weights: &'a WeightTable,
    n_factor: u64,
}

enum Turn {
    Spent,
    Found(Vec<Op>, Prob),
    Exhausted,
}

/// One resumable near-bias-optimal search.
struct Search {
    side: Side,
    tasks: Vec<usize>,
    slots: Vec<Option<Node>>,
    free: Vec<usize>,
    heap: BinaryHeap<HeapKey>,
    clock: u64,
    executed: u64,
    seq: u64,
}

impl Search {
    fn new(side: Side, root: Node, n_factor: u64) -> Search {
        let mut s = Search {
            side,
            tasks: root.runs.iter().map(|r| r.task).collect(),
            slots: Vec::new(),
            free: Vec::new(),
            heap: BinaryHeap::new(),
            clock: 0,
            executed: 0,
            seq: 0,
        };
        s.park(root, n_factor);
        s
    }

    fn park(&mut self, node: Node, n_factor: u64) {
        let Some(key) = node.key(n_factor) else { return };
        let depth = node.depth;
        let slot = match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(node);
                i
            }
            None => {
                self.slots.push(Some(node));
                self.slots.len() - 1
            }
        };
        self.seq += 1;
        self.heap.push(Reverse((key, Reverse(depth), self.seq, slot)));
    }

    /// Runs until `budget` clock steps are used, a solution appears or the
    /// search runs dry. Returns the clock steps used.
    fn turn<O: Observer>(&mut self, budget: u64, ctx: &Ctx<'_>, obs: &mut O) -> (u64, Turn) {
        let start = self.clock;
        loop {
            let used = self.clock - start;
            if used >= budget {
                return (used, Turn::Spent);
            }
            let Some(Reverse((key, _, _, slot))) = self.heap.pop() else {
                return (used, Turn::Exhausted);
            };
            let node = self.slots[slot].take().expect("heap entry points at a live node");
            self.free.push(slot);
            if key > self.clock + 1 {
                // Nobody is affordable yet: wait.
                let wait = (key - 1 - self.clock).min(budget - used);
                self.clock += wait;
                if self.clock + 1 < key || self.clock - start >= budget {
                    self.park(node, ctx.n_factor);
                    continue;
                }
            }
            let rival = self.heap.peek().map(|Reverse((k, ..))| *k);
            let left = budget - (self.clock - start);
            if let Some(found) = self.visit(node, rival, left, ctx, obs) {
                return (self.clock - start, Turn::Found(found.0, found.1));
            }
        }
    }

    fn visit<O: Observer>(
        &mut self,
        mut node: Node,
        rival: Option<u64>,
        left: u64,
        ctx: &Ctx<'_>,
        obs: &mut O,
    ) -> Option<(Vec<Op>, Prob)> {
        if node.children.is_some() {
            let child = self.spawn(&mut node, ctx);
            self.park(node, ctx.n_factor);
            obs.entered(self.side, &child.prefix, child.time, self.clock);
            self.park(child, ctx.n_factor);
            return None;
        }
        let allow = allowance(node.time, self.clock, node.prefix.probability(), ctx.n_factor, rival).min(left);
        debug_assert!(allow > 0, "popped node must be affordable");
        let mut spent = 0;
        while spent < allow {
            let n = node.runs.len();
            let i = (0..n).map(|j| (node.cursor + j) % n).find(|&i| !node.runs[i].waiting)?;
            node.cursor = (i + 1) % n;
            let run = &mut node.runs[i];
            let (steps0, out0) = (run.state.steps, run.state.out.len());
            let step = run.state.step(node.prefix.tokens(), ctx.store);
            let cost = run.state.steps - steps0;
            node.time += cost;
            self.clock += cost;
            self.executed += cost;
            spent += cost;
            if cost > 0 {
                obs.executed(&Executed {
                    side: self.side,
                    tokens: node.prefix.tokens(),
                    prob: node.prefix.probability(),
                    time: node.time,
                    clock: self.clock,
                    n_factor: ctx.n_factor,
                });
            }
            let task = &ctx.tasks[run.task];
            if run.state.out.len() > out0 && !task.viable_last(&run.state.out) {
                return None;
            }
            match step {
                Step::Continue => {}
                Step::Done(ExecOutcome::RequestToken) => {
                    run.waiting = true;
                    if node.runs.iter().all(|r| r.waiting) {
                        let newest = node.runs.iter().max_by_key(|r| r.task).expect("node has a run");
                        let table = newest.state.shared_weights();
                        let replay = node.time < REPLAY_BELOW;
                        if replay {
                            node.runs = Vec::new();
                        }
                        node.children = Some(Expansion { table, next: 0, replay });
                        self.park(node, ctx.n_factor);
                        return None;
                    }
                }
                Step::Done(ExecOutcome::Halted) => {
                    let ok = task.accepts(&run.state.out);
                    let task_id = run.task;
                    obs.halted(self.side, task_id, node.prefix.tokens(), ok);
                    if !ok {
                        return None;
                    }
                    let done = node.runs.remove(i);
                    node.time -= done.state.steps;
                    if node.runs.is_empty() {
                        return Some((node.prefix.tokens().to_vec(), node.prefix.probability().clone()));
                    }
                    node.cursor %= node.runs.len();
                }
                Step::Done(_) => return None,
            }
        }
        self.park(node, ctx.n_factor);
        None
    }

    /// Creates the next child of an expanded node and advances its iterator.
    fn spawn(&mut self, node: &mut Node, ctx: &Ctx<'_>) -> Node {
        let e = node.children.as_mut().expect("expanded node");
        let t = e.table.nth_continuation(e.next).expect("expanded node has a next child");
        e.next += 1;
        let prefix = node.prefix.extend(ctx.alphabet, t, &e.table);
        let runs = if e.replay {
            // Tasks the prefix already solved halt again and drop out.
            self.tasks
                .iter()
                .filter_map(|&i| {
                    let mut state = ctx.tasks[i].initial_state(ctx.weights);
                    match state.run(node.prefix.tokens(), ctx.store, u64::MAX) {
                        ExecOutcome::RequestToken => Some(Run { task: i, state, waiting: false }),
                        _ => None,
                    }
                })
                .collect()
        } else {
            node.runs.iter().map(|r| Run { task: r.task, state: r.state.clone(), waiting: false }).collect()
        };
        Node { prefix, runs, time: node.time, depth: node.depth + 1, cursor: 0, children: None }
    }
}

fn root(prefix: Prefix, tasks: impl Iterator<Item = usize>, all: &[Task], weights: &WeightTable) -> Node {
    let runs = tasks.map(|i| Run { task: i, state: all[i].initial_state(weights), waiting: false }).collect();
    Node { prefix, runs, time: 0, depth: 0, cursor: 0, children: None }
}

/// Solves `tasks` in order, freezing each solution into `store`.
///
/// Programs already in `store` are callable from the start; search B only
/// begins once this sequence has frozen a solution of its own.
pub fn solve_sequence<O: Observer>(
    tasks: &[Task],
    config: &SearchConfig,
    mut store: FrozenStore,
    obs: &mut O,
) -> SolveReport {
    assert!(config.n_factor >= 1, "n_factor must be at least 1");
    assert!(config.quantum >= 1, "quantum must be at least 1");
    let mut report = SolveReport {
        solutions: Vec::new(),
        unsolved_steps: (0, 0),
        total_steps: 0,
        executed: 0,
        store: FrozenStore::new(),
        error: None,
    };
    let mut last: Option<Vec<Op>> = None;
    for n in 0..tasks.len() {
        let ctx = Ctx { tasks, store: &store, alphabet: &config.alphabet, weights: &config.weights, n_factor: config.n_factor };
        let mut a = Some(Search::new(Side::A, root(Prefix::new(), 0..=n, tasks, &config.weights), config.n_factor));
        let mut b = last
            .as_ref()
            .map(|p| Search::new(Side::B, root(Prefix::given(p.clone()), n..=n, tasks, &config.weights), config.n_factor));
        let (mut steps_a, mut steps_b) = (0u64, 0u64);
        let mut next = Side::B;
        let found = loop {
            if a.is_none() && b.is_none() {
                report.error = Some(SearchError::SpaceExhausted { task: n });
                break None;
            }
            let remaining = config.ceiling.saturating_sub(report.total_steps + steps_a + steps_b);
            if remaining == 0 {
                report.error = Some(SearchError::CeilingExhausted { task: n });
                break None;
            }
            let side = match (&a, &b, next) {
                (Some(_), Some(_), s) => s,
                (Some(_), None, _) => Side::A,
                _ => Side::B,
            };
            next = if side == Side::A { Side::B } else { Side::A };
            let slot = if side == Side::A { &mut a } else { &mut b };
            let search = slot.as_mut().expect("chosen side is live");
            let (used, turn) = search.turn(config.quantum.min(remaining), &ctx, obs);
            if side == Side::A {
                steps_a += used;
            } else {
                steps_b += used;
            }
            match turn {
                Turn::Spent => {}
                Turn::Exhausted => *slot = None,
                Turn::Found(program, prob) => break Some((side, program, prob)),
            }
        };
        report.executed += a.as_ref().map_or(0, |s| s.executed) + b.as_ref().map_or(0, |s| s.executed);
        report.total_steps += steps_a + steps_b;
        let Some((side, program, prob)) = found else {
            report.unsolved_steps = (steps_a, steps_b);
            break;
        };
        let addr = store.freeze(&program);
        report.solutions.push(Solution { task: n, program: program.clone(), prob, side, addr, steps_a, steps_b });
        last = Some(program);
    }
    report.store = store;
    report
}

/// Shorthand with an empty store and no instrumentation.
pub fn solve(tasks: &[Task], config: &SearchConfig) -> SolveReport {
    solve_sequence(tasks, config, FrozenStore::new(), &mut NoObserver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::prob;
    use crate::task::{make_1k2k, planted_task};
    use alloc::vec;

    fn four() -> Alphabet {
        Alphabet::new(&[Op::C1, Op::OutV, Op::Halt, Op::Dup]).unwrap()
    }

    #[test]
    fn trigger_examples() {
        let p = prob(1, 8);
        assert!(!backtrack_trigger(10, &p, 100, 1));
        assert!(backtrack_trigger(13, &p, 100, 1));
        assert!(backtrack_trigger(10, &p, 100, 2));
    }

    #[test]
    fn release_and_allowance_agree_with_trigger() {
        for (num, den) in [(1u64, 1u64), (1, 3), (2, 7), (1, 64)] {
            let p = prob(num, den);
            for n in 1..4 {
                for time in 0..40 {
                    let r = release(time, &p, n);
                    // affordable at r, not at r-1
                    assert!(!backtrack_trigger(time, &p, r, n));
                    if r > 0 {
                        assert!(backtrack_trigger(time, &p, r - 1, n));
                    }
                    for clock in 0..60 {
                        let d = allowance(time, clock, &p, n, None).min(500);
                        for j in 1..=d {
                            assert!(!backtrack_trigger(time + j - 1, &p, clock + j, n));
                        }
                        if d < 500 {
                            assert!(backtrack_trigger(time + d, &p, clock + d + 1, n));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn empty_task_list() {
        let c = SearchConfig::new(four(), WeightTable::uniform(4));
        let r = solve(&[], &c);
        assert!(r.solved());
        assert_eq!(r.total_steps, 0);
        assert!(r.solutions.is_empty());
    }

    #[test]
    fn output_one_found_with_probability_one_64th() {
        let a = four();
        let w = WeightTable::uniform(4);
        let planted = planted_task("one", &[Op::C1, Op::OutV, Op::Halt], &a, &w, &FrozenStore::new(), 10).unwrap();
        let c = SearchConfig::new(a, w);
        let r = solve(&[planted.task], &c);
        assert!(r.solved(), "{:?}", r.error);
        assert_eq!(r.solutions[0].program, vec![Op::C1, Op::OutV, Op::Halt]);
        assert_eq!(r.solutions[0].prob, prob(1, 64));
        assert!(r.solutions[0].steps_a <= 64 * 3);
        assert_eq!(r.solutions[0].steps_b, 0);
    }

    #[test]
    fn first_child_is_token_zero() {
        struct First(Option<Vec<Op>>);
        impl Observer for First {
            fn entered(&mut self, _: Side, p: &Prefix, _: u64, _: u64) {
                self.0.get_or_insert_with(|| p.tokens().to_vec());
            }
        }
        let a = four();
        let w = WeightTable::uniform(4);
        let t = planted_task("", &[Op::C1, Op::OutV, Op::Halt], &a, &w, &FrozenStore::new(), 10).unwrap().task;
        let mut obs = First(None);
        solve_sequence(&[t], &SearchConfig::new(a, w), FrozenStore::new(), &mut obs);
        assert_eq!(obs.0, Some(vec![Op::C1]));
    }

    #[test]
    fn ceiling_stops_the_search() {
        let mut c = SearchConfig::new(Alphabet::full(), WeightTable::uniform(28));
        c.ceiling = 10;
        let r = solve(&[crate::task::make_hanoi(3)], &c);
        assert_eq!(r.error, Some(SearchError::CeilingExhausted { task: 0 }));
        assert_eq!(r.total_steps, 10);
    }

    #[test]
    fn finite_space_runs_dry() {
        // out2 is never viable and halt always fails.
        let a = Alphabet::new(&[Op::Out2, Op::Halt]).unwrap();
        let mut c = SearchConfig::new(a, WeightTable::uniform(2));
        c.ceiling = 1 << 20;
        let t = Task {
            id: "x".into(),
            stack: vec![],
            inputs: vec![],
            counter: 1,
            out_cap: 1,
            goal: crate::task::Goal::Exact(vec![1]),
        };
        let r = solve(&[t], &c);
        assert_eq!(r.error, Some(SearchError::SpaceExhausted { task: 0 }));
    }

    #[test]
    fn one_two_sequence_small() {
        let ops = [Op::Out1, Op::Out2, Op::Rec, Op::Ret, Op::Halt, Op::Dup];
        let a = Alphabet::new(&ops).unwrap();
        let c = SearchConfig { ceiling: 1 << 26, quantum: 64, ..SearchConfig::new(a, WeightTable::uniform(6)) };
        let tasks: Vec<Task> = (1..=5).map(make_1k2k).collect();
        let r = solve(&tasks, &c);
        assert!(r.solved(), "{:?}", r.error);
        let last = &r.solutions.last().unwrap().program;
        for k in 1..=12 {
            let t = make_1k2k(k);
            let mut s = t.initial_state(&c.weights);
            assert_eq!(s.run(last, &r.store, 1 << 20), ExecOutcome::Halted, "k={k}");
            assert!(t.accepts(&s.out), "k={k}");
        }
        let spent: u64 = r.solutions.iter().map(|s| s.steps_a + s.steps_b).sum();
        assert_eq!(spent, r.total_steps);
    }
}
