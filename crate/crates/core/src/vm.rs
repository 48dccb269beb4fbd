//! Interruptible interpreter for the token language.
//!
//! A program is executed while it is being written: when the instruction
//! pointer reaches the end of the written prefix the machine stops with
//! [`ExecOutcome::RequestToken`] and resumes from exactly that state once the
//! prefix has grown. Frozen programs live in separate code segments and are
//! entered through `getf`.
//!
//! Control flow is built from call frames. Every frame carries a counter; the
//! run starts inside a root frame whose counter is supplied by the task, `def`
//! opens an inline function body with a counter popped from the stack, and
//! `rec` re-enters the function of the innermost frame with the counter
//! decreased by one, doing nothing once the counter has reached one.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::isa::Op;
use crate::space::{EditError, ProbabilityEdit, WeightTable};
use crate::store::FrozenStore;

pub const TAPE_CELLS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub data_stack: usize,
    pub call_stack: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { data_stack: 64, call_stack: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Segment {
    Main,
    Frozen(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CodePos {
    pub seg: Segment,
    pub off: u32,
}

impl CodePos {
    pub const START: CodePos = CodePos { seg: Segment::Main, off: 0 };
}

/// Where control goes when a frame is left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Return {
    /// Leaving the root frame ends the run.
    Halt,
    /// Inline `def` body: continue after the `ret`.
    FallThrough,
    /// `rec` call: resume at the saved position.
    To(CodePos),
    /// `getf` call: resume in the caller.
    Frozen(CodePos),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    pub entry: CodePos,
    pub counter: i64,
    pub ret: Return,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    StackUnderflow,
    StackOverflow,
    CallOverflow,
    Overflow,
    BadJump,
    BadTape,
    BadFrozen,
    NoFrame,
    NoInput,
    OutputOverflow,
    BadEdit(EditError),
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Fault::StackUnderflow => "data stack underflow",
            Fault::StackOverflow => "data stack overflow",
            Fault::CallOverflow => "call stack overflow",
            Fault::Overflow => "arithmetic overflow",
            Fault::BadJump => "jump outside the prefix",
            Fault::BadTape => "tape address out of range",
            Fault::BadFrozen => "frozen program address out of range",
            Fault::NoFrame => "return without a frame",
            Fault::NoInput => "task input exhausted",
            Fault::OutputOverflow => "output buffer full",
            Fault::BadEdit(EditError::BadToken(t)) => return write!(f, "boost of unknown token {t}"),
            Fault::BadEdit(EditError::BadMultiplier(m)) => return write!(f, "boost multiplier {m} < 1"),
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecOutcome {
    RequestToken,
    Halted,
    Error(Fault),
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Continue,
    Done(ExecOutcome),
}

/// Full mutable state of one run on one task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub data: Vec<i64>,
    pub frames: Vec<Frame>,
    pub ip: CodePos,
    /// Empty until the first store; unset cells read as zero.
    tape: Vec<i64>,
    pub out: Vec<i64>,
    weights: Arc<WeightTable>,
    pub steps: u64,
    inputs: Arc<[i64]>,
    input_pos: usize,
    skip: u32,
    out_cap: usize,
    limits: Limits,
}

/// Deep copy of a [`MachineState`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot(MachineState);

impl Snapshot {
    pub fn restore(&self) -> MachineState {
        self.0.clone()
    }

    pub fn state(&self) -> &MachineState {
        &self.0
    }
}

fn overflow<T>(v: Option<T>) -> Result<T, Fault> {
    v.ok_or(Fault::Overflow)
}

impl MachineState {
    /// Fresh state: empty stacks, zero tape, root frame with counter 1.
    pub fn new(weights: WeightTable, out_cap: usize) -> MachineState {
        MachineState {
            data: Vec::new(),
            frames: alloc::vec![Frame { entry: CodePos::START, counter: 1, ret: Return::Halt }],
            ip: CodePos::START,
            tape: Vec::new(),
            out: Vec::new(),
            weights: Arc::new(weights),
            steps: 0,
            inputs: Arc::from([]),
            input_pos: 0,
            skip: 0,
            out_cap,
            limits: Limits::default(),
        }
    }

    pub fn with_stack(mut self, stack: &[i64]) -> Self {
        self.data = stack.to_vec();
        self
    }

    pub fn with_inputs(mut self, inputs: &[i64]) -> Self {
        self.inputs = Arc::from(inputs);
        self.input_pos = 0;
        self
    }

    pub fn with_counter(mut self, counter: i64) -> Self {
        self.frames[0].counter = counter;
        self
    }

    pub fn with_tape(mut self, cells: &[i64]) -> Self {
        self.tape = cells.iter().copied().chain(core::iter::repeat(0)).take(TAPE_CELLS).collect();
        self
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn shared_weights(&self) -> Arc<WeightTable> {
        Arc::clone(&self.weights)
    }

    pub fn tape(&self, addr: usize) -> i64 {
        self.tape.get(addr).copied().unwrap_or(0)
    }

    pub fn out_cap(&self) -> usize {
        self.out_cap
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.clone())
    }

    /// True when the next fetch would read past the written prefix.
    pub fn wants_token(&self, prefix: &[Op]) -> bool {
        self.ip.seg == Segment::Main && self.ip.off as usize >= prefix.len()
    }

    pub fn apply_edit(&mut self, edit: ProbabilityEdit) -> Result<(), Fault> {
        Arc::make_mut(&mut self.weights).apply(edit).map_err(Fault::BadEdit)
    }

    fn pop(&mut self) -> Result<i64, Fault> {
        self.data.pop().ok_or(Fault::StackUnderflow)
    }

    fn push(&mut self, v: i64) -> Result<(), Fault> {
        if self.data.len() >= self.limits.data_stack {
            return Err(Fault::StackOverflow);
        }
        self.data.push(v);
        Ok(())
    }

    fn need(&self, n: usize) -> Result<usize, Fault> {
        if self.data.len() < n {
            Err(Fault::StackUnderflow)
        } else {
            Ok(self.data.len())
        }
    }

    fn emit(&mut self, v: i64) -> Result<(), Fault> {
        if self.out.len() >= self.out_cap {
            return Err(Fault::OutputOverflow);
        }
        self.out.push(v);
        Ok(())
    }

    fn call(&mut self, frame: Frame) -> Result<(), Fault> {
        if self.frames.len() >= self.limits.call_stack {
            return Err(Fault::CallOverflow);
        }
        self.frames.push(frame);
        Ok(())
    }

    /// Leaves the innermost `getf` call; `None` when not inside one.
    fn finish_frozen(&mut self) -> Option<()> {
        let depth = self.frames.iter().rposition(|f| matches!(f.ret, Return::Frozen(_)))?;
        let Return::Frozen(back) = self.frames[depth].ret else { unreachable!() };
        self.frames.truncate(depth);
        self.ip = back;
        self.skip = 0;
        Some(())
    }

    /// Executes at most one instruction.
    pub fn step(&mut self, prefix: &[Op], store: &FrozenStore) -> Step {
        let code = match self.ip.seg {
            Segment::Main => prefix,
            Segment::Frozen(j) => store.get(j as usize).unwrap_or(&[]),
        };
        let Some(&op) = code.get(self.ip.off as usize) else {
            return match self.ip.seg {
                Segment::Main => Step::Done(ExecOutcome::RequestToken),
                Segment::Frozen(_) => match self.finish_frozen() {
                    Some(()) => Step::Continue,
                    None => Step::Done(ExecOutcome::Error(Fault::NoFrame)),
                },
            };
        };
        self.steps += 1;
        let pc = self.ip;
        self.ip.off += 1;
        if self.skip > 0 {
            match op {
                Op::Def => self.skip += 1,
                Op::Ret => self.skip -= 1,
                _ => {}
            }
            return Step::Continue;
        }
        match self.exec(op, pc, store) {
            Ok(step) => step,
            Err(fault) => Step::Done(ExecOutcome::Error(fault)),
        }
    }

    fn exec(&mut self, op: Op, pc: CodePos, store: &FrozenStore) -> Result<Step, Fault> {
        match op {
            Op::C0 => self.push(0)?,
            Op::C1 => self.push(1)?,
            Op::C2 => self.push(2)?,
            Op::Inc | Op::Dec => {
                let a = self.pop()?;
                let r = if op == Op::Inc { a.checked_add(1) } else { a.checked_sub(1) };
                self.push(overflow(r)?)?;
            }
            Op::Add | Op::Sub | Op::Mul | Op::Eq | Op::Gt => {
                self.need(2)?;
                let b = self.pop()?;
                let a = self.pop()?;
                let r = match op {
                    Op::Add => overflow(a.checked_add(b))?,
                    Op::Sub => overflow(a.checked_sub(b))?,
                    Op::Mul => overflow(a.checked_mul(b))?,
                    Op::Eq => (a == b) as i64,
                    _ => (a > b) as i64,
                };
                self.push(r)?;
            }
            Op::Dup => {
                let n = self.need(1)?;
                self.push(self.data[n - 1])?;
            }
            Op::Swap => {
                let n = self.need(2)?;
                self.data.swap(n - 1, n - 2);
            }
            Op::Swap2 => {
                let n = self.need(3)?;
                self.data.swap(n - 2, n - 3);
            }
            Op::Drop => {
                self.pop()?;
            }
            Op::Ld => {
                let addr = self.pop()?;
                let a = usize::try_from(addr).ok().filter(|&a| a < TAPE_CELLS).ok_or(Fault::BadTape)?;
                self.push(self.tape.get(a).copied().unwrap_or(0))?;
            }
            Op::St => {
                self.need(2)?;
                let addr = self.pop()?;
                let v = self.pop()?;
                let a = usize::try_from(addr).ok().filter(|&a| a < TAPE_CELLS).ok_or(Fault::BadTape)?;
                if self.tape.is_empty() {
                    self.tape = alloc::vec![0; TAPE_CELLS];
                }
                self.tape[a] = v;
            }
            Op::BzBack => {
                self.need(2)?;
                let off = self.pop()?;
                let flag = self.pop()?;
                if flag != 0 {
                    if off < 0 || off > pc.off as i64 {
                        return Err(Fault::BadJump);
                    }
                    self.ip = CodePos { seg: pc.seg, off: pc.off - off as u32 };
                }
            }
            Op::Def => {
                let n = self.pop()?;
                if n >= 1 {
                    self.call(Frame { entry: self.ip, counter: n, ret: Return::FallThrough })?;
                } else {
                    self.skip = 1;
                }
            }
            Op::Rec => {
                let top = *self.frames.last().ok_or(Fault::NoFrame)?;
                if top.counter > 1 {
                    self.call(Frame { entry: top.entry, counter: top.counter - 1, ret: Return::To(self.ip) })?;
                    self.ip = top.entry;
                }
            }
            Op::Ret => {
                let frame = self.frames.pop().ok_or(Fault::NoFrame)?;
                match frame.ret {
                    Return::Halt => return Ok(Step::Done(ExecOutcome::Halted)),
                    Return::FallThrough => {}
                    Return::To(p) | Return::Frozen(p) => self.ip = p,
                }
            }
            Op::Out1 => self.emit(1)?,
            Op::Out2 => self.emit(2)?,
            Op::OutV => {
                let n = self.need(1)?;
                self.emit(self.data[n - 1])?;
            }
            Op::OutMv => {
                let n = self.need(3)?;
                let (from, to) = (self.data[n - 3], self.data[n - 1]);
                self.emit(from)?;
                self.emit(to)?;
            }
            Op::In => {
                let v = *self.inputs.get(self.input_pos).ok_or(Fault::NoInput)?;
                self.input_pos += 1;
                self.push(v)?;
            }
            Op::GetF => {
                let j = self.pop()?;
                let j = u32::try_from(j).ok().filter(|&j| (j as usize) < store.len()).ok_or(Fault::BadFrozen)?;
                let counter = self.frames.last().map_or(1, |f| f.counter);
                let entry = CodePos { seg: Segment::Frozen(j), off: 0 };
                self.call(Frame { entry, counter, ret: Return::Frozen(self.ip) })?;
                self.ip = entry;
            }
            Op::Boost => {
                self.need(2)?;
                let multiplier = self.pop()?;
                let target = self.pop()?;
                self.apply_edit(ProbabilityEdit { target, multiplier })?;
            }
            Op::Halt => {
                if self.finish_frozen().is_none() {
                    return Ok(Step::Done(ExecOutcome::Halted));
                }
            }
        }
        Ok(Step::Continue)
    }

    /// Steps until a terminal outcome or until `budget` more steps were used.
    pub fn run(&mut self, prefix: &[Op], store: &FrozenStore, budget: u64) -> ExecOutcome {
        let start = self.steps;
        loop {
            if self.wants_token(prefix) {
                return ExecOutcome::RequestToken;
            }
            if self.steps - start >= budget {
                return ExecOutcome::BudgetExhausted;
            }
            if let Step::Done(outcome) = self.step(prefix, store) {
                return outcome;
            }
        }
    }
}
