//! The token language: opcodes, mnemonics and the alphabet a search draws from.

use alloc::vec::Vec;
use core::fmt;

/// One primitive of the machine. Every opcode costs exactly one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Op {
    C0,
    C1,
    C2,
    Inc,
    Dec,
    Add,
    Sub,
    Mul,
    Eq,
    Gt,
    Dup,
    Swap,
    Swap2,
    Drop,
    Ld,
    St,
    BzBack,
    Def,
    Rec,
    Ret,
    Out1,
    Out2,
    OutV,
    OutMv,
    In,
    GetF,
    Boost,
    Halt,
}

impl Op {
    pub const ALL: [Op; 28] = [
        Op::C0,
        Op::C1,
        Op::C2,
        Op::Inc,
        Op::Dec,
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Eq,
        Op::Gt,
        Op::Dup,
        Op::Swap,
        Op::Swap2,
        Op::Drop,
        Op::Ld,
        Op::St,
        Op::BzBack,
        Op::Def,
        Op::Rec,
        Op::Ret,
        Op::Out1,
        Op::Out2,
        Op::OutV,
        Op::OutMv,
        Op::In,
        Op::GetF,
        Op::Boost,
        Op::Halt,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::C0 => "c0",
            Op::C1 => "c1",
            Op::C2 => "c2",
            Op::Inc => "inc",
            Op::Dec => "dec",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Eq => "eq",
            Op::Gt => "gt",
            Op::Dup => "dup",
            Op::Swap => "swap",
            Op::Swap2 => "swap2",
            Op::Drop => "drop",
            Op::Ld => "ld",
            Op::St => "st",
            Op::BzBack => "bz_back",
            Op::Def => "def",
            Op::Rec => "rec",
            Op::Ret => "ret",
            Op::Out1 => "out1",
            Op::Out2 => "out2",
            Op::OutV => "outv",
            Op::OutMv => "outmv",
            Op::In => "in",
            Op::GetF => "getf",
            Op::Boost => "boost",
            Op::Halt => "halt",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|op| op.mnemonic() == s)
    }

    /// Number of data-stack operands the instruction reads.
    pub fn arity(self) -> u8 {
        match self {
            Op::C0 | Op::C1 | Op::C2 => 0,
            Op::Inc | Op::Dec | Op::Dup | Op::Drop | Op::Ld => 1,
            Op::Add | Op::Sub | Op::Mul | Op::Eq | Op::Gt | Op::Swap | Op::St => 2,
            Op::Swap2 | Op::OutMv => 3,
            Op::BzBack | Op::Boost => 2,
            Op::Def | Op::GetF | Op::OutV => 1,
            Op::Rec | Op::Ret | Op::Out1 | Op::Out2 | Op::In | Op::Halt => 0,
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Op::C0 => "push 0",
            Op::C1 => "push 1",
            Op::C2 => "push 2",
            Op::Inc => "top += 1",
            Op::Dec => "top -= 1",
            Op::Add => "a b -> a+b",
            Op::Sub => "a b -> a-b",
            Op::Mul => "a b -> a*b",
            Op::Eq => "a b -> a==b",
            Op::Gt => "a b -> a>b",
            Op::Dup => "a -> a a",
            Op::Swap => "a b -> b a",
            Op::Swap2 => "a b c -> b a c",
            Op::Drop => "a ->",
            Op::Ld => "addr -> tape[addr]",
            Op::St => "v addr -> ; tape[addr] = v",
            Op::BzBack => "flag off -> ; if flag != 0 jump back off tokens",
            Op::Def => "n -> ; open a function body entered with counter n",
            Op::Rec => "call the current function with counter-1 if counter > 1",
            Op::Ret => "leave the current function",
            Op::Out1 => "emit 1",
            Op::Out2 => "emit 2",
            Op::OutV => "emit top (kept)",
            Op::OutMv => "emit third then top (kept)",
            Op::In => "push next task input",
            Op::GetF => "j -> ; run frozen program j as a subroutine",
            Op::Boost => "tok mult -> ; multiply the weight of tok",
            Op::Halt => "stop",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Index of a token inside an [`Alphabet`]; dense from zero.
pub type TokenId = u8;

/// The ordered set of opcodes a search may append. Token ids are positions in
/// this list, so a reduced alphabet renumbers its tokens from zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    ops: Vec<Op>,
    index: [Option<TokenId>; Op::ALL.len()],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlphabetError {
    Empty,
    Duplicate(Op),
}

impl fmt::Display for AlphabetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphabetError::Empty => f.write_str("alphabet is empty"),
            AlphabetError::Duplicate(op) => write!(f, "duplicate token {op} in alphabet"),
        }
    }
}

impl Alphabet {
    pub fn new(ops: &[Op]) -> Result<Alphabet, AlphabetError> {
        if ops.is_empty() {
            return Err(AlphabetError::Empty);
        }
        let mut index = [None; Op::ALL.len()];
        for (i, &op) in ops.iter().enumerate() {
            if index[op as usize].is_some() {
                return Err(AlphabetError::Duplicate(op));
            }
            index[op as usize] = Some(i as TokenId);
        }
        Ok(Alphabet { ops: ops.to_vec(), index })
    }

    /// Every opcode, ids equal to `Op as u8`.
    pub fn full() -> Alphabet {
        Alphabet::new(&Op::ALL).expect("full opcode list is duplicate free")
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn op(&self, id: TokenId) -> Op {
        self.ops[id as usize]
    }

    pub fn id(&self, op: Op) -> Option<TokenId> {
        self.index[op as usize]
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Bits needed to address one token: `ceil(log2 len)`, at least one.
    pub fn bits_per_token(&self) -> u32 {
        let n = self.ops.len() as u32;
        let bits = u32::BITS - (n - 1).leading_zeros();
        bits.max(1)
    }
}
