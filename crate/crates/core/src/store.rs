use alloc::vec::Vec;

use crate::isa::Op;

/// Append-only memory of solved-task programs. Entries are never handed out
/// mutably; the only way to change the store is [`FrozenStore::freeze`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrozenStore {
    programs: Vec<Vec<Op>>,
}

impl FrozenStore {
    pub fn new() -> FrozenStore {
        FrozenStore::default()
    }

    /// Appends `program` and returns its address.
    pub fn freeze(&mut self, program: &[Op]) -> usize {
        self.programs.push(program.to_vec());
        self.programs.len() - 1
    }

    pub fn get(&self, addr: usize) -> Option<&[Op]> {
        self.programs.get(addr).map(|p| p.as_slice())
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn last(&self) -> Option<&[Op]> {
        self.programs.last().map(|p| p.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Op]> {
        self.programs.iter().map(|p| p.as_slice())
    }
}

impl FromIterator<Vec<Op>> for FrozenStore {
    fn from_iter<I: IntoIterator<Item = Vec<Op>>>(iter: I) -> Self {
        FrozenStore { programs: iter.into_iter().collect() }
    }
}
