//! Per-path symbolic machine state: symbolic stack, dual concrete/symbolic
//! memory, storage overlay, path constraints, and exploration counters.
//! Also computes the memoization digest used to prune revisited states.

use std::collections::BTreeMap;
use std::rc::Rc;

use primitive_types::{H256, U256};

use crate::chainstate::AccountState;
use crate::sym::expr::{self, Expr, Op1, Op2, Op3, Origin, SymValue};
use crate::word::{self, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymLabel {
    SStore { key: Word, value: SymValue },
    SLoad { key: Word, value: SymValue },
    Call { target: SymValue, value: SymValue },
    DelegateCall { target: SymValue },
    Suicide { beneficiary: SymValue },
    Internal,
}

impl SymLabel {
    pub fn is_internal(&self) -> bool {
        matches!(self, SymLabel::Internal)
    }
}

/// Why a path was abandoned without yielding a successor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PruneReason {
    SymbolicMemoryAddress,
    SymbolicStorageKey,
    SymbolicJumpTarget,
    SymbolicCallTarget,
    UnimplementedOpcode,
    StackUnderflow,
    InvalidJump,
    CfgNodeBudget,
    CallDepthBudget,
    SolverUnknown,
    Memoized,
    MemoryShape,
    Unsupported(String),
}

pub type StepResult<T> = Result<T, PruneReason>;

#[derive(Debug, Clone)]
pub struct SymState {
    pub pc: usize,
    pub stack: Vec<SymValue>,
    /// Byte-addressable concrete memory; authoritative wherever no symbolic
    /// word overlays it.
    pub concrete_mem: Vec<u8>,
    /// Symbolic 32-byte words at concrete byte offsets.
    pub sym_mem: BTreeMap<usize, SymValue>,
    /// Storage overlay; first reads pull concrete snapshot values in here.
    pub storage: BTreeMap<Word, SymValue>,
    pub balance: SymValue,
    /// Conjunction of expressions that must evaluate nonzero on this path.
    pub constraints: Vec<SymValue>,
    pub cfg_nodes: u32,
    pub call_count: u32,
    /// Current invocation, 1-based.
    pub inv: u32,
    pub trace: Vec<SymLabel>,
    /// Fresh-variable counters, carried per path so names stay unique.
    pub ext_seq: u32,
    pub blockhash_seq: u32,
}

impl SymState {
    pub fn new(balance: SymValue) -> Self {
        SymState {
            pc: 0,
            stack: Vec::new(),
            concrete_mem: Vec::new(),
            sym_mem: BTreeMap::new(),
            storage: BTreeMap::new(),
            balance,
            constraints: Vec::new(),
            cfg_nodes: 0,
            call_count: 0,
            inv: 1,
            trace: Vec::new(),
            ext_seq: 0,
            blockhash_seq: 0,
        }
    }

    /// Resets the per-invocation machine for the next transaction while
    /// keeping storage, balance, constraints, and trace.
    pub fn restart_invocation(&mut self) {
        self.pc = 0;
        self.stack.clear();
        self.concrete_mem.clear();
        self.sym_mem.clear();
        self.call_count = 0;
        self.inv += 1;
    }

    pub fn assume(&mut self, cond: SymValue) {
        // A constraint that folded to a concrete truth adds nothing, and
        // re-assumed conditions (e.g. repeated calldata loads) stay single.
        if cond.as_concrete().map(word::is_truthy) == Some(true) {
            return;
        }
        if self.constraints.contains(&cond) {
            return;
        }
        self.constraints.push(cond);
    }

    pub fn storage_read(&mut self, key: Word, snapshot: &AccountState) -> SymValue {
        if let Some(v) = self.storage.get(&key) {
            return v.clone();
        }
        let v = expr::concrete(snapshot.storage_get(key));
        self.storage.insert(key, v.clone());
        v
    }

    pub fn storage_write(&mut self, key: Word, value: SymValue) {
        self.storage.insert(key, value);
    }

    fn sym_overlaps(&self, start: usize, len: usize) -> Vec<usize> {
        self.sym_mem
            .range(start.saturating_sub(31)..start + len)
            .map(|(&o, _)| o)
            .collect()
    }

    fn grow_mem(&mut self, size: usize) -> StepResult<()> {
        const MEM_LIMIT: usize = 1 << 22;
        if size > MEM_LIMIT {
            return Err(PruneReason::Unsupported("memory limit".into()));
        }
        if self.concrete_mem.len() < size {
            self.concrete_mem.resize(size.div_ceil(32) * 32, 0);
        }
        Ok(())
    }

    pub fn mstore(&mut self, offset: usize, value: SymValue) -> StepResult<()> {
        self.grow_mem(offset + 32)?;
        for o in self.sym_overlaps(offset, 32) {
            if o == offset {
                self.sym_mem.remove(&o);
            } else {
                // Partial overlap with a symbolic word: no alias analysis.
                return Err(PruneReason::MemoryShape);
            }
        }
        match value.as_concrete() {
            Some(w) => {
                self.concrete_mem[offset..offset + 32].copy_from_slice(&w.to_big_endian());
            }
            None => {
                self.sym_mem.insert(offset, value);
            }
        }
        Ok(())
    }

    pub fn mstore8(&mut self, offset: usize, value: SymValue) -> StepResult<()> {
        let Some(w) = value.as_concrete() else {
            return Err(PruneReason::MemoryShape);
        };
        if !self.sym_overlaps(offset, 1).is_empty() {
            return Err(PruneReason::MemoryShape);
        }
        self.grow_mem(offset + 1)?;
        self.concrete_mem[offset] = w.byte(0);
        Ok(())
    }

    pub fn mload(&mut self, offset: usize) -> StepResult<SymValue> {
        self.grow_mem(offset + 32)?;
        let overlaps = self.sym_overlaps(offset, 32);
        match overlaps.as_slice() {
            [] => Ok(expr::concrete(U256::from_big_endian(
                &self.concrete_mem[offset..offset + 32],
            ))),
            [o] if *o == offset => Ok(self.sym_mem[o].clone()),
            _ => Err(PruneReason::MemoryShape),
        }
    }

    /// Concrete bytes of a memory region; fails if any symbolic word
    /// overlaps it.
    pub fn read_concrete_bytes(&mut self, offset: usize, len: usize) -> StepResult<Vec<u8>> {
        self.grow_mem(offset + len)?;
        if len > 0 && !self.sym_overlaps(offset, len).is_empty() {
            return Err(PruneReason::MemoryShape);
        }
        Ok(self.concrete_mem[offset..offset + len].to_vec())
    }

    /// Memory region as a sequence of 32-byte words, symbolic or concrete.
    /// Requires word-aligned shape: region boundaries and every symbolic
    /// word must fall on the same 32-byte grid.
    pub fn read_words(&mut self, offset: usize, len: usize) -> StepResult<Vec<SymValue>> {
        if len % 32 != 0 {
            return Err(PruneReason::MemoryShape);
        }
        self.grow_mem(offset + len)?;
        let mut out = Vec::with_capacity(len / 32);
        for k in (0..len).step_by(32) {
            out.push(self.mload(offset + k)?);
        }
        Ok(out)
    }

    /// Stable digest of the machine configuration for pruning: storage
    /// overlay, memory, stack, pc, and invocation index.
    pub fn memo_key(&self) -> H256 {
        let mut buf = Vec::with_capacity(256);
        buf.extend_from_slice(&(self.pc as u64).to_be_bytes());
        buf.extend_from_slice(&self.inv.to_be_bytes());
        buf.push(b'S');
        buf.extend_from_slice(&(self.stack.len() as u32).to_be_bytes());
        for v in &self.stack {
            encode_expr(v, &mut buf);
        }
        buf.push(b'M');
        buf.extend_from_slice(word::keccak(&self.concrete_mem).as_bytes());
        for (o, v) in &self.sym_mem {
            buf.extend_from_slice(&(*o as u64).to_be_bytes());
            encode_expr(v, &mut buf);
        }
        buf.push(b'G');
        for (k, v) in &self.storage {
            buf.extend_from_slice(&k.to_big_endian());
            encode_expr(v, &mut buf);
        }
        word::keccak(&buf)
    }
}

/// Deterministic structural serialization of an expression.
fn encode_expr(e: &Rc<Expr>, out: &mut Vec<u8>) {
    match e.as_ref() {
        Expr::Concrete(w) => {
            out.push(0);
            out.extend_from_slice(&w.to_big_endian());
        }
        Expr::Var(o) => {
            out.push(1);
            out.extend_from_slice(o.name().as_bytes());
            out.push(0);
        }
        Expr::Op1(op, a) => {
            out.push(2);
            out.push(op1_tag(*op));
            encode_expr(a, out);
        }
        Expr::Op2(op, a, b) => {
            out.push(3);
            out.push(op2_tag(*op));
            encode_expr(a, out);
            encode_expr(b, out);
        }
        Expr::Op3(op, a, b, c) => {
            out.push(4);
            out.push(op3_tag(*op));
            encode_expr(a, out);
            encode_expr(b, out);
            encode_expr(c, out);
        }
        Expr::Hash(args) => {
            out.push(5);
            out.push(args.len() as u8);
            for a in args {
                encode_expr(a, out);
            }
        }
    }
}

fn op1_tag(op: Op1) -> u8 {
    match op {
        Op1::IsZero => 0,
        Op1::Not => 1,
    }
}

fn op2_tag(op: Op2) -> u8 {
    use Op2::*;
    match op {
        Add => 0,
        Mul => 1,
        Sub => 2,
        Div => 3,
        Sdiv => 4,
        Mod => 5,
        Smod => 6,
        Exp => 7,
        Signextend => 8,
        Lt => 9,
        Gt => 10,
        Slt => 11,
        Sgt => 12,
        Eq => 13,
        And => 14,
        Or => 15,
        Xor => 16,
        Byte => 17,
        Shl => 18,
        Shr => 19,
    }
}

fn op3_tag(op: Op3) -> u8 {
    match op {
        Op3::Addmod => 0,
        Op3::Mulmod => 1,
    }
}

/// Fresh-variable helpers used by the engine.
pub fn fresh_ext_return(st: &mut SymState) -> SymValue {
    st.ext_seq += 1;
    expr::var(Origin::ExternalCallReturn { seq: st.ext_seq })
}

pub fn fresh_blockhash(st: &mut SymState) -> SymValue {
    st.blockhash_seq += 1;
    expr::var(Origin::BlockHash {
        seq: st.blockhash_seq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::expr::{apply2, concrete, var};

    fn sym_x() -> SymValue {
        var(Origin::CallValue { inv: 1 })
    }

    #[test]
    fn concrete_memory_roundtrip() {
        let mut st = SymState::new(concrete(0u64));
        st.mstore(0, concrete(0xdeadbeefu64)).unwrap();
        assert_eq!(
            st.mload(0).unwrap().as_concrete(),
            Some(U256::from(0xdeadbeefu64))
        );
        // Untouched memory reads zero.
        assert_eq!(st.mload(64).unwrap().as_concrete(), Some(U256::zero()));
    }

    #[test]
    fn symbolic_word_exact_slot() {
        let mut st = SymState::new(concrete(0u64));
        st.mstore(32, sym_x()).unwrap();
        assert_eq!(st.mload(32).unwrap(), sym_x());
        // Overwrite with a concrete value clears the symbolic entry.
        st.mstore(32, concrete(1u64)).unwrap();
        assert_eq!(st.mload(32).unwrap().as_concrete(), Some(U256::one()));
    }

    #[test]
    fn partial_overlap_prunes() {
        let mut st = SymState::new(concrete(0u64));
        st.mstore(32, sym_x()).unwrap();
        assert_eq!(st.mload(40), Err(PruneReason::MemoryShape));
        assert_eq!(st.mstore(40, concrete(1u64)), Err(PruneReason::MemoryShape));
        assert_eq!(
            st.read_concrete_bytes(0, 64),
            Err(PruneReason::MemoryShape)
        );
    }

    #[test]
    fn read_words_mixes_concrete_and_symbolic() {
        let mut st = SymState::new(concrete(0u64));
        st.mstore(0, concrete(7u64)).unwrap();
        st.mstore(32, sym_x()).unwrap();
        let words = st.read_words(0, 64).unwrap();
        assert_eq!(words[0].as_concrete(), Some(U256::from(7)));
        assert_eq!(words[1], sym_x());
    }

    #[test]
    fn storage_first_read_pulls_snapshot() {
        let mut snapshot = AccountState::default();
        snapshot.storage_set(U256::zero(), U256::from(42));
        let mut st = SymState::new(concrete(0u64));
        assert_eq!(
            st.storage_read(U256::zero(), &snapshot).as_concrete(),
            Some(U256::from(42))
        );
        st.storage_write(U256::zero(), sym_x());
        assert_eq!(st.storage_read(U256::zero(), &snapshot), sym_x());
    }

    #[test]
    fn memo_key_distinguishes_states() {
        let mut a = SymState::new(concrete(0u64));
        let mut b = SymState::new(concrete(0u64));
        assert_eq!(a.memo_key(), b.memo_key());
        a.storage_write(U256::zero(), concrete(1u64));
        assert_ne!(a.memo_key(), b.memo_key());
        b.storage_write(U256::zero(), concrete(1u64));
        assert_eq!(a.memo_key(), b.memo_key());
        a.stack.push(apply2(Op2::Add, sym_x(), concrete(1u64)));
        assert_ne!(a.memo_key(), b.memo_key());
    }

    #[test]
    fn trivially_true_constraints_are_dropped() {
        let mut st = SymState::new(concrete(0u64));
        st.assume(concrete(1u64));
        assert!(st.constraints.is_empty());
        st.assume(concrete(0u64)); // contradiction must be kept
        assert_eq!(st.constraints.len(), 1);
        st.assume(sym_x());
        assert_eq!(st.constraints.len(), 2);
    }
}
