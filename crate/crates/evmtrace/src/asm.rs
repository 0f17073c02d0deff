//! Tiny assembler for hand-building test bytecode: opcodes, auto-sized
//! pushes, and named labels resolved to PUSH2 jump targets.

use std::collections::HashMap;

use primitive_types::U256;

use crate::bytecode::{decode, Opcode, Program};

enum Item {
    Op(Opcode),
    PushValue(U256),
    PushBytes(Vec<u8>),
    PushLabel(String),
    Label(String),
}

#[derive(Default)]
pub struct Asm {
    items: Vec<Item>,
}

impl Asm {
    pub fn new() -> Self {
        Asm::default()
    }

    pub fn op(mut self, opcode: Opcode) -> Self {
        self.items.push(Item::Op(opcode));
        self
    }

    /// PUSH with the smallest width that fits the value.
    pub fn push(mut self, value: impl Into<U256>) -> Self {
        self.items.push(Item::PushValue(value.into()));
        self
    }

    pub fn push_bytes(mut self, bytes: &[u8]) -> Self {
        assert!(!bytes.is_empty() && bytes.len() <= 32);
        self.items.push(Item::PushBytes(bytes.to_vec()));
        self
    }

    /// Marks the next instruction position; emits a JUMPDEST.
    pub fn label(mut self, name: &str) -> Self {
        self.items.push(Item::Label(name.to_string()));
        self
    }

    /// PUSH2 of a label's offset.
    pub fn push_label(mut self, name: &str) -> Self {
        self.items.push(Item::PushLabel(name.to_string()));
        self
    }

    pub fn jump_to(self, name: &str) -> Self {
        self.push_label(name).op(Opcode::Jump)
    }

    pub fn jumpi_to(self, name: &str) -> Self {
        self.push_label(name).op(Opcode::Jumpi)
    }

    pub fn assemble(self) -> Vec<u8> {
        // First pass: lay out offsets. Label pushes are fixed-width PUSH2,
        // so one pass suffices.
        let mut offsets: HashMap<String, usize> = HashMap::new();
        let mut at = 0;
        for item in &self.items {
            match item {
                Item::Op(_) => at += 1,
                Item::PushValue(v) => at += 1 + push_width(*v),
                Item::PushBytes(b) => at += 1 + b.len(),
                Item::PushLabel(_) => at += 3,
                Item::Label(name) => {
                    let prior = offsets.insert(name.clone(), at);
                    assert!(prior.is_none(), "duplicate label {name}");
                    at += 1; // the JUMPDEST itself
                }
            }
        }
        let mut out = Vec::with_capacity(at);
        for item in &self.items {
            match item {
                Item::Op(op) => out.push(op.byte()),
                Item::PushValue(v) => {
                    let width = push_width(*v);
                    out.push(Opcode::Push(width as u8).byte());
                    let bytes = v.to_big_endian();
                    out.extend_from_slice(&bytes[32 - width..]);
                }
                Item::PushBytes(b) => {
                    out.push(Opcode::Push(b.len() as u8).byte());
                    out.extend_from_slice(b);
                }
                Item::PushLabel(name) => {
                    let &target = offsets
                        .get(name)
                        .unwrap_or_else(|| panic!("undefined label {name}"));
                    assert!(target <= 0xffff);
                    out.push(Opcode::Push(2).byte());
                    out.extend_from_slice(&(target as u16).to_be_bytes());
                }
                Item::Label(_) => out.push(Opcode::Jumpdest.byte()),
            }
        }
        out
    }

    pub fn program(self) -> Program {
        decode(&self.assemble())
    }
}

fn push_width(v: U256) -> usize {
    let bytes = v.to_big_endian();
    let leading = bytes.iter().take_while(|&&b| b == 0).count();
    (32 - leading).max(1)
}
