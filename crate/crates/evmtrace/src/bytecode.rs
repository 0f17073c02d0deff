//! Bytecode decoding: opcode table, instruction stream, and jump-destination
//! analysis that respects PUSH immediates.

use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    Stop,
    Add,
    Mul,
    Sub,
    Div,
    Sdiv,
    Mod,
    Smod,
    Addmod,
    Mulmod,
    Exp,
    Signextend,
    Lt,
    Gt,
    Slt,
    Sgt,
    Eq,
    Iszero,
    And,
    Or,
    Xor,
    Not,
    Byte,
    Sha3,
    Address,
    Balance,
    Origin,
    Caller,
    Callvalue,
    Calldataload,
    Calldatasize,
    Calldatacopy,
    Codesize,
    Codecopy,
    Gasprice,
    Extcodesize,
    Extcodecopy,
    Blockhash,
    Coinbase,
    Timestamp,
    Number,
    Difficulty,
    Gaslimit,
    Pop,
    Mload,
    Mstore,
    Mstore8,
    Sload,
    Sstore,
    Jump,
    Jumpi,
    Pc,
    Msize,
    Gas,
    Jumpdest,
    /// PUSH1..PUSH32; the field is the immediate width 1..=32.
    Push(u8),
    /// DUP1..DUP16.
    Dup(u8),
    /// SWAP1..SWAP16.
    Swap(u8),
    /// LOG0..LOG4.
    Log(u8),
    Create,
    Call,
    Callcode,
    Return,
    Delegatecall,
    Staticcall,
    Revert,
    Invalid,
    Suicide,
    /// A byte outside the instruction set; still decodable, halts if executed.
    Unknown(u8),
}

impl Opcode {
    pub fn from_byte(b: u8) -> Opcode {
        use Opcode::*;
        match b {
            0x00 => Stop,
            0x01 => Add,
            0x02 => Mul,
            0x03 => Sub,
            0x04 => Div,
            0x05 => Sdiv,
            0x06 => Mod,
            0x07 => Smod,
            0x08 => Addmod,
            0x09 => Mulmod,
            0x0a => Exp,
            0x0b => Signextend,
            0x10 => Lt,
            0x11 => Gt,
            0x12 => Slt,
            0x13 => Sgt,
            0x14 => Eq,
            0x15 => Iszero,
            0x16 => And,
            0x17 => Or,
            0x18 => Xor,
            0x19 => Not,
            0x1a => Byte,
            0x20 => Sha3,
            0x30 => Address,
            0x31 => Balance,
            0x32 => Origin,
            0x33 => Caller,
            0x34 => Callvalue,
            0x35 => Calldataload,
            0x36 => Calldatasize,
            0x37 => Calldatacopy,
            0x38 => Codesize,
            0x39 => Codecopy,
            0x3a => Gasprice,
            0x3b => Extcodesize,
            0x3c => Extcodecopy,
            0x40 => Blockhash,
            0x41 => Coinbase,
            0x42 => Timestamp,
            0x43 => Number,
            0x44 => Difficulty,
            0x45 => Gaslimit,
            0x50 => Pop,
            0x51 => Mload,
            0x52 => Mstore,
            0x53 => Mstore8,
            0x54 => Sload,
            0x55 => Sstore,
            0x56 => Jump,
            0x57 => Jumpi,
            0x58 => Pc,
            0x59 => Msize,
            0x5a => Gas,
            0x5b => Jumpdest,
            0x60..=0x7f => Push(b - 0x5f),
            0x80..=0x8f => Dup(b - 0x7f),
            0x90..=0x9f => Swap(b - 0x8f),
            0xa0..=0xa4 => Log(b - 0xa0),
            0xf0 => Create,
            0xf1 => Call,
            0xf2 => Callcode,
            0xf3 => Return,
            0xf4 => Delegatecall,
            0xfa => Staticcall,
            0xfd => Revert,
            0xfe => Invalid,
            0xff => Suicide,
            other => Unknown(other),
        }
    }

    pub fn byte(self) -> u8 {
        use Opcode::*;
        match self {
            Stop => 0x00,
            Add => 0x01,
            Mul => 0x02,
            Sub => 0x03,
            Div => 0x04,
            Sdiv => 0x05,
            Mod => 0x06,
            Smod => 0x07,
            Addmod => 0x08,
            Mulmod => 0x09,
            Exp => 0x0a,
            Signextend => 0x0b,
            Lt => 0x10,
            Gt => 0x11,
            Slt => 0x12,
            Sgt => 0x13,
            Eq => 0x14,
            Iszero => 0x15,
            And => 0x16,
            Or => 0x17,
            Xor => 0x18,
            Not => 0x19,
            Byte => 0x1a,
            Sha3 => 0x20,
            Address => 0x30,
            Balance => 0x31,
            Origin => 0x32,
            Caller => 0x33,
            Callvalue => 0x34,
            Calldataload => 0x35,
            Calldatasize => 0x36,
            Calldatacopy => 0x37,
            Codesize => 0x38,
            Codecopy => 0x39,
            Gasprice => 0x3a,
            Extcodesize => 0x3b,
            Extcodecopy => 0x3c,
            Blockhash => 0x40,
            Coinbase => 0x41,
            Timestamp => 0x42,
            Number => 0x43,
            Difficulty => 0x44,
            Gaslimit => 0x45,
            Pop => 0x50,
            Mload => 0x51,
            Mstore => 0x52,
            Mstore8 => 0x53,
            Sload => 0x54,
            Sstore => 0x55,
            Jump => 0x56,
            Jumpi => 0x57,
            Pc => 0x58,
            Msize => 0x59,
            Gas => 0x5a,
            Jumpdest => 0x5b,
            Push(n) => 0x5f + n,
            Dup(n) => 0x7f + n,
            Swap(n) => 0x8f + n,
            Log(n) => 0xa0 + n,
            Create => 0xf0,
            Call => 0xf1,
            Callcode => 0xf2,
            Return => 0xf3,
            Delegatecall => 0xf4,
            Staticcall => 0xfa,
            Revert => 0xfd,
            Invalid => 0xfe,
            Suicide => 0xff,
            Unknown(b) => b,
        }
    }

    /// Immediate width for PUSH opcodes.
    pub fn push_bytes(self) -> Option<usize> {
        match self {
            Opcode::Push(n) => Some(n as usize),
            _ => None,
        }
    }

    /// Whether both engines can execute this opcode. Unimplemented opcodes
    /// halt the concrete interpreter exceptionally and prune symbolic paths.
    pub fn is_implemented(self) -> bool {
        use Opcode::*;
        !matches!(
            self,
            Create
                | Staticcall
                | Extcodesize
                | Extcodecopy
                | Gasprice
                | Log(_)
                | Difficulty
                | Gaslimit
                | Unknown(_)
        )
    }

    pub fn name(self) -> String {
        use Opcode::*;
        match self {
            Push(n) => format!("PUSH{n}"),
            Dup(n) => format!("DUP{n}"),
            Swap(n) => format!("SWAP{n}"),
            Log(n) => format!("LOG{n}"),
            Unknown(b) => format!("UNKNOWN(0x{b:02x})"),
            other => format!("{other:?}").to_uppercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    pub offset: usize,
    pub opcode: Opcode,
    /// Immediate bytes as present in the code; may be shorter than the PUSH
    /// width when the code is truncated (execution zero-pads).
    pub immediate: Option<Vec<u8>>,
}

impl Instr {
    /// Immediate value with end-of-code truncation zero-padded on the right,
    /// as execution sees it.
    pub fn padded_immediate(&self) -> Option<Vec<u8>> {
        let imm = self.immediate.as_ref()?;
        let want = self.opcode.push_bytes()?;
        let mut padded = imm.clone();
        padded.resize(want, 0);
        Some(padded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub raw: Vec<u8>,
    pub instrs: Vec<Instr>,
    pub jumpdests: BTreeSet<usize>,
}

pub fn decode(raw: &[u8]) -> Program {
    let mut instrs = Vec::new();
    let mut jumpdests = BTreeSet::new();
    let mut i = 0;
    while i < raw.len() {
        let opcode = Opcode::from_byte(raw[i]);
        let immediate = opcode.push_bytes().map(|n| {
            let end = (i + 1 + n).min(raw.len());
            raw[i + 1..end].to_vec()
        });
        if opcode == Opcode::Jumpdest {
            jumpdests.insert(i);
        }
        let width = 1 + immediate.as_ref().map_or(0, |imm| imm.len());
        instrs.push(Instr {
            offset: i,
            opcode,
            immediate,
        });
        i += width;
    }
    Program {
        raw: raw.to_vec(),
        instrs,
        jumpdests,
    }
}

impl Program {
    pub fn from_hex(s: &str) -> Result<Program, hex::FromHexError> {
        let s = s.trim();
        let s = s.strip_prefix("0x").unwrap_or(s);
        Ok(decode(&hex::decode(s)?))
    }

    /// Instruction starting exactly at `pc`, if any.
    pub fn instr_at(&self, pc: usize) -> Option<&Instr> {
        self.instrs
            .binary_search_by_key(&pc, |ins| ins.offset)
            .ok()
            .map(|i| &self.instrs[i])
    }

    pub fn is_jumpdest(&self, pc: usize) -> bool {
        self.jumpdests.contains(&pc)
    }

    /// Reassembles the instruction stream; always reproduces `raw`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.raw.len());
        for ins in &self.instrs {
            out.push(ins.opcode.byte());
            if let Some(imm) = &ins.immediate {
                out.extend_from_slice(imm);
            }
        }
        out
    }

    pub fn opcodes(&self) -> impl Iterator<Item = Opcode> + '_ {
        self.instrs.iter().map(|i| i.opcode)
    }
}

/// True iff the code contains any instruction that can move Ether out:
/// CALL, CALLCODE, DELEGATECALL, or SUICIDE (not counting PUSH immediates).
pub fn contains_release_opcode(p: &Program) -> bool {
    p.opcodes().any(|op| {
        matches!(
            op,
            Opcode::Call | Opcode::Callcode | Opcode::Delegatecall | Opcode::Suicide
        )
    })
}
