//! Symbolic 256-bit expressions. Leaves are concrete words or named input
//! variables; interior nodes mirror EVM arithmetic. Construction folds
//! concrete subtrees eagerly, so an expression is symbolic only if a Var
//! is genuinely reachable from it.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use primitive_types::U256;

use crate::word::{self, Word};

/// Where a symbolic variable comes from; determines its stable name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    /// Shared across all invocations: the transaction sender under the
    /// analyzer's control.
    Caller,
    CallValue { inv: u32 },
    /// 32-byte calldata word starting at byte offset `index`.
    CallDataWord { inv: u32, index: u64 },
    CallDataSize { inv: u32 },
    Number { inv: u32 },
    Timestamp { inv: u32 },
    BlockHash { seq: u32 },
    ExternalCallReturn { seq: u32 },
}

impl Origin {
    pub fn name(&self) -> String {
        match self {
            Origin::Caller => "caller".into(),
            Origin::CallValue { inv } => format!("callvalue_{inv}"),
            Origin::CallDataWord { inv, index } => format!("cd_{inv}_{index}"),
            Origin::CallDataSize { inv } => format!("cdsize_{inv}"),
            Origin::Number { inv } => format!("number_{inv}"),
            Origin::Timestamp { inv } => format!("timestamp_{inv}"),
            Origin::BlockHash { seq } => format!("blockhash_{seq}"),
            Origin::ExternalCallReturn { seq } => format!("extret_{seq}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op1 {
    IsZero,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op2 {
    Add,
    Mul,
    Sub,
    Div,
    Sdiv,
    Mod,
    Smod,
    Exp,
    Signextend,
    Lt,
    Gt,
    Slt,
    Sgt,
    Eq,
    And,
    Or,
    Xor,
    Byte,
    Shl,
    Shr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op3 {
    Addmod,
    Mulmod,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Concrete(Word),
    Var(Origin),
    Op1(Op1, Rc<Expr>),
    Op2(Op2, Rc<Expr>, Rc<Expr>),
    Op3(Op3, Rc<Expr>, Rc<Expr>, Rc<Expr>),
    /// Keccak over symbolic words; modeled as an uninterpreted function of
    /// its arity.
    Hash(Vec<Rc<Expr>>),
}

pub type SymValue = Rc<Expr>;

pub fn concrete(w: impl Into<Word>) -> SymValue {
    Rc::new(Expr::Concrete(w.into()))
}

pub fn var(origin: Origin) -> SymValue {
    Rc::new(Expr::Var(origin))
}

pub fn apply1(op: Op1, a: SymValue) -> SymValue {
    if let Expr::Concrete(x) = a.as_ref() {
        return concrete(eval_op1(op, *x));
    }
    // not(not(x)) = x; iszero(iszero(iszero(x))) = iszero(x)
    if let Expr::Op1(inner, x) = a.as_ref() {
        if op == Op1::Not && *inner == Op1::Not {
            return x.clone();
        }
        if op == Op1::IsZero && *inner == Op1::IsZero {
            if let Expr::Op1(Op1::IsZero, y) = x.as_ref() {
                return apply1(Op1::IsZero, y.clone());
            }
            // iszero(iszero(cmp)) = cmp for 0/1-valued comparisons
            if is_boolean_valued(x) {
                return x.clone();
            }
        }
    }
    Rc::new(Expr::Op1(op, a))
}

fn is_boolean_valued(e: &SymValue) -> bool {
    matches!(
        e.as_ref(),
        Expr::Op1(Op1::IsZero, _)
            | Expr::Op2(Op2::Lt | Op2::Gt | Op2::Slt | Op2::Sgt | Op2::Eq, _, _)
    )
}

pub fn apply2(op: Op2, a: SymValue, b: SymValue) -> SymValue {
    if let (Expr::Concrete(x), Expr::Concrete(y)) = (a.as_ref(), b.as_ref()) {
        return concrete(eval_op2(op, *x, *y));
    }
    // A few cheap identities keep trees small without a rewrite engine.
    match (op, a.as_ref(), b.as_ref()) {
        (Op2::Add, Expr::Concrete(z), _) if z.is_zero() => return b,
        (Op2::Add, _, Expr::Concrete(z)) if z.is_zero() => return a,
        (Op2::Sub, _, Expr::Concrete(z)) if z.is_zero() => return a,
        (Op2::Mul, Expr::Concrete(z), _) | (Op2::And, Expr::Concrete(z), _) if z.is_zero() => {
            return concrete(0u64)
        }
        (Op2::Mul, _, Expr::Concrete(z)) | (Op2::And, _, Expr::Concrete(z)) if z.is_zero() => {
            return concrete(0u64)
        }
        (Op2::Mul, Expr::Concrete(o), _) if *o == U256::one() => return b,
        (Op2::Mul, _, Expr::Concrete(o)) if *o == U256::one() => return a,
        (Op2::Or, Expr::Concrete(z), _) if z.is_zero() => return b,
        (Op2::Or, _, Expr::Concrete(z)) if z.is_zero() => return a,
        (Op2::And, Expr::Concrete(m), _) if *m == U256::MAX => return b,
        (Op2::And, _, Expr::Concrete(m)) if *m == U256::MAX => return a,
        _ => {}
    }
    Rc::new(Expr::Op2(op, a, b))
}

pub fn apply3(op: Op3, a: SymValue, b: SymValue, c: SymValue) -> SymValue {
    if let (Expr::Concrete(x), Expr::Concrete(y), Expr::Concrete(z)) =
        (a.as_ref(), b.as_ref(), c.as_ref())
    {
        return concrete(eval_op3(op, *x, *y, *z));
    }
    Rc::new(Expr::Op3(op, a, b, c))
}

pub fn hash(args: Vec<SymValue>) -> SymValue {
    Rc::new(Expr::Hash(args))
}

pub fn eval_op1(op: Op1, a: Word) -> Word {
    match op {
        Op1::IsZero => word::iszero(a),
        Op1::Not => !a,
    }
}

pub fn eval_op2(op: Op2, a: Word, b: Word) -> Word {
    match op {
        Op2::Add => word::add(a, b),
        Op2::Mul => word::mul(a, b),
        Op2::Sub => word::sub(a, b),
        Op2::Div => word::div(a, b),
        Op2::Sdiv => word::sdiv(a, b),
        Op2::Mod => word::rem(a, b),
        Op2::Smod => word::smod(a, b),
        Op2::Exp => word::exp(a, b),
        Op2::Signextend => word::signextend(a, b),
        Op2::Lt => word::lt(a, b),
        Op2::Gt => word::gt(a, b),
        Op2::Slt => word::slt(a, b),
        Op2::Sgt => word::sgt(a, b),
        Op2::Eq => word::eq(a, b),
        Op2::And => a & b,
        Op2::Or => a | b,
        Op2::Xor => a ^ b,
        Op2::Byte => word::byte(a, b),
        Op2::Shl => word::shl(a, b),
        Op2::Shr => word::shr(a, b),
    }
}

pub fn eval_op3(op: Op3, a: Word, b: Word, c: Word) -> Word {
    match op {
        Op3::Addmod => word::addmod(a, b, c),
        Op3::Mulmod => word::mulmod(a, b, c),
    }
}

impl Expr {
    pub fn as_concrete(&self) -> Option<Word> {
        match self {
            Expr::Concrete(w) => Some(*w),
            _ => None,
        }
    }

    pub fn is_concrete(&self) -> bool {
        matches!(self, Expr::Concrete(_))
    }

    /// Collects the names of every variable reachable from this expression.
    pub fn collect_vars(&self, out: &mut BTreeSet<Origin>) {
        match self {
            Expr::Concrete(_) => {}
            Expr::Var(o) => {
                out.insert(*o);
            }
            Expr::Op1(_, a) => a.collect_vars(out),
            Expr::Op2(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Op3(_, a, b, c) => {
                a.collect_vars(out);
                b.collect_vars(out);
                c.collect_vars(out);
            }
            Expr::Hash(args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn collect_hash_apps(&self, out: &mut Vec<Rc<Expr>>) {
        match self {
            Expr::Hash(args) => {
                for a in args {
                    a.collect_hash_apps(out);
                }
                // Outer apps after inner so evaluation order is innermost-first.
                if !out.iter().any(|e| e.as_ref() == self) {
                    out.push(Rc::new(self.clone()));
                }
            }
            Expr::Op1(_, a) => a.collect_hash_apps(out),
            Expr::Op2(_, a, b) => {
                a.collect_hash_apps(out);
                b.collect_hash_apps(out);
            }
            Expr::Op3(_, a, b, c) => {
                a.collect_hash_apps(out);
                b.collect_hash_apps(out);
                c.collect_hash_apps(out);
            }
            _ => {}
        }
    }
}

/// Assignment used to evaluate symbolic expressions concretely: values for
/// variables and for uninterpreted hash applications (keyed by arity and
/// concrete argument values).
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub vars: HashMap<Origin, Word>,
    pub hashes: HashMap<(usize, Vec<Word>), Word>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no value for variable {0}")]
    UnboundVar(String),
    #[error("no value for hash application of arity {0}")]
    UnboundHash(usize),
}

pub fn eval(e: &Expr, env: &Env) -> Result<Word, EvalError> {
    match e {
        Expr::Concrete(w) => Ok(*w),
        Expr::Var(o) => env
            .vars
            .get(o)
            .copied()
            .ok_or_else(|| EvalError::UnboundVar(o.name())),
        Expr::Op1(op, a) => Ok(eval_op1(*op, eval(a, env)?)),
        Expr::Op2(op, a, b) => Ok(eval_op2(*op, eval(a, env)?, eval(b, env)?)),
        Expr::Op3(op, a, b, c) => Ok(eval_op3(*op, eval(a, env)?, eval(b, env)?, eval(c, env)?)),
        Expr::Hash(args) => {
            let vals: Vec<Word> = args
                .iter()
                .map(|a| eval(a, env))
                .collect::<Result<_, _>>()?;
            env.hashes
                .get(&(args.len(), vals))
                .copied()
                .ok_or(EvalError::UnboundHash(args.len()))
        }
    }
}

/// Truthiness of a word, the sense in which path constraints hold.
pub fn truthy(w: Word) -> bool {
    !w.is_zero()
}
