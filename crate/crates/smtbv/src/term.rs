//! Term representation for the supported SMT-LIB2 fragment: quantifier-free
//! fixed-width bitvectors, booleans, and uninterpreted functions over
//! bitvectors.

use std::collections::HashMap;
use std::rc::Rc;

use crate::sexp::Sexp;
use crate::val::BvVal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Bool,
    BitVec(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Eq,
    Distinct,
    Not,
    And,
    Or,
    Xor,
    Implies,
    Ite,
    BvAdd,
    BvSub,
    BvMul,
    BvUdiv,
    BvUrem,
    BvAnd,
    BvOr,
    BvXor,
    BvNot,
    BvNeg,
    BvShl,
    BvLshr,
    BvAshr,
    BvUlt,
    BvUle,
    BvUgt,
    BvUge,
    BvSlt,
    BvSle,
    BvSgt,
    BvSge,
    Concat,
    Extract(u32, u32),
    ZeroExtend(u32),
    SignExtend(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    BvLit(BvVal),
    BoolLit(bool),
    /// Declared constant or 0-ary defined function.
    Sym(String),
    App(Op, Vec<Rc<Term>>),
    /// Application of a declared uninterpreted function.
    Uf(String, Vec<Rc<Term>>),
}

fn op_of(name: &str) -> Option<Op> {
    Some(match name {
        "=" => Op::Eq,
        "distinct" => Op::Distinct,
        "not" => Op::Not,
        "and" => Op::And,
        "or" => Op::Or,
        "xor" => Op::Xor,
        "=>" => Op::Implies,
        "ite" => Op::Ite,
        "bvadd" => Op::BvAdd,
        "bvsub" => Op::BvSub,
        "bvmul" => Op::BvMul,
        "bvudiv" => Op::BvUdiv,
        "bvurem" => Op::BvUrem,
        "bvand" => Op::BvAnd,
        "bvor" => Op::BvOr,
        "bvxor" => Op::BvXor,
        "bvnot" => Op::BvNot,
        "bvneg" => Op::BvNeg,
        "bvshl" => Op::BvShl,
        "bvlshr" => Op::BvLshr,
        "bvashr" => Op::BvAshr,
        "bvult" => Op::BvUlt,
        "bvule" => Op::BvUle,
        "bvugt" => Op::BvUgt,
        "bvuge" => Op::BvUge,
        "bvslt" => Op::BvSlt,
        "bvsle" => Op::BvSle,
        "bvsgt" => Op::BvSgt,
        "bvsge" => Op::BvSge,
        "concat" => Op::Concat,
        _ => return None,
    })
}

pub fn parse_sort(s: &Sexp) -> Result<Sort, String> {
    match s {
        Sexp::Atom(a) if a == "Bool" => Ok(Sort::Bool),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(u), Sexp::Atom(bv), Sexp::Atom(w)] if u == "_" && bv == "BitVec" => {
                let width: u32 = w.parse().map_err(|_| format!("bad width {w}"))?;
                if width == 0 || width > 4096 {
                    return Err(format!("unsupported bitvector width {width}"));
                }
                Ok(Sort::BitVec(width))
            }
            _ => Err(format!("unsupported sort {s}")),
        },
        _ => Err(format!("unsupported sort {s}")),
    }
}

/// Symbol tables the term builder consults to classify identifiers.
pub struct SymbolTable {
    pub vars: HashMap<String, Sort>,
    pub defs: HashMap<String, Rc<Term>>,
    pub ufs: HashMap<String, (Vec<Sort>, Sort)>,
}

/// Builds a `Term` from a parsed s-expression, expanding `let` bindings
/// eagerly.
pub fn build_term(sexp: &Sexp, table: &SymbolTable) -> Result<Rc<Term>, String> {
    build_inner(sexp, table, &mut Vec::new())
}

fn lookup_let<'a>(env: &'a [(String, Rc<Term>)], name: &str) -> Option<&'a Rc<Term>> {
    env.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t)
}

fn build_inner(
    sexp: &Sexp,
    table: &SymbolTable,
    env: &mut Vec<(String, Rc<Term>)>,
) -> Result<Rc<Term>, String> {
    match sexp {
        Sexp::Atom(a) => build_atom(a, table, env),
        Sexp::List(items) => {
            if items.is_empty() {
                return Err("empty application".into());
            }
            // (_ bvN w) indexed literal
            if items[0].atom() == Some("_") {
                return indexed_literal(items);
            }
            // (let ((x t) ...) body)
            if items[0].atom() == Some("let") {
                if items.len() != 3 {
                    return Err("malformed let".into());
                }
                let bindings = items[1].list().ok_or("malformed let bindings")?;
                let mut added = 0;
                for b in bindings {
                    let pair = b.list().ok_or("malformed let binding")?;
                    let name = pair[0].atom().ok_or("bad let name")?;
                    let value = build_inner(&pair[1], table, env)?;
                    env.push((name.to_string(), value));
                    added += 1;
                }
                let body = build_inner(&items[2], table, env);
                env.truncate(env.len() - added);
                return body;
            }
            // ((_ extract hi lo) t), ((_ zero_extend k) t), ((_ sign_extend k) t)
            if let Some(head) = items[0].list() {
                if head.first().and_then(|h| h.atom()) == Some("_") {
                    let op = indexed_op(head)?;
                    let args = items[1..]
                        .iter()
                        .map(|a| build_inner(a, table, env))
                        .collect::<Result<Vec<_>, _>>()?;
                    return Ok(Rc::new(Term::App(op, args)));
                }
            }
            let head = items[0]
                .atom()
                .ok_or_else(|| format!("bad application head {}", items[0]))?;
            let args = items[1..]
                .iter()
                .map(|a| build_inner(a, table, env))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(op) = op_of(head) {
                return Ok(Rc::new(Term::App(op, args)));
            }
            if table.ufs.contains_key(head) {
                return Ok(Rc::new(Term::Uf(head.to_string(), args)));
            }
            Err(format!("unknown function {head}"))
        }
    }
}

fn build_atom(
    a: &str,
    table: &SymbolTable,
    env: &[(String, Rc<Term>)],
) -> Result<Rc<Term>, String> {
    if let Some(t) = lookup_let(env, a) {
        return Ok(t.clone());
    }
    match a {
        "true" => return Ok(Rc::new(Term::BoolLit(true))),
        "false" => return Ok(Rc::new(Term::BoolLit(false))),
        _ => {}
    }
    if let Some(hex) = a.strip_prefix("#x") {
        let v = BvVal::from_hex(hex).ok_or_else(|| format!("bad hex literal {a}"))?;
        return Ok(Rc::new(Term::BvLit(v)));
    }
    if let Some(bin) = a.strip_prefix("#b") {
        let v = BvVal::from_bin(bin).ok_or_else(|| format!("bad binary literal {a}"))?;
        return Ok(Rc::new(Term::BvLit(v)));
    }
    if table.vars.contains_key(a) || table.defs.contains_key(a) {
        return Ok(Rc::new(Term::Sym(a.to_string())));
    }
    Err(format!("unknown symbol {a}"))
}

fn indexed_literal(items: &[Sexp]) -> Result<Rc<Term>, String> {
    // (_ bv<decimal> <width>)
    if items.len() == 3 {
        if let (Some(v), Some(w)) = (items[1].atom(), items[2].atom()) {
            if let Some(digits) = v.strip_prefix("bv") {
                let width: u32 = w.parse().map_err(|_| format!("bad width {w}"))?;
                let val = BvVal::from_decimal(width, digits)
                    .ok_or_else(|| format!("bad literal {v}"))?;
                return Ok(Rc::new(Term::BvLit(val)));
            }
        }
    }
    Err(format!("unsupported indexed term ({})", items[1]))
}

fn indexed_op(head: &[Sexp]) -> Result<Op, String> {
    let name = head
        .get(1)
        .and_then(|h| h.atom())
        .ok_or("bad indexed operator")?;
    let num = |i: usize| -> Result<u32, String> {
        head.get(i)
            .and_then(|h| h.atom())
            .and_then(|a| a.parse().ok())
            .ok_or_else(|| "bad index".to_string())
    };
    match name {
        "extract" => Ok(Op::Extract(num(2)?, num(3)?)),
        "zero_extend" => Ok(Op::ZeroExtend(num(2)?)),
        "sign_extend" => Ok(Op::SignExtend(num(2)?)),
        _ => Err(format!("unsupported indexed operator {name}")),
    }
}
