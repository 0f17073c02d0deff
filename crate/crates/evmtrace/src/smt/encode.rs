//! Lowers symbolic expressions to SMT-LIB2 text over 256-bit bitvectors.
//! Every compound node becomes a 0-ary define-fun, emitted in dependency
//! order, so shared subtrees are encoded once and the text stays linear in
//! the DAG size. Keccak applications become uninterpreted functions, one
//! per arity.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::rc::Rc;

use primitive_types::U256;

use crate::sym::expr::{Expr, Op1, Op2, Op3, Origin, SymValue};
use crate::word::Word;

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("cannot encode: {0}")]
    Unsupported(String),
}

pub struct Encoded {
    /// Declarations, defines, and assertions; no check-sat.
    pub script: String,
    /// Declared input variables, in declaration order.
    pub vars: Vec<Origin>,
    /// Distinct hash applications, innermost first, paired with the SMT
    /// term text naming each application.
    pub hash_apps: Vec<(Rc<Expr>, String)>,
}

pub fn encode(constraints: &[SymValue]) -> Result<Encoded, EncodeError> {
    let mut vars = BTreeSet::new();
    let mut arities = BTreeSet::new();
    let mut apps = Vec::new();
    for c in constraints {
        c.collect_vars(&mut vars);
        c.collect_hash_apps(&mut apps);
    }
    for app in &apps {
        if let Expr::Hash(args) = app.as_ref() {
            arities.insert(args.len());
        }
    }

    let mut script = String::new();
    script.push_str("(set-logic QF_ABV)\n");
    let vars: Vec<Origin> = vars.into_iter().collect();
    for v in &vars {
        writeln!(script, "(declare-fun {} () (_ BitVec 256))", v.name()).unwrap();
    }
    for n in &arities {
        let params = vec!["(_ BitVec 256)"; *n].join(" ");
        writeln!(script, "(declare-fun keccak{n} ({params}) (_ BitVec 256))").unwrap();
    }

    let mut enc = Encoder {
        script,
        names: HashMap::new(),
        next: 0,
    };
    let mut app_terms = Vec::new();
    for app in &apps {
        let term = enc.term(app)?;
        app_terms.push((app.clone(), term));
    }
    for c in constraints {
        let t = enc.term(c)?;
        writeln!(enc.script, "(assert (distinct {t} {}))", lit(U256::zero())).unwrap();
    }
    Ok(Encoded {
        script: enc.script,
        vars,
        hash_apps: app_terms,
    })
}

struct Encoder {
    script: String,
    names: HashMap<*const Expr, String>,
    next: usize,
}

fn lit(w: Word) -> String {
    format!("#x{}", hex::encode(w.to_big_endian()))
}

const ONE: &str = "#x0000000000000000000000000000000000000000000000000000000000000001";
const ZERO: &str = "#x0000000000000000000000000000000000000000000000000000000000000000";

impl Encoder {
    /// Returns a term (a literal, variable, or defined name) denoting the
    /// expression, emitting define-funs for children first.
    fn term(&mut self, e: &SymValue) -> Result<String, EncodeError> {
        match e.as_ref() {
            Expr::Concrete(w) => return Ok(lit(*w)),
            Expr::Var(o) => return Ok(o.name()),
            _ => {}
        }
        let key = Rc::as_ptr(e);
        if let Some(name) = self.names.get(&key) {
            return Ok(name.clone());
        }
        let body = self.body(e)?;
        let name = format!("t{}", self.next);
        self.next += 1;
        writeln!(
            self.script,
            "(define-fun {name} () (_ BitVec 256) {body})"
        )
        .unwrap();
        self.names.insert(key, name.clone());
        Ok(name)
    }

    fn body(&mut self, e: &SymValue) -> Result<String, EncodeError> {
        Ok(match e.as_ref() {
            Expr::Concrete(_) | Expr::Var(_) => unreachable!("leaves are inlined"),
            Expr::Op1(op, a) => {
                let a = self.term(a)?;
                match op {
                    Op1::IsZero => format!("(ite (= {a} {ZERO}) {ONE} {ZERO})"),
                    Op1::Not => format!("(bvnot {a})"),
                }
            }
            Expr::Op2(op, a, b) => {
                if let Some(t) = self.pow2_shortcut(*op, a, b)? {
                    t
                } else {
                    let a = self.term(a)?;
                    let b = self.term(b)?;
                    self.binary(*op, &a, &b)?
                }
            }
            Expr::Op3(op, a, b, c) => {
                let a = self.term(a)?;
                let b = self.term(b)?;
                let n = self.term(c)?;
                let wide_op = match op {
                    Op3::Addmod => "bvadd",
                    Op3::Mulmod => "bvmul",
                };
                // Compute in 512 bits, reduce, truncate.
                format!(
                    "(ite (= {n} {ZERO}) {ZERO} \
                     ((_ extract 255 0) (bvurem ({wide_op} ((_ zero_extend 256) {a}) \
                     ((_ zero_extend 256) {b})) ((_ zero_extend 256) {n}))))"
                )
            }
            Expr::Hash(args) => {
                let terms: Vec<String> = args
                    .iter()
                    .map(|a| self.term(a))
                    .collect::<Result<_, _>>()?;
                format!("(keccak{} {})", args.len(), terms.join(" "))
            }
        })
    }

    /// Division, remainder, multiplication, and exponentiation by a constant
    /// power of two become shifts or masks. These dominate real bytecode
    /// (calldata dispatch, word masking) and are vastly cheaper to solve
    /// than general division circuits.
    fn pow2_shortcut(
        &mut self,
        op: Op2,
        a: &SymValue,
        b: &SymValue,
    ) -> Result<Option<String>, EncodeError> {
        fn pow2_exp(e: &SymValue) -> Option<u32> {
            let w = e.as_concrete()?;
            if !w.is_zero() && (w & (w - U256::one())).is_zero() {
                Some(w.trailing_zeros() as u32)
            } else {
                None
            }
        }
        let shift = |k: u32| lit(U256::from(k));
        Ok(Some(match op {
            Op2::Mul => {
                if let Some(k) = pow2_exp(b) {
                    let a = self.term(a)?;
                    format!("(bvshl {a} {})", shift(k))
                } else if let Some(k) = pow2_exp(a) {
                    let b = self.term(b)?;
                    format!("(bvshl {b} {})", shift(k))
                } else {
                    return Ok(None);
                }
            }
            Op2::Div => match pow2_exp(b) {
                Some(k) => {
                    let a = self.term(a)?;
                    format!("(bvlshr {a} {})", shift(k))
                }
                None => return Ok(None),
            },
            Op2::Mod => match b.as_concrete() {
                Some(w) if !w.is_zero() && (w & (w - U256::one())).is_zero() => {
                    let a = self.term(a)?;
                    format!("(bvand {a} {})", lit(w - U256::one()))
                }
                _ => return Ok(None),
            },
            // 2^e for symbolic e is one shift; a small concrete exponent
            // unrolls to repeated multiplication. Anything else stays
            // unsupported.
            Op2::Exp => match (a.as_concrete(), b.as_concrete()) {
                (Some(w), _) if w == U256::from(2) => {
                    let b = self.term(b)?;
                    format!("(bvshl {ONE} {b})")
                }
                (_, Some(e)) if e <= U256::from(8) => {
                    let e = e.as_u64();
                    if e == 0 {
                        ONE.to_string()
                    } else {
                        let a = self.term(a)?;
                        let mut acc = a.clone();
                        for _ in 1..e {
                            acc = format!("(bvmul {acc} {a})");
                        }
                        acc
                    }
                }
                _ => return Ok(None),
            },
            _ => return Ok(None),
        }))
    }

    fn binary(&mut self, op: Op2, a: &str, b: &str) -> Result<String, EncodeError> {
        let bool_word = |cond: String| format!("(ite {cond} {ONE} {ZERO})");
        // |x| as an inline term.
        let abs = |x: &str| format!("(ite (bvslt {x} {ZERO}) (bvneg {x}) {x})");
        Ok(match op {
            Op2::Add => format!("(bvadd {a} {b})"),
            Op2::Mul => format!("(bvmul {a} {b})"),
            Op2::Sub => format!("(bvsub {a} {b})"),
            Op2::And => format!("(bvand {a} {b})"),
            Op2::Or => format!("(bvor {a} {b})"),
            Op2::Xor => format!("(bvxor {a} {b})"),
            Op2::Div => format!("(ite (= {b} {ZERO}) {ZERO} (bvudiv {a} {b}))"),
            Op2::Mod => format!("(ite (= {b} {ZERO}) {ZERO} (bvurem {a} {b}))"),
            Op2::Sdiv => {
                let q = format!("(bvudiv {} {})", abs(a), abs(b));
                format!(
                    "(ite (= {b} {ZERO}) {ZERO} \
                     (ite (bvslt (bvxor {a} {b}) {ZERO}) (bvneg {q}) {q}))"
                )
            }
            Op2::Smod => {
                let r = format!("(bvurem {} {})", abs(a), abs(b));
                format!(
                    "(ite (= {b} {ZERO}) {ZERO} \
                     (ite (bvslt {a} {ZERO}) (bvneg {r}) {r}))"
                )
            }
            Op2::Exp => {
                return Err(EncodeError::Unsupported(
                    "exponentiation with symbolic operands".into(),
                ))
            }
            Op2::Signextend => {
                // Shift the (k+1)-byte value to the top, then arithmetic
                // shift back; k >= 31 degenerates to the identity.
                let k31 = "#x000000000000000000000000000000000000000000000000000000000000001f";
                let eight = "#x0000000000000000000000000000000000000000000000000000000000000008";
                let sh = format!(
                    "(ite (bvuge {a} {k31}) {ZERO} (bvmul {eight} (bvsub {k31} {a})))"
                );
                format!("(bvashr (bvshl {b} {sh}) {sh})")
            }
            Op2::Lt => bool_word(format!("(bvult {a} {b})")),
            Op2::Gt => bool_word(format!("(bvugt {a} {b})")),
            Op2::Slt => bool_word(format!("(bvslt {a} {b})")),
            Op2::Sgt => bool_word(format!("(bvsgt {a} {b})")),
            Op2::Eq => bool_word(format!("(= {a} {b})")),
            Op2::Byte => {
                let k31 = "#x000000000000000000000000000000000000000000000000000000000000001f";
                let eight = "#x0000000000000000000000000000000000000000000000000000000000000008";
                let ff = "#x00000000000000000000000000000000000000000000000000000000000000ff";
                format!(
                    "(ite (bvugt {a} {k31}) {ZERO} \
                     (bvand (bvlshr {b} (bvmul {eight} (bvsub {k31} {a}))) {ff}))"
                )
            }
            Op2::Shl => format!("(bvshl {b} {a})"),
            Op2::Shr => format!("(bvlshr {b} {a})"),
        })
    }
}
