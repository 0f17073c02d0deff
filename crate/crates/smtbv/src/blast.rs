//! Tseitin bit-blasting of bitvector terms into CNF for a CDCL SAT solver.
//!
//! Every bit is a SAT literal; constants reuse a single pinned true
//! variable so gate construction can fold eagerly. A structural gate cache
//! keeps the CNF small across shared subterms. Uninterpreted functions are
//! reduced via Ackermann expansion: each application gets fresh result
//! bits plus pairwise functional-consistency constraints.

use std::collections::HashMap;
use std::rc::Rc;

use varisat::{ExtendFormula, Lit, Solver};

use crate::term::{Op, Sort, Term};
use crate::val::BvVal;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BVal {
    Bool(Lit),
    Bits(Vec<Lit>),
}

impl BVal {
    fn as_bool(&self) -> Result<Lit, String> {
        match self {
            BVal::Bool(l) => Ok(*l),
            BVal::Bits(_) => Err("expected Bool, got bitvector".into()),
        }
    }

    fn as_bits(&self) -> Result<&[Lit], String> {
        match self {
            BVal::Bits(b) => Ok(b),
            BVal::Bool(_) => Err("expected bitvector, got Bool".into()),
        }
    }
}

#[derive(Debug)]
pub struct GateLimitExceeded;

type BlastResult<T> = Result<T, String>;

struct AppInstance {
    uf: String,
    args: Vec<Vec<Lit>>,
    result: Vec<Lit>,
}

pub struct Blaster<'a> {
    pub solver: Solver<'a>,
    true_lit: Lit,
    gate_cache: HashMap<(u8, Lit, Lit), Lit>,
    mux_cache: HashMap<(Lit, Lit, Lit), Lit>,
    sym_cache: HashMap<String, BVal>,
    term_cache: HashMap<*const Term, BVal>,
    app_cache: HashMap<(String, Vec<Vec<Lit>>), usize>,
    apps: Vec<AppInstance>,
    /// Known results for uninterpreted-function applications, consulted when
    /// every argument folds to a constant. Used when re-blasting terms
    /// against a model to evaluate them.
    pub uf_values: HashMap<(String, Vec<BvVal>), BvVal>,
    gates: usize,
    gate_limit: usize,
    overflow: bool,
}

const OP_AND: u8 = 0;
const OP_XOR: u8 = 1;

impl<'a> Blaster<'a> {
    pub fn new(gate_limit: usize) -> Self {
        let mut solver = Solver::new();
        let true_lit = solver.new_lit();
        solver.add_clause(&[true_lit]);
        Blaster {
            solver,
            true_lit,
            gate_cache: HashMap::new(),
            mux_cache: HashMap::new(),
            sym_cache: HashMap::new(),
            term_cache: HashMap::new(),
            app_cache: HashMap::new(),
            apps: Vec::new(),
            uf_values: HashMap::new(),
            gates: 0,
            gate_limit,
            overflow: false,
        }
    }

    pub fn overflowed(&self) -> bool {
        self.overflow
    }

    pub fn constant(&self, b: bool) -> Lit {
        if b {
            self.true_lit
        } else {
            !self.true_lit
        }
    }

    fn const_of(&self, lit: Lit) -> Option<bool> {
        if lit == self.true_lit {
            Some(true)
        } else if lit == !self.true_lit {
            Some(false)
        } else {
            None
        }
    }

    fn fresh(&mut self) -> Lit {
        self.solver.new_lit()
    }

    fn bump(&mut self) {
        self.gates += 1;
        if self.gates > self.gate_limit {
            self.overflow = true;
        }
    }

    fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        if self.overflow {
            return self.true_lit;
        }
        match (self.const_of(a), self.const_of(b)) {
            (Some(false), _) | (_, Some(false)) => return self.constant(false),
            (Some(true), _) => return b,
            (_, Some(true)) => return a,
            _ => {}
        }
        if a == b {
            return a;
        }
        if a == !b {
            return self.constant(false);
        }
        let key = if a.code() <= b.code() {
            (OP_AND, a, b)
        } else {
            (OP_AND, b, a)
        };
        if let Some(&c) = self.gate_cache.get(&key) {
            return c;
        }
        let c = self.fresh();
        self.solver.add_clause(&[!a, !b, c]);
        self.solver.add_clause(&[a, !c]);
        self.solver.add_clause(&[b, !c]);
        self.gate_cache.insert(key, c);
        self.bump();
        c
    }

    fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and2(!a, !b)
    }

    fn xor2(&mut self, a: Lit, b: Lit) -> Lit {
        if self.overflow {
            return self.true_lit;
        }
        match (self.const_of(a), self.const_of(b)) {
            (Some(false), _) => return b,
            (_, Some(false)) => return a,
            (Some(true), _) => return !b,
            (_, Some(true)) => return !a,
            _ => {}
        }
        if a == b {
            return self.constant(false);
        }
        if a == !b {
            return self.constant(true);
        }
        // Normalize polarity so x^y and !x^!y share a gate.
        let (na, nb, flip) = {
            let flip = !a.is_positive() ^ !b.is_positive();
            (a.var().positive(), b.var().positive(), flip)
        };
        let key = if na.code() <= nb.code() {
            (OP_XOR, na, nb)
        } else {
            (OP_XOR, nb, na)
        };
        let base = if let Some(&c) = self.gate_cache.get(&key) {
            c
        } else {
            let c = self.fresh();
            let (x, y) = (key.1, key.2);
            self.solver.add_clause(&[!x, !y, !c]);
            self.solver.add_clause(&[x, y, !c]);
            self.solver.add_clause(&[!x, y, c]);
            self.solver.add_clause(&[x, !y, c]);
            self.gate_cache.insert(key, c);
            self.bump();
            c
        };
        if flip {
            !base
        } else {
            base
        }
    }

    fn mux(&mut self, sel: Lit, then_: Lit, else_: Lit) -> Lit {
        if self.overflow {
            return self.true_lit;
        }
        if let Some(s) = self.const_of(sel) {
            return if s { then_ } else { else_ };
        }
        if then_ == else_ {
            return then_;
        }
        if let (Some(t), Some(e)) = (self.const_of(then_), self.const_of(else_)) {
            return match (t, e) {
                (true, false) => sel,
                (false, true) => !sel,
                _ => unreachable!(),
            };
        }
        if let Some(&c) = self.mux_cache.get(&(sel, then_, else_)) {
            return c;
        }
        let c = self.fresh();
        self.solver.add_clause(&[!sel, !then_, c]);
        self.solver.add_clause(&[!sel, then_, !c]);
        self.solver.add_clause(&[sel, !else_, c]);
        self.solver.add_clause(&[sel, else_, !c]);
        self.mux_cache.insert((sel, then_, else_), c);
        self.bump();
        c
    }

    fn and_many(&mut self, lits: &[Lit]) -> Lit {
        let mut acc = self.constant(true);
        for &l in lits {
            acc = self.and2(acc, l);
        }
        acc
    }

    fn or_many(&mut self, lits: &[Lit]) -> Lit {
        let mut acc = self.constant(false);
        for &l in lits {
            acc = self.or2(acc, l);
        }
        acc
    }

    fn bits_eq(&mut self, a: &[Lit], b: &[Lit]) -> BlastResult<Lit> {
        if a.len() != b.len() {
            return Err("width mismatch in equality".into());
        }
        let mut acc = self.constant(true);
        for (&x, &y) in a.iter().zip(b) {
            let eq = !self.xor2(x, y);
            acc = self.and2(acc, eq);
        }
        Ok(acc)
    }

    fn add_bits(&mut self, a: &[Lit], b: &[Lit], carry_in: Lit) -> Vec<Lit> {
        let mut out = Vec::with_capacity(a.len());
        let mut carry = carry_in;
        for (&x, &y) in a.iter().zip(b) {
            let xy = self.xor2(x, y);
            let sum = self.xor2(xy, carry);
            // carry-out = (x & y) | (carry & (x ^ y))
            let g = self.and2(x, y);
            let p = self.and2(carry, xy);
            carry = self.or2(g, p);
            out.push(sum);
        }
        out
    }

    fn sub_bits(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let nb: Vec<Lit> = b.iter().map(|&l| !l).collect();
        let one = self.constant(true);
        self.add_bits(a, &nb, one)
    }

    /// Unsigned less-than, LSB-first ripple.
    fn ult_bits(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut lt = self.constant(false);
        for (&x, &y) in a.iter().zip(b) {
            let xlty = self.and2(!x, y);
            let eq = !self.xor2(x, y);
            let keep = self.and2(eq, lt);
            lt = self.or2(xlty, keep);
        }
        lt
    }

    fn mul_bits(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let w = a.len();
        let zero = self.constant(false);
        let mut acc = vec![zero; w];
        for i in 0..w {
            if self.const_of(b[i]) == Some(false) {
                continue;
            }
            if self.overflow {
                break;
            }
            // partial = (a << i) & b_i
            let mut partial = vec![zero; w];
            for j in 0..w - i {
                partial[i + j] = self.and2(a[j], b[i]);
            }
            acc = self.add_bits(&acc, &partial, zero);
        }
        acc
    }

    /// Restoring division; returns (quotient, remainder).
    /// Matches SMT-LIB semantics: x/0 = all-ones, x%0 = x.
    fn divmod_bits(&mut self, a: &[Lit], b: &[Lit]) -> (Vec<Lit>, Vec<Lit>) {
        let w = a.len();
        let zero = self.constant(false);
        // One extra bit so (r << 1) | a_i never overflows the comparison.
        let mut r = vec![zero; w + 1];
        let mut d = b.to_vec();
        d.push(zero);
        let mut q = vec![zero; w];
        for i in (0..w).rev() {
            if self.overflow {
                break;
            }
            let mut shifted = Vec::with_capacity(w + 1);
            shifted.push(a[i]);
            shifted.extend_from_slice(&r[..w]);
            let lt = self.ult_bits(&shifted, &d);
            let ge = !lt;
            let diff = self.sub_bits(&shifted, &d);
            r = (0..w + 1)
                .map(|j| self.mux(ge, diff[j], shifted[j]))
                .collect();
            q[i] = ge;
        }
        r.truncate(w);
        (q, r)
    }

    /// Barrel shifter. `fill` supplies bits shifted in; `left` selects
    /// direction. Shift amounts >= width produce all-fill.
    fn shift_bits(&mut self, a: &[Lit], amount: &[Lit], left: bool, fill: Lit) -> Vec<Lit> {
        let w = a.len();
        let stages = {
            let mut s = 0;
            while (1usize << s) < w {
                s += 1;
            }
            s
        };
        let mut cur = a.to_vec();
        for s in 0..stages.min(amount.len()) {
            let dist = 1usize << s;
            let sel = amount[s];
            let mut next = Vec::with_capacity(w);
            for i in 0..w {
                let shifted_bit = if left {
                    if i >= dist {
                        cur[i - dist]
                    } else {
                        fill
                    }
                } else if i + dist < w {
                    cur[i + dist]
                } else {
                    fill
                };
                next.push(self.mux(sel, shifted_bit, cur[i]));
            }
            cur = next;
        }
        // Any set bit at or above the stage range means shift >= width.
        let high: Vec<Lit> = amount.iter().skip(stages).copied().collect();
        let toobig = self.or_many(&high);
        cur.into_iter().map(|b| self.mux(toobig, fill, b)).collect()
    }

    /// Pins a named constant to a concrete value, so any term mentioning it
    /// folds during blasting. Used to evaluate terms against a model.
    pub fn bind_constant(&mut self, name: &str, value: &ModelValue) {
        let bval = match value {
            ModelValue::Bool(b) => BVal::Bool(self.constant(*b)),
            ModelValue::Bv(v) => BVal::Bits(
                v.bits().into_iter().map(|b| self.constant(b)).collect(),
            ),
        };
        self.sym_cache.insert(name.to_string(), bval);
    }

    /// Reads a fully constant-folded value back out, or `None` if any bit is
    /// still a free literal.
    pub fn const_value(&self, v: &BVal) -> Option<ModelValue> {
        match v {
            BVal::Bool(l) => self.const_of(*l).map(ModelValue::Bool),
            BVal::Bits(bits) => self.const_bv(bits).map(ModelValue::Bv),
        }
    }

    fn const_bv(&self, bits: &[Lit]) -> Option<BvVal> {
        let bools: Vec<bool> = bits
            .iter()
            .map(|&l| self.const_of(l))
            .collect::<Option<_>>()?;
        Some(BvVal::from_bits(&bools))
    }

    /// Declares (or retrieves) the bits of a named constant.
    pub fn symbol_bits(&mut self, name: &str, sort: Sort) -> BVal {
        if let Some(v) = self.sym_cache.get(name) {
            return v.clone();
        }
        let v = match sort {
            Sort::Bool => BVal::Bool(self.fresh()),
            Sort::BitVec(w) => BVal::Bits((0..w).map(|_| self.fresh()).collect()),
        };
        self.sym_cache.insert(name.to_string(), v.clone());
        v
    }

    /// Blasts a term to its literal representation.
    pub fn blast(
        &mut self,
        term: &Rc<Term>,
        table: &crate::term::SymbolTable,
    ) -> BlastResult<BVal> {
        if self.overflow {
            return Err("gate limit exceeded".into());
        }
        let key = Rc::as_ptr(term);
        if let Some(v) = self.term_cache.get(&key) {
            return Ok(v.clone());
        }
        let out = self.blast_uncached(term, table)?;
        self.term_cache.insert(key, out.clone());
        Ok(out)
    }

    fn blast_uncached(
        &mut self,
        term: &Rc<Term>,
        table: &crate::term::SymbolTable,
    ) -> BlastResult<BVal> {
        match term.as_ref() {
            Term::BoolLit(b) => Ok(BVal::Bool(self.constant(*b))),
            Term::BvLit(v) => Ok(BVal::Bits(
                v.bits().into_iter().map(|b| self.constant(b)).collect(),
            )),
            Term::Sym(name) => {
                if let Some(def) = table.defs.get(name) {
                    if let Some(v) = self.sym_cache.get(name) {
                        return Ok(v.clone());
                    }
                    let v = self.blast(&def.clone(), table)?;
                    self.sym_cache.insert(name.clone(), v.clone());
                    Ok(v)
                } else if let Some(&sort) = table.vars.get(name) {
                    Ok(self.symbol_bits(name, sort))
                } else {
                    Err(format!("unknown symbol {name}"))
                }
            }
            Term::Uf(name, args) => {
                let (arg_sorts, ret) = table
                    .ufs
                    .get(name)
                    .cloned()
                    .ok_or_else(|| format!("unknown function {name}"))?;
                if args.len() != arg_sorts.len() {
                    return Err(format!("arity mismatch for {name}"));
                }
                let mut arg_bits = Vec::with_capacity(args.len());
                for a in args {
                    arg_bits.push(self.blast(a, table)?.as_bits()?.to_vec());
                }
                let cache_key = (name.clone(), arg_bits.clone());
                if let Some(&idx) = self.app_cache.get(&cache_key) {
                    return Ok(BVal::Bits(self.apps[idx].result.clone()));
                }
                if !self.uf_values.is_empty() {
                    if let Some(arg_vals) = arg_bits
                        .iter()
                        .map(|bits| self.const_bv(bits))
                        .collect::<Option<Vec<_>>>()
                    {
                        if let Some(v) = self.uf_values.get(&(name.clone(), arg_vals)) {
                            let v = v.clone();
                            return Ok(BVal::Bits(
                                v.bits().into_iter().map(|b| self.constant(b)).collect(),
                            ));
                        }
                    }
                }
                let width = match ret {
                    Sort::BitVec(w) => w,
                    Sort::Bool => return Err("Bool-valued functions unsupported".into()),
                };
                let result: Vec<Lit> = (0..width).map(|_| self.fresh()).collect();
                let idx = self.apps.len();
                self.apps.push(AppInstance {
                    uf: name.clone(),
                    args: arg_bits,
                    result: result.clone(),
                });
                self.app_cache.insert(cache_key, idx);
                Ok(BVal::Bits(result))
            }
            Term::App(op, args) => self.blast_app(*op, args, table),
        }
    }

    fn blast_app(
        &mut self,
        op: Op,
        args: &[Rc<Term>],
        table: &crate::term::SymbolTable,
    ) -> BlastResult<BVal> {
        let vals: Vec<BVal> = args
            .iter()
            .map(|a| self.blast(a, table))
            .collect::<Result<_, _>>()?;
        let bool1 = |v: &[BVal]| v[0].as_bool();
        match op {
            Op::Not => Ok(BVal::Bool(!bool1(&vals)?)),
            Op::And => {
                let lits: Vec<Lit> = vals
                    .iter()
                    .map(|v| v.as_bool())
                    .collect::<Result<_, _>>()?;
                Ok(BVal::Bool(self.and_many(&lits)))
            }
            Op::Or => {
                let lits: Vec<Lit> = vals
                    .iter()
                    .map(|v| v.as_bool())
                    .collect::<Result<_, _>>()?;
                Ok(BVal::Bool(self.or_many(&lits)))
            }
            Op::Xor => {
                let mut acc = self.constant(false);
                for v in &vals {
                    let l = v.as_bool()?;
                    acc = self.xor2(acc, l);
                }
                Ok(BVal::Bool(acc))
            }
            Op::Implies => {
                let a = vals[0].as_bool()?;
                let b = vals[1].as_bool()?;
                Ok(BVal::Bool(self.or2(!a, b)))
            }
            Op::Eq => match (&vals[0], &vals[1]) {
                (BVal::Bool(a), BVal::Bool(b)) => Ok(BVal::Bool(!self.xor2(*a, *b))),
                (BVal::Bits(a), BVal::Bits(b)) => {
                    let (a, b) = (a.clone(), b.clone());
                    Ok(BVal::Bool(self.bits_eq(&a, &b)?))
                }
                _ => Err("sort mismatch in =".into()),
            },
            Op::Distinct => {
                let mut pairwise = Vec::new();
                for i in 0..vals.len() {
                    for j in i + 1..vals.len() {
                        let eq = match (&vals[i], &vals[j]) {
                            (BVal::Bool(a), BVal::Bool(b)) => !self.xor2(*a, *b),
                            (BVal::Bits(a), BVal::Bits(b)) => {
                                let (a, b) = (a.clone(), b.clone());
                                self.bits_eq(&a, &b)?
                            }
                            _ => return Err("sort mismatch in distinct".into()),
                        };
                        pairwise.push(!eq);
                    }
                }
                Ok(BVal::Bool(self.and_many(&pairwise)))
            }
            Op::Ite => {
                let sel = vals[0].as_bool()?;
                match (&vals[1], &vals[2]) {
                    (BVal::Bool(t), BVal::Bool(e)) => Ok(BVal::Bool(self.mux(sel, *t, *e))),
                    (BVal::Bits(t), BVal::Bits(e)) => {
                        if t.len() != e.len() {
                            return Err("width mismatch in ite".into());
                        }
                        let (t, e) = (t.clone(), e.clone());
                        Ok(BVal::Bits(
                            t.iter()
                                .zip(&e)
                                .map(|(&a, &b)| self.mux(sel, a, b))
                                .collect(),
                        ))
                    }
                    _ => Err("sort mismatch in ite".into()),
                }
            }
            Op::BvNot => Ok(BVal::Bits(
                vals[0].as_bits()?.iter().map(|&l| !l).collect(),
            )),
            Op::BvNeg => {
                let a: Vec<Lit> = vals[0].as_bits()?.iter().map(|&l| !l).collect();
                let zero: Vec<Lit> = vec![self.constant(false); a.len()];
                let one = self.constant(true);
                Ok(BVal::Bits(self.add_bits(&zero, &a, one)))
            }
            Op::BvAnd => self.bitwise(&vals, |s, a, b| s.and2(a, b)),
            Op::BvOr => self.bitwise(&vals, |s, a, b| s.or2(a, b)),
            Op::BvXor => self.bitwise(&vals, |s, a, b| s.xor2(a, b)),
            Op::BvAdd => {
                let mut acc = vals[0].as_bits()?.to_vec();
                for v in &vals[1..] {
                    let b = v.as_bits()?.to_vec();
                    let zero = self.constant(false);
                    acc = self.add_bits(&acc, &b, zero);
                }
                Ok(BVal::Bits(acc))
            }
            Op::BvSub => {
                let a = vals[0].as_bits()?.to_vec();
                let b = vals[1].as_bits()?.to_vec();
                Ok(BVal::Bits(self.sub_bits(&a, &b)))
            }
            Op::BvMul => {
                let a = vals[0].as_bits()?.to_vec();
                let b = vals[1].as_bits()?.to_vec();
                // Prefer the operand with more constant bits as multiplier.
                let score = |bits: &[Lit]| {
                    bits.iter()
                        .filter(|&&l| self.const_of(l).is_some())
                        .count()
                };
                if score(&b) >= score(&a) {
                    Ok(BVal::Bits(self.mul_bits(&a, &b)))
                } else {
                    Ok(BVal::Bits(self.mul_bits(&b, &a)))
                }
            }
            Op::BvUdiv => {
                let a = vals[0].as_bits()?.to_vec();
                let b = vals[1].as_bits()?.to_vec();
                Ok(BVal::Bits(self.divmod_bits(&a, &b).0))
            }
            Op::BvUrem => {
                let a = vals[0].as_bits()?.to_vec();
                let b = vals[1].as_bits()?.to_vec();
                Ok(BVal::Bits(self.divmod_bits(&a, &b).1))
            }
            Op::BvShl => {
                let a = vals[0].as_bits()?.to_vec();
                let b = vals[1].as_bits()?.to_vec();
                let fill = self.constant(false);
                Ok(BVal::Bits(self.shift_bits(&a, &b, true, fill)))
            }
            Op::BvLshr => {
                let a = vals[0].as_bits()?.to_vec();
                let b = vals[1].as_bits()?.to_vec();
                let fill = self.constant(false);
                Ok(BVal::Bits(self.shift_bits(&a, &b, false, fill)))
            }
            Op::BvAshr => {
                let a = vals[0].as_bits()?.to_vec();
                let b = vals[1].as_bits()?.to_vec();
                let fill = *a.last().ok_or("empty bitvector")?;
                Ok(BVal::Bits(self.shift_bits(&a, &b, false, fill)))
            }
            Op::BvUlt => self.compare(&vals, false, false),
            Op::BvUgt => self.compare_swapped(&vals, false, false),
            Op::BvUle => self.compare(&vals, false, true),
            Op::BvUge => self.compare_swapped(&vals, false, true),
            Op::BvSlt => self.compare(&vals, true, false),
            Op::BvSgt => self.compare_swapped(&vals, true, false),
            Op::BvSle => self.compare(&vals, true, true),
            Op::BvSge => self.compare_swapped(&vals, true, true),
            Op::Concat => {
                // First operand is the high part.
                let hi = vals[0].as_bits()?.to_vec();
                let lo = vals[1].as_bits()?.to_vec();
                let mut bits = lo;
                bits.extend(hi);
                Ok(BVal::Bits(bits))
            }
            Op::Extract(hi, lo) => {
                let a = vals[0].as_bits()?;
                if hi as usize >= a.len() || hi < lo {
                    return Err("bad extract range".into());
                }
                Ok(BVal::Bits(a[lo as usize..=hi as usize].to_vec()))
            }
            Op::ZeroExtend(k) => {
                let mut bits = vals[0].as_bits()?.to_vec();
                let zero = self.constant(false);
                bits.extend(std::iter::repeat(zero).take(k as usize));
                Ok(BVal::Bits(bits))
            }
            Op::SignExtend(k) => {
                let mut bits = vals[0].as_bits()?.to_vec();
                let sign = *bits.last().ok_or("empty bitvector")?;
                bits.extend(std::iter::repeat(sign).take(k as usize));
                Ok(BVal::Bits(bits))
            }
        }
    }

    fn bitwise(
        &mut self,
        vals: &[BVal],
        f: impl Fn(&mut Self, Lit, Lit) -> Lit,
    ) -> BlastResult<BVal> {
        let mut acc = vals[0].as_bits()?.to_vec();
        for v in &vals[1..] {
            let b = v.as_bits()?;
            if b.len() != acc.len() {
                return Err("width mismatch".into());
            }
            let b = b.to_vec();
            acc = acc
                .iter()
                .zip(&b)
                .map(|(&x, &y)| f(self, x, y))
                .collect();
        }
        Ok(BVal::Bits(acc))
    }

    /// lt (or le when `or_equal`) with optional signed interpretation
    /// (implemented by flipping the sign bits).
    fn compare(&mut self, vals: &[BVal], signed: bool, or_equal: bool) -> BlastResult<BVal> {
        let mut a = vals[0].as_bits()?.to_vec();
        let mut b = vals[1].as_bits()?.to_vec();
        if a.len() != b.len() {
            return Err("width mismatch in comparison".into());
        }
        if signed {
            let n = a.len() - 1;
            a[n] = !a[n];
            b[n] = !b[n];
        }
        let lt = self.ult_bits(&a, &b);
        if or_equal {
            let gt = self.ult_bits(&b, &a);
            Ok(BVal::Bool(!gt))
        } else {
            Ok(BVal::Bool(lt))
        }
    }

    fn compare_swapped(
        &mut self,
        vals: &[BVal],
        signed: bool,
        or_equal: bool,
    ) -> BlastResult<BVal> {
        let swapped = [vals[1].clone(), vals[0].clone()];
        self.compare(&swapped, signed, or_equal)
    }

    /// Adds Ackermann functional-consistency constraints for every pair of
    /// applications of the same uninterpreted function. Must run after all
    /// assertions are blasted.
    pub fn finish_ufs(&mut self) -> BlastResult<()> {
        for i in 0..self.apps.len() {
            for j in i + 1..self.apps.len() {
                if self.apps[i].uf != self.apps[j].uf {
                    continue;
                }
                let (args_i, args_j) = (self.apps[i].args.clone(), self.apps[j].args.clone());
                if args_i.len() != args_j.len() {
                    continue;
                }
                let mut eqs = Vec::new();
                for (x, y) in args_i.iter().zip(&args_j) {
                    eqs.push(self.bits_eq(x, y)?);
                }
                let args_equal = self.and_many(&eqs);
                let (ri, rj) = (self.apps[i].result.clone(), self.apps[j].result.clone());
                for (&x, &y) in ri.iter().zip(&rj) {
                    self.solver.add_clause(&[!args_equal, !x, y]);
                    self.solver.add_clause(&[!args_equal, x, !y]);
                }
            }
        }
        Ok(())
    }

    pub fn assert(&mut self, lit: Lit) {
        self.solver.add_clause(&[lit]);
    }

    /// Reads a bitvector value out of a SAT model. Unassigned bits read as
    /// zero.
    pub fn bits_value(bits: &[Lit], assignment: &HashMap<varisat::Var, bool>) -> BvVal {
        let bools: Vec<bool> = bits
            .iter()
            .map(|l| {
                assignment
                    .get(&l.var())
                    .map(|&v| v == l.is_positive())
                    .unwrap_or(false)
            })
            .collect();
        BvVal::from_bits(&bools)
    }

    /// Extracts per-symbol values and the UF application table from a SAT
    /// model.
    pub fn extract_model(
        &self,
        assignment: &HashMap<varisat::Var, bool>,
    ) -> (HashMap<String, ModelValue>, Vec<(String, Vec<BvVal>, BvVal)>) {
        let mut vars = HashMap::new();
        for (name, val) in &self.sym_cache {
            match val {
                BVal::Bool(l) => {
                    let v = assignment
                        .get(&l.var())
                        .map(|&b| b == l.is_positive())
                        .unwrap_or(false);
                    vars.insert(name.clone(), ModelValue::Bool(v));
                }
                BVal::Bits(bits) => {
                    vars.insert(
                        name.clone(),
                        ModelValue::Bv(Self::bits_value(bits, assignment)),
                    );
                }
            }
        }
        let apps = self
            .apps
            .iter()
            .map(|app| {
                let args = app
                    .args
                    .iter()
                    .map(|bits| Self::bits_value(bits, assignment))
                    .collect();
                let result = Self::bits_value(&app.result, assignment);
                (app.uf.clone(), args, result)
            })
            .collect();
        (vars, apps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelValue {
    Bool(bool),
    Bv(BvVal),
}
