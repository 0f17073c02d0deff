//! Command-level driver: maintains declarations and assertions, runs
//! `check-sat` by bit-blasting the assertion stack into a fresh SAT solver,
//! and answers `get-model` / `get-value` from the last satisfying
//! assignment.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use crate::blast::{BVal, Blaster, ModelValue};
use crate::sexp::Sexp;
use crate::term::{build_term, parse_sort, Sort, SymbolTable, Term};
use crate::val::BvVal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckResult {
    Sat,
    Unsat,
    Unknown,
}

impl CheckResult {
    fn as_str(self) -> &'static str {
        match self {
            CheckResult::Sat => "sat",
            CheckResult::Unsat => "unsat",
            CheckResult::Unknown => "unknown",
        }
    }
}

/// Outcome of running one command: text to print (if any), or a request to
/// terminate the session.
pub enum Response {
    None,
    Print(String),
    Exit,
}

struct ScopeMark {
    n_assertions: usize,
    vars: Vec<String>,
    defs: Vec<String>,
    ufs: Vec<String>,
}

struct Model {
    vars: HashMap<String, ModelValue>,
    apps: HashMap<(String, Vec<BvVal>), BvVal>,
}

pub const DEFAULT_GATE_LIMIT: usize = 6_000_000;

pub struct Session {
    table: SymbolTable,
    assertions: Vec<Rc<Term>>,
    scopes: Vec<ScopeMark>,
    /// Declaration order, for stable get-model output.
    var_order: Vec<String>,
    model: Option<Model>,
    gate_limit: usize,
}

impl Default for Session {
    fn default() -> Self {
        Self::new(DEFAULT_GATE_LIMIT)
    }
}

impl Session {
    pub fn new(gate_limit: usize) -> Self {
        Session {
            table: SymbolTable {
                vars: HashMap::new(),
                defs: HashMap::new(),
                ufs: HashMap::new(),
            },
            assertions: Vec::new(),
            scopes: Vec::new(),
            var_order: Vec::new(),
            model: None,
            gate_limit,
        }
    }

    /// Parses and runs every command in `input`, returning the printed
    /// output lines. Errors are reported in-band as `(error "...")`, the
    /// way a solver process would print them.
    pub fn interpret(&mut self, input: &str) -> Vec<String> {
        let cmds = match crate::sexp::parse_all(input) {
            Ok(c) => c,
            Err(e) => return vec![format!("(error \"{e}\")")],
        };
        let mut out = Vec::new();
        for cmd in &cmds {
            match self.run(cmd) {
                Ok(Response::None) => {}
                Ok(Response::Print(s)) => out.push(s),
                Ok(Response::Exit) => break,
                Err(e) => out.push(format!("(error \"{}\")", e.replace('"', "'"))),
            }
        }
        out
    }

    pub fn run(&mut self, cmd: &Sexp) -> Result<Response, String> {
        let items = cmd.list().ok_or("expected a command list")?;
        let head = items
            .first()
            .and_then(|h| h.atom())
            .ok_or("expected a command name")?;
        match head {
            "set-logic" | "set-option" | "set-info" => Ok(Response::None),
            "declare-fun" => self.declare_fun(items),
            "declare-const" => self.declare_const(items),
            "define-fun" => self.define_fun(items),
            "assert" => {
                if items.len() != 2 {
                    return Err("assert takes one term".into());
                }
                let t = build_term(&items[1], &self.table)?;
                self.assertions.push(t);
                Ok(Response::None)
            }
            "check-sat" => {
                let r = self.check()?;
                Ok(Response::Print(r.as_str().to_string()))
            }
            "get-model" => Ok(Response::Print(self.get_model()?)),
            "get-value" => Ok(Response::Print(self.get_value(items)?)),
            "push" => {
                let n = count_arg(items)?;
                for _ in 0..n {
                    self.scopes.push(ScopeMark {
                        n_assertions: self.assertions.len(),
                        vars: Vec::new(),
                        defs: Vec::new(),
                        ufs: Vec::new(),
                    });
                }
                Ok(Response::None)
            }
            "pop" => {
                let n = count_arg(items)?;
                for _ in 0..n {
                    let mark = self.scopes.pop().ok_or("pop without matching push")?;
                    self.assertions.truncate(mark.n_assertions);
                    for v in mark.vars {
                        self.table.vars.remove(&v);
                        self.var_order.retain(|x| x != &v);
                    }
                    for d in mark.defs {
                        self.table.defs.remove(&d);
                    }
                    for u in mark.ufs {
                        self.table.ufs.remove(&u);
                    }
                }
                Ok(Response::None)
            }
            "reset" => {
                *self = Session::new(self.gate_limit);
                Ok(Response::None)
            }
            "echo" => {
                let s = items
                    .get(1)
                    .and_then(|a| a.atom())
                    .ok_or("echo takes a string")?;
                Ok(Response::Print(s.trim_matches('"').to_string()))
            }
            "exit" => Ok(Response::Exit),
            other => Err(format!("unsupported command {other}")),
        }
    }

    fn declared(&self, name: &str) -> bool {
        self.table.vars.contains_key(name)
            || self.table.defs.contains_key(name)
            || self.table.ufs.contains_key(name)
    }

    fn declare_fun(&mut self, items: &[Sexp]) -> Result<Response, String> {
        if items.len() != 4 {
            return Err("declare-fun takes name, argument sorts, result sort".into());
        }
        let name = items[1].atom().ok_or("bad name")?.to_string();
        if self.declared(&name) {
            return Err(format!("{name} is already declared"));
        }
        let arg_sexps = items[2].list().ok_or("bad argument sort list")?;
        let ret = parse_sort(&items[3])?;
        if arg_sexps.is_empty() {
            self.insert_var(name, ret);
        } else {
            let args = arg_sexps
                .iter()
                .map(parse_sort)
                .collect::<Result<Vec<_>, _>>()?;
            if args.iter().any(|s| *s == Sort::Bool) || ret == Sort::Bool {
                return Err("functions over Bool are unsupported".into());
            }
            if let Some(mark) = self.scopes.last_mut() {
                mark.ufs.push(name.clone());
            }
            self.table.ufs.insert(name, (args, ret));
        }
        Ok(Response::None)
    }

    fn declare_const(&mut self, items: &[Sexp]) -> Result<Response, String> {
        if items.len() != 3 {
            return Err("declare-const takes name and sort".into());
        }
        let name = items[1].atom().ok_or("bad name")?.to_string();
        if self.declared(&name) {
            return Err(format!("{name} is already declared"));
        }
        let sort = parse_sort(&items[2])?;
        self.insert_var(name, sort);
        Ok(Response::None)
    }

    fn insert_var(&mut self, name: String, sort: Sort) {
        if let Some(mark) = self.scopes.last_mut() {
            mark.vars.push(name.clone());
        }
        self.var_order.push(name.clone());
        self.table.vars.insert(name, sort);
    }

    fn define_fun(&mut self, items: &[Sexp]) -> Result<Response, String> {
        if items.len() != 5 {
            return Err("define-fun takes name, parameters, sort, body".into());
        }
        let name = items[1].atom().ok_or("bad name")?.to_string();
        if self.declared(&name) {
            return Err(format!("{name} is already declared"));
        }
        let params = items[2].list().ok_or("bad parameter list")?;
        if !params.is_empty() {
            return Err("only 0-ary define-fun is supported".into());
        }
        let _sort = parse_sort(&items[3])?;
        let body = build_term(&items[4], &self.table)?;
        if let Some(mark) = self.scopes.last_mut() {
            mark.defs.push(name.clone());
        }
        self.table.defs.insert(name, body);
        Ok(Response::None)
    }

    fn check(&mut self) -> Result<CheckResult, String> {
        self.model = None;
        let mut blaster = Blaster::new(self.gate_limit);
        for a in &self.assertions {
            match blaster.blast(a, &self.table) {
                Ok(BVal::Bool(lit)) => blaster.assert(lit),
                Ok(BVal::Bits(_)) => return Err("asserted term is not Bool".into()),
                Err(_) if blaster.overflowed() => return Ok(CheckResult::Unknown),
                Err(e) => return Err(e),
            }
        }
        blaster.finish_ufs()?;
        if blaster.overflowed() {
            return Ok(CheckResult::Unknown);
        }
        match blaster.solver.solve() {
            Ok(true) => {
                let assignment: HashMap<varisat::Var, bool> = blaster
                    .solver
                    .model()
                    .unwrap_or_default()
                    .iter()
                    .map(|l| (l.var(), l.is_positive()))
                    .collect();
                let (vars, app_list) = blaster.extract_model(&assignment);
                let apps = app_list
                    .into_iter()
                    .map(|(uf, args, result)| ((uf, args), result))
                    .collect();
                self.model = Some(Model { vars, apps });
                Ok(CheckResult::Sat)
            }
            Ok(false) => Ok(CheckResult::Unsat),
            Err(_) => Ok(CheckResult::Unknown),
        }
    }

    fn model(&self) -> Result<&Model, String> {
        self.model
            .as_ref()
            .ok_or_else(|| "no model available (last check was not sat)".into())
    }

    fn get_model(&self) -> Result<String, String> {
        let model = self.model()?;
        let mut out = String::from("(\n");
        for name in &self.var_order {
            let sort = self.table.vars[name];
            // Variables absent from the model never reached the solver; any
            // value satisfies, so report zero.
            let value = model.vars.get(name).cloned().unwrap_or(match sort {
                Sort::Bool => ModelValue::Bool(false),
                Sort::BitVec(w) => ModelValue::Bv(BvVal::zero(w)),
            });
            writeln!(
                out,
                "  (define-fun {name} () {} {})",
                sort_text(sort),
                value_text(&value)
            )
            .unwrap();
        }
        for (name, (arg_sorts, ret)) in &self.table.ufs {
            let params: Vec<String> = arg_sorts
                .iter()
                .enumerate()
                .map(|(i, s)| format!("(x!{i} {})", sort_text(*s)))
                .collect();
            let mut body = value_text(&ModelValue::Bv(BvVal::zero(match ret {
                Sort::BitVec(w) => *w,
                Sort::Bool => unreachable!(),
            })));
            for ((uf, args), result) in &model.apps {
                if uf != name {
                    continue;
                }
                let cond: Vec<String> = args
                    .iter()
                    .enumerate()
                    .map(|(i, v)| format!("(= x!{i} {})", value_text(&ModelValue::Bv(v.clone()))))
                    .collect();
                let cond = if cond.len() == 1 {
                    cond.into_iter().next().unwrap()
                } else {
                    format!("(and {})", cond.join(" "))
                };
                body = format!(
                    "(ite {cond} {} {body})",
                    value_text(&ModelValue::Bv(result.clone()))
                );
            }
            writeln!(
                out,
                "  (define-fun {name} ({}) {} {})",
                params.join(" "),
                sort_text(*ret),
                body
            )
            .unwrap();
        }
        out.push(')');
        Ok(out)
    }

    fn get_value(&self, items: &[Sexp]) -> Result<String, String> {
        let model = self.model()?;
        let terms = items
            .get(1)
            .and_then(|t| t.list())
            .ok_or("get-value takes a term list")?;
        let mut out = String::from("(");
        for (i, sexp) in terms.iter().enumerate() {
            let term = build_term(sexp, &self.table)?;
            let value = self.eval_term(&term, model)?;
            if i > 0 {
                out.push('\n');
                out.push(' ');
            }
            write!(out, "({sexp} {})", value_text(&value)).unwrap();
        }
        out.push(')');
        Ok(out)
    }

    /// Evaluates a term against the model by re-blasting it with every
    /// symbol pinned to its model value: constant folding collapses the
    /// whole term without touching the SAT solver.
    fn eval_term(&self, term: &Rc<Term>, model: &Model) -> Result<ModelValue, String> {
        let mut blaster = Blaster::new(self.gate_limit);
        blaster.uf_values = model.apps.clone();
        for name in &self.var_order {
            let sort = self.table.vars[name];
            let value = model.vars.get(name).cloned().unwrap_or(match sort {
                Sort::Bool => ModelValue::Bool(false),
                Sort::BitVec(w) => ModelValue::Bv(BvVal::zero(w)),
            });
            blaster.bind_constant(name, &value);
        }
        let v = blaster.blast(term, &self.table)?;
        blaster
            .const_value(&v)
            .ok_or_else(|| "term did not evaluate to a constant under the model".into())
    }
}

fn count_arg(items: &[Sexp]) -> Result<usize, String> {
    match items.get(1) {
        None => Ok(1),
        Some(a) => a
            .atom()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "bad level count".into()),
    }
}

fn sort_text(sort: Sort) -> String {
    match sort {
        Sort::Bool => "Bool".into(),
        Sort::BitVec(w) => format!("(_ BitVec {w})"),
    }
}

fn value_text(v: &ModelValue) -> String {
    match v {
        ModelValue::Bool(b) => b.to_string(),
        ModelValue::Bv(bv) => {
            if bv.width % 4 == 0 {
                format!("#x{}", bv.to_hex())
            } else {
                let bits: String = bv
                    .bits()
                    .iter()
                    .rev()
                    .map(|&b| if b { '1' } else { '0' })
                    .collect();
                format!("#b{bits}")
            }
        }
    }
}
