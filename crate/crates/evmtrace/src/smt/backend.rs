//! Runs encoded queries against a solver and extracts satisfying
//! assignments. Two backends: the in-workspace bitvector solver running on
//! a worker thread, or any external SMT-LIB2 solver spoken to over
//! stdin/stdout. Both are given the whole query in one shot; a timeout
//! abandons (and for a process, kills) the attempt.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use primitive_types::U256;
use smtbv::sexp::{self, Sexp};

use crate::smt::encode::{encode, Encoded};
use crate::sym::expr::{self, Env, Expr, SymValue};
use crate::word::Word;

/// Outcome of a satisfiability query. `Sat` carries an assignment for every
/// variable and hash application occurring in the query.
#[derive(Debug, Clone)]
pub enum SolverResult {
    Sat(Env),
    Unsat,
    Unknown(String),
}

/// The solver could not be run at all, as opposed to running and answering
/// `unknown`.
#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("solver unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone)]
enum Backend {
    Builtin { gate_limit: usize },
    Process { path: PathBuf },
}

#[derive(Debug, Clone)]
pub struct Solver {
    backend: Backend,
    pub timeout: Duration,
}

impl Solver {
    pub fn builtin(timeout: Duration) -> Self {
        Solver {
            backend: Backend::Builtin {
                gate_limit: smtbv::DEFAULT_GATE_LIMIT,
            },
            timeout,
        }
    }

    pub fn builtin_with_gate_limit(timeout: Duration, gate_limit: usize) -> Self {
        Solver {
            backend: Backend::Builtin { gate_limit },
            timeout,
        }
    }

    pub fn process(path: PathBuf, timeout: Duration) -> Self {
        Solver {
            backend: Backend::Process { path },
            timeout,
        }
    }

    /// Checks the conjunction of `constraints` (each interpreted as
    /// "nonzero"). Unsupported operators surface as `Unknown`, so callers
    /// can treat them as an unexplorable path rather than a fault.
    pub fn check(&self, constraints: &[SymValue]) -> Result<SolverResult, SolverError> {
        let enc = match encode(constraints) {
            Ok(e) => e,
            Err(e) => return Ok(SolverResult::Unknown(e.to_string())),
        };
        let input = query_text(&enc);
        let output = match &self.backend {
            Backend::Builtin { gate_limit } => {
                match run_builtin(input, *gate_limit, self.timeout) {
                    Some(lines) => lines,
                    None => return Ok(SolverResult::Unknown("timeout".into())),
                }
            }
            Backend::Process { path } => match run_process(path, &input, self.timeout)? {
                Some(lines) => lines,
                None => return Ok(SolverResult::Unknown("timeout".into())),
            },
        };
        parse_output(&enc, &output)
    }
}

fn query_text(enc: &Encoded) -> String {
    let mut s = enc.script.clone();
    s.push_str("(check-sat)\n(get-model)\n");
    if !enc.hash_apps.is_empty() {
        let terms: Vec<&str> = enc.hash_apps.iter().map(|(_, t)| t.as_str()).collect();
        s.push_str(&format!("(get-value ({}))\n", terms.join(" ")));
    }
    s.push_str("(exit)\n");
    s
}

/// Runs the in-process solver on a worker thread so a hard query can be
/// abandoned. An abandoned worker finishes (and is discarded) on its own.
fn run_builtin(input: String, gate_limit: usize, timeout: Duration) -> Option<Vec<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut session = smtbv::Session::new(gate_limit);
        let out = session.interpret(&input);
        let _ = tx.send(out);
    });
    rx.recv_timeout(timeout).ok()
}

fn run_process(path: &PathBuf, input: &str, timeout: Duration) -> Result<Option<Vec<String>>, SolverError> {
    let mut cmd = Command::new(path);
    // z3 only reads stdin when asked to.
    if path
        .file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with("z3"))
    {
        cmd.arg("-in");
    }
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SolverError::Unavailable(format!("{}: {e}", path.display())))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    stdin
        .write_all(input.as_bytes())
        .map_err(|e| SolverError::Unavailable(format!("writing to solver: {e}")))?;
    drop(stdin);

    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let text = std::io::read_to_string(stdout).unwrap_or_default();
        let _ = tx.send(text);
    });
    match rx.recv_timeout(timeout) {
        Ok(text) => {
            let _ = child.wait();
            Ok(Some(text.lines().map(|l| l.to_string()).collect()))
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            Ok(None)
        }
    }
}

fn parse_output(enc: &Encoded, lines: &[String]) -> Result<SolverResult, SolverError> {
    let mut iter = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
    let verdict = iter
        .next()
        .ok_or_else(|| SolverError::Unavailable("no output from solver".into()))?;
    match verdict {
        "unsat" => return Ok(SolverResult::Unsat),
        "unknown" => return Ok(SolverResult::Unknown("solver answered unknown".into())),
        "sat" => {}
        other => {
            return Err(SolverError::Unavailable(format!(
                "unexpected solver output: {other}"
            )))
        }
    }
    let rest: String = iter.collect::<Vec<_>>().join("\n");
    let sexps = sexp::parse_all(&rest)
        .map_err(|e| SolverError::Unavailable(format!("unreadable model: {e}")))?;
    if sexps.is_empty() {
        return Err(SolverError::Unavailable("sat without a model".into()));
    }

    let mut by_name: HashMap<String, Word> = HashMap::new();
    collect_model_values(&sexps[0], &mut by_name);

    let mut env = Env::default();
    for origin in &enc.vars {
        // Solvers may omit variables the model does not constrain.
        let w = by_name.get(&origin.name()).copied().unwrap_or_default();
        env.vars.insert(*origin, w);
    }

    if !enc.hash_apps.is_empty() {
        let values = sexps
            .get(1)
            .and_then(|s| s.list())
            .ok_or_else(|| SolverError::Unavailable("missing get-value answer".into()))?;
        if values.len() != enc.hash_apps.len() {
            return Err(SolverError::Unavailable(
                "get-value answer has wrong arity".into(),
            ));
        }
        // Innermost-first order guarantees each application's arguments are
        // already evaluable when its value is bound.
        for ((app, _), pair) in enc.hash_apps.iter().zip(values) {
            let val = pair
                .list()
                .and_then(|p| p.last())
                .and_then(parse_bv)
                .ok_or_else(|| SolverError::Unavailable("unreadable get-value pair".into()))?;
            if let Expr::Hash(args) = app.as_ref() {
                let arg_vals: Vec<Word> = args
                    .iter()
                    .map(|a| expr::eval(a, &env))
                    .collect::<Result<_, _>>()
                    .map_err(|e| SolverError::Unavailable(format!("model incomplete: {e}")))?;
                env.hashes.insert((args.len(), arg_vals), val);
            }
        }
    }
    Ok(SolverResult::Sat(env))
}

/// Pulls `name -> value` out of a get-model answer: a list of
/// `(define-fun name () sort value)` entries, optionally tagged `model`.
fn collect_model_values(model: &Sexp, out: &mut HashMap<String, Word>) {
    let Some(items) = model.list() else { return };
    for item in items {
        let Some(parts) = item.list() else { continue };
        if parts.len() == 5
            && parts[0].atom() == Some("define-fun")
            && parts[2].list().is_some_and(|p| p.is_empty())
        {
            if let (Some(name), Some(val)) = (parts[1].atom(), parse_bv(&parts[4])) {
                out.insert(name.to_string(), val);
            }
        }
    }
}

fn parse_bv(s: &Sexp) -> Option<Word> {
    let a = s.atom()?;
    if let Some(hx) = a.strip_prefix("#x") {
        U256::from_str_radix(hx, 16).ok()
    } else if let Some(bits) = a.strip_prefix("#b") {
        U256::from_str_radix(bits, 2).ok()
    } else {
        None
    }
}

/// Concretely re-checks that an assignment satisfies every constraint; the
/// guard used before a model is trusted for replay.
pub fn model_satisfies(constraints: &[SymValue], env: &Env) -> bool {
    constraints
        .iter()
        .all(|c| expr::eval(c, env).map(expr::truthy).unwrap_or(false))
}
