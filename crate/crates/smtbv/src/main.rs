//! Stdin/stdout SMT-LIB2 solver front end.
//!
//! Reads commands (possibly spanning multiple lines), executes them, prints
//! results. `--gate-limit N` caps formula size before answering `unknown`.

use std::io::{BufRead, Write};

use smtbv::sexp::paren_balance;
use smtbv::{Session, DEFAULT_GATE_LIMIT};

fn main() {
    let mut gate_limit = DEFAULT_GATE_LIMIT;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--gate-limit" => {
                gate_limit = args
                    .next()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or_else(|| {
                        eprintln!("--gate-limit needs a number");
                        std::process::exit(2);
                    });
            }
            other => {
                eprintln!("unknown argument: {other}");
                std::process::exit(2);
            }
        }
    }

    let mut session = Session::new(gate_limit);
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut buffer = String::new();

    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        buffer.push_str(&line);
        buffer.push('\n');
        match paren_balance(&buffer) {
            Some(0) => {}
            Some(_) => continue,
            None => {
                let _ = writeln!(out, "(error \"unbalanced parentheses\")");
                buffer.clear();
                continue;
            }
        }
        if buffer.trim().is_empty() {
            buffer.clear();
            continue;
        }
        let wants_exit = buffer.contains("(exit)");
        for reply in session.interpret(&buffer) {
            let _ = writeln!(out, "{reply}");
        }
        let _ = out.flush();
        buffer.clear();
        if wants_exit {
            break;
        }
    }
}
