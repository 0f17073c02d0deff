use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use primitive_types::U256;

use evmtrace::chainstate::{addr, ChainState};
use evmtrace::properties::Category;
use evmtrace::report::{
    analyze_contract, render_text, scan_posthumous, ContractReport, CorpusSummary,
    ALL_CATEGORIES,
};
use evmtrace::sym::engine::AnalysisConfig;
use evmtrace::word::Address;

/// Finds contracts that leak Ether to arbitrary senders, can be killed by
/// arbitrary senders, or lock deposits forever, then confirms each finding
/// by concrete replay on a sandboxed fork.
#[derive(Parser)]
#[command(name = "evmtrace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one contract or every contract in a snapshot.
    Analyze(AnalyzeArgs),
    /// List accounts holding Ether with no code to ever move it.
    ScanPosthumous {
        /// Chain snapshot (JSON).
        #[arg(long)]
        snapshot: PathBuf,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    /// File with hex-encoded runtime bytecode to analyze in a fresh chain.
    #[arg(long, conflicts_with = "snapshot")]
    bytecode: Option<PathBuf>,

    /// Starting balance (wei) for the contract given via --bytecode.
    #[arg(long, default_value_t = 0)]
    balance: u64,

    /// Chain snapshot (JSON) to analyze against.
    #[arg(long, required_unless_present = "bytecode")]
    snapshot: Option<PathBuf>,

    /// Contract address inside the snapshot; omitted = every contract.
    #[arg(long, requires = "snapshot")]
    address: Option<String>,

    /// Categories to check (prodigal, suicidal, greedy); default all.
    #[arg(long = "category", value_parser = parse_category)]
    categories: Vec<Category>,

    /// Maximum number of consecutive invocations to explore.
    #[arg(long, default_value_t = 3)]
    depth: u32,

    /// Jump budget per path.
    #[arg(long, default_value_t = 60)]
    max_cfg_nodes: u32,

    /// External-call budget per invocation.
    #[arg(long, default_value_t = 3)]
    max_call_depth: u32,

    /// Per-query solver timeout, seconds.
    #[arg(long, default_value_t = 10)]
    solver_timeout: u64,

    /// Wall-clock budget per contract and category, seconds.
    #[arg(long, default_value_t = 300)]
    max_time: u64,

    /// Witnesses tried when a calldata offset is symbolic.
    #[arg(long, default_value_t = 2)]
    array_bound: u32,

    /// External SMT solver binary (SMT-LIB2 on stdin); default built-in.
    #[arg(long)]
    solver_path: Option<PathBuf>,

    /// Replay candidates concretely and attach verdicts.
    #[arg(long)]
    validate: bool,

    /// Analysis threads when scanning a whole snapshot.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Exit with status 1 when anything is flagged.
    #[arg(long)]
    fail_on_findings: bool,
}

fn parse_category(s: &str) -> Result<Category, String> {
    match s {
        "prodigal" => Ok(Category::Prodigal),
        "suicidal" => Ok(Category::Suicidal),
        "greedy" => Ok(Category::Greedy),
        other => Err(format!(
            "unknown category '{other}' (expected prodigal, suicidal, or greedy)"
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::ScanPosthumous { snapshot } => {
            let chain = ChainState::load_snapshot(&snapshot)?;
            let report = scan_posthumous(&chain);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(args) => run_analyze(args),
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cfg = AnalysisConfig {
        depth: args.depth,
        max_call_depth: args.max_call_depth,
        max_cfg_nodes: args.max_cfg_nodes,
        solver_timeout: Duration::from_secs(args.solver_timeout),
        max_time: Duration::from_secs(args.max_time),
        array_bound: args.array_bound,
        solver_path: args.solver_path.clone(),
        ..AnalysisConfig::default()
    };
    let categories: Vec<Category> = if args.categories.is_empty() {
        ALL_CATEGORIES.to_vec()
    } else {
        args.categories.clone()
    };

    let (chain, subjects) = load_targets(&args)?;

    let reports = if subjects.len() > 1 && args.workers > 1 {
        analyze_parallel(&chain, subjects, &categories, &cfg, args.validate, args.workers)?
    } else {
        let mut out = Vec::new();
        for subject in subjects {
            out.push(analyze_contract(
                &chain,
                subject,
                &categories,
                &cfg,
                args.validate,
            )?);
        }
        out
    };

    let mut summary = CorpusSummary::default();
    for r in &reports {
        summary.absorb(r);
        eprint!("{}", render_text(r));
    }

    let json = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&serde_json::json!({
            "contracts": reports,
            "summary": summary,
        }))?
    };
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }

    let found = reports.iter().any(|r| r.has_findings());
    if found && args.fail_on_findings {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn load_targets(args: &AnalyzeArgs) -> Result<(ChainState, Vec<Address>), Box<dyn std::error::Error>> {
    if let Some(path) = &args.bytecode {
        let text = std::fs::read_to_string(path)?;
        let raw = hex::decode(text.trim().trim_start_matches("0x"))?;
        let subject = addr("0x00000000000000000000000000000000000000c1");
        let mut chain = ChainState::default();
        let acct = chain.account_mut(subject);
        acct.code = Some(raw);
        acct.balance = U256::from(args.balance);
        return Ok((chain, vec![subject]));
    }
    let chain = ChainState::load_snapshot(args.snapshot.as_ref().expect("clap enforces"))?;
    let subjects = match &args.address {
        Some(a) => vec![parse_address(a)?],
        None => chain
            .accounts
            .iter()
            .filter(|(_, acct)| acct.is_contract())
            .map(|(a, _)| *a)
            .collect(),
    };
    Ok((chain, subjects))
}

fn parse_address(s: &str) -> Result<Address, String> {
    let hex40 = s.trim_start_matches("0x");
    if hex40.len() != 40 || !hex40.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(format!("malformed address '{s}'"));
    }
    Ok(addr(s))
}

fn analyze_parallel(
    chain: &ChainState,
    subjects: Vec<Address>,
    categories: &[Category],
    cfg: &AnalysisConfig,
    validate: bool,
    workers: usize,
) -> Result<Vec<ContractReport>, Box<dyn std::error::Error>> {
    let queue = Arc::new(Mutex::new(subjects));
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let queue = Arc::clone(&queue);
            let tx = tx.clone();
            scope.spawn(move || loop {
                let Some(subject) = queue.lock().unwrap().pop() else {
                    break;
                };
                let r = analyze_contract(chain, subject, categories, cfg, validate);
                if tx.send(r).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut reports: Vec<ContractReport> = rx
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("analysis failed: {e}"))?;
    reports.sort_by(|a, b| a.address.cmp(&b.address));
    Ok(reports)
}
