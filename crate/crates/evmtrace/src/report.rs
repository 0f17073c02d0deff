//! Analysis driver and report shapes. Ties the pipeline together — explore
//! each requested category, optionally validate candidates by replay — and
//! serializes the outcome as JSON plus a short human-readable rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use primitive_types::U256;
use serde::{Deserialize, Serialize};

use crate::bytecode::decode;
use crate::chainstate::ChainState;
use crate::properties::{greedy_classify, Category, GreedyClass};
use crate::sym::engine::{explore, AnalysisConfig, Candidate, EngineError, Exploration};
use crate::validator::{validate, ValidationError, Verdict};
use crate::word::{self, Address};

pub const ALL_CATEGORIES: [Category; 3] =
    [Category::Prodigal, Category::Suicidal, Category::Greedy];

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContractReport {
    pub address: String,
    pub bytecode_digest: String,
    pub categories: Vec<CategoryReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category: String,
    pub flagged: bool,
    /// Greedy only: "category_i" (statically locked) or "category_ii"
    /// (release code present but unreached).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_class: Option<String>,
    pub candidates: Vec<CandidateReport>,
    pub exploration: ExplorationReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateReport {
    pub attacker: String,
    pub messages: Vec<MessageReport>,
    pub flagged_label: String,
    pub flagged_at_depth: u32,
    pub path_digest: String,
    pub block_numbers: Vec<u64>,
    pub timestamps: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict_detail: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageReport {
    pub value: String,
    pub data: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub paths_explored: u64,
    pub pruned: BTreeMap<String, u64>,
    pub solver_queries: u64,
    pub elapsed_s: f64,
    pub budget_hit: bool,
}

impl ContractReport {
    /// Categories with at least one confirmed (or unvalidated) finding.
    pub fn flagged_categories(&self) -> Vec<&str> {
        self.categories
            .iter()
            .filter(|c| c.flagged)
            .map(|c| c.category.as_str())
            .collect()
    }

    pub fn has_findings(&self) -> bool {
        !self.flagged_categories().is_empty()
    }
}

/// Runs the full pipeline for one contract.
pub fn analyze_contract(
    chain: &ChainState,
    subject: Address,
    categories: &[Category],
    cfg: &AnalysisConfig,
    run_validation: bool,
) -> Result<ContractReport, AnalysisError> {
    let code = chain.code(subject).unwrap_or(&[]);
    let bytecode_digest = format!("{:#x}", word::keccak(code));
    let mut out = ContractReport {
        address: format!("{subject:#x}"),
        bytecode_digest,
        categories: Vec::new(),
    };
    for &category in categories {
        let ex = explore(chain, subject, category, cfg)?;
        out.categories
            .push(category_report(chain, subject, category, ex, run_validation)?);
    }
    Ok(out)
}

fn category_report(
    chain: &ChainState,
    subject: Address,
    category: Category,
    ex: Exploration,
    run_validation: bool,
) -> Result<CategoryReport, AnalysisError> {
    let greedy_class = match category {
        Category::Greedy => {
            let program = decode(chain.code(subject).unwrap_or(&[]));
            Some(match greedy_classify(&program, ex.accepts_ether) {
                GreedyClass::CategoryI => "category_i".to_string(),
                GreedyClass::CategoryII => "category_ii".to_string(),
                GreedyClass::NotGreedyCandidate => "not_a_candidate".to_string(),
            })
        }
        _ => None,
    };
    // Greedy flags only when a deposit can get in and nothing lets it out.
    let flagged = match category {
        Category::Greedy => ex.accepts_ether && !ex.release_reachable,
        _ => !ex.candidates.is_empty(),
    };
    let mut candidates = Vec::new();
    for c in &ex.candidates {
        let mut cr = candidate_report(c);
        if run_validation {
            let v = validate(chain, subject, c)?;
            cr.verdict = Some(v.verdict.name().to_string());
            cr.verdict_detail = Some(v.detail);
        }
        candidates.push(cr);
    }
    Ok(CategoryReport {
        category: category.name().to_string(),
        flagged,
        greedy_class,
        candidates,
        exploration: ExplorationReport {
            paths_explored: ex.stats.paths_explored,
            pruned: ex
                .stats
                .pruned
                .iter()
                .map(|(r, n)| (format!("{r:?}"), *n))
                .collect(),
            solver_queries: ex.stats.solver_queries,
            elapsed_s: ex.stats.elapsed.as_secs_f64(),
            budget_hit: ex.stats.budget_hit,
        },
    })
}

fn candidate_report(c: &Candidate) -> CandidateReport {
    CandidateReport {
        attacker: format!("{:#x}", c.attacker),
        messages: c
            .messages
            .iter()
            .map(|m| MessageReport {
                value: m.value.to_string(),
                data: format!("0x{}", hex::encode(&m.data)),
            })
            .collect(),
        flagged_label: c.flagged_label.clone(),
        flagged_at_depth: c.flagged_at_depth,
        path_digest: format!("{:#x}", c.path_digest),
        block_numbers: c.block_numbers.clone(),
        timestamps: c.timestamps.clone(),
        verdict: None,
        verdict_detail: None,
    }
}

/// Totals across a batch of contracts, per category.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub contracts: usize,
    pub flagged: BTreeMap<String, usize>,
    pub true_positives: BTreeMap<String, usize>,
    pub false_positives: BTreeMap<String, usize>,
    pub not_validatable: BTreeMap<String, usize>,
}

impl CorpusSummary {
    pub fn absorb(&mut self, report: &ContractReport) {
        self.contracts += 1;
        for cat in &report.categories {
            if cat.flagged {
                *self.flagged.entry(cat.category.clone()).or_default() += 1;
            }
            for cand in &cat.candidates {
                let bucket = match cand.verdict.as_deref() {
                    Some(v) if v == Verdict::TruePositive.name() => &mut self.true_positives,
                    Some(v) if v == Verdict::FalsePositive.name() => &mut self.false_positives,
                    Some(v) if v == Verdict::NotValidatable.name() => &mut self.not_validatable,
                    _ => continue,
                };
                *bucket.entry(cat.category.clone()).or_default() += 1;
            }
        }
    }
}

pub fn render_text(report: &ContractReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "contract {}", report.address);
    let _ = writeln!(s, "  bytecode {}", report.bytecode_digest);
    for cat in &report.categories {
        let mark = if cat.flagged { "FLAGGED" } else { "clean" };
        let class = cat
            .greedy_class
            .as_deref()
            .map(|c| format!(" ({c})"))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "  {:<9} {mark}{class}  [{} paths, {} queries, {:.2}s]",
            cat.category,
            cat.exploration.paths_explored,
            cat.exploration.solver_queries,
            cat.exploration.elapsed_s,
        );
        for cand in &cat.candidates {
            let verdict = cand.verdict.as_deref().unwrap_or("unvalidated");
            let _ = writeln!(
                s,
                "    depth {}: {} -> {}",
                cand.flagged_at_depth, cand.flagged_label, verdict
            );
            if let Some(d) = &cand.verdict_detail {
                let _ = writeln!(s, "      {d}");
            }
        }
    }
    s
}

/// Funds ready for nobody: code-less accounts holding Ether, with totals.
#[derive(Debug, Serialize, Deserialize)]
pub struct PosthumousReport {
    pub addresses: Vec<String>,
    pub total_wei: String,
}

pub fn scan_posthumous(chain: &ChainState) -> PosthumousReport {
    let addrs = chain.scan_posthumous();
    let total = addrs
        .iter()
        .fold(U256::zero(), |acc, a| acc + chain.balance(*a));
    PosthumousReport {
        addresses: addrs.iter().map(|a| format!("{a:#x}")).collect(),
        total_wei: total.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::Asm;
    use crate::bytecode::Opcode;
    use crate::chainstate::addr;

    fn subject() -> Address {
        addr("0x00000000000000000000000000000000000000c1")
    }

    fn leaky_chain() -> ChainState {
        let code = Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(1u64)
            .op(Opcode::Caller)
            .push(100_000u64)
            .op(Opcode::Call)
            .op(Opcode::Stop)
            .assemble();
        let mut chain = ChainState::default();
        let acct = chain.account_mut(subject());
        acct.code = Some(code);
        acct.balance = U256::from(5u64);
        chain
    }

    #[test]
    fn report_roundtrips_through_json_with_verdicts() {
        let chain = leaky_chain();
        let cfg = AnalysisConfig {
            depth: 1,
            ..AnalysisConfig::default()
        };
        let report =
            analyze_contract(&chain, subject(), &[Category::Prodigal], &cfg, true).unwrap();
        assert!(report.has_findings());
        assert_eq!(report.flagged_categories(), ["prodigal"]);
        let c = &report.categories[0].candidates[0];
        assert_eq!(c.verdict.as_deref(), Some("true_positive"));

        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: ContractReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.address, report.address);
        assert_eq!(back.categories[0].candidates.len(), 1);

        let text = render_text(&report);
        assert!(text.contains("FLAGGED"));
        assert!(text.contains("true_positive"));
    }

    #[test]
    fn summary_counts_verdicts_per_category() {
        let chain = leaky_chain();
        let cfg = AnalysisConfig {
            depth: 1,
            ..AnalysisConfig::default()
        };
        let report =
            analyze_contract(&chain, subject(), &ALL_CATEGORIES, &cfg, true).unwrap();
        let mut summary = CorpusSummary::default();
        summary.absorb(&report);
        assert_eq!(summary.contracts, 1);
        assert_eq!(summary.flagged.get("prodigal"), Some(&1));
        assert_eq!(summary.true_positives.get("prodigal"), Some(&1));
        // The contract releases Ether, so it cannot be greedy.
        assert_eq!(summary.flagged.get("greedy"), None);
    }

    #[test]
    fn posthumous_scan_reports_orphaned_funds() {
        let mut chain = ChainState::default();
        chain
            .account_mut(addr("0x0000000000000000000000000000000000000011"))
            .balance = U256::from(40u64);
        let r = scan_posthumous(&chain);
        assert_eq!(r.addresses.len(), 1);
        assert_eq!(r.total_wei, "40");
    }
}
