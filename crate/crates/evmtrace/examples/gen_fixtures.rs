//! Writes the test corpus to fixtures/: hex bytecode, a chain snapshot,
//! and the expected outcome for each contract. Run from the repo root:
//!
//!     cargo run -p evmtrace --example gen_fixtures

use std::fs;
use std::path::Path;

#[path = "../tests/common/mod.rs"]
mod common;

fn main() -> std::io::Result<()> {
    let root = Path::new("fixtures");
    let bytecode = root.join("bytecode");
    let snapshots = root.join("snapshots");
    let expected = root.join("expected");
    fs::create_dir_all(&bytecode)?;
    fs::create_dir_all(&snapshots)?;
    fs::create_dir_all(&expected)?;

    let mut fixtures = common::corpus();
    fixtures.push(common::endless_counter());
    for f in &fixtures {
        let code = f.chain.code(common::subject()).expect("fixture has code");
        fs::write(bytecode.join(format!("{}.hex", f.name)), hex::encode(code))?;
        f.chain
            .save_snapshot(snapshots.join(format!("{}.json", f.name)))
            .expect("snapshot serialization");
        let verdict = f.expect_verdict.map(|v| v.name());
        let doc = serde_json::json!({
            "fixture": f.name,
            "category": f.category.name(),
            "expect_flagged_at_depth":
                if f.expect_flagged_at_depth == 0 { None } else { Some(f.expect_flagged_at_depth) },
            "expect_verdict": verdict,
        });
        fs::write(
            expected.join(format!("{}.json", f.name)),
            serde_json::to_string_pretty(&doc).unwrap() + "\n",
        )?;
        println!("wrote {}", f.name);
    }
    Ok(())
}
