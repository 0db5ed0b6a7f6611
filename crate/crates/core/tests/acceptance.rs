//! Acceptance suite: one line per criterion, then a summary.
//!
//! Criterion 2 asks for `z(6,4) = 13`. Exhaustive enumeration, the
//! column-pair counting bound and the branch-and-bound search all give 12,
//! so that line reports FAIL. The process still exits 0 as long as the
//! three computations agree on 12; any other failure exits 1.

use std::path::Path;
use std::process::ExitCode;

use biqrank::cli::{cmd_certify, cmd_sosrank, cmd_z, FormSource, GlobalOptions, EXIT_NOT_SOS, EXIT_OK};
use biqrank::graphs::{hexagon_3x3, paper_graph_4x3, zarankiewicz, SearchOptions};
use biqrank::oracle::{brute_force_z, pair_counting_bound};
use biqrank::selftest::{run_all, CriterionOutcome, CriterionStatus, SelftestOptions, PROJECTIVE_CLAIM, Z_TABLE};
use biqrank::{BipartiteGraph, ChoiVariant};

type Check = Result<String, String>;

fn write_graph(dir: &Path, name: &str, g: &BipartiteGraph) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, g.to_json()).expect("temp file");
    p
}

fn cli_table() -> Check {
    let opts = GlobalOptions::default();
    for &(m, n, z) in &Z_TABLE {
        let out = cmd_z(m, n, &opts).map_err(|e| e.message)?;
        let got = out.report.result["z"].as_u64();
        if out.exit_code != EXIT_OK || got != Some(z as u64) {
            return Err(format!("biqrank z {m} {n} gave {got:?} exit {}", out.exit_code));
        }
    }
    Ok("cli z agrees".into())
}

fn cli_rank(dir: &Path, name: &str, g: &BipartiteGraph, rank: u64) -> Check {
    let path = write_graph(dir, name, g);
    let out = cmd_sosrank(&FormSource::Graph(path), None, None, &GlobalOptions::default()).map_err(|e| e.message)?;
    let r = &out.report.result;
    let ok = out.exit_code == EXIT_OK
        && r["exact"] == true
        && r["rank_upper"].as_u64() == Some(rank)
        && r["rank_lower"].as_u64() == Some(rank);
    if ok {
        Ok(format!("cli sosrank exact {rank}"))
    } else {
        Err(format!("cli sosrank gave upper {} lower {} exact {}", r["rank_upper"], r["rank_lower"], r["exact"]))
    }
}

fn cli_choi() -> Check {
    for seed in 1..=10 {
        let opts = GlobalOptions {
            seed,
            ..GlobalOptions::default()
        };
        let out = cmd_certify(&FormSource::Choi(ChoiVariant::Classical), &opts).map_err(|e| e.message)?;
        let lambda = out.report.result["lambda_star"].as_f64().unwrap_or(f64::NAN);
        if out.exit_code != EXIT_NOT_SOS || lambda.is_nan() || lambda > -1e-3 {
            return Err(format!("cli certify seed {seed}: exit {} lambda_star {lambda}", out.exit_code));
        }
    }
    Ok("cli certify exits 3 for seeds 1..=10".into())
}

/// The only tolerated failure: every independent computation agrees that
/// the stated value is one too high.
fn projective_deviation_confirmed() -> Check {
    let (m, n, claim) = PROJECTIVE_CLAIM;
    let search = zarankiewicz(m, n, &SearchOptions::default()).map_err(|e| e.to_string())?.z;
    let brute = brute_force_z(m, n);
    let bound = pair_counting_bound(m, n);
    if search == brute && brute == bound && bound + 1 == claim {
        Ok(format!("search, enumeration and counting bound all give {search}"))
    } else {
        Err(format!("search {search}, enumeration {brute}, counting bound {bound}"))
    }
}

fn merge(outcome: &mut CriterionOutcome, extra: Check) {
    match extra {
        Ok(d) => outcome.detail = format!("{}; {d}", outcome.detail),
        Err(d) => {
            outcome.status = CriterionStatus::Fail;
            outcome.detail = format!("{}; {d}", outcome.detail);
        }
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut outcomes = run_all(&SelftestOptions::default());
    let mut tolerated = Vec::new();
    for o in &mut outcomes {
        match o.id {
            1 => merge(o, cli_table()),
            2 if o.status == CriterionStatus::Fail => match projective_deviation_confirmed() {
                Ok(d) => {
                    o.detail = format!("{}; known deviation: {d}", o.detail);
                    tolerated.push(o.id);
                }
                Err(d) => o.detail = format!("{}; deviation not confirmed: {d}", o.detail),
            },
            4 => merge(o, cli_rank(dir.path(), "g43.json", &paper_graph_4x3(), 7)),
            5 => merge(o, cli_rank(dir.path(), "hex.json", &hexagon_3x3(), 6)),
            6 => merge(o, cli_choi()),
            _ => {}
        }
        println!("{o}");
    }
    let unexpected: Vec<u8> = outcomes
        .iter()
        .filter(|o| o.status != CriterionStatus::Pass && !tolerated.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let passed = outcomes.iter().filter(|o| o.status == CriterionStatus::Pass).count();
    println!(
        "acceptance: {passed}/{} pass, known deviations {tolerated:?}, unexpected failures {unexpected:?}",
        outcomes.len()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
