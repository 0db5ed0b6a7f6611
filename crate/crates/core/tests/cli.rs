use std::path::Path;
use std::process::{Command, Output};

use biqrank::graphs::{hexagon_3x3, BipartiteGraph};
use serde_json::Value;

fn biqrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biqrank"))
        .args(args)
        .env_remove("BIQRANK_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write_graph(dir: &Path, name: &str, g: &BipartiteGraph) -> String {
    let p = dir.join(name);
    std::fs::write(&p, g.to_json()).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn z_reports_value_and_witness() {
    let out = biqrank(&["--no-cache", "z", "3", "3"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["command"], "z");
    assert_eq!(r["result"]["z"], 6);
    assert_eq!(r["result"]["witness"]["edges"].as_array().unwrap().len(), 6);
    assert_eq!(r["cached"], false);
}

#[test]
fn csv_output_is_a_table() {
    let out = biqrank(&["--no-cache", "--csv", "z", "3", "4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("m,n,z"));
    assert!(lines[1].starts_with("3,4,7,"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&biqrank(&["z", "3"])), 64);
    assert_eq!(code(&biqrank(&["certify"])), 64);
    assert_eq!(code(&biqrank(&["certify", "--choi", "classical", "--form", "f.json"])), 64);
    let out = biqrank(&["--no-cache", "--limit", "3", "z", "6", "4"]);
    assert_eq!(code(&out), 64);
    assert_eq!(report(&out)["result"]["exit_code"], 64);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&biqrank(&["--help"])), 0);
    assert_eq!(code(&biqrank(&["--version"])), 0);
}

#[test]
fn choi_exits_3() {
    let out = biqrank(&["--no-cache", "certify", "--choi", "classical"]);
    assert_eq!(code(&out), 3);
    let r = report(&out);
    assert_eq!(r["result"]["status"], "NOT_SOS");
    assert!(r["result"]["lambda_star"].as_f64().unwrap() <= -1e-3);
}

#[test]
fn bad_input_exits_66() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&biqrank(&["--no-cache", "certify", "--form", missing.to_str().unwrap()])), 66);

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"m\": 2, ").unwrap();
    assert_eq!(code(&biqrank(&["--no-cache", "certify", "--form", broken.to_str().unwrap()])), 66);
    assert_eq!(code(&biqrank(&["--no-cache", "sosrank", "--graph", broken.to_str().unwrap()])), 66);
}

#[test]
fn unwritable_output_exits_74() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "hex.json", &hexagon_3x3());
    let out = dir.path().join("no-such-dir").join("form.json");
    assert_eq!(code(&biqrank(&["--no-cache", "graph-form", &g, out.to_str().unwrap()])), 74);
}

#[test]
fn graph_form_then_certify_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "hex.json", &hexagon_3x3());
    let f = dir.path().join("hex-form.json");
    let f = f.to_str().unwrap();
    assert_eq!(code(&biqrank(&["--no-cache", "graph-form", &g, f])), 0);

    let out = biqrank(&["--no-cache", "certify", "--form", f]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["result"]["status"], "SOS");

    let out = biqrank(&["--no-cache", "sosrank", "--graph", &g]);
    assert_eq!(code(&out), 0);
    let r = report(&out)["result"].clone();
    assert_eq!(r["exact"], true);
    assert_eq!(r["rank_upper"], 6);
    assert_eq!(r["rank_lower"], 6);
}

#[test]
fn four_cycle_rank_is_not_exact() {
    let dir = tempfile::tempdir().unwrap();
    let c4 = BipartiteGraph::complete(2, 2).unwrap();
    let g = write_graph(dir.path(), "c4.json", &c4);
    let out = biqrank(&["--no-cache", "sosrank", "--graph", &g]);
    assert_eq!(code(&out), 0);
    let r = report(&out)["result"].clone();
    assert_eq!(r["exact"], false);
    assert!(r["rank_lower"].is_null());
    assert!(r["rank_upper"].as_u64().unwrap() <= 4);
}

#[test]
fn cache_hit_reproduces_payload() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cache = cache.to_str().unwrap();
    let first = biqrank(&["--cache-dir", cache, "z", "4", "4"]);
    let second = biqrank(&["--cache-dir", cache, "z", "4", "4"]);
    assert_eq!(code(&first), 0);
    assert_eq!(code(&second), 0);
    let (a, b) = (report(&first), report(&second));
    assert_eq!(a["cached"], false);
    assert_eq!(b["cached"], true);
    assert_eq!(serde_json::to_string(&a["result"]).unwrap(), serde_json::to_string(&b["result"]).unwrap());
    assert_eq!(std::fs::read_dir(cache).unwrap().count(), 1);

    let other_seed = biqrank(&["--cache-dir", cache, "--seed", "7", "certify", "--choi", "classical"]);
    assert_eq!(code(&other_seed), 3);
    assert_eq!(std::fs::read_dir(cache).unwrap().count(), 2);
}

#[test]
fn cache_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_biqrank"))
        .args(["z", "2", "3"])
        .env("BIQRANK_CACHE_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}
