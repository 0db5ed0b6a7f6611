//! Command implementations behind the `biqrank` binary. Each command
//! returns a [`RunReport`] and a process exit code.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::error::BiqError;
use crate::forms::{BiquadraticForm, ChoiVariant};
use crate::gram::{decomposition_from_psd_gram, verify_decomposition, GramSpace, SosDecomposition};
use crate::graphs::{known_z, reiman_bound, zarankiewicz, BipartiteGraph, SearchOptions, DEFAULT_SIZE_LIMIT};
use crate::report::{csv_lines, Cache, RunReport, TOOL_VERSION};
use crate::selftest::{self, CriterionStatus, SelftestOptions};
use crate::sosrank::{
    certify_in_space, default_rank_floor, orthogonality_rank_lower, rank_search_with_certificate, simple_rank_exact,
    SosCertificate, SosConfig, SosStatus,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELF_CHECK: i32 = 2;
pub const EXIT_NOT_SOS: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IO: i32 = 74;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug)]
pub struct GlobalOptions {
    pub seed: u64,
    pub jobs: usize,
    /// Overrides the certification tolerance.
    pub tol: Option<f64>,
    /// `None` disables the cache.
    pub cache: Option<Cache>,
    pub limit: usize,
    pub format: OutputFormat,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            jobs: 1,
            tol: None,
            cache: None,
            limit: DEFAULT_SIZE_LIMIT,
            format: OutputFormat::Json,
        }
    }
}

impl GlobalOptions {
    pub fn sos_config(&self) -> SosConfig {
        let mut cfg = SosConfig {
            seed: self.seed,
            ..SosConfig::default()
        };
        if let Some(tol) = self.tol {
            cfg.cert_tol = tol;
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FormSource {
    Form(PathBuf),
    Graph(PathBuf),
    Choi(ChoiVariant),
}

/// A finished command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub exit_code: i32,
    pub table: Vec<Vec<String>>,
}

impl Outcome {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.report.to_json() + "\n",
            OutputFormat::Csv => csv_lines(&self.table),
        }
    }
}

/// A command that stopped before producing a result.
#[derive(Clone, Debug, PartialEq)]
pub struct CliFailure {
    pub exit_code: i32,
    pub message: String,
}

impl CliFailure {
    fn new(exit_code: i32, message: impl Into<String>) -> Self {
        Self {
            exit_code,
            message: message.into(),
        }
    }

    fn input(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(EXIT_NO_INPUT, format!("{}: {err}", path.display()))
    }

    /// JSON error report for scripts reading stdout.
    pub fn report(&self, command: &str) -> RunReport {
        RunReport {
            command: command.to_string(),
            inputs: Value::Null,
            result: json!({"error": self.message, "exit_code": self.exit_code}),
            elapsed_ms: 0,
            tool_version: TOOL_VERSION.to_string(),
            tolerances: BTreeMap::new(),
            cached: false,
        }
    }
}

impl fmt::Display for CliFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliFailure {}

fn failure_from(err: BiqError) -> CliFailure {
    let code = match err {
        BiqError::SizeLimit { .. } | BiqError::InvalidRank { .. } => EXIT_USAGE,
        BiqError::Io(_) => EXIT_IO,
        _ => EXIT_SOFTWARE,
    };
    CliFailure::new(code, err.to_string())
}

type CliResult<T> = std::result::Result<T, CliFailure>;

fn tolerances(cfg: &SosConfig) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("cert_tol".to_string(), cfg.cert_tol),
        ("cert_margin".to_string(), cfg.cert_margin),
        ("conv_tol".to_string(), cfg.conv_tol),
        ("psd_tol".to_string(), cfg.psd_tol),
        ("residual_tol".to_string(), cfg.residual_tol),
    ])
}

/// Looks the result up in the cache, or computes and stores it.
fn cached_result(
    opts: &GlobalOptions,
    command: &str,
    key_inputs: &Value,
    compute: impl FnOnce() -> CliResult<Value>,
) -> CliResult<(Value, bool)> {
    let Some(cache) = &opts.cache else {
        return Ok((compute()?, false));
    };
    let key = Cache::key(command, key_inputs);
    if let Some(hit) = cache.load(&key) {
        return Ok((hit, true));
    }
    let result = compute()?;
    cache.store(&key, &result).map_err(|e| CliFailure::new(EXIT_IO, format!("cache {}: {e}", cache.dir().display())))?;
    Ok((result, false))
}

fn finish(command: &str, inputs: Value, result: Value, cached: bool, start: Instant, cfg: &SosConfig) -> RunReport {
    RunReport {
        command: command.to_string(),
        inputs,
        result,
        elapsed_ms: start.elapsed().as_millis() as u64,
        tool_version: TOOL_VERSION.to_string(),
        tolerances: tolerances(cfg),
        cached,
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `biqrank z <m> <n>`
pub fn cmd_z(m: usize, n: usize, opts: &GlobalOptions) -> CliResult<Outcome> {
    let start = Instant::now();
    let search = SearchOptions {
        limit: opts.limit,
        jobs: opts.jobs.max(1),
        symmetry_breaking: false,
    };
    if m == 0 || n == 0 || m > opts.limit || n > opts.limit {
        return Err(failure_from(BiqError::SizeLimit { m, n, limit: opts.limit }));
    }
    let inputs = json!({"m": m, "n": n, "jobs": search.jobs});
    let (result, cached) = cached_result(opts, "z", &inputs, || {
        let r = zarankiewicz(m, n, &search).map_err(failure_from)?;
        Ok(json!({
            "m": m,
            "n": n,
            "z": r.z,
            "witness": r.witness.to_file(),
            "reiman_bound": reiman_bound(m, n),
            "known": known_z(m, n),
            "nodes": r.nodes_explored,
        }))
    })?;
    let exit_code = match (result["known"].as_u64(), result["z"].as_u64()) {
        (Some(k), Some(z)) if k != z => EXIT_SELF_CHECK,
        _ => EXIT_OK,
    };
    let table = vec![
        ["m", "n", "z", "reiman_bound", "known", "nodes"].map(String::from).to_vec(),
        ["m", "n", "z", "reiman_bound", "known", "nodes"].map(|k| cell(&result[k])).to_vec(),
    ];
    let report = finish("z", inputs, result, cached, start, &opts.sos_config());
    Ok(Outcome {
        report,
        exit_code,
        table,
    })
}

struct LoadedForm {
    form: BiquadraticForm,
    graph: Option<BipartiteGraph>,
    source: Value,
}

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliFailure::input(path, e))
}

fn load_graph(path: &Path) -> CliResult<BipartiteGraph> {
    BipartiteGraph::from_json(&read_input(path)?).map_err(|e| CliFailure::input(path, e))
}

fn load_form(source: &FormSource) -> CliResult<LoadedForm> {
    Ok(match source {
        FormSource::Form(path) => LoadedForm {
            form: BiquadraticForm::from_json(&read_input(path)?).map_err(|e| CliFailure::input(path, e))?,
            graph: None,
            source: json!({"kind": "form", "path": path}),
        },
        FormSource::Graph(path) => {
            let graph = load_graph(path)?;
            LoadedForm {
                form: BiquadraticForm::from_graph(&graph).map_err(|e| CliFailure::input(path, e))?,
                source: json!({"kind": "graph", "path": path, "graph": graph.to_file()}),
                graph: Some(graph),
            }
        }
        FormSource::Choi(variant) => LoadedForm {
            form: BiquadraticForm::choi(*variant),
            graph: None,
            source: json!({"kind": "choi", "variant": variant}),
        },
    })
}

/// Key material: the parsed content, never the path.
fn key_inputs(loaded: &LoadedForm, cfg: &SosConfig, extra: Value) -> Value {
    json!({"form": loaded.form.to_file(), "config": cfg, "extra": extra})
}

fn decomposition_value(d: &SosDecomposition, residual: f64) -> Value {
    serde_json::to_value(d.report(residual)).expect("reports serialize")
}

fn status_exit(status: &str) -> i32 {
    match status {
        "SOS" => EXIT_OK,
        "NOT_SOS" => EXIT_NOT_SOS,
        _ => EXIT_INCONCLUSIVE,
    }
}

/// Orthogonality lower bound when the form is simple with a 4-cycle-free graph.
fn lower_bound(form: &BiquadraticForm, d: &SosDecomposition) -> CliResult<Option<usize>> {
    match orthogonality_rank_lower(form, d) {
        Ok(r) => Ok(Some(r)),
        Err(BiqError::NotSimpleForm(_)) | Err(BiqError::NotC4Free) | Err(BiqError::InvalidDecomposition(_)) => Ok(None),
        Err(e) => Err(failure_from(e)),
    }
}

fn certificate_value(form: &BiquadraticForm, cert: &SosCertificate, cfg: &SosConfig) -> CliResult<Value> {
    // an SOS witness factors into rank(witness) squares, an upper bound
    let (rank_upper, rank_lower, decomposition) = if cert.status == SosStatus::Sos {
        match decomposition_from_psd_gram(form.m(), form.n(), &cert.witness, cfg.psd_tol) {
            Ok(d) => {
                let residual = verify_decomposition(form, &d).map_err(failure_from)?;
                if residual <= cfg.residual_tol {
                    let lower = lower_bound(form, &d)?;
                    (Some(d.len()), lower, Some(decomposition_value(&d, residual)))
                } else {
                    (None, None, None)
                }
            }
            Err(BiqError::NotPsd { .. }) => (None, None, None),
            Err(e) => return Err(failure_from(e)),
        }
    } else {
        (None, None, None)
    };
    Ok(json!({
        "status": cert.status,
        "lambda_star": cert.lambda_star,
        "gamma": cert.gamma_star,
        "dual_bound": cert.dual_bound,
        "iterations": cert.iterations,
        "converged": cert.converged,
        "witness": cert.witness,
        "rank_upper": rank_upper,
        "rank_lower": rank_lower,
        "decomposition": decomposition,
        "tolerances": tolerances(cfg),
    }))
}

/// `biqrank certify (--form F | --graph G | --choi V)`
pub fn cmd_certify(source: &FormSource, opts: &GlobalOptions) -> CliResult<Outcome> {
    let start = Instant::now();
    let cfg = opts.sos_config();
    let loaded = load_form(source)?;
    let inputs = json!({"source": loaded.source, "m": loaded.form.m(), "n": loaded.form.n(), "config": cfg});
    let key = key_inputs(&loaded, &cfg, Value::Null);
    let (result, cached) = cached_result(opts, "certify", &key, || {
        let space = GramSpace::new(&loaded.form);
        let cert = certify_in_space(&space, &cfg).map_err(failure_from)?;
        certificate_value(&loaded.form, &cert, &cfg)
    })?;
    let exit_code = status_exit(result["status"].as_str().unwrap_or(""));
    let cols = ["status", "lambda_star", "dual_bound", "rank_upper", "rank_lower"];
    let table = vec![cols.map(String::from).to_vec(), cols.map(|k| cell(&result[k])).to_vec()];
    Ok(Outcome {
        report: finish("certify", inputs, result, cached, start, &cfg),
        exit_code,
        table,
    })
}

/// `biqrank sosrank (--form F | --graph G | --choi V) [--r-min R] [--r-max R]`
pub fn cmd_sosrank(source: &FormSource, r_min: Option<usize>, r_max: Option<usize>, opts: &GlobalOptions) -> CliResult<Outcome> {
    let start = Instant::now();
    let cfg = opts.sos_config();
    let loaded = load_form(source)?;
    let dim = loaded.form.m() * loaded.form.n();
    let r_max = r_max.unwrap_or(dim);
    let r_min = r_min.unwrap_or_else(|| default_rank_floor(&loaded.form).min(r_max));
    if !loaded.form.is_zero() && (r_min == 0 || r_min > r_max || r_max > dim) {
        return Err(CliFailure::new(
            EXIT_USAGE,
            format!("rank range {r_min}..={r_max} must satisfy 1 <= r_min <= r_max <= {dim}"),
        ));
    }
    let inputs = json!({
        "source": loaded.source,
        "m": loaded.form.m(),
        "n": loaded.form.n(),
        "r_min": r_min,
        "r_max": r_max,
        "config": cfg,
    });
    let key = key_inputs(&loaded, &cfg, json!({"r_min": r_min, "r_max": r_max, "graph": loaded.graph.as_ref().map(|g| g.to_file())}));
    let (result, cached) = cached_result(opts, "sosrank", &key, || sosrank_value(&loaded, r_min, r_max, &cfg))?;
    let exit_code = match result["status"].as_str() {
        Some("SOS") if result["rank_upper"].is_null() => EXIT_INCONCLUSIVE,
        Some(s) => status_exit(s),
        None => EXIT_INCONCLUSIVE,
    };
    let mut table = vec![["rank", "converged", "starts_tried", "best_gap", "iterations"].map(String::from).to_vec()];
    if let Some(attempts) = result["attempts"].as_array() {
        for a in attempts {
            table.push(["rank", "converged", "starts_tried", "best_gap", "iterations"].map(|k| cell(&a[k])).to_vec());
        }
    }
    Ok(Outcome {
        report: finish("sosrank", inputs, result, cached, start, &cfg),
        exit_code,
        table,
    })
}

fn sosrank_value(loaded: &LoadedForm, r_min: usize, r_max: usize, cfg: &SosConfig) -> CliResult<Value> {
    let form = &loaded.form;
    let space = GramSpace::new(form);
    let cert = certify_in_space(&space, cfg).map_err(failure_from)?;
    let theorem_rank = match &loaded.graph {
        Some(g) if g.is_c4_free() => Some(simple_rank_exact(g).map_err(failure_from)?),
        _ => None,
    };
    let mut value = json!({
        "status": cert.status,
        "lambda_star": cert.lambda_star,
        "gamma": cert.gamma_star,
        "dual_bound": cert.dual_bound,
        "rank_upper": null,
        "rank_lower": null,
        "exact": false,
        "theorem_rank": theorem_rank,
        "decomposition": null,
        "attempts": [],
        "restarts_used": null,
        "tolerances": tolerances(cfg),
    });
    if cert.status != SosStatus::Sos {
        value["explanation"] = json!(format!(
            "no PSD Gram matrix found (lambda_star = {:e}); SOS rank is undefined for forms that are not SOS",
            cert.lambda_star
        ));
        return Ok(value);
    }
    match rank_search_with_certificate(form, &space, &cert, r_min, r_max, cfg) {
        Ok(res) => {
            value["rank_upper"] = json!(res.r_upper);
            value["rank_lower"] = json!(res.r_lower);
            value["exact"] = json!(res.r_lower == Some(res.r_upper));
            value["decomposition"] = decomposition_value(&res.decomposition, res.residual);
            value["attempts"] = serde_json::to_value(&res.attempts).expect("attempts serialize");
            value["restarts_used"] = json!(res.restarts_used);
        }
        Err(BiqError::RankSearchFailed { .. }) => {
            value["explanation"] = json!(format!("alternating projections did not converge for any rank in {r_min}..={r_max}"));
        }
        Err(e) => return Err(failure_from(e)),
    }
    Ok(value)
}

/// `biqrank graph-form <G> <out>`
pub fn cmd_graph_form(graph_path: &Path, out_path: &Path, opts: &GlobalOptions) -> CliResult<Outcome> {
    let start = Instant::now();
    let graph = load_graph(graph_path)?;
    let form = BiquadraticForm::from_graph(&graph).map_err(|e| CliFailure::input(graph_path, e))?;
    let file = form.to_file();
    let text = serde_json::to_string_pretty(&file).expect("forms serialize") + "\n";
    fs::write(out_path, text).map_err(|e| CliFailure::new(EXIT_IO, format!("{}: {e}", out_path.display())))?;
    let result = json!({
        "m": graph.m(),
        "n": graph.n(),
        "edges": graph.num_edges(),
        "entries": file.entries.len(),
        "c4_free": graph.is_c4_free(),
        "out": out_path,
    });
    let cols = ["m", "n", "edges", "entries", "c4_free"];
    let table = vec![cols.map(String::from).to_vec(), cols.map(|k| cell(&result[k])).to_vec()];
    let inputs = json!({"graph": graph_path, "out": out_path});
    Ok(Outcome {
        report: finish("graph-form", inputs, result, false, start, &opts.sos_config()),
        exit_code: EXIT_OK,
        table,
    })
}

/// `biqrank selftest [--skip-extended]`
pub fn cmd_selftest(skip_extended: bool, opts: &GlobalOptions) -> CliResult<Outcome> {
    let start = Instant::now();
    let cfg = opts.sos_config();
    let st = SelftestOptions {
        cfg: cfg.clone(),
        jobs: opts.jobs.max(1),
        skip_extended,
    };
    let outcomes = selftest::run_all(&st);
    let count = |s: CriterionStatus| outcomes.iter().filter(|o| o.status == s).count();
    let failed = count(CriterionStatus::Fail);
    let result = json!({
        "criteria": outcomes,
        "passed": count(CriterionStatus::Pass),
        "failed": failed,
        "skipped": count(CriterionStatus::Skipped),
    });
    let mut table = vec![["criterion", "status", "elapsed_ms", "title", "detail"].map(String::from).to_vec()];
    for o in &outcomes {
        table.push(vec![
            o.id.to_string(),
            o.status.to_string(),
            o.elapsed_ms.to_string(),
            o.title.clone(),
            o.detail.clone(),
        ]);
    }
    let inputs = json!({"seed": opts.seed, "skip_extended": skip_extended, "jobs": st.jobs});
    Ok(Outcome {
        report: finish("selftest", inputs, result, false, start, &cfg),
        exit_code: if failed == 0 { EXIT_OK } else { EXIT_SELF_CHECK },
        table,
    })
}
