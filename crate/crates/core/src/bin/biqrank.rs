use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use biqrank::cli::{
    cmd_certify, cmd_graph_form, cmd_selftest, cmd_sosrank, cmd_z, CliFailure, FormSource, GlobalOptions, OutputFormat,
    EXIT_IO, EXIT_USAGE,
};
use biqrank::graphs::DEFAULT_SIZE_LIMIT;
use biqrank::report::Cache;
use biqrank::ChoiVariant;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// SOS certification and SOS-rank bounds for biquadratic forms, and exact
/// Zarankiewicz numbers.
#[derive(Parser, Debug)]
#[command(name = "biqrank", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for every randomized step
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads for the graph search
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Certification tolerance on the smallest Gram eigenvalue
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Result cache directory [env: BIQRANK_CACHE_DIR] [default: ./.biqrank-cache]
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Disable the result cache
    #[arg(long, global = true)]
    no_cache: bool,
    /// Largest part size accepted by `z`
    #[arg(long, global = true, default_value_t = DEFAULT_SIZE_LIMIT)]
    limit: usize,
    /// Emit the JSON report (default)
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit a CSV table instead of the JSON report
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact Zarankiewicz number z(m, n) with an extremal witness
    Z { m: usize, n: usize },
    /// Decide whether a form is a sum of squares
    Certify(Source),
    /// Bound the SOS rank of a form
    Sosrank {
        #[command(flatten)]
        source: Source,
        /// First rank cap to try
        #[arg(long)]
        r_min: Option<usize>,
        /// Last rank cap to try
        #[arg(long)]
        r_max: Option<usize>,
    },
    /// Write the simple form of a bipartite graph
    GraphForm { graph: PathBuf, out: PathBuf },
    /// Run the acceptance checks
    Selftest {
        /// Skip checks that may take minutes
        #[arg(long)]
        skip_extended: bool,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// Form file
    #[arg(long)]
    form: Option<PathBuf>,
    /// Graph file; the form is the sum of x_i^2 y_j^2 over its edges
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Built-in Choi form
    #[arg(long, value_enum)]
    choi: Option<Choi>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Choi {
    Classical,
    Printed,
}

impl Source {
    fn resolve(self) -> FormSource {
        match (self.form, self.graph, self.choi) {
            (Some(f), _, _) => FormSource::Form(f),
            (_, Some(g), _) => FormSource::Graph(g),
            (_, _, Some(Choi::Classical)) => FormSource::Choi(ChoiVariant::Classical),
            (_, _, Some(Choi::Printed)) => FormSource::Choi(ChoiVariant::Printed),
            _ => unreachable!("clap requires one source"),
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Z { .. } => "z",
        Command::Certify(_) => "certify",
        Command::Sosrank { .. } => "sosrank",
        Command::GraphForm { .. } => "graph-form",
        Command::Selftest { .. } => "selftest",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let g = cli.global;
    let format = if g.csv { OutputFormat::Csv } else { OutputFormat::Json };
    let opts = GlobalOptions {
        seed: g.seed,
        jobs: g.jobs,
        tol: g.tol,
        cache: (!g.no_cache).then(|| Cache::resolve(g.cache_dir.as_deref())),
        limit: g.limit,
        format,
    };
    let name = command_name(&cli.command);
    let outcome = match cli.command {
        Command::Z { m, n } => cmd_z(m, n, &opts),
        Command::Certify(source) => cmd_certify(&source.resolve(), &opts),
        Command::Sosrank { source, r_min, r_max } => cmd_sosrank(&source.resolve(), r_min, r_max, &opts),
        Command::GraphForm { graph, out } => cmd_graph_form(&graph, &out, &opts),
        Command::Selftest { skip_extended } => cmd_selftest(skip_extended, &opts),
    };
    let (text, code) = match outcome {
        Ok(o) => (o.render(format), o.exit_code),
        Err(e) => {
            eprintln!("biqrank {name}: {e}");
            (report_failure(name, &e, format), e.exit_code)
        }
    };
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
        return ExitCode::from(EXIT_IO as u8);
    }
    ExitCode::from(code as u8)
}

fn report_failure(name: &str, e: &CliFailure, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => e.report(name).to_json() + "\n",
        OutputFormat::Csv => String::new(),
    }
}
