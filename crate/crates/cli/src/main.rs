use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dpxplain_cli::experiment::{self, ExperimentSpec, Point, Workload};
use dpxplain_cli::syntax::{parse_query, parse_question};
use dpxplain_cli::transcript::{run_transcript, Backend, LocalBackend, RemoteBackend, RunParams};
use dpxplain_core::data::{Dataset, Schema};
use dpxplain_core::session::Phase3Request;
use dpxplain_core::synth::SynthSpec;
use dpxplain_service::Registry;

#[derive(Parser)]
#[command(name = "dpxplain", version, about = "Private explanations for group-by query answers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the three phases once and print the transcript.
    Run(RunArgs),
    /// Write a synthetic dataset with planted explanations.
    Synth(SynthArgs),
    /// Monte-Carlo experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, requires = "schema")]
    data: Option<PathBuf>,
    /// JSON schema sidecar.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Rows of the synthetic dataset used when --data is absent.
    #[arg(long, default_value_t = 1000)]
    rows: usize,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<(String, Arc<Schema>, Arc<Dataset>)> {
        match (&self.data, &self.schema) {
            (Some(d), Some(s)) => {
                let schema = Arc::new(
                    Schema::from_json(&read(s)?).with_context(|| format!("schema {}", s.display()))?,
                );
                let csv = read(d)?;
                let data = Dataset::from_csv(schema.clone(), csv.as_bytes())
                    .with_context(|| format!("data {}", d.display()))?;
                Ok((csv, schema, Arc::new(data)))
            }
            _ => {
                let data = SynthSpec::with_rows(self.rows, seed).generate()?;
                Ok((data.to_csv(), data.schema().clone(), Arc::new(data)))
            }
        }
    }
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "AVG(y) BY grp")]
    query: String,
    #[arg(long, default_value = "g0 > g1")]
    question: String,
    /// Total budget of the session; defaults to the sum of the four parts.
    #[arg(long)]
    rho_total: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    rho_query: f64,
    #[arg(long, default_value_t = 0.5)]
    rho_topk: f64,
    #[arg(long, default_value_t = 0.5)]
    rho_influ: f64,
    #[arg(long, default_value_t = 1.0)]
    rho_rank: f64,
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Noise seed; random when unset.
    #[arg(long, env = "DPXPLAIN_SEED")]
    seed: Option<u64>,
    /// Base URL of a running service; runs locally when unset.
    #[arg(long)]
    server: Option<String>,
    /// Also write the transcript to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, env = "DPXPLAIN_SEED", default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when unset.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the schema sidecar.
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

#[derive(Args)]
struct CommonExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "SUM(y) BY grp")]
    query: String,
    #[arg(long, default_value = "g0 > g1")]
    question: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, env = "DPXPLAIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Directory for the CSV report and its summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Coverage of question, influence and rank intervals.
    Coverage {
        #[command(flatten)]
        common: CommonExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        rho_query: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.95")]
        gamma: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        rho_topk: f64,
        #[arg(long, default_value_t = 0.5)]
        rho_influ: f64,
        #[arg(long, default_value_t = 1.0)]
        rho_rank: f64,
    },
    /// Precision@k of the private top-k selection.
    Precision {
        #[command(flatten)]
        common: CommonExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        rho_topk: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "5")]
        k: Vec<usize>,
    },
    /// Widths of the explanation-table intervals.
    Ciwidth {
        #[command(flatten)]
        common: CommonExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        rho_influ: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1.0")]
        rho_rank: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Storage root for datasets and session logs; in memory when unset.
    #[arg(long)]
    store: Option<PathBuf>,
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let seed = a.seed.unwrap_or_else(rand::random);
    let (csv, schema, data) = a.data.load(seed)?;
    let phase3 = Phase3Request {
        k: a.k,
        gamma: a.gamma,
        rho_topk: a.rho_topk,
        rho_influ: a.rho_influ,
        rho_rank: a.rho_rank,
        l: a.l,
        eta: a.eta,
    };
    let params = RunParams {
        query: parse_query(&a.query)?,
        question: parse_question(&a.question)?,
        rho_query: a.rho_query,
        gamma: a.gamma,
        phase3,
    };
    let total = a.rho_total.unwrap_or(a.rho_query + phase3.total_rho());
    let mut backend: Box<dyn Backend> = match &a.server {
        Some(url) => Box::new(RemoteBackend::connect(url, &csv, &schema, total, seed)?),
        None => Box::new(LocalBackend::new(data, total, seed)?),
    };
    let t = run_transcript(backend.as_mut(), &params);
    print!("{}", t.text);
    if let Some(out) = &a.out {
        std::fs::write(out, &t.text).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(if t.error.is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_synth(a: SynthArgs) -> Result<ExitCode> {
    let spec = SynthSpec::with_rows(a.rows, a.seed);
    let data = spec.generate()?;
    match &a.out {
        Some(p) => std::fs::write(p, data.to_csv())?,
        None => print!("{}", data.to_csv()),
    }
    if let Some(p) = &a.schema_out {
        std::fs::write(p, data.schema().to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn workload(c: &CommonExperimentArgs) -> Result<Workload> {
    let (_, _, data) = c.data.load(c.seed)?;
    Ok(Workload {
        data,
        query: parse_query(&c.query)?,
        question: parse_question(&c.question)?,
    })
}

fn spec(c: &CommonExperimentArgs, base: Point) -> ExperimentSpec {
    ExperimentSpec {
        reps: c.reps,
        seed: c.seed,
        l: c.l,
        base,
    }
}

fn cmd_experiment(e: ExperimentCommand) -> Result<ExitCode> {
    let base = Point {
        rho_query: 0.1,
        gamma: 0.95,
        k: 5,
        rho_topk: 0.5,
        rho_influ: 0.5,
        rho_rank: 1.0,
        eta: 0.1,
    };
    let (report, out) = match e {
        ExperimentCommand::Coverage {
            common,
            rho_query,
            gamma,
            k,
            rho_topk,
            rho_influ,
            rho_rank,
        } => {
            let base = Point {
                k,
                rho_topk,
                rho_influ,
                rho_rank,
                eta: common.eta,
                ..base
            };
            let w = workload(&common)?;
            (experiment::coverage(&w, &spec(&common, base), &rho_query, &gamma)?, common.out)
        }
        ExperimentCommand::Precision { common, rho_topk, k } => {
            let w = workload(&common)?;
            let base = Point { eta: common.eta, ..base };
            (experiment::precision(&w, &spec(&common, base), &rho_topk, &k)?, common.out)
        }
        ExperimentCommand::Ciwidth {
            common,
            rho_influ,
            rho_rank,
            k,
            gamma,
        } => {
            let w = workload(&common)?;
            let base = Point {
                k,
                gamma,
                eta: common.eta,
                ..base
            };
            (experiment::ciwidth(&w, &spec(&common, base), &rho_influ, &rho_rank)?, common.out)
        }
    };
    print!("{}", report.summary());
    if let Some(dir) = out {
        report.write(&dir)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(a: ServeArgs) -> Result<ExitCode> {
    let registry = Arc::new(match &a.store {
        Some(root) => Registry::open(root)?,
        None => Registry::in_memory(),
    });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        dpxplain_service::serve(listener, registry).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Experiment(e) => cmd_experiment(e),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
