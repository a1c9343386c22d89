use std::path::PathBuf;
use std::process::ExitCode;

use absadmm::advisor::{advise, estimate_l, spider_preset, svrg_preset, Spectra};
use absadmm::estimator::{estimate_sigma2, OracleTally};
use absadmm::experiment::{build_problem, run_experiment, ExperimentConfig, ProblemConfig};
use absadmm::solver::{stream_rng, Stream};
use absadmm::{load_libsvm, AdmmParams, Error, Method, SolverState};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_ALL_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "absadmm", version, about = "Adaptive batch-size stochastic ADMM experiments")]
struct Cli {
    /// Print the available method names and exit.
    #[arg(long)]
    list_methods: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment grid from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the base seed of the config.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Print problem constants, feasibility and presets as JSON.
    Advise(AdviseArgs),
}

#[derive(Args)]
struct AdviseArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    problem: ProblemKind,
    #[arg(long)]
    d_hint: Option<usize>,
    #[arg(long)]
    scale: bool,
    /// ℓ for fused logistic, ℓ1 for graph-guided.
    #[arg(long, default_value_t = 1e-3)]
    l1: f64,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long, default_value_t = 0.7)]
    corr_threshold: f64,
    #[arg(long, default_value_t = 100.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.8)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    c_tau: f64,
    #[arg(long, default_value_t = 1.0)]
    c_d: f64,
    #[arg(long, default_value_t = 1024)]
    sigma2_samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    FusedLogistic,
    GraphGuided,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::Parse { .. } | Error::Io(_) | Error::Csv(_) | Error::Dimension(_) | Error::RankDeficient(_) => {
            EXIT_DATA
        }
        _ => 1,
    }
}

fn fail(e: Error) -> ExitCode {
    error!("{e}");
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn run(config: PathBuf, out: Option<PathBuf>, seed_override: Option<u64>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(Error::Config(format!("{}: {e}", config.display()))),
    };
    let mut cfg = match ExperimentConfig::from_toml_str(&text) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(s) = seed_override {
        cfg.run.seed = s;
    }
    let Some(out) = out.or_else(|| cfg.output_dir.clone()) else {
        return fail(Error::Config("no output directory: pass --out or set output_dir".into()));
    };
    match run_experiment(&cfg, &out) {
        Ok(summary) => {
            for m in &summary.methods {
                let obj = m.final_objective.as_ref().map_or(f64::NAN, |s| s.mean);
                println!(
                    "{:<16} runs={} diverged={} mean_final_objective={obj:.6e}",
                    m.method.name(),
                    m.runs,
                    m.diverged
                );
            }
            if summary.all_diverged() {
                eprintln!("error: every run diverged");
                ExitCode::from(EXIT_ALL_DIVERGED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(e),
    }
}

fn advise_cmd(a: AdviseArgs) -> Result<serde_json::Value, Error> {
    let mut data = load_libsvm(&a.dataset, a.d_hint)?;
    if a.scale {
        data = data.max_abs_scaled();
    }
    let pc = match a.problem {
        ProblemKind::FusedLogistic => ProblemConfig::FusedLogistic { l: a.l1 },
        ProblemKind::GraphGuided => ProblemConfig::GraphGuided {
            l1: a.l1,
            l2: a.l2,
            corr_threshold: a.corr_threshold,
            constraint_csv_dir: None,
        },
    };
    let p = build_problem(&pc, data)?;
    let x0 = SolverState::initial(&p).x;
    let m = a.sigma2_samples.min(p.n()).max(2);
    let sigma2 = estimate_sigma2(&p, &x0, m, &mut stream_rng(0, Stream::Sigma), &mut OracleTally::default())?;
    let params = AdmmParams::new(a.beta, a.eta, p.constraint.opnorm_ata)?;
    let report = advise(&p, &params, a.c_tau, sigma2, None)?;
    let spectra = Spectra::of(&p);
    let l = estimate_l(&p);
    let svrg = svrg_preset(p.n(), l, &spectra)?;
    let spider = spider_preset(p.n(), l, &spectra, a.c_d)?;
    Ok(serde_json::json!({
        "n": p.n(),
        "d": p.d1(),
        "report": report,
        "spectra": spectra,
        "svrg_preset": svrg,
        "spider_preset": spider,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.list_methods {
        for m in Method::ALL {
            println!("{}", m.name());
        }
        return ExitCode::SUCCESS;
    }
    match cli.cmd {
        Some(Cmd::Run {
            config,
            out,
            seed_override,
        }) => run(config, out, seed_override),
        Some(Cmd::Advise(args)) => match advise_cmd(args) {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        None => {
            eprintln!("nothing to do; see --help");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
