//! Config-driven experiment grids: (method × repeat) runs with traces on disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{AdmmParams, SolverState};
use crate::advisor::{advise, AdvisorReport};
use crate::data::{load_libsvm, split_half, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{estimate_sigma2, OracleTally};
use crate::problem::{
    build_fused_logistic, build_graph_guided, build_graph_guided_with, read_matrix_csv,
    ProblemInstance,
};
use crate::schedule::SchedulerParams;
use crate::solver::{solve_with, stream_rng, Family, Method, RunHooks, SolverConfig, Stream, TraceRecord};
use crate::synthetic::{synthetic_classification, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        d_hint: Option<usize>,
        /// Rescale each feature to `[-1, 1]` by its max magnitude.
        #[serde(default)]
        scale: bool,
    },
    Synthetic {
        spec: SyntheticSpec,
        #[serde(default)]
        data_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    FusedLogistic {
        l: f64,
    },
    GraphGuided {
        l1: f64,
        l2: f64,
        #[serde(default = "default_corr")]
        corr_threshold: f64,
        /// Directory with `A.csv`; replaces the correlation graph.
        #[serde(default)]
        constraint_csv_dir: Option<PathBuf>,
    },
}

fn default_corr() -> f64 {
    crate::problem::DEFAULT_CORR_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    pub max_iters: usize,
    #[serde(default)]
    pub oracle_budget: Option<u64>,
    #[serde(default)]
    pub eval_stride: usize,
    #[serde(default)]
    pub target_epsilon: Option<f64>,
    /// Fixed `σ²`; estimated at `x₀` when absent.
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default = "default_sigma_samples")]
    pub sigma2_samples: usize,
    pub epsilon: f64,
    pub c_eps: f64,
    #[serde(default)]
    pub tau_init: f64,
    /// Train on a random half and report the objective on the other half.
    #[serde(default = "default_true")]
    pub split: bool,
}

fn default_repeats() -> usize {
    5
}

fn default_sigma_samples() -> usize {
    1024
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    pub beta: f64,
    pub eta: f64,
    /// Proximal weight; `βη‖AᵀA‖ + 1` when absent.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "default_one")]
    pub c_tau: f64,
    #[serde(default)]
    pub c_eps: Option<f64>,
    #[serde(default = "default_one_usize")]
    pub inner_batch: usize,
    #[serde(default = "default_one_usize")]
    pub epoch_len: usize,
    #[serde(default = "default_one_usize")]
    pub spider_q: usize,
}

fn default_one() -> f64 {
    1.0
}

fn default_one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub problem: ProblemConfig,
    pub run: RunConfig,
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return bad("no methods listed".into());
        }
        if self.run.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if !(self.run.epsilon > 0.0 && self.run.c_eps > 0.0) {
            return bad("epsilon and c_eps must be positive".into());
        }
        if self.run.sigma2.is_none() && self.run.sigma2_samples < 2 {
            return bad("sigma2_samples must be >= 2".into());
        }
        for m in &self.methods {
            if !(m.beta > 0.0 && m.eta > 0.0 && m.c_tau > 0.0) {
                return bad(format!("{}: beta, eta, c_tau must be positive", m.method));
            }
            if m.inner_batch == 0 || m.epoch_len == 0 || m.spider_q == 0 {
                return bad(format!("{}: batch and epoch sizes must be >= 1", m.method));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; decorrelates consecutive repeat seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repeat `j`; shared by every method in that repeat.
pub fn round_seed(base: u64, j: usize) -> u64 {
    splitmix64(base.wrapping_add(j as u64))
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    match cfg {
        DatasetConfig::Libsvm { path, d_hint, scale } => {
            let ds = load_libsvm(path, *d_hint)?;
            Ok(if *scale { ds.max_abs_scaled() } else { ds })
        }
        DatasetConfig::Synthetic { spec, data_seed } => synthetic_classification(spec, *data_seed),
    }
}

pub fn build_problem(cfg: &ProblemConfig, data: Dataset) -> Result<ProblemInstance> {
    match cfg {
        ProblemConfig::FusedLogistic { l } => build_fused_logistic(data, *l),
        ProblemConfig::GraphGuided {
            l1,
            l2,
            corr_threshold,
            constraint_csv_dir,
        } => match constraint_csv_dir {
            Some(dir) => build_graph_guided_with(data, *l1, *l2, read_matrix_csv(&dir.join("A.csv"))?),
            None => build_graph_guided(data, *l1, *l2, *corr_threshold),
        },
    }
}

/// Train / test instances and `σ²` of one repeat.
#[derive(Debug, Clone)]
pub struct RoundSetup {
    pub round: usize,
    pub seed: u64,
    pub train: ProblemInstance,
    pub test: Option<ProblemInstance>,
    pub sigma2: f64,
}

pub fn prepare_round(cfg: &ExperimentConfig, full: &Dataset, round: usize) -> Result<RoundSetup> {
    let seed = round_seed(cfg.run.seed, round);
    let (train_ds, test_ds) = if cfg.run.split {
        let split_seed = stream_rng(seed, Stream::Split).next_u64();
        let pair = split_half(full, split_seed)?;
        (pair.train, Some(pair.test))
    } else {
        (full.clone(), None)
    };
    let train = build_problem(&cfg.problem, train_ds)?;
    // the test half must use the training constraint, not its own graph
    let test = test_ds.map(|d| train.with_dataset(d)).transpose()?;
    let sigma2 = match cfg.run.sigma2 {
        Some(s) => s,
        None => {
            let x0 = SolverState::initial(&train).x;
            let mut rng = stream_rng(seed, Stream::Sigma);
            let m = cfg.run.sigma2_samples.min(train.n());
            estimate_sigma2(&train, &x0, m.max(2), &mut rng, &mut OracleTally::default())?
        }
    };
    Ok(RoundSetup {
        round,
        seed,
        train,
        test,
        sigma2,
    })
}

pub fn solver_config(run: &RunConfig, m: &MethodConfig, setup: &RoundSetup) -> Result<SolverConfig> {
    let opnorm = setup.train.constraint.opnorm_ata;
    let admm = match m.r {
        Some(r) => AdmmParams::with_r(m.beta, m.eta, r, opnorm)?,
        None => AdmmParams::new(m.beta, m.eta, opnorm)?,
    };
    let sched = SchedulerParams {
        c_tau: m.c_tau,
        c_eps: m.c_eps.unwrap_or(run.c_eps),
        epsilon: run.epsilon,
        sigma2: setup.sigma2,
        n: setup.train.n(),
        tau_init: run.tau_init,
    };
    let mut cfg = SolverConfig::new(m.method, admm, sched);
    cfg.inner_batch = m.inner_batch;
    cfg.epoch_len = m.epoch_len;
    cfg.spider_q = m.spider_q;
    cfg.max_iters = run.max_iters;
    cfg.oracle_budget = run.oracle_budget;
    cfg.target_epsilon = run.target_epsilon;
    cfg.eval_stride = run.eval_stride;
    cfg.seed = setup.seed;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub round: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub iters: usize,
    pub oracle_calls: u64,
    pub sigma2: f64,
    pub final_objective: Option<f64>,
    pub final_stationarity: Option<f64>,
    pub final_test_objective: Option<f64>,
    pub cap_binding_steps: usize,
    pub wall_ms: f64,
    pub trace_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    /// Sample standard deviation; 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub diverged: usize,
    pub final_objective: Option<Stat>,
    pub final_stationarity: Option<Stat>,
    pub final_test_objective: Option<Stat>,
    pub oracle_calls: Option<Stat>,
    pub advisor: Option<AdvisorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub version: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentSummary {
    pub fn all_diverged(&self) -> bool {
        self.runs.iter().all(|r| r.status == RunStatus::Diverged)
    }
}

pub fn trace_file_name(method: Method, round: usize) -> String {
    format!("{}_seed{}.csv", method.name(), round)
}

/// Runs the full grid and writes one trace CSV per run plus
/// `summary.json` into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let full = load_dataset(&cfg.dataset)?;
    info!("dataset: n={}, d={}", full.n(), full.d());
    let rounds: Vec<RoundSetup> = (0..cfg.run.repeats)
        .into_par_iter()
        .map(|j| prepare_round(cfg, &full, j))
        .collect::<Result<_>>()?;
    let configs: Vec<(usize, usize, SolverConfig)> = rounds
        .iter()
        .flat_map(|r| cfg.methods.iter().enumerate().map(move |(mi, m)| (r, mi, m)))
        .map(|(r, mi, m)| Ok((r.round, mi, solver_config(&cfg.run, m, r)?)))
        .collect::<Result<_>>()?;

    let runs: Vec<RunSummary> = configs
        .par_iter()
        .map(|(round, _, scfg)| {
            let setup = &rounds[*round];
            let hooks = RunHooks {
                observer: None,
                test_problem: setup.test.as_ref(),
            };
            let file = trace_file_name(scfg.method, *round);
            let (status, trace, iters, calls, cap) = match solve_with(&setup.train, scfg, hooks) {
                Ok(o) => (RunStatus::Ok, o.trace, o.state.k, o.tally.solver_calls, o.cap_binding_steps),
                Err(Error::Diverged { iter, trace }) => {
                    warn!("{} repeat {round} diverged at iteration {iter}", scfg.method);
                    let calls = trace.last().map_or(0, |r| r.oracle_calls);
                    (RunStatus::Diverged, trace, iter, calls, 0)
                }
                Err(e) => return Err(e),
            };
            emit_trace_csv(&out.join(&file), &trace)?;
            let last_eval = trace.iter().rev().find(|r| r.stationarity.is_some());
            Ok(RunSummary {
                method: scfg.method,
                round: *round,
                seed: setup.seed,
                status,
                iters,
                oracle_calls: calls,
                sigma2: setup.sigma2,
                final_objective: (status == RunStatus::Ok).then(|| trace.last().map(|r| r.objective)).flatten(),
                final_stationarity: last_eval.and_then(|r| r.stationarity).filter(|_| status == RunStatus::Ok),
                final_test_objective: last_eval.and_then(|r| r.test_objective).filter(|_| status == RunStatus::Ok),
                cap_binding_steps: cap,
                wall_ms: trace.last().map_or(0.0, |r| r.time_ms),
                trace_file: file,
            })
        })
        .collect::<Result<_>>()?;

    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let mine: Vec<&RunSummary> = runs
                .iter()
                .zip(&configs)
                .filter(|(_, c)| c.1 == mi)
                .map(|(r, _)| r)
                .collect();
            let stat = |f: &dyn Fn(&RunSummary) -> Option<f64>| {
                Stat::of(&mine.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            let setup = &rounds[0];
            let scfg = &configs[mi].2;
            let tau_check = (m.method.family() == Family::Svrg)
                .then(|| (cfg.run.tau_init, cfg.run.epsilon, cfg.run.max_iters.div_ceil(m.epoch_len)));
            let advisor = match advise(&setup.train, &scfg.admm, m.c_tau, setup.sigma2, tau_check) {
                Ok(a) => Some(a),
                Err(e) => {
                    warn!("advisor skipped for {}: {e}", m.method);
                    None
                }
            };
            MethodSummary {
                method: m.method,
                runs: mine.len(),
                diverged: mine.iter().filter(|r| r.status == RunStatus::Diverged).count(),
                final_objective: stat(&|r| r.final_objective),
                final_stationarity: stat(&|r| r.final_stationarity),
                final_test_objective: stat(&|r| r.final_test_objective),
                oracle_calls: stat(&|r| (r.status == RunStatus::Ok).then_some(r.oracle_calls as f64)),
                advisor,
            }
        })
        .collect();

    let summary = ExperimentSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        runs,
        methods,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join("summary.json"), json)?;
    Ok(summary)
}

const BASE_HEADER: &str = "iter,epoch,batch_size,oracle_calls,objective,stationarity,time_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Writes a trace. The `test_objective` column appears only when some
/// record carries one.
pub fn emit_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let with_test = trace.iter().any(|r| r.test_objective.is_some());
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write!(w, "{BASE_HEADER}")?;
    if with_test {
        write!(w, ",test_objective")?;
    }
    writeln!(w)?;
    for r in trace {
        write!(
            w,
            "{},{},{},{},{:.16e},{},{:.3}",
            r.iter,
            r.epoch,
            r.batch_size,
            r.oracle_calls,
            r.objective,
            opt(r.stationarity),
            r.time_ms
        )?;
        if with_test {
            write!(w, ",{}", opt(r.test_objective))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let with_test = headers.len() == 8 && &headers[7] == "test_objective";
    if headers.iter().take(7).collect::<Vec<_>>().join(",") != BASE_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected trace header {headers:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let err = |msg: String| Error::Parse { line, msg };
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|e| err(format!("column {j}: {e}")))
        };
        let int = |j: usize| -> Result<u64> {
            rec[j].parse::<u64>().map_err(|e| err(format!("column {j}: {e}")))
        };
        let maybe = |j: usize| -> Result<Option<f64>> {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        out.push(TraceRecord {
            iter: int(0)? as usize,
            epoch: int(1)? as usize,
            batch_size: int(2)? as usize,
            oracle_calls: int(3)?,
            objective: num(4)?,
            stationarity: maybe(5)?,
            test_objective: if with_test { maybe(7)? } else { None },
            time_ms: num(6)?,
        });
    }
    Ok(out)
}
