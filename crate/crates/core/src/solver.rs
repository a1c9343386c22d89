//! Driver loops for the six method variants.
//!
//! | family | static          | adaptive           |
//! |--------|-----------------|--------------------|
//! | SADMM  | `sadmm`         | `abs-sadmm`        |
//! | SVRG   | `svrg-admm`     | `abs-svrg-admm`    |
//! | SPIDER | `spider-admm`   | `abs-spider-admm`  |
//!
//! Randomness is split into independent ChaCha streams derived from the run
//! seed: one for anchor / outer batches and one for inner mini-batches. The
//! static and adaptive variant of a family therefore share the inner stream
//! and differ only in anchor sizes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::{dual_step, stationarity_with_grad, x_step, y_step, AdmmParams, SolverState};
use crate::error::{Error, Result};
use crate::estimator::{
    minibatch_grad, sample_indices, spider_grad, svrg_grad, EstimatorKind, EstimatorState,
    OracleTally, SampleMode,
};
use crate::problem::ProblemInstance;
use crate::schedule::{abs_sadmm_batch, abs_vr_batch, static_batch, SchedulerParams, TauAccumulator};

/// Independent random substreams of one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split = 1,
    Sigma = 2,
    Anchor = 3,
    Inner = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sadmm")]
    Sadmm,
    #[serde(rename = "abs-sadmm")]
    AbsSadmm,
    #[serde(rename = "svrg-admm")]
    SvrgAdmm,
    #[serde(rename = "abs-svrg-admm")]
    AbsSvrgAdmm,
    #[serde(rename = "spider-admm")]
    SpiderAdmm,
    #[serde(rename = "abs-spider-admm")]
    AbsSpiderAdmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Sadmm,
    Svrg,
    Spider,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Sadmm,
        Method::AbsSadmm,
        Method::SvrgAdmm,
        Method::AbsSvrgAdmm,
        Method::SpiderAdmm,
        Method::AbsSpiderAdmm,
    ];

    pub fn family(self) -> Family {
        match self {
            Method::Sadmm | Method::AbsSadmm => Family::Sadmm,
            Method::SvrgAdmm | Method::AbsSvrgAdmm => Family::Svrg,
            Method::SpiderAdmm | Method::AbsSpiderAdmm => Family::Spider,
        }
    }

    pub fn adaptive(self) -> bool {
        matches!(
            self,
            Method::AbsSadmm | Method::AbsSvrgAdmm | Method::AbsSpiderAdmm
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Sadmm => "sadmm",
            Method::AbsSadmm => "abs-sadmm",
            Method::SvrgAdmm => "svrg-admm",
            Method::AbsSvrgAdmm => "abs-svrg-admm",
            Method::SpiderAdmm => "spider-admm",
            Method::AbsSpiderAdmm => "abs-spider-admm",
        }
    }

    /// The same family with the other batch policy.
    pub fn counterpart(self) -> Method {
        match self {
            Method::Sadmm => Method::AbsSadmm,
            Method::AbsSadmm => Method::Sadmm,
            Method::SvrgAdmm => Method::AbsSvrgAdmm,
            Method::AbsSvrgAdmm => Method::SvrgAdmm,
            Method::SpiderAdmm => Method::AbsSpiderAdmm,
            Method::AbsSpiderAdmm => Method::SpiderAdmm,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub admm: AdmmParams,
    pub sched: SchedulerParams,
    /// Inner mini-batch size `b` (SVRG / SPIDER).
    pub inner_batch: usize,
    /// SVRG epoch length `T`.
    pub epoch_len: usize,
    /// SPIDER refresh period `q`.
    pub spider_q: usize,
    /// Iteration cap `K`.
    pub max_iters: usize,
    pub oracle_budget: Option<u64>,
    /// Stop once the evaluated stationarity total drops to this level.
    pub target_epsilon: Option<f64>,
    pub seed: u64,
    /// Evaluate stationarity every this many iterations; 0 means once per
    /// data pass of solver oracle calls.
    pub eval_stride: usize,
}

impl SolverConfig {
    /// Single-sample inner batches, `T = q = 1`, `K = 100`, no budget or
    /// target, seed 0, one evaluation per data pass.
    pub fn new(method: Method, admm: AdmmParams, sched: SchedulerParams) -> Self {
        Self {
            method,
            admm,
            sched,
            inner_batch: 1,
            epoch_len: 1,
            spider_q: 1,
            max_iters: 100,
            oracle_budget: None,
            target_epsilon: None,
            seed: 0,
            eval_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inner_batch == 0 || self.epoch_len == 0 || self.spider_q == 0 {
            return Err(Error::InvalidInput(
                "inner_batch, epoch_len and spider_q must be >= 1".into(),
            ));
        }
        self.sched.validate()
    }
}

/// One row per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Iterations completed (1-based).
    pub iter: usize,
    /// SVRG outer index `s` or SPIDER refresh index (both 1-based); for
    /// SADMM equal to `iter`.
    pub epoch: usize,
    /// Anchor size on steps that drew an anchor batch, otherwise the
    /// mini-batch size.
    pub batch_size: usize,
    /// Cumulative solver oracle calls after this step.
    pub oracle_calls: u64,
    pub objective: f64,
    pub stationarity: Option<f64>,
    pub test_objective: Option<f64>,
    pub time_ms: f64,
}

/// Everything an iteration touched, for observers.
#[derive(Debug)]
pub struct StepView<'a> {
    pub k: usize,
    pub v: &'a DVector<f64>,
    pub x_old: &'a DVector<f64>,
    pub lambda_old: &'a DVector<f64>,
    pub y_new: &'a DVector<f64>,
    pub x_new: &'a DVector<f64>,
    pub lambda_new: &'a DVector<f64>,
    pub batch_size: usize,
    /// The step drew an anchor batch.
    pub refresh: bool,
}

/// Optional extras for a run.
#[derive(Default)]
pub struct RunHooks<'a> {
    pub observer: Option<&'a mut dyn FnMut(&StepView<'_>)>,
    /// Held-out instance evaluated at stationarity strides.
    pub test_problem: Option<&'a ProblemInstance>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub state: SolverState,
    pub tally: OracleTally,
    pub initial_objective: f64,
    /// Steps where the adaptive rule asked for more than `n` samples.
    pub cap_binding_steps: usize,
}

/// Dispatches on `cfg.method`.
pub fn solve(p: &ProblemInstance, cfg: &SolverConfig) -> Result<RunOutput> {
    solve_with(p, cfg, RunHooks::default())
}

pub fn solve_with(p: &ProblemInstance, cfg: &SolverConfig, hooks: RunHooks<'_>) -> Result<RunOutput> {
    let adaptive = cfg.method.adaptive();
    match cfg.method.family() {
        Family::Sadmm => run_sadmm_with(p, cfg, adaptive, hooks),
        Family::Svrg => run_svrg_admm_with(p, cfg, adaptive, hooks),
        Family::Spider => run_spider_admm_with(p, cfg, adaptive, hooks),
    }
}

struct Driver<'a, 'h> {
    p: &'a ProblemInstance,
    cfg: &'a SolverConfig,
    hooks: RunHooks<'h>,
    state: SolverState,
    tally: OracleTally,
    trace: Vec<TraceRecord>,
    start: Instant,
    calls_at_last_eval: u64,
    initial_objective: f64,
    cap_binding_steps: usize,
}

impl<'a, 'h> Driver<'a, 'h> {
    fn new(p: &'a ProblemInstance, cfg: &'a SolverConfig, hooks: RunHooks<'h>) -> Result<Self> {
        cfg.validate()?;
        if cfg.sched.n != p.n() {
            return Err(Error::InvalidInput(format!(
                "scheduler n={} but problem has n={}",
                cfg.sched.n,
                p.n()
            )));
        }
        let state = SolverState::initial(p);
        let initial_objective = p.objective(&state.x);
        Ok(Self {
            p,
            cfg,
            hooks,
            state,
            tally: OracleTally::default(),
            trace: Vec::new(),
            start: Instant::now(),
            calls_at_last_eval: 0,
            initial_objective,
            cap_binding_steps: 0,
        })
    }

    fn done(&self) -> bool {
        self.state.k >= self.cfg.max_iters
            || self
                .cfg
                .oracle_budget
                .is_some_and(|b| self.tally.solver_calls >= b)
            || self.reached_target()
    }

    fn reached_target(&self) -> bool {
        match (self.cfg.target_epsilon, self.trace.last()) {
            (Some(t), Some(TraceRecord { stationarity: Some(s), .. })) => *s <= t,
            _ => false,
        }
    }

    fn should_evaluate(&self, iter: usize) -> bool {
        let last = iter >= self.cfg.max_iters
            || self
                .cfg
                .oracle_budget
                .is_some_and(|b| self.tally.solver_calls >= b);
        let stride_hit = if self.cfg.eval_stride > 0 {
            iter.is_multiple_of(self.cfg.eval_stride)
        } else {
            self.tally.solver_calls - self.calls_at_last_eval >= self.p.n() as u64
        };
        last || stride_hit
    }

    /// One `y -> x -> λ` update with gradient estimate `v`. Returns
    /// `‖x_{k+1} - x_k‖²`.
    fn step(&mut self, v: &DVector<f64>, batch_size: usize, epoch: usize, refresh: bool) -> Result<f64> {
        let params = &self.cfg.admm;
        let st = &self.state;
        let y_new = y_step(self.p, params, &st.x, &st.lambda)?;
        let x_new = x_step(self.p, params, &st.x, &y_new, &st.lambda, v);
        let lambda_new = dual_step(params, &x_new, &y_new, &st.lambda, &self.p.constraint);

        if let Some(obs) = self.hooks.observer.as_mut() {
            obs(&StepView {
                k: st.k,
                v,
                x_old: &st.x,
                lambda_old: &st.lambda,
                y_new: &y_new,
                x_new: &x_new,
                lambda_new: &lambda_new,
                batch_size,
                refresh,
            });
        }

        let diff_sq = (&x_new - &st.x).norm_squared();
        let st = &mut self.state;
        st.x_prev = std::mem::replace(&mut st.x, x_new);
        st.y = y_new;
        st.lambda = lambda_new;
        st.k += 1;
        st.oracle_calls = self.tally.solver_calls;

        if !self.state.is_finite() || !diff_sq.is_finite() {
            return Err(Error::Diverged {
                iter: self.state.k,
                trace: std::mem::take(&mut self.trace),
            });
        }

        let iter = self.state.k;
        let objective = self.p.objective(&self.state.x);
        let (stationarity, test_objective) = if self.should_evaluate(iter) {
            let grad = self.p.full_grad(&self.state.x);
            self.tally.eval_calls += self.p.n() as u64;
            self.calls_at_last_eval = self.tally.solver_calls;
            let report = stationarity_with_grad(self.p, &self.state, &grad)?;
            let test = self.hooks.test_problem.map(|t| t.objective(&self.state.x));
            (Some(report.total), test)
        } else {
            (None, None)
        };
        self.trace.push(TraceRecord {
            iter,
            epoch,
            batch_size,
            oracle_calls: self.tally.solver_calls,
            objective,
            stationarity,
            test_objective,
            time_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        Ok(diff_sq)
    }

    fn finish(self) -> RunOutput {
        RunOutput {
            trace: self.trace,
            state: self.state,
            tally: self.tally,
            initial_objective: self.initial_objective,
            cap_binding_steps: self.cap_binding_steps,
        }
    }
}

/// Static SADMM, or adaptive AbsSADMM with
/// `M_k = min(c_τσ²/‖x_k - x_{k-1}‖², c_εσ²/ε, n)`.
pub fn run_sadmm(p: &ProblemInstance, cfg: &SolverConfig, adaptive: bool) -> Result<RunOutput> {
    run_sadmm_with(p, cfg, adaptive, RunHooks::default())
}

pub fn run_sadmm_with(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    adaptive: bool,
    hooks: RunHooks<'_>,
) -> Result<RunOutput> {
    let mut drv = Driver::new(p, cfg, hooks)?;
    let mut rng = stream_rng(cfg.seed, Stream::Anchor);
    let sp = &cfg.sched;
    while !drv.done() {
        let m = if adaptive {
            let diff = (&drv.state.x - &drv.state.x_prev).norm_squared();
            if uncapped_adaptive(sp, diff) > sp.n as f64 {
                drv.cap_binding_steps += 1;
            }
            abs_sadmm_batch(sp, diff)
        } else {
            static_batch(sp)
        };
        let batch = sample_indices(p.n(), m, SampleMode::WithoutReplacement, &mut rng)?;
        let v = minibatch_grad(p, &drv.state.x, &batch, &mut drv.tally);
        let epoch = drv.state.k + 1;
        drv.step(&v, m, epoch, true)?;
    }
    Ok(drv.finish())
}

fn uncapped_adaptive(sp: &SchedulerParams, diff: f64) -> f64 {
    let adaptive = if diff > 0.0 {
        sp.c_tau * sp.sigma2 / diff
    } else {
        f64::INFINITY
    };
    adaptive.min(sp.accuracy_cap())
}

fn anchor_size(sp: &SchedulerParams, adaptive: bool, tau: f64, drv: &mut Driver<'_, '_>) -> usize {
    if adaptive {
        if uncapped_adaptive(sp, tau) > sp.n as f64 {
            drv.cap_binding_steps += 1;
        }
        abs_vr_batch(sp, tau)
    } else {
        static_batch(sp)
    }
}

/// SVRG-ADMM / AbsSVRG-ADMM: `S = ⌈K/T⌉` epochs of `T` inner steps each.
pub fn run_svrg_admm(p: &ProblemInstance, cfg: &SolverConfig, adaptive: bool) -> Result<RunOutput> {
    run_svrg_admm_with(p, cfg, adaptive, RunHooks::default())
}

pub fn run_svrg_admm_with(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    adaptive: bool,
    hooks: RunHooks<'_>,
) -> Result<RunOutput> {
    let mut drv = Driver::new(p, cfg, hooks)?;
    let mut anchor_rng = stream_rng(cfg.seed, Stream::Anchor);
    let mut inner_rng = stream_rng(cfg.seed, Stream::Inner);
    let sp = &cfg.sched;
    let t_len = cfg.epoch_len;
    let epochs = cfg.max_iters.div_ceil(t_len);
    let mut tau = TauAccumulator::new(t_len, sp.tau_init);
    let mut est = EstimatorState::new(EstimatorKind::Svrg);

    'outer: for s in 1..=epochs {
        if drv.done() {
            break;
        }
        let n_s = anchor_size(sp, adaptive, tau.value_for_next_epoch, &mut drv);
        let anchor = sample_indices(p.n(), n_s, SampleMode::WithoutReplacement, &mut anchor_rng)?;
        // x̃^{s-1} is the carried-over iterate
        let snapshot = drv.state.x.clone();
        let g = minibatch_grad(p, &snapshot, &anchor, &mut drv.tally);
        est.set_snapshot(snapshot, g);
        tau.reset();
        for t in 0..t_len {
            if t > 0 && drv.done() {
                break 'outer;
            }
            let batch = sample_indices(p.n(), cfg.inner_batch, SampleMode::WithReplacement, &mut inner_rng)?;
            let v = svrg_grad(p, &drv.state.x, &est, &batch, &mut drv.tally)?;
            let shown = if t == 0 { n_s } else { cfg.inner_batch };
            let diff = drv.step(&v, shown, s, t == 0)?;
            tau.tau_update(diff);
        }
    }
    Ok(drv.finish())
}

/// SPIDER-ADMM / AbsSPIDER-ADMM: anchor refresh whenever `k mod q = 0`.
pub fn run_spider_admm(p: &ProblemInstance, cfg: &SolverConfig, adaptive: bool) -> Result<RunOutput> {
    run_spider_admm_with(p, cfg, adaptive, RunHooks::default())
}

pub fn run_spider_admm_with(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    adaptive: bool,
    hooks: RunHooks<'_>,
) -> Result<RunOutput> {
    let mut drv = Driver::new(p, cfg, hooks)?;
    let mut anchor_rng = stream_rng(cfg.seed, Stream::Anchor);
    let mut inner_rng = stream_rng(cfg.seed, Stream::Inner);
    let sp = &cfg.sched;
    let q = cfg.spider_q;
    let mut tau = TauAccumulator::new(q, sp.tau_init);
    let mut est = EstimatorState::new(EstimatorKind::Spider);

    while !drv.done() {
        let k = drv.state.k;
        let refresh = k % q == 0;
        let (v, shown) = if refresh {
            let n_k = anchor_size(sp, adaptive, tau.value_for_next_epoch, &mut drv);
            let anchor = sample_indices(p.n(), n_k, SampleMode::WithoutReplacement, &mut anchor_rng)?;
            let v = minibatch_grad(p, &drv.state.x, &anchor, &mut drv.tally);
            est.set_spider_anchor(drv.state.x.clone(), v.clone());
            tau.reset();
            (v, n_k)
        } else {
            let batch = sample_indices(p.n(), cfg.inner_batch, SampleMode::WithReplacement, &mut inner_rng)?;
            (spider_grad(p, &drv.state.x, &mut est, &batch, &mut drv.tally)?, cfg.inner_batch)
        };
        let diff = drv.step(&v, shown, k / q + 1, refresh)?;
        tau.tau_update(diff);
    }
    Ok(drv.finish())
}
