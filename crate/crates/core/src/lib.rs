//! Stochastic linearized ADMM for
//!
//! ```text
//! min_{x,y}  (1/n) Σ f_i(x) + g(y)   s.t.  A x + B y = c
//! ```
//!
//! with minibatch, SVRG and SPIDER gradient estimators and static or
//! adaptive batch-size schedules.
//!
//! ```no_run
//! use absadmm::{build_fused_logistic, load_libsvm, solve};
//! use absadmm::{AdmmParams, Method, SchedulerParams, SolverConfig};
//! # fn main() -> absadmm::Result<()> {
//! let data = load_libsvm("phishing".as_ref(), None)?;
//! let p = build_fused_logistic(data, 1e-3)?;
//! let admm = AdmmParams::new(100.0, 0.3, p.constraint.opnorm_ata)?;
//! let sched = SchedulerParams {
//!     c_tau: 1.0,
//!     c_eps: 3.0,
//!     epsilon: 1e-3,
//!     sigma2: 1.0,
//!     n: p.n(),
//!     tau_init: 100.0,
//! };
//! let mut cfg = SolverConfig::new(Method::AbsSpiderAdmm, admm, sched);
//! cfg.inner_batch = 500;
//! cfg.spider_q = 5;
//! let out = solve(&p, &cfg)?;
//! println!("{:?}", out.trace.last());
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod advisor;
pub mod data;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod linalg;
pub mod problem;
pub mod schedule;
pub mod solver;
pub mod synthetic;

pub use admm::{AdmmParams, SolverState, StationarityReport};
pub use advisor::{advise, AdvisorReport};
pub use data::{load_libsvm, parse_libsvm, split_half, Dataset, SplitPair};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentSummary};
pub use problem::{build_fused_logistic, build_graph_guided, Loss, ProblemInstance};
pub use schedule::SchedulerParams;
pub use solver::{solve, solve_with, Method, RunHooks, RunOutput, SolverConfig, TraceRecord};
pub use synthetic::{synthetic_classification, SyntheticSpec};
