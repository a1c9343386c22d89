//! Problem constants and the parameter-feasibility formulas.
//!
//! The adaptive SADMM analysis needs
//! `ρ = ζ_min/η + βς_A/2 - (L+1)/2 - 10ζ_max²/(βς_Aη²) - 1/(2c_τ) - 10/(c_τβς_A) - 5L²/(βς_A) > 0`.
//! Writing `-2ρ` as a quadratic in `1/η` gives the discriminant `Δ_η`, which
//! is positive whenever `Θ < 0`, i.e. whenever `β > β⁺`.

use serde::{Deserialize, Serialize};

use crate::admm::AdmmParams;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemInstance;

/// Tight smoothness bound: `curv·max_i ‖a_i‖² + ℓ2` with `curv = 1/4`
/// (logistic) or `1/(6√3)` (sigmoid).
pub fn estimate_l(p: &ProblemInstance) -> f64 {
    let max_sq = (0..p.n())
        .map(|i| p.dataset.row(i).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    p.loss.curvature_bound() * max_sq + p.ridge
}

/// `(ς_A, ‖AᵀA‖)`.
pub fn spectral_bounds(a: &nalgebra::DMatrix<f64>) -> Result<(f64, f64)> {
    linalg::gram_extreme_eigenvalues(a)
}

/// Outputs of the SADMM feasibility analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub theta: f64,
    pub delta_eta: f64,
    pub beta_plus: f64,
    /// `None` when `Δ_η <= 0`.
    pub eta_plus: Option<f64>,
    pub rho: f64,
    pub feasible: bool,
}

/// Larger root of `c_τς_A²β² - (1+c_τ+c_τL)ς_Aβ - 10(2+c_τL²)`.
pub fn beta_plus(l: f64, varsigma_a: f64, c_tau: f64) -> f64 {
    let lin = 1.0 + c_tau + c_tau * l;
    (lin + (lin * lin + 40.0 * c_tau * (2.0 + c_tau * l * l)).sqrt()) / (2.0 * c_tau * varsigma_a)
}

pub fn theta(l: f64, varsigma_a: f64, c_tau: f64, beta: f64) -> f64 {
    let bs = beta * varsigma_a;
    1.0 + l + 1.0 / c_tau + 20.0 / (c_tau * bs) + 10.0 * l * l / bs - bs
}

/// `ρ` evaluated term by term.
pub fn rho(l: f64, varsigma_a: f64, zeta_min: f64, zeta_max: f64, c_tau: f64, beta: f64, eta: f64) -> f64 {
    let bs = beta * varsigma_a;
    zeta_min / eta + bs / 2.0
        - (l + 1.0) / 2.0
        - 10.0 * zeta_max * zeta_max / (bs * eta * eta)
        - 1.0 / (2.0 * c_tau)
        - 10.0 / (c_tau * bs)
        - 5.0 * l * l / bs
}

pub fn sadmm_feasibility(
    l: f64,
    varsigma_a: f64,
    zeta_min: f64,
    zeta_max: f64,
    c_tau: f64,
    beta: f64,
    eta: f64,
) -> Result<Feasibility> {
    for (name, v) in [
        ("L", l),
        ("varsigma_A", varsigma_a),
        ("zeta_min", zeta_min),
        ("zeta_max", zeta_max),
        ("c_tau", c_tau),
        ("beta", beta),
        ("eta", eta),
    ] {
        if !(v > 0.0) {
            return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    let th = theta(l, varsigma_a, c_tau, beta);
    let bs = beta * varsigma_a;
    let delta_eta = 4.0 * zeta_min * zeta_min - 80.0 * zeta_max * zeta_max / bs * th;
    let eta_plus = (delta_eta > 0.0).then(|| {
        let inv = (2.0 * zeta_min + delta_eta.sqrt()) * bs / (40.0 * zeta_max * zeta_max);
        1.0 / inv
    });
    let r = rho(l, varsigma_a, zeta_min, zeta_max, c_tau, beta, eta);
    Ok(Feasibility {
        theta: th,
        delta_eta,
        beta_plus: beta_plus(l, varsigma_a, c_tau),
        eta_plus,
        rho: r,
        feasible: r > 0.0,
    })
}

/// Smallest `k` with `k^p >= n^e` (exact integer `⌈n^{e/p}⌉`).
fn ceil_root(n: u64, e: u32, p: u32) -> usize {
    let target = (n as u128).pow(e);
    let mut k = ((n as f64).powf(e as f64 / p as f64).ceil() as u128).max(1);
    while k > 1 && (k - 1).pow(p) >= target {
        k -= 1;
    }
    while k.pow(p) < target {
        k += 1;
    }
    k as usize
}

/// Norms and spectra consumed by the presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectra {
    pub norm_a: f64,
    pub norm_b: f64,
    pub varsigma_a: f64,
    pub opnorm_ata: f64,
}

impl Spectra {
    pub fn of(p: &ProblemInstance) -> Self {
        let norm_b = linalg::gram_opnorm(&p.constraint.b).sqrt();
        Self {
            norm_a: p.constraint.opnorm_ata.sqrt(),
            norm_b,
            varsigma_a: p.constraint.varsigma_a,
            opnorm_ata: p.constraint.opnorm_ata,
        }
    }

    /// `ζ_max` of `G` with the tight `r = βη‖AᵀA‖ + 1` (then `ζ_min = 1`).
    pub fn zeta_max(&self, beta: f64, eta: f64) -> f64 {
        beta * eta * (self.opnorm_ata - self.varsigma_a) + 1.0
    }
}

/// Parameter point derived from a complexity corollary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    /// `T` (SVRG) or `q` (SPIDER).
    pub epoch_len: usize,
    pub inner_batch: usize,
    pub eta: f64,
    pub beta: f64,
    pub c_tau: f64,
    pub c_eps: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    /// The chosen β also satisfies the ζ-dependent bounds re-evaluated at
    /// its own `ζ_max`.
    pub bounds_verified: bool,
}

/// The four β lower bounds; `last` is the family-specific fourth term.
fn beta_bounds(s: &Spectra, l: f64, eta: f64, zeta_max: f64, last: impl Fn(f64) -> f64) -> f64 {
    let vs = s.varsigma_a;
    let z2 = zeta_max * zeta_max / (eta * eta);
    let bounds = [
        20.0 / vs,
        (10.0 / (3.0 * vs)).sqrt(),
        (3.0 / (s.norm_b * s.norm_a) * (l * l + z2)).sqrt(),
        last(z2) / vs,
    ];
    bounds.into_iter().fold(0.0, f64::max)
}

fn choose_beta(s: &Spectra, l: f64, eta: f64, last: impl Fn(f64) -> f64 + Copy) -> (f64, f64, bool) {
    // ζ-free bounds first, then one sweep with ζ_max at that β.
    let beta0 = (20.0 / s.varsigma_a).max((10.0 / (3.0 * s.varsigma_a)).sqrt());
    let beta = beta_bounds(s, l, eta, s.zeta_max(beta0, eta), last).max(beta0);
    let zeta_max = s.zeta_max(beta, eta);
    let verified = beta >= beta_bounds(s, l, eta, zeta_max, last) * (1.0 - 1e-12);
    (beta, zeta_max, verified)
}

/// SVRG preset: `T = ⌈n^{1/3}⌉`, `b = ⌈n^{2/3}⌉`, `η = 2ζ_min/(5L²+L+2)`,
/// `c_τ = c_ε = 9 + (12/L²)(3 + β²‖B‖‖A‖)`.
pub fn svrg_preset(n: usize, l: f64, s: &Spectra) -> Result<Preset> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let zeta_min = 1.0;
    let eta = 2.0 * zeta_min / (5.0 * l * l + l + 2.0);
    let (beta, zeta_max, verified) = choose_beta(s, l, eta, |z2| {
        (10.0 * (2.0 + 9.0 * l * l + 2.0 * z2)).sqrt()
    });
    let c = 9.0 + 12.0 / (l * l) * (3.0 + beta * beta * s.norm_b * s.norm_a);
    Ok(Preset {
        epoch_len: ceil_root(n as u64, 1, 3),
        inner_batch: ceil_root(n as u64, 2, 3),
        eta,
        beta,
        c_tau: c,
        c_eps: c,
        zeta_min,
        zeta_max,
        bounds_verified: verified,
    })
}

/// SPIDER preset: `b = q = ⌈√n⌉`, `η` half of `2ζ_min/(L²+L+4)`,
/// `c_τ = c_ε = (9(1+c_d)/2)(4 + β²‖B‖‖A‖)`.
pub fn spider_preset(n: usize, l: f64, s: &Spectra, c_d: f64) -> Result<Preset> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let q = ceil_root(n as u64, 1, 2);
    if !(c_d >= 1.0 && c_d <= q as f64) {
        return Err(Error::InvalidInput(format!("c_d={c_d} outside [1, {q}]")));
    }
    let zeta_min = 1.0;
    let eta = 0.5 * 2.0 * zeta_min / (l * l + l + 4.0);
    let (beta, zeta_max, verified) = choose_beta(s, l, eta, |z2| {
        (20.0 * (1.0 + 2.0 * l * l + z2)).sqrt()
    });
    let c = 9.0 * (1.0 + c_d) / 2.0 * (4.0 + beta * beta * s.norm_b * s.norm_a);
    Ok(Preset {
        epoch_len: q,
        inner_batch: q,
        eta,
        beta,
        c_tau: c,
        c_eps: c,
        zeta_min,
        zeta_max,
        bounds_verified: verified,
    })
}

/// Everything the advisor knows about one (problem, parameter) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorReport {
    pub l: f64,
    pub sigma2: f64,
    pub varsigma_a: f64,
    pub opnorm_ata: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub beta: f64,
    pub eta: f64,
    pub c_tau: f64,
    pub theta: f64,
    pub delta_eta: f64,
    pub beta_plus: f64,
    pub eta_plus: Option<f64>,
    pub rho: f64,
    pub feasible: bool,
    pub warnings: Vec<String>,
}

/// Builds a report for `params` on `p`. `tau_check = (τ₁, ε, S)` enables the
/// `τ₁ <= εS` check for SVRG runs.
pub fn advise(
    p: &ProblemInstance,
    params: &AdmmParams,
    c_tau: f64,
    sigma2: f64,
    tau_check: Option<(f64, f64, usize)>,
) -> Result<AdvisorReport> {
    let l = estimate_l(p);
    let (varsigma_a, opnorm_ata) = (p.constraint.varsigma_a, p.constraint.opnorm_ata);
    let (zeta_min, zeta_max) = params.metric_bounds(varsigma_a, opnorm_ata);
    let f = sadmm_feasibility(l, varsigma_a, zeta_min.max(f64::MIN_POSITIVE), zeta_max, c_tau, params.beta, params.eta)?;
    let mut warnings = Vec::new();
    if !f.feasible {
        if f.delta_eta <= 0.0 {
            warnings.push(format!(
                "Delta_eta = {:.3e} <= 0: no eta makes rho positive at beta = {}",
                f.delta_eta, params.beta
            ));
        }
        warnings.push(format!(
            "rho = {:.3e} <= 0; theory suggests beta > {:.4e}{}",
            f.rho,
            f.beta_plus,
            f.eta_plus
                .map(|e| format!(" and eta > {e:.4e}"))
                .unwrap_or_default()
        ));
    }
    if let Some((tau1, epsilon, epochs)) = tau_check {
        if tau1 > epsilon * epochs as f64 {
            warnings.push(format!(
                "tau_1 = {tau1} exceeds epsilon * S = {}",
                epsilon * epochs as f64
            ));
        }
    }
    Ok(AdvisorReport {
        l,
        sigma2,
        varsigma_a,
        opnorm_ata,
        zeta_min,
        zeta_max,
        beta: params.beta,
        eta: params.eta,
        c_tau,
        theta: f.theta,
        delta_eta: f.delta_eta,
        beta_plus: f.beta_plus,
        eta_plus: f.eta_plus,
        rho: f.rho,
        feasible: f.feasible,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::problem::{build_difference_matrix, build_fused_logistic, build_graph_guided};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn smoothness_constants() {
        let ds = Dataset::new(vec![2.0, 0.0], vec![1.0], 2).unwrap();
        let p = build_fused_logistic(ds.clone(), 0.0).unwrap();
        assert_relative_eq!(estimate_l(&p), 1.0, epsilon = 1e-15);
        let p = build_graph_guided(ds.clone(), 0.0, 0.0, 0.7).unwrap();
        assert_relative_eq!(estimate_l(&p), 4.0 / (6.0 * 3f64.sqrt()), epsilon = 1e-15);
        let p = build_graph_guided(ds, 0.0, 0.01, 0.7).unwrap();
        assert_relative_eq!(estimate_l(&p), 4.0 / (6.0 * 3f64.sqrt()) + 0.01, epsilon = 1e-15);
    }

    #[test]
    fn spectra_of_small_matrices() {
        let (lo, hi) = spectral_bounds(&DMatrix::identity(3, 3)).unwrap();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-12);
        let (lo, hi) = spectral_bounds(&build_difference_matrix(2)).unwrap();
        assert_relative_eq!(lo, (3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(hi, (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_plus_closed_form() {
        assert_relative_eq!(beta_plus(1.0, 1.0, 1.0), (3.0 + 129f64.sqrt()) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn beta_above_threshold_gives_positive_discriminant() {
        for &(l, vs, c) in &[(1.0, 1.0, 1.0), (3.0, 0.4, 0.2), (0.1, 2.0, 10.0)] {
            let b = beta_plus(l, vs, c) * 1.01;
            let th = theta(l, vs, c, b);
            assert!(th < 0.0);
            let f = sadmm_feasibility(l, vs, 1.0, 3.0, c, b, 1.0).unwrap();
            assert!(f.delta_eta > 0.0);
            assert!(f.eta_plus.is_some());
        }
    }

    #[test]
    fn infeasible_point_reports_reason() {
        let f = sadmm_feasibility(1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 1.0).unwrap();
        assert!(!f.feasible);
        assert!(f.delta_eta <= 0.0);
        assert!(f.eta_plus.is_none());
        assert!(sadmm_feasibility(1.0, 0.0, 1.0, 1.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn integer_roots() {
        assert_eq!(ceil_root(1000, 1, 3), 10);
        assert_eq!(ceil_root(1000, 2, 3), 100);
        assert_eq!(ceil_root(1001, 1, 3), 11);
        assert_eq!(ceil_root(1, 1, 3), 1);
        assert_eq!(ceil_root(100, 1, 2), 10);
        assert_eq!(ceil_root(101, 1, 2), 11);
    }

    fn unit_spectra() -> Spectra {
        Spectra {
            norm_a: 1.0,
            norm_b: 1.0,
            varsigma_a: 1.0,
            opnorm_ata: 1.0,
        }
    }

    #[test]
    fn svrg_preset_values() {
        let p = svrg_preset(1000, 1.0, &unit_spectra()).unwrap();
        assert_eq!((p.epoch_len, p.inner_batch), (10, 100));
        assert_relative_eq!(p.eta, 0.25, epsilon = 1e-15);
        let one = svrg_preset(1, 1.0, &unit_spectra()).unwrap();
        assert_eq!((one.epoch_len, one.inner_batch), (1, 1));
        assert_relative_eq!(one.c_tau, 9.0 + 12.0 * (3.0 + one.beta * one.beta), epsilon = 1e-9);
        // A = I: ζ_max = 1 so the sweep is exact
        assert!(one.bounds_verified);
    }

    #[test]
    fn spider_preset_values() {
        let p = spider_preset(100, 1.0, &unit_spectra(), 1.0).unwrap();
        assert_eq!((p.epoch_len, p.inner_batch), (10, 10));
        assert_relative_eq!(p.eta, 1.0 / 6.0, epsilon = 1e-15);
        let q = spider_preset(100, 1.0, &unit_spectra(), 10.0).unwrap();
        let k = 4.0 + p.beta * p.beta;
        assert_relative_eq!(p.c_tau, 9.0 * 2.0 / 2.0 * k, epsilon = 1e-9);
        assert_relative_eq!(q.c_tau, 9.0 * 11.0 / 2.0 * k, epsilon = 1e-9);
        assert!(spider_preset(100, 1.0, &unit_spectra(), 11.0).is_err());
        assert!(spider_preset(100, 1.0, &unit_spectra(), 0.5).is_err());
    }
}
