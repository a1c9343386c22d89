//! Synthetic binary classification data with a planted linear model.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// i.i.d. `N(0, scale²/d)` entries, so rows have norm close to `scale`.
    Gaussian { d: usize, scale: f64 },
    /// One-hot blocks; each entry of `groups` is a category count.
    Categorical { groups: Vec<usize> },
    /// Two classes centred at `±separation·u` for a random unit `u`, with
    /// i.i.d. `N(0, spread²/d)` noise. Labels are drawn first and uniformly.
    Mixture { d: usize, separation: f64, spread: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub features: FeatureKind,
    /// Multiplier on the planted margin before the logistic link.
    #[serde(default = "default_signal")]
    pub signal: f64,
    /// Probability of flipping each label after sampling.
    #[serde(default)]
    pub label_flip: f64,
}

fn default_signal() -> f64 {
    3.0
}

impl SyntheticSpec {
    pub fn gaussian(n: usize, d: usize) -> Self {
        Self {
            n,
            features: FeatureKind::Gaussian { d, scale: 1.0 },
            signal: default_signal(),
            label_flip: 0.0,
        }
    }

    /// 68 one-hot features from 22 binary and 8 ternary attributes.
    pub fn phishing_like(n: usize) -> Self {
        let mut groups = vec![2; 22];
        groups.extend(std::iter::repeat_n(3, 8));
        Self {
            n,
            features: FeatureKind::Categorical { groups },
            signal: 1.0,
            label_flip: 0.05,
        }
    }

    pub fn d(&self) -> usize {
        match &self.features {
            FeatureKind::Gaussian { d, .. } | FeatureKind::Mixture { d, .. } => *d,
            FeatureKind::Categorical { groups } => groups.iter().sum(),
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Deterministic in `(spec, seed)`.
pub fn synthetic_classification(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    let d = spec.d();
    if spec.n == 0 || d == 0 {
        return Err(Error::InvalidInput("synthetic data needs n, d >= 1".into()));
    }
    if !(0.0..=0.5).contains(&spec.label_flip) || !spec.signal.is_finite() {
        return Err(Error::InvalidInput(format!(
            "label_flip must lie in [0, 0.5] and signal be finite: {spec:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
    let mut features = Vec::with_capacity(spec.n * d);
    match &spec.features {
        FeatureKind::Mixture { separation, spread, .. } => {
            return mixture(spec, d, *separation, *spread, &w, &mut rng);
        }
        FeatureKind::Gaussian { scale, .. } => {
            if !(*scale > 0.0) {
                return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
            }
            let sd = scale / (d as f64).sqrt();
            for _ in 0..spec.n * d {
                features.push(sd * gauss(&mut rng));
            }
        }
        FeatureKind::Categorical { groups } => {
            if groups.iter().any(|&g| g < 2) {
                return Err(Error::InvalidInput("categorical groups need >= 2 levels".into()));
            }
            // skewed level frequencies, fixed per attribute
            let probs: Vec<Vec<f64>> = groups
                .iter()
                .map(|&g| {
                    let raw: Vec<f64> = (0..g).map(|_| rng.gen_range(0.2..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / s).collect()
                })
                .collect();
            for _ in 0..spec.n {
                for pr in &probs {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = pr.len() - 1;
                    for (j, p) in pr.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = j;
                            break;
                        }
                    }
                    features.extend((0..pr.len()).map(|j| if j == pick { 1.0 } else { 0.0 }));
                }
            }
        }
    }
    let labels = (0..spec.n)
        .map(|i| {
            let row = &features[i * d..(i + 1) * d];
            let margin: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * spec.signal;
            let p = 1.0 / (1.0 + (-margin).exp());
            let mut y = if rng.gen::<f64>() < p { 1.0 } else { -1.0 };
            if rng.gen::<f64>() < spec.label_flip {
                y = -y;
            }
            y
        })
        .collect();
    Dataset::new(features, labels, d)
}

fn mixture(
    spec: &SyntheticSpec,
    d: usize,
    separation: f64,
    spread: f64,
    w: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    if !(separation >= 0.0 && spread >= 0.0 && separation.is_finite() && spread.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "mixture needs finite separation, spread >= 0: {spec:?}"
        )));
    }
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let sd = spread / (d as f64).sqrt();
    let mut features = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let class = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        for wj in w {
            features.push(class * separation * wj / norm + sd * gauss(rng));
        }
        let flip = rng.gen::<f64>() < spec.label_flip;
        labels.push(if flip { -class } else { class });
    }
    Dataset::new(features, labels, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let s = SyntheticSpec::gaussian(50, 7);
        let a = synthetic_classification(&s, 1).unwrap();
        let b = synthetic_classification(&s, 1).unwrap();
        let c = synthetic_classification(&s, 2).unwrap();
        assert_eq!((a.n(), a.d()), (50, 7));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn phishing_like_is_one_hot() {
        let s = SyntheticSpec::phishing_like(200);
        assert_eq!(s.d(), 68);
        let ds = synthetic_classification(&s, 3).unwrap();
        for i in 0..ds.n() {
            let row = ds.row(i);
            assert_eq!(row.iter().sum::<f64>(), 30.0);
            assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
        }
        let pos = ds.labels().iter().filter(|&&y| y > 0.0).count();
        assert!(pos > 0 && pos < ds.n());
    }

    #[test]
    fn mixture_classes_are_separated() {
        let spec = SyntheticSpec {
            n: 400,
            features: FeatureKind::Mixture { d: 6, separation: 1.0, spread: 0.1 },
            signal: default_signal(),
            label_flip: 0.0,
        };
        let ds = synthetic_classification(&spec, 8).unwrap();
        // b_i a_i clusters around one centre of norm 1
        let mut mean = [0.0; 6];
        for i in 0..ds.n() {
            for (m, a) in mean.iter_mut().zip(ds.row(i)) {
                *m += ds.label(i) * a / ds.n() as f64;
            }
        }
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 0.05, "{norm}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(synthetic_classification(&SyntheticSpec::gaussian(0, 3), 0).is_err());
        let mut s = SyntheticSpec::gaussian(5, 3);
        s.label_flip = 0.9;
        assert!(synthetic_classification(&s, 0).is_err());
    }
}
