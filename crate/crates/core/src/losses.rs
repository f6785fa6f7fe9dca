//! Finite-sum loss models with per-sample gradients, the ball projection and
//! the constants `B` (gradient bound), `L` (gradient Lipschitz constant) and
//! `nu` (strong-convexity modulus) over the ball `‖x‖ ≤ r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Sample;

/// Seed for the sampled (uncertified) constant estimates.
const ESTIMATE_SEED: u64 = 0x5eed_c057;
const ESTIMATE_POINTS: usize = 128;
/// Multiplier applied to sampled estimates.
pub const ESTIMATE_SAFETY: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("parameter length {got} does not match model dimension {expected}")]
    ParamDimension { expected: usize, got: usize },
    #[error("sample {index} has {got} features, expected {expected}")]
    FeatureDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("logistic labels must be -1 or +1, sample {index} has {label}")]
    InvalidLabel { index: usize, label: f64 },
    #[error("ball radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("model has no samples")]
    Empty,
    #[error("dataset of {len} samples is not divisible into {m} equal shards")]
    NotDivisible { len: usize, m: usize },
    #[error("position {position} out of range for {len} samples")]
    PositionOutOfRange { position: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    /// `(⟨ξ, x⟩ - y)²`.
    LeastSquares,
    /// `ln(1 + exp(-b⟨a, x⟩)) + (reg/2)‖x‖²`.
    LogisticL2 { reg: f64 },
    /// `(Σ_k v_k tanh(⟨W_k, ξ⟩ + c_k) + v_0 - y)²` with one hidden tanh layer.
    SmallMlp { hidden: usize },
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::LeastSquares => "least-squares",
            LossKind::LogisticL2 { .. } => "logistic-l2",
            LossKind::SmallMlp { .. } => "small-mlp",
        }
    }

    /// Per-sample losses are convex in `x`.
    pub fn is_convex(&self) -> bool {
        !matches!(self, LossKind::SmallMlp { .. })
    }

    pub fn is_strongly_convex(&self) -> bool {
        matches!(self, LossKind::LogisticL2 { reg } if *reg > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Bound on `‖∇f(x; ξ)‖` over the ball.
    pub b: f64,
    /// Lipschitz constant of `∇f(·; ξ)` over the ball.
    pub l: f64,
    pub nu: f64,
    /// `true` when `b` and `l` come from closed forms, `false` for sampled estimates.
    pub certified: bool,
}

impl Constants {
    /// Elementwise max of `b`, `l`; `nu` is the min; certified only if both are.
    pub fn merge(&self, other: &Constants) -> Constants {
        Constants {
            b: self.b.max(other.b),
            l: self.l.max(other.l),
            nu: self.nu.min(other.nu),
            certified: self.certified && other.certified,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    samples: Vec<Sample>,
    feature_dim: usize,
    dim: usize,
    kind: LossKind,
    radius: f64,
}

impl LossModel {
    pub fn new(samples: Vec<Sample>, kind: LossKind, radius: f64) -> Result<Self, LossError> {
        if samples.is_empty() {
            return Err(LossError::Empty);
        }
        if radius.is_nan() || radius <= 0.0 {
            return Err(LossError::InvalidRadius(radius));
        }
        let feature_dim = samples[0].dim();
        for (index, s) in samples.iter().enumerate() {
            if s.dim() != feature_dim {
                return Err(LossError::FeatureDimension {
                    index,
                    expected: feature_dim,
                    got: s.dim(),
                });
            }
            if matches!(kind, LossKind::LogisticL2 { .. }) && s.label != 1.0 && s.label != -1.0 {
                return Err(LossError::InvalidLabel {
                    index,
                    label: s.label,
                });
            }
        }
        let dim = match kind {
            LossKind::SmallMlp { hidden } => hidden * feature_dim + 2 * hidden + 1,
            _ => feature_dim,
        };
        Ok(LossModel {
            samples,
            feature_dim,
            dim,
            kind,
            radius,
        })
    }

    /// Same kind and radius over a different sample list.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Result<Self, LossError> {
        Self::new(samples, self.kind, self.radius)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Local shard size `n = N/m`, requiring equal shards.
    pub fn shard_size(&self, m: usize) -> Result<usize, LossError> {
        if m == 0 || !self.samples.len().is_multiple_of(m) {
            return Err(LossError::NotDivisible {
                len: self.samples.len(),
                m,
            });
        }
        Ok(self.samples.len() / m)
    }

    fn check(&self, x: &[f64], index: usize) -> Result<(), LossError> {
        if x.len() != self.dim {
            return Err(LossError::ParamDimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if index >= self.samples.len() {
            return Err(LossError::IndexOutOfRange {
                index,
                len: self.samples.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64], index: usize) -> Result<f64, LossError> {
        self.check(x, index)?;
        Ok(self.value_unchecked(x, &self.samples[index]))
    }

    pub fn gradient(&self, x: &[f64], index: usize) -> Result<Vec<f64>, LossError> {
        self.check(x, index)?;
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, index, &mut g);
        Ok(g)
    }

    /// Loss of `x` on an arbitrary sample of matching feature dimension.
    pub fn value_on(&self, x: &[f64], sample: &Sample) -> f64 {
        self.value_unchecked(x, sample)
    }

    fn value_unchecked(&self, x: &[f64], s: &Sample) -> f64 {
        match self.kind {
            LossKind::LeastSquares => {
                let r = dot(&s.features, x) - s.label;
                r * r
            }
            LossKind::LogisticL2 { reg } => {
                softplus(-s.label * dot(&s.features, x)) + 0.5 * reg * dot(x, x)
            }
            LossKind::SmallMlp { hidden } => {
                let r = self.mlp_forward(x, s, hidden, None) - s.label;
                r * r
            }
        }
    }

    /// Writes `∇f(x; ξ_index)` into `out`. Panics on out-of-range input.
    pub fn gradient_into(&self, x: &[f64], index: usize, out: &mut [f64]) {
        let s = &self.samples[index];
        match self.kind {
            LossKind::LeastSquares => {
                let r = 2.0 * (dot(&s.features, x) - s.label);
                for (o, a) in out.iter_mut().zip(&s.features) {
                    *o = r * a;
                }
            }
            LossKind::LogisticL2 { reg } => {
                let margin = s.label * dot(&s.features, x);
                let coef = -s.label * sigmoid(-margin);
                for ((o, a), xi) in out.iter_mut().zip(&s.features).zip(x) {
                    *o = coef * a + reg * xi;
                }
            }
            LossKind::SmallMlp { hidden } => {
                let d = self.feature_dim;
                let mut act = vec![0.0; hidden];
                let pred = self.mlp_forward(x, s, hidden, Some(&mut act));
                let r = 2.0 * (pred - s.label);
                let v = &x[hidden * d + hidden..hidden * d + 2 * hidden];
                let (g_w1, g_rest) = out.split_at_mut(hidden * d);
                let (g_b1, g_rest) = g_rest.split_at_mut(hidden);
                let (g_v, g_v0) = g_rest.split_at_mut(hidden);
                for k in 0..hidden {
                    let delta = r * v[k] * (1.0 - act[k] * act[k]);
                    g_b1[k] = delta;
                    g_v[k] = r * act[k];
                    for j in 0..d {
                        g_w1[k * d + j] = delta * s.features[j];
                    }
                }
                g_v0[0] = r;
            }
        }
    }

    /// Layout: `W (hidden×d, row-major) | c (hidden) | v (hidden) | v_0`.
    fn mlp_forward(&self, x: &[f64], s: &Sample, hidden: usize, act: Option<&mut [f64]>) -> f64 {
        let d = self.feature_dim;
        let (w1, rest) = x.split_at(hidden * d);
        let (b1, rest) = rest.split_at(hidden);
        let (v, v0) = rest.split_at(hidden);
        let mut out = v0[0];
        let mut store = act;
        for k in 0..hidden {
            let h = (dot(&w1[k * d..(k + 1) * d], &s.features) + b1[k]).tanh();
            if let Some(a) = store.as_deref_mut() {
                a[k] = h;
            }
            out += v[k] * h;
        }
        out
    }

    /// Mean loss over all samples.
    pub fn objective(&self, x: &[f64]) -> f64 {
        mean_loss(self, x, &self.samples)
    }

    /// Mean gradient over all samples.
    pub fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let mut g = vec![0.0; self.dim];
        for i in 0..self.samples.len() {
            self.gradient_into(x, i, &mut g);
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += gi;
            }
        }
        let n = self.samples.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Gradient bound `B`, smoothness `L` and modulus `nu` over the ball.
    ///
    /// Least squares and logistic use closed forms; the MLP uses sampled
    /// maxima of gradient norms and gradient-difference ratios, scaled by
    /// [`ESTIMATE_SAFETY`] and flagged uncertified.
    pub fn constants(&self) -> Constants {
        let r = self.radius;
        let norms = self.samples.iter().map(|s| norm(&s.features));
        match self.kind {
            LossKind::LeastSquares => {
                let (mut b, mut l) = (0.0_f64, 0.0_f64);
                for (s, a) in self.samples.iter().zip(norms) {
                    b = b.max(2.0 * a * (a * r + s.label.abs()));
                    l = l.max(2.0 * a * a);
                }
                Constants {
                    b,
                    l,
                    nu: 0.0,
                    certified: true,
                }
            }
            LossKind::LogisticL2 { reg } => {
                let a_max = norms.fold(0.0_f64, f64::max);
                Constants {
                    b: a_max + reg * r,
                    l: a_max * a_max / 4.0 + reg,
                    nu: reg,
                    certified: true,
                }
            }
            LossKind::SmallMlp { .. } => self.sampled_constants(),
        }
    }

    fn sampled_constants(&self) -> Constants {
        let mut rng = ChaCha8Rng::seed_from_u64(ESTIMATE_SEED);
        let (mut b, mut l) = (0.0_f64, 0.0_f64);
        let mut gx = vec![0.0; self.dim];
        let mut gy = vec![0.0; self.dim];
        for p in 0..ESTIMATE_POINTS {
            let x = sample_in_ball(&mut rng, self.dim, self.radius);
            // alternate far pairs with nearby pairs to probe local curvature
            let y = if p % 2 == 0 {
                sample_in_ball(&mut rng, self.dim, self.radius)
            } else {
                let step = sample_in_ball(&mut rng, self.dim, 1e-3 * self.radius);
                let mut y: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
                project_ball_in_place(&mut y, self.radius);
                y
            };
            let dist = dist(&x, &y);
            for i in 0..self.samples.len() {
                self.gradient_into(&x, i, &mut gx);
                self.gradient_into(&y, i, &mut gy);
                b = b.max(norm(&gx)).max(norm(&gy));
                if dist > 0.0 {
                    l = l.max(self::dist(&gx, &gy) / dist);
                }
            }
        }
        Constants {
            b: ESTIMATE_SAFETY * b,
            l: ESTIMATE_SAFETY * l,
            nu: 0.0,
            certified: false,
        }
    }
}

/// Mean of `f(x; ξ)` over `samples` using the loss of `model`.
pub fn mean_loss(model: &LossModel, x: &[f64], samples: &[Sample]) -> f64 {
    samples
        .iter()
        .map(|s| model.value_unchecked(x, s))
        .sum::<f64>()
        / samples.len() as f64
}

/// Euclidean projection onto `{‖x‖ ≤ r}`.
pub fn project_ball(x: &[f64], r: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    project_ball_in_place(&mut out, r);
    out
}

/// In-place projection; returns whether `x` was outside the ball.
pub fn project_ball_in_place(x: &mut [f64], r: f64) -> bool {
    let n = norm(x);
    if n > r {
        let scale = r / n;
        x.iter_mut().for_each(|v| *v *= scale);
        true
    } else {
        false
    }
}

/// Replaces `data[position]` by `replacement`, returning the original and
/// the neighbouring dataset.
pub fn make_paired_datasets(
    data: &[Sample],
    position: usize,
    replacement: Sample,
) -> Result<(Vec<Sample>, Vec<Sample>), LossError> {
    let original = data.get(position).ok_or(LossError::PositionOutOfRange {
        position,
        len: data.len(),
    })?;
    if replacement.dim() != original.dim() {
        return Err(LossError::FeatureDimension {
            index: position,
            expected: original.dim(),
            got: replacement.dim(),
        });
    }
    let mut neighbour = data.to_vec();
    neighbour[position] = replacement;
    Ok((data.to_vec(), neighbour))
}

/// Uniform draw from the ball of radius `r` in `dim` dimensions.
pub fn sample_in_ball<R: Rng>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v);
    let radius = r * rng.random::<f64>().powf(1.0 / dim as f64);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x *= radius / n);
    }
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
