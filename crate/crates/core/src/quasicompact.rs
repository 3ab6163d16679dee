//! Noncompactness bounds and quasicompactness certificates.
//!
//! The measure-of-noncompactness norm of an operator is never computed
//! exactly; every routine here returns certified upper bounds (zero in
//! finite dimensions, tail suprema for structured operator models). The
//! asymptotic rate kappa of those bounds, compared against the top Lyapunov
//! exponent, yields the quasicompactness margin. A Lasota-Yorke two-norm
//! inequality provides an independent route to the same bound.

use nalgebra::{DMatrix, DVector};
use serde::ser::Serializer;
use serde::Serialize;

use crate::base::{BasePoint, ErgodicMeasure};
use crate::cocycle::Cocycle;
use crate::error::{Error, Result};
use crate::linalg::opnorm;

/// Extended real line with explicit infinities. Negative infinity is the
/// sentinel for "compact part only" rates; it is never encoded as a large
/// negative float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, ExtReal::NegInf)
    }

    /// Total order with NegInf < every finite < PosInf.
    pub fn cmp_total(self, other: ExtReal) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        use ExtReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Equal,
            (NegInf, _) | (_, PosInf) => Less,
            (_, NegInf) | (PosInf, _) => Greater,
            (Finite(a), Finite(b)) => a.partial_cmp(&b).unwrap_or(Equal),
        }
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if self.cmp_total(other) == std::cmp::Ordering::Less {
            other
        } else {
            self
        }
    }

    /// self - other, for margin computations.
    pub fn minus(self, other: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a - b),
            (PosInf, PosInf) | (NegInf, NegInf) => Finite(0.0),
            (_, NegInf) | (PosInf, _) => PosInf,
            (NegInf, _) | (_, PosInf) => NegInf,
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::NegInf => s.serialize_str("-inf"),
            ExtReal::PosInf => s.serialize_str("inf"),
            ExtReal::Finite(x) => s.serialize_f64(*x),
        }
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

/// Closed-form weight sequences for diagonal operator tails. All forms are
/// nonincreasing in k, which makes tail suprema of powers exact.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightForm {
    /// w_k = 1/2 + 1/k.
    HalfPlusInvK,
    /// w_k = ratio^k with 0 < ratio <= 1.
    Geometric { ratio: f64 },
    /// w_k = value for all k.
    ConstantWeight { value: f64 },
}

impl WeightForm {
    pub fn weight(&self, k: usize) -> f64 {
        match self {
            WeightForm::HalfPlusInvK => 0.5 + 1.0 / k as f64,
            WeightForm::Geometric { ratio } => ratio.powi(k as i32),
            WeightForm::ConstantWeight { value } => *value,
        }
    }

    /// sup_{k > truncation} w_k; exact because forms are nonincreasing.
    pub fn tail_sup(&self, truncation: usize) -> f64 {
        self.weight(truncation + 1)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightForm::HalfPlusInvK => Ok(()),
            WeightForm::Geometric { ratio } => {
                if *ratio > 0.0 && *ratio <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParam(format!(
                        "geometric weight ratio must lie in (0, 1], got {ratio}"
                    )))
                }
            }
            WeightForm::ConstantWeight { value } => {
                if *value > 0.0 && value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParam("constant weight must be positive".into()))
                }
            }
        }
    }
}

/// How the stored matrix truncation relates to the full operator, for the
/// purpose of bounding the measure-of-noncompactness norm.
#[derive(Clone, Debug)]
pub enum NoncompactnessModel {
    /// Genuinely finite-dimensional: noncompactness norm identically zero.
    FiniteDim,
    /// Diagonal operator whose coordinates beyond `truncation` follow the
    /// closed-form weights; the stored matrix is the leading block.
    DiagonalTail { form: WeightForm, truncation: usize },
    /// Banded operator with a user-certified per-step log bound on the norm
    /// of the tail block beyond `truncation`.
    Banded { truncation: usize, log_tail_rate: f64 },
}

impl NoncompactnessModel {
    /// Upper bound on the noncompactness norm of a single operator given as
    /// the stored truncation. Always clamped by the operator norm.
    pub fn ic_norm_upper(&self, op: &DMatrix<f64>) -> f64 {
        let tail = match self {
            NoncompactnessModel::FiniteDim => return 0.0,
            NoncompactnessModel::DiagonalTail { form, truncation } => form.tail_sup(*truncation),
            NoncompactnessModel::Banded { log_tail_rate, .. } => log_tail_rate.exp(),
        };
        tail.min(opnorm(op))
    }

    /// Per-step log contraction rate of the tail block, `None` in finite
    /// dimension where every operator is compact.
    pub fn per_step_tail_log(&self) -> Option<f64> {
        match self {
            NoncompactnessModel::FiniteDim => None,
            NoncompactnessModel::DiagonalTail { form, truncation } => Some(form.tail_sup(*truncation).ln()),
            NoncompactnessModel::Banded { log_tail_rate, .. } => Some(*log_tail_rate),
        }
    }

    /// log of the noncompactness upper bound for an n-step product of the
    /// unshifted generator whose log operator norm is `log_opnorm`. For
    /// structured models the tail of the product contracts at the per-step
    /// tail rate.
    pub fn log_ic_upper_nstep(&self, n: usize, log_opnorm: f64) -> ExtReal {
        match self.per_step_tail_log() {
            None => ExtReal::NegInf,
            Some(per_step) => ExtReal::Finite((n as f64 * per_step).min(log_opnorm)),
        }
    }
}

/// Upper estimate of kappa(mu): the asymptotic exponential rate of the
/// noncompactness norm along mu-typical orbits, computed at horizon `n_max`
/// and averaged over sample starts.
pub fn kappa_estimate(
    c: &Cocycle,
    model: &NoncompactnessModel,
    mu: &ErgodicMeasure,
    n_max: usize,
    seed: u64,
) -> Result<ExtReal> {
    if n_max < 2 {
        return Err(Error::InvalidParam("kappa estimate needs n_max >= 2".into()));
    }
    if matches!(model, NoncompactnessModel::FiniteDim) {
        return Ok(ExtReal::NegInf);
    }
    let per_step = match model.per_step_tail_log() {
        None => return Ok(ExtReal::NegInf),
        // Shifting the cocycle scales every operator, tail included.
        Some(t) => t - c.shift(),
    };
    let starts = mu.sample_starts(c.base(), 8, n_max + 8, 0, seed)?;
    let mut acc = 0.0;
    for q in &starts {
        let n_eff = mu.aligned_horizon(n_max);
        let log_norm = c.product(q, n_eff)?.log_opnorm();
        acc += (n_eff as f64 * per_step).min(log_norm) / n_eff as f64;
    }
    Ok(ExtReal::Finite(acc / starts.len() as f64))
}

/// kappa := max over the measure family of `kappa_estimate`, combined with
/// the uniform-over-samples rate at the same horizon. Both are upper
/// estimates; the larger is returned.
pub fn global_kappa(
    c: &Cocycle,
    model: &NoncompactnessModel,
    family: &[ErgodicMeasure],
    n_max: usize,
    seed: u64,
) -> Result<ExtReal> {
    if family.is_empty() {
        return Err(Error::InvalidParam("kappa over an empty measure family".into()));
    }
    let mut best = ExtReal::NegInf;
    for (i, mu) in family.iter().enumerate() {
        best = best.max(kappa_estimate(c, model, mu, n_max, seed.wrapping_add(i as u64))?);
        // Uniform variant: max over this measure's samples instead of mean.
        if let Some(t) = model.per_step_tail_log() {
            let per_step = t - c.shift();
            let starts = mu.sample_starts(c.base(), 8, n_max + 8, 0, seed.wrapping_add(i as u64))?;
            for q in &starts {
                let n_eff = mu.aligned_horizon(n_max);
                let log_norm = c.product(q, n_eff)?.log_opnorm();
                best = best.max(ExtReal::Finite((n_eff as f64 * per_step).min(log_norm) / n_eff as f64));
            }
        }
    }
    Ok(best)
}

/// A norm on the coordinate space of the stored truncation.
#[derive(Clone, Debug)]
pub enum NormSpec {
    Euclidean,
    Sup,
    /// max_k weights[k] * |x_k|; weights strictly positive.
    WeightedSup { weights: Vec<f64> },
}

impl NormSpec {
    pub fn vector_norm(&self, x: &DVector<f64>) -> f64 {
        match self {
            NormSpec::Euclidean => x.norm(),
            NormSpec::Sup => x.amax(),
            NormSpec::WeightedSup { weights } => x
                .iter()
                .zip(weights)
                .map(|(v, w)| (v * w).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Induced operator norm. Exact row-sum formulas for the sup-type norms,
    /// largest singular value for the Euclidean one.
    pub fn induced_norm(&self, m: &DMatrix<f64>) -> f64 {
        match self {
            NormSpec::Euclidean => opnorm(m),
            NormSpec::Sup => (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
                .fold(0.0, f64::max),
            NormSpec::WeightedSup { weights } => (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| weights[i] * m[(i, j)].abs() / weights[j])
                        .sum::<f64>()
                })
                .fold(0.0, f64::max),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let NormSpec::WeightedSup { weights } = self {
            if weights.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: weights.len(),
                });
            }
            if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                return Err(Error::InvalidParam("sup-norm weights must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A positive function on the base, sampled pointwise.
#[derive(Clone, Debug)]
pub enum ScalarField {
    Constant(f64),
    /// Value chosen by the leading symbol of a shift point.
    BySymbol(Vec<f64>),
}

impl ScalarField {
    pub fn eval(&self, q: &BasePoint) -> Result<f64> {
        match self {
            ScalarField::Constant(v) => Ok(*v),
            ScalarField::BySymbol(vals) => {
                let s = q.as_word()?.symbol_at(0)? as usize;
                vals.get(s).copied().ok_or(Error::DimensionMismatch {
                    expected: vals.len(),
                    got: s,
                })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ScalarField::Constant(v) => *v > 0.0 && v.is_finite(),
            ScalarField::BySymbol(vals) => !vals.is_empty() && vals.iter().all(|v| *v > 0.0 && v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam("scalar field must be strictly positive and finite".into()))
        }
    }
}

/// Data for the two-norm inequality check: a strong norm, a weak norm, the
/// coefficient functions, and where to test them.
#[derive(Clone, Debug)]
pub struct LasotaYorkeData {
    pub strong: NormSpec,
    pub weak: NormSpec,
    pub alpha: ScalarField,
    pub beta: ScalarField,
    pub gamma: ScalarField,
    pub samples: Vec<BasePoint>,
    pub vectors: Vec<DVector<f64>>,
}

impl LasotaYorkeData {
    pub fn new(
        strong: NormSpec,
        weak: NormSpec,
        alpha: ScalarField,
        beta: ScalarField,
        gamma: ScalarField,
        samples: Vec<BasePoint>,
        vectors: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParam("Lasota-Yorke check needs a nonempty sample set".into()));
        }
        if vectors.is_empty() || vectors.iter().any(|v| v.norm() == 0.0) {
            return Err(Error::InvalidParam("Lasota-Yorke check needs nonzero test vectors".into()));
        }
        let dim = vectors[0].len();
        strong.validate(dim)?;
        weak.validate(dim)?;
        alpha.validate()?;
        beta.validate()?;
        gamma.validate()?;
        Ok(LasotaYorkeData {
            strong,
            weak,
            alpha,
            beta,
            gamma,
            samples,
            vectors,
        })
    }

    /// Seeded unit-cube test vectors.
    pub fn seeded_vectors(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
            .collect()
    }
}

/// One failed inequality instance.
#[derive(Clone, Debug, Serialize)]
pub struct LyViolation {
    pub sample: usize,
    pub vector: Option<usize>,
    pub residual: f64,
    pub kind: &'static str,
}

/// Outcome of the pointwise two-norm inequality check.
#[derive(Clone, Debug, Serialize)]
pub struct LyReport {
    pub pass: bool,
    /// min over (q, x) of alpha(q)||x|| + beta(q)|x| - ||A(q)x||.
    pub min_strong_residual: f64,
    /// min over q of gamma(q) - ||A(q)|| in the strong induced norm.
    pub min_norm_residual: f64,
    pub mean_log_gamma: f64,
    pub violations: Vec<LyViolation>,
}

const LY_RESIDUAL_TOL: f64 = -1e-10;

/// Checks the strong/weak norm inequality and the gamma norm bound on every
/// sampled point and test vector. Failures are reported, never thrown.
pub fn check_lasota_yorke(c: &Cocycle, data: &LasotaYorkeData) -> Result<LyReport> {
    let mut min_strong = f64::INFINITY;
    let mut min_norm = f64::INFINITY;
    let mut log_gamma_sum = 0.0;
    let mut violations = Vec::new();
    for (qi, q) in data.samples.iter().enumerate() {
        let a = c.generator().evaluate(q)?;
        let alpha = data.alpha.eval(q)?;
        let beta = data.beta.eval(q)?;
        let gamma = data.gamma.eval(q)?;
        log_gamma_sum += gamma.ln();
        let norm_res = gamma - data.strong.induced_norm(&a);
        min_norm = min_norm.min(norm_res);
        if norm_res < LY_RESIDUAL_TOL {
            violations.push(LyViolation {
                sample: qi,
                vector: None,
                residual: norm_res,
                kind: "norm_bound",
            });
        }
        for (xi, x) in data.vectors.iter().enumerate() {
            let image = &a * x;
            let res = alpha * data.strong.vector_norm(x) + beta * data.weak.vector_norm(x)
                - data.strong.vector_norm(&image);
            min_strong = min_strong.min(res);
            if res < LY_RESIDUAL_TOL {
                violations.push(LyViolation {
                    sample: qi,
                    vector: Some(xi),
                    residual: res,
                    kind: "two_norm",
                });
            }
        }
    }
    Ok(LyReport {
        pass: violations.is_empty(),
        min_strong_residual: min_strong,
        min_norm_residual: min_norm,
        mean_log_gamma: log_gamma_sum / data.samples.len() as f64,
        violations,
    })
}

/// Birkhoff bound on kappa(mu) from the inequality coefficients: when the
/// two-norm inequality holds, kappa(mu) <= mean of log alpha along
/// mu-typical orbits. Quasicompact verdict iff that bound sits below the top
/// exponent by more than the tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct LyKappaBound {
    pub kappa_bound: f64,
    pub std_error: f64,
    pub lambda_mu: f64,
    pub quasicompact: bool,
    pub tolerance: f64,
}

pub fn kappa_bound_via_ly(
    c: &Cocycle,
    data: &LasotaYorkeData,
    mu: &ErgodicMeasure,
    lambda_mu: f64,
    seed: u64,
) -> Result<LyKappaBound> {
    const N: usize = 10_000;
    const TOL: f64 = 1e-6;
    let n_eff = mu.aligned_horizon(N);
    let start = mu
        .sample_starts(c.base(), 1, n_eff + 1, 0, seed)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::MeasureMismatch("measure produced no sample".into()))?;
    let mut point = start;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_eff {
        let v = data.alpha.eval(&point)?.ln();
        sum += v;
        sumsq += v * v;
        point = c.base().iterate(&point, 1)?;
    }
    let mean = sum / n_eff as f64;
    let var = (sumsq / n_eff as f64 - mean * mean).max(0.0);
    Ok(LyKappaBound {
        kappa_bound: mean,
        std_error: (var / n_eff as f64).sqrt(),
        lambda_mu,
        quasicompact: mean < lambda_mu - TOL,
        tolerance: TOL,
    })
}

/// Combined quasicompactness report: kappa upper estimate vs top exponent.
#[derive(Clone, Debug, Serialize)]
pub struct QuasicompactReport {
    pub kappa: ExtReal,
    pub lambda: f64,
    pub margin: ExtReal,
    pub quasicompact: bool,
    pub tolerance: f64,
    pub measure: String,
}

pub fn assess_quasicompactness(c: &Cocycle, mu: &ErgodicMeasure, n_max: usize, seed: u64) -> Result<QuasicompactReport> {
    const TOL: f64 = 1e-9;
    let kappa = kappa_estimate(c, c.model(), mu, n_max, seed)?;
    let lambda = crate::lyapunov::top_exponent(c, mu, n_max, seed)?;
    let margin = ExtReal::Finite(lambda).minus(kappa);
    let quasicompact = margin.cmp_total(ExtReal::Finite(TOL)) == std::cmp::Ordering::Greater;
    Ok(QuasicompactReport {
        kappa,
        lambda,
        margin,
        quasicompact,
        tolerance: TOL,
        measure: mu.label().to_string(),
    })
}
