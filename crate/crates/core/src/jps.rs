//! Subadditive ergodic machinery: Kingman means of subadditive sequences
//! over ergodic measures, maximization of those means across a measure
//! family against the uniform growth rate, and verification that endpoints
//! of the computed spectrum are realized as Lyapunov exponents of some
//! family member.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::base::{BasePoint, BaseSystem, CacheKey, ErgodicMeasure};
use crate::cocycle::Cocycle;
use crate::dichotomy::{build_projections_with, DichotomyParams, ProjectionFamily};
use crate::error::{Error, Result};
use crate::linalg::{oblique_projector, qr_positive, qr_sweep, ScaledMatrix};
use crate::lyapunov::exponent_ladder;
use crate::quasicompact::ExtReal;
use crate::spectrum::SpectrumResult;

/// Backward window used when a point's splitting frames have to be
/// recomputed from orbit history instead of a supplied projection family.
const FRAME_HORIZON: usize = 160;

#[derive(Clone, Debug)]
enum Kind {
    /// F_n(q) = log of the n-step operator norm.
    Plain,
    /// F_n(q) = log ||A(q,n) P(q)|| with P(q) projecting onto the slow
    /// (stable) span along the k leading unstable directions.
    Projected { k: usize },
    /// G_n(q) = log of the inverse norm of the n-step product restricted to
    /// the k-dimensional unstable span: -log sigma_min(A(q,n)|_U).
    UnstableInverse { k: usize },
    /// Upper estimate of the log noncompactness norm of the n-step product.
    IcUpper,
}

/// One subadditive sequence attached to a cocycle, evaluated along orbits
/// with per-point caching. `shift` is applied on top of the cocycle's own.
pub struct SubadditiveSequence<'a> {
    c: &'a Cocycle,
    shift: f64,
    kind: Kind,
    /// Authoritative per-point projectors (projected kind) or unstable
    /// bases (inverse kind); missing points fall back to frames computed
    /// from index-k splits of convergent singular sweeps.
    overrides: HashMap<CacheKey, DMatrix<f64>>,
    frame_horizon: usize,
    cache: RefCell<HashMap<CacheKey, Vec<f64>>>,
}

/// F_n(q) = log ||A_shift(q,n) P(q)|| with P taken from a projection family
/// built at a resolvent shift; rank-0 P yields the -inf sentinel.
pub fn projected_norm_sequence<'a>(c: &'a Cocycle, p: &ProjectionFamily, shift: f64) -> SubadditiveSequence<'a> {
    let overrides = p
        .entries
        .iter()
        .map(|e| (e.point.cache_key(), e.projector.clone()))
        .collect();
    SubadditiveSequence {
        c,
        shift,
        kind: Kind::Projected { k: p.dim_unstable },
        overrides,
        frame_horizon: FRAME_HORIZON,
        cache: RefCell::new(HashMap::new()),
    }
}

/// Mirrored construction on the unstable side: G_n(q) from the ranges of
/// Id - P(q), the k-dimensional unstable spans of the family.
pub fn unstable_inverse_sequence<'a>(c: &'a Cocycle, p: &ProjectionFamily, shift: f64) -> Result<SubadditiveSequence<'a>> {
    let d = c.dim();
    let k = p.dim_unstable;
    let mut overrides = HashMap::new();
    for e in &p.entries {
        if k == 0 {
            break;
        }
        let complement = DMatrix::identity(d, d) - &e.projector;
        let svd = nalgebra::SVD::new(complement.clone(), true, false);
        let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD without U factor".into()))?;
        let sv = &svd.singular_values;
        let lead = sv.iter().take(k).filter(|&&s| s > 1e-10 * sv[0].max(1e-300)).count();
        if lead < k {
            return Err(Error::NoUniformSplitting {
                shift: p.shift,
                detail: format!("unstable range of Id - P has rank {lead} < {k} at {}", e.point.describe()),
            });
        }
        overrides.insert(e.point.cache_key(), u.columns(0, k).into_owned());
    }
    Ok(SubadditiveSequence {
        c,
        shift,
        kind: Kind::UnstableInverse { k },
        overrides,
        frame_horizon: FRAME_HORIZON,
        cache: RefCell::new(HashMap::new()),
    })
}

impl<'a> SubadditiveSequence<'a> {
    pub fn plain(c: &'a Cocycle, shift: f64) -> Self {
        SubadditiveSequence {
            c,
            shift,
            kind: Kind::Plain,
            overrides: HashMap::new(),
            frame_horizon: FRAME_HORIZON,
            cache: RefCell::new(HashMap::new()),
        }
    }

    /// Index-split projected sequence: P(q) projects onto the slow
    /// right-singular span along the k leading backward-unstable directions.
    pub fn projected(c: &'a Cocycle, dim_unstable: usize, shift: f64) -> Self {
        SubadditiveSequence {
            c,
            shift,
            kind: Kind::Projected { k: dim_unstable },
            overrides: HashMap::new(),
            frame_horizon: FRAME_HORIZON,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn unstable_inverse(c: &'a Cocycle, dim_unstable: usize, shift: f64) -> Self {
        SubadditiveSequence {
            c,
            shift,
            kind: Kind::UnstableInverse { k: dim_unstable },
            overrides: HashMap::new(),
            frame_horizon: FRAME_HORIZON,
            cache: RefCell::new(HashMap::new()),
        }
    }

    /// Noncompactness-norm upper estimate: min of the per-step tail bound
    /// and the operator norm, both shift-adjusted.
    pub fn ic_upper(c: &'a Cocycle, shift: f64) -> Self {
        SubadditiveSequence {
            c,
            shift,
            kind: Kind::IcUpper,
            overrides: HashMap::new(),
            frame_horizon: FRAME_HORIZON,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Plain => format!("log_opnorm(shift={})", self.shift),
            Kind::Projected { k } => format!("projected_norm(k={k}, shift={})", self.shift),
            Kind::UnstableInverse { k } => format!("unstable_inverse(k={k}, shift={})", self.shift),
            Kind::IcUpper => format!("ic_upper(shift={})", self.shift),
        }
    }

    pub fn cocycle(&self) -> &Cocycle {
        self.c
    }

    fn total_shift(&self) -> f64 {
        self.c.shift() + self.shift
    }

    /// F_1(q), ..., F_horizon(q); cached per point.
    pub fn evaluate(&self, q: &BasePoint, horizon: usize) -> Result<Vec<f64>> {
        let key = q.cache_key();
        if let Some(v) = self.cache.borrow().get(&key) {
            if v.len() >= horizon {
                return Ok(v[..horizon].to_vec());
            }
        }
        let vals = self.compute(q, horizon)?;
        self.cache.borrow_mut().insert(key, vals.clone());
        Ok(vals)
    }

    pub fn value(&self, q: &BasePoint, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParam("sequence index must be at least 1".into()));
        }
        Ok(self.evaluate(q, n)?[n - 1])
    }

    fn compute(&self, q: &BasePoint, horizon: usize) -> Result<Vec<f64>> {
        let d = self.c.dim();
        match &self.kind {
            Kind::Plain => self.norm_values(q, horizon, None),
            Kind::IcUpper => {
                let plain = self.norm_values(q, horizon, None)?;
                match self.c.model().per_step_tail_log() {
                    None => Ok(vec![f64::NEG_INFINITY; horizon]),
                    Some(t) => {
                        let per_step = t - self.total_shift();
                        Ok(plain
                            .iter()
                            .enumerate()
                            .map(|(i, &v)| (per_step * (i + 1) as f64).min(v))
                            .collect())
                    }
                }
            }
            Kind::Projected { k } => {
                if *k == 0 {
                    return self.norm_values(q, horizon, None);
                }
                if *k >= d {
                    // Rank-0 projection: identically zero products.
                    return Ok(vec![f64::NEG_INFINITY; horizon]);
                }
                let p = self.projector_at(q)?;
                self.norm_values(q, horizon, Some(p))
            }
            Kind::UnstableInverse { k } => self.inverse_values(q, horizon, *k),
        }
    }

    fn norm_values(&self, q: &BasePoint, horizon: usize, start: Option<DMatrix<f64>>) -> Result<Vec<f64>> {
        let d = self.c.dim();
        let s = self.total_shift();
        let mut acc = match start {
            Some(p) => ScaledMatrix::from_matrix(p),
            None => ScaledMatrix::identity(d),
        };
        let mut out = Vec::with_capacity(horizon);
        for (i, step) in self.c.forward_steps(q, horizon).enumerate() {
            acc.left_mul(&step?);
            out.push(acc.log_opnorm() - s * (i + 1) as f64);
        }
        Ok(out)
    }

    fn inverse_values(&self, q: &BasePoint, horizon: usize, k: usize) -> Result<Vec<f64>> {
        let d = self.c.dim();
        if k == 0 {
            return Ok(vec![f64::NEG_INFINITY; horizon]);
        }
        if k > d {
            return Err(Error::DimensionMismatch { expected: d, got: k });
        }
        let s = self.total_shift();
        let mut frame = self.unstable_basis_at(q)?;
        // Restricted inverse in moving frames: with Y_i R_i = A(f^{i-1}q)
        // Y_{i-1}, the inverse of the restricted product is R_1^{-1} ...
        // R_n^{-1}; accumulate its transpose.
        let mut inv_t = ScaledMatrix::identity(k);
        let eye = DMatrix::identity(k, k);
        let mut out = Vec::with_capacity(horizon);
        let mut singular = false;
        for (i, step) in self.c.forward_steps(q, horizon).enumerate() {
            let a = step?;
            if singular {
                out.push(f64::INFINITY);
                continue;
            }
            let w = &a * &frame;
            let (qq, rr) = qr_positive(&w);
            frame = qq.columns(0, k).into_owned();
            let r = rr.rows(0, k).into_owned();
            match r.solve_upper_triangular(&eye) {
                Some(rinv) => {
                    inv_t.left_mul(&rinv.transpose());
                    out.push(inv_t.log_opnorm() + s * (i + 1) as f64);
                }
                None => {
                    singular = true;
                    out.push(f64::INFINITY);
                }
            }
        }
        Ok(out)
    }

    /// Log norms of (Id - P(f^n q)) A(q,n) P(q): the equivariance leak that
    /// enters the defect-adjusted subadditivity bound.
    fn leak_values(&self, q: &BasePoint, horizon: usize) -> Result<Vec<f64>> {
        let d = self.c.dim();
        match &self.kind {
            Kind::Projected { k } if *k > 0 && *k < d => {}
            _ => return Ok(vec![f64::NEG_INFINITY; horizon]),
        }
        let s = self.total_shift();
        let mut acc = ScaledMatrix::from_matrix(self.projector_at(q)?);
        let eye = DMatrix::identity(d, d);
        let mut out = Vec::with_capacity(horizon);
        let mut point = q.clone();
        for (i, step) in self.c.forward_steps(q, horizon).enumerate() {
            acc.left_mul(&step?);
            point = self.c.base().iterate(&point, 1)?;
            let p_next = self.projector_at(&point)?;
            let leak = (&eye - &p_next) * &acc.mat;
            let nn = crate::linalg::opnorm(&leak).max(1e-300).ln() + acc.log_scale;
            out.push(nn - s * (i + 1) as f64);
        }
        Ok(out)
    }

    fn projector_at(&self, q: &BasePoint) -> Result<DMatrix<f64>> {
        if let Some(p) = self.overrides.get(&q.cache_key()) {
            return Ok(p.clone());
        }
        let d = self.c.dim();
        let k = match &self.kind {
            Kind::Projected { k } => *k,
            _ => return Err(Error::InvalidParam("projector lookup on a non-projected sequence".into())),
        };
        let (stable, unstable) = self.frames(q)?;
        oblique_projector(
            &stable.columns(k, d - k).into_owned(),
            &unstable.columns(0, k).into_owned(),
        )
    }

    fn unstable_basis_at(&self, q: &BasePoint) -> Result<DMatrix<f64>> {
        if let Some(u) = self.overrides.get(&q.cache_key()) {
            return Ok(u.clone());
        }
        let k = match &self.kind {
            Kind::UnstableInverse { k } => *k,
            _ => return Err(Error::InvalidParam("basis lookup on a non-inverse sequence".into())),
        };
        let sweep = qr_sweep(self.c.dim(), self.c.history_steps(q, self.frame_horizon), None)?;
        Ok(sweep.frame.columns(0, k).into_owned())
    }

    fn frames(&self, q: &BasePoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d = self.c.dim();
        let n = self.frame_horizon;
        let qc = q.clone();
        let adjoint = (0..n as i64).rev().map(|j| Ok(self.c.step_at(&qc, j)?.transpose()));
        let stable = qr_sweep(d, adjoint, None)?.frame;
        let unstable = qr_sweep(d, self.c.history_steps(q, n), None)?.frame;
        Ok((stable, unstable))
    }
}

/// Max violation of F_{n+m}(q) <= F_n(q) + F_m(f^n q) over sampled triples,
/// together with the defect-adjusted residual: each pair also satisfies the
/// computable bound violation <= log(1 + e^{plain_m(f^n q) + leak_n(q) -
/// F_m(f^n q) - F_n(q)}), which collapses to 0 for exactly equivariant
/// projections.
#[derive(Clone, Debug, Serialize)]
pub struct SubadditivityReport {
    pub sequence: String,
    pub n_budget: usize,
    pub samples: usize,
    pub pairs: usize,
    pub max_violation: f64,
    pub max_adjusted_violation: f64,
    pub max_leak_bound: f64,
}

pub fn check_subadditivity(
    seq: &SubadditiveSequence,
    samples: &[BasePoint],
    n_budget: usize,
) -> Result<SubadditivityReport> {
    if n_budget < 2 {
        return Err(Error::InvalidParam("subadditivity budget must be at least 2".into()));
    }
    let plain = SubadditiveSequence::plain(seq.c, seq.shift);
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_adjusted = f64::NEG_INFINITY;
    let mut max_bound: f64 = 0.0;
    let mut pairs = 0usize;
    for q in samples {
        // Values along the orbit: vals[j] holds F_. (f^j q).
        let mut orbit = Vec::with_capacity(n_budget);
        let mut point = q.clone();
        for j in 0..n_budget {
            orbit.push(point.clone());
            if j + 1 < n_budget {
                point = seq.c.base().iterate(&point, 1)?;
            }
        }
        let vals: Vec<Vec<f64>> = orbit
            .iter()
            .enumerate()
            .map(|(j, p)| seq.evaluate(p, n_budget - j))
            .collect::<Result<_>>()?;
        let leak = seq.leak_values(q, n_budget)?;
        let plain_vals: Vec<Vec<f64>> = orbit
            .iter()
            .enumerate()
            .map(|(j, p)| plain.evaluate(p, n_budget - j))
            .collect::<Result<_>>()?;
        for n in 1..n_budget {
            for m in 1..=(n_budget - n) {
                let lhs = vals[0][n + m - 1];
                let rhs = vals[0][n - 1] + vals[n][m - 1];
                if lhs == f64::NEG_INFINITY && rhs == f64::NEG_INFINITY {
                    continue;
                }
                let violation = lhs - rhs;
                let bound = {
                    let e = plain_vals[n][m - 1] + leak[n - 1] - vals[n][m - 1] - vals[0][n - 1];
                    if e == f64::NEG_INFINITY {
                        0.0
                    } else {
                        e.exp().ln_1p()
                    }
                };
                pairs += 1;
                if violation.is_finite() || violation == f64::INFINITY {
                    max_violation = max_violation.max(violation);
                    max_adjusted = max_adjusted.max(violation - bound);
                    max_bound = max_bound.max(bound);
                }
            }
        }
    }
    Ok(SubadditivityReport {
        sequence: seq.label(),
        n_budget,
        samples: samples.len(),
        pairs,
        max_violation,
        max_adjusted_violation: max_adjusted,
        max_leak_bound: max_bound,
    })
}

/// Kingman mean of one sequence with respect to one ergodic measure.
#[derive(Clone, Debug, Serialize)]
pub struct KingmanEstimate {
    pub measure: String,
    pub sequence: String,
    /// min over evaluated horizons of (1/n) * (integral estimate of F_n).
    pub value: ExtReal,
    /// (horizon, mean/horizon) pairs actually evaluated.
    pub evaluations: Vec<(usize, f64)>,
    /// Along-orbit estimate (1/N) F_N at the first sampled point.
    pub along_orbit: f64,
    /// |along_orbit - value| when both are finite.
    pub discrepancy: f64,
    /// max over sampled points of (1/N) F_N; feeds the uniform rate.
    pub point_max: f64,
}

pub fn lambda_mu(
    seq: &SubadditiveSequence,
    mu: &ErgodicMeasure,
    n_max: usize,
    seed: u64,
) -> Result<KingmanEstimate> {
    if n_max < 8 {
        return Err(Error::InvalidParam("Kingman estimate needs n_max >= 8".into()));
    }
    let c = seq.cocycle();
    let pts = mu.sample_starts(c.base(), 24, n_max + 8, seq.frame_horizon + 8, seed)?;
    if pts.is_empty() {
        return Err(Error::MeasureMismatch(format!("measure {} produced no samples", mu.label())));
    }
    let mut horizons: Vec<usize> = [n_max / 4, n_max / 2, n_max]
        .iter()
        .map(|&h| mu.aligned_horizon(h.max(1)))
        .collect();
    horizons.push(n_max);
    horizons.sort_unstable();
    horizons.dedup();
    let top = *horizons.last().unwrap();

    let vals: Vec<Vec<f64>> = pts.iter().map(|q| seq.evaluate(q, top)).collect::<Result<_>>()?;
    let mut evaluations = Vec::with_capacity(horizons.len());
    let mut value = ExtReal::PosInf;
    for &h in &horizons {
        let mut sum = 0.0f64;
        let mut neg = false;
        let mut pos = false;
        for v in &vals {
            match v[h - 1] {
                f64::NEG_INFINITY => neg = true,
                f64::INFINITY => pos = true,
                x => sum += x,
            }
        }
        let mean = if pos {
            f64::INFINITY
        } else if neg {
            f64::NEG_INFINITY
        } else {
            sum / (vals.len() as f64 * h as f64)
        };
        evaluations.push((h, mean));
        let cand = match mean {
            f64::NEG_INFINITY => ExtReal::NegInf,
            f64::INFINITY => ExtReal::PosInf,
            x => ExtReal::Finite(x),
        };
        if cand.cmp_total(value) == std::cmp::Ordering::Less {
            value = cand;
        }
    }

    let along_orbit = vals[0][n_max - 1] / n_max as f64;
    let discrepancy = match value.finite() {
        Some(v) if along_orbit.is_finite() => (along_orbit - v).abs(),
        _ => f64::INFINITY,
    };
    let point_max = vals
        .iter()
        .map(|v| v[n_max - 1] / n_max as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(KingmanEstimate {
        measure: mu.label().to_string(),
        sequence: seq.label(),
        value,
        evaluations,
        along_orbit,
        discrepancy,
        point_max,
    })
}

/// Cao-style maximization: uniform growth rate at the common horizon versus
/// the best Kingman mean across the family.
#[derive(Clone, Debug, Serialize)]
pub struct CaoResult {
    pub sequence: String,
    pub n_max: usize,
    /// (1/N) max over the explicit sample points of F_N.
    pub l_hat: ExtReal,
    pub best_measure: Option<String>,
    pub best_value: ExtReal,
    /// |l_hat - best_value| when both finite.
    pub gap: f64,
    /// All per-measure means were -inf.
    pub degenerate: bool,
    pub per_measure: Vec<KingmanEstimate>,
    /// The family is an explicit under-approximation of the ergodic
    /// simplex; Cao's maximization quantifies over all of it.
    pub family_note: String,
}

pub fn cao_maximize(
    seq: &SubadditiveSequence,
    family: &[ErgodicMeasure],
    samples: &[BasePoint],
    n_max: usize,
    seed: u64,
) -> Result<CaoResult> {
    if family.is_empty() {
        return Err(Error::InvalidParam("measure family must be non-empty".into()));
    }
    let mut per_measure = Vec::with_capacity(family.len());
    let mut best: Option<(usize, ExtReal)> = None;
    for (i, mu) in family.iter().enumerate() {
        let est = lambda_mu(seq, mu, n_max, seed.wrapping_add(i as u64))?;
        let v = est.value;
        per_measure.push(est);
        let better = match &best {
            None => true,
            Some((_, b)) => v.cmp_total(*b) == std::cmp::Ordering::Greater,
        };
        if better {
            best = Some((i, v));
        }
    }
    let mut l_hat = ExtReal::NegInf;
    for q in samples {
        let v = seq.value(q, n_max)? / n_max as f64;
        let cand = match v {
            f64::NEG_INFINITY => ExtReal::NegInf,
            f64::INFINITY => ExtReal::PosInf,
            x => ExtReal::Finite(x),
        };
        l_hat = l_hat.max(cand);
    }
    let (best_idx, best_value) = best.unwrap();
    let degenerate = best_value.is_neg_inf() && l_hat.is_neg_inf();
    let gap = match (l_hat.finite(), best_value.finite()) {
        (Some(l), Some(b)) => (l - b).abs(),
        _ => {
            if degenerate {
                0.0
            } else {
                f64::INFINITY
            }
        }
    };
    Ok(CaoResult {
        sequence: seq.label(),
        n_max,
        l_hat,
        best_measure: Some(per_measure[best_idx].measure.clone()),
        best_value,
        gap,
        degenerate,
        per_measure,
        family_note: format!(
            "family of {} measures is an explicit under-approximation of the ergodic simplex",
            family.len()
        ),
    })
}

/// Default verification family: all periodic orbit measures up to `p_max`
/// (shift bases), the unique invariant measure otherwise.
pub fn default_measure_family(base: &BaseSystem, p_max: usize) -> Result<Vec<ErgodicMeasure>> {
    base.periodic_measures(p_max)
}

/// Union of sampled points of every family member, deduplicated.
pub fn family_points(
    family: &[ErgodicMeasure],
    base: &BaseSystem,
    n_max: usize,
    seed: u64,
) -> Result<Vec<BasePoint>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, mu) in family.iter().enumerate() {
        for q in mu.sample_starts(base, 24, n_max + 8, FRAME_HORIZON + 8, seed.wrapping_add(i as u64))? {
            if seen.insert(q.cache_key()) {
                out.push(q);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub n_max: usize,
    /// Tolerance for matching an endpoint to a ladder exponent.
    pub match_tolerance: f64,
    pub ladder_resolution: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_max: 1024,
            match_tolerance: 1e-2,
            ladder_resolution: 0.05,
            seed: 7,
        }
    }
}

/// Realization status of one spectral endpoint.
#[derive(Clone, Debug, Serialize)]
pub struct EndpointRealization {
    pub value: f64,
    pub side: String,
    pub interval_index: usize,
    pub dim_unstable: Option<usize>,
    /// Resolvent offset used for the projection construction.
    pub eps: Option<f64>,
    pub matched_measure: Option<String>,
    pub exponent: Option<f64>,
    pub residual: Option<f64>,
    /// Argmax measure of the subadditive maximization and its extrapolated
    /// exponent estimate.
    pub cao_measure: Option<String>,
    pub cao_estimate: Option<f64>,
    pub cao_gap: Option<f64>,
    /// Kingman mean of the argmax measure stays above the left end of the
    /// containing interval (within tolerance).
    pub lemma_bound_ok: Option<bool>,
    pub verdict: bool,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EndpointReport {
    pub tolerance: f64,
    pub n_max: usize,
    pub family_size: usize,
    pub family_note: String,
    pub endpoints: Vec<EndpointRealization>,
    pub all_pass: bool,
}

struct EndpointTask {
    interval_index: usize,
    value: f64,
    top: bool,
    dim: Option<usize>,
    interval_lo: f64,
    interval_hi: f64,
    skip: Option<String>,
}

/// Checks that every finite endpoint of the computed spectrum is a Lyapunov
/// exponent of some family member: projections are built at resolvent
/// shifts e + eps and e + eps/2 (mirrored below for left endpoints), the
/// subadditive means are extrapolated to eps -> 0, and the argmax measure's
/// exponent ladder is searched for the endpoint; if it misses, every other
/// family member is tried before a fail verdict.
pub fn verify_endpoints(
    c: &Cocycle,
    r: &SpectrumResult,
    family: &[ErgodicMeasure],
    cfg: &VerifyConfig,
) -> Result<EndpointReport> {
    if family.is_empty() {
        return Err(Error::InvalidParam("measure family must be non-empty".into()));
    }
    let passing: Vec<f64> = r
        .trace
        .iter()
        .filter(|p| p.pass)
        .map(|p| p.shift)
        .collect();
    let mut tasks = Vec::new();
    for (idx, iv) in r.intervals.iter().enumerate() {
        let near_kappa = |e: f64| (e - r.kappa_cut).abs() <= r.margin;
        let mut top_skip = None;
        if near_kappa(iv.hi) {
            top_skip = Some("too close to the noncompactness cutoff".to_string());
        }
        tasks.push(EndpointTask {
            interval_index: idx,
            value: iv.hi,
            top: true,
            dim: iv.dim_above,
            interval_lo: iv.lo,
            interval_hi: iv.hi,
            skip: top_skip,
        });
        let mut bottom_skip = None;
        if iv.touches_floor {
            bottom_skip = Some("interval reaches the scan floor; endpoint not resolved".to_string());
        } else if r.truncated && idx + 1 == r.intervals.len() {
            bottom_skip = Some("scan truncated below this endpoint".to_string());
        } else if near_kappa(iv.lo) {
            bottom_skip = Some("too close to the noncompactness cutoff".to_string());
        }
        tasks.push(EndpointTask {
            interval_index: idx,
            value: iv.lo,
            top: false,
            dim: iv.dim_below,
            interval_lo: iv.lo,
            interval_hi: iv.hi,
            skip: bottom_skip,
        });
    }

    let points = family_points(family, c.base(), cfg.n_max, cfg.seed)?;
    let endpoints: Result<Vec<EndpointRealization>> = tasks
        .par_iter()
        .map(|t| check_endpoint(c, r, family, &points, cfg, t, &passing))
        .collect();
    let endpoints = endpoints?;
    let all_pass = endpoints.iter().all(|e| e.verdict || e.skipped.is_some());
    Ok(EndpointReport {
        tolerance: cfg.match_tolerance,
        n_max: cfg.n_max,
        family_size: family.len(),
        family_note: format!(
            "family of {} measures is an explicit under-approximation of the ergodic simplex",
            family.len()
        ),
        endpoints,
        all_pass,
    })
}

fn extrapolate(half: ExtReal, full: ExtReal) -> ExtReal {
    match (half.finite(), full.finite()) {
        (Some(h), Some(f)) => ExtReal::Finite(2.0 * h - f),
        _ => half,
    }
}

fn check_endpoint(
    c: &Cocycle,
    r: &SpectrumResult,
    family: &[ErgodicMeasure],
    points: &[BasePoint],
    cfg: &VerifyConfig,
    t: &EndpointTask,
    passing: &[f64],
) -> Result<EndpointRealization> {
    let side = if t.top { "top" } else { "bottom" };
    let base_out = |skip: Option<String>| EndpointRealization {
        value: t.value,
        side: side.into(),
        interval_index: t.interval_index,
        dim_unstable: t.dim,
        eps: None,
        matched_measure: None,
        exponent: None,
        residual: None,
        cao_measure: None,
        cao_estimate: None,
        cao_gap: None,
        lemma_bound_ok: None,
        verdict: skip.is_some(),
        skipped: skip,
    };
    if t.skip.is_some() {
        return Ok(base_out(t.skip.clone()));
    }
    let Some(k) = t.dim else {
        return Ok(base_out(Some("no adjacent resolvent dimension recorded".into())));
    };

    // Resolvent offsets: eps and eps/2 with linear extrapolation to 0.
    let near = passing
        .iter()
        .map(|a| (a - t.value).abs())
        .fold(f64::INFINITY, f64::min);
    let eps = if near.is_finite() {
        (2.0 * r.bisect_tol).max(0.5 * near)
    } else {
        2.0 * r.bisect_tol
    };
    let params = DichotomyParams {
        n_max: r.n_max,
        margin: r.margin,
        lambda_min: 0.9 * r.margin,
        ..DichotomyParams::default()
    };

    let mut estimates: Vec<ExtReal> = Vec::new(); // per offset: best Kingman value
    let mut per_measure_offsets: Vec<Vec<ExtReal>> = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    for factor in [1.0f64, 0.5] {
        let offset = eps * factor;
        let a = if t.top { t.value + offset } else { t.value - offset };
        let fam = build_projections_with(c, a, &r.samples, params.clone())?;
        if fam.dim_unstable != k {
            return Ok(EndpointRealization {
                verdict: false,
                skipped: None,
                cao_measure: None,
                cao_estimate: None,
                cao_gap: None,
                matched_measure: None,
                exponent: None,
                residual: None,
                eps: Some(offset),
                lemma_bound_ok: None,
                ..base_out(None)
            });
        }
        let cao = if t.top {
            let seq = projected_norm_sequence(c, &fam, 0.0);
            cao_maximize(&seq, family, points, cfg.n_max, cfg.seed)?
        } else {
            let seq = unstable_inverse_sequence(c, &fam, 0.0)?;
            cao_maximize(&seq, family, points, cfg.n_max, cfg.seed)?
        };
        estimates.push(cao.best_value);
        per_measure_offsets.push(cao.per_measure.iter().map(|e| e.value).collect());
        gaps.push(cao.gap);
    }

    // Extrapolated per-measure values; the argmax is taken afterwards.
    let n_fam = family.len();
    let mut extra: Vec<ExtReal> = Vec::with_capacity(n_fam);
    for j in 0..n_fam {
        extra.push(extrapolate(per_measure_offsets[1][j], per_measure_offsets[0][j]));
    }
    let mut best_j = 0usize;
    for j in 1..n_fam {
        if extra[j].cmp_total(extra[best_j]) == std::cmp::Ordering::Greater {
            best_j = j;
        }
    }
    let cao_estimate = extra[best_j].finite().map(|v| if t.top { v } else { -v });
    let cao_measure = family[best_j].label().to_string();

    // Lemma-type sanity bound on the argmax Kingman mean relative to the
    // containing interval.
    let lemma_bound_ok = extra[best_j].finite().map(|v| {
        if t.top {
            v >= t.interval_lo - cfg.match_tolerance
        } else {
            -v <= t.interval_hi + cfg.match_tolerance
        }
    });

    // Ladder membership: argmax first, then the rest of the family.
    let mut order: Vec<usize> = (0..n_fam).collect();
    order.sort_by_key(|&j| if j == best_j { 0 } else { 1 });
    let mut best_match: Option<(String, f64, f64)> = None;
    for j in order {
        let ladder = exponent_ladder(
            c,
            &family[j],
            cfg.n_max.min(512),
            cfg.ladder_resolution,
            cfg.seed,
        )?;
        for g in &ladder.exponents {
            let resid = (g.lambda - t.value).abs();
            if best_match.as_ref().map_or(true, |(_, _, r0)| resid < *r0) {
                best_match = Some((family[j].label().to_string(), g.lambda, resid));
            }
        }
        if let Some((_, _, r0)) = &best_match {
            if *r0 <= cfg.match_tolerance {
                break;
            }
        }
    }

    let (matched_measure, exponent, residual, verdict) = match best_match {
        Some((m, e, rd)) => (Some(m), Some(e), Some(rd), rd <= cfg.match_tolerance),
        None => (None, None, None, false),
    };
    Ok(EndpointRealization {
        value: t.value,
        side: side.into(),
        interval_index: t.interval_index,
        dim_unstable: t.dim,
        eps: Some(eps),
        matched_measure,
        exponent,
        residual,
        cao_measure: Some(cao_measure),
        cao_estimate,
        cao_gap: gaps.last().copied(),
        lemma_bound_ok,
        verdict,
        skipped: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::Generator;
    use crate::dichotomy::ProjectionEntry;
    use crate::spectrum::{scan_spectrum, ScanConfig};

    fn constant(entries: &[f64], d: usize) -> Cocycle {
        Cocycle::new(
            BaseSystem::FinitePeriodic { period: 1 },
            Generator::Constant {
                matrix: DMatrix::from_row_slice(d, d, entries),
            },
        )
        .unwrap()
    }

    fn scalar_shift() -> Cocycle {
        Cocycle::new(
            BaseSystem::FullShift { alphabet: 2 },
            Generator::ScalarBlocks {
                alphabet: 2,
                block_len: 1,
                log_values: vec![0.0, 1.0],
            },
        )
        .unwrap()
    }

    #[test]
    fn projected_norm_matches_diagonal_closed_form() {
        let c = constant(&[2.0, 0.0, 0.0, 0.5], 2);
        let seq = SubadditiveSequence::projected(&c, 1, 0.0);
        let q = BasePoint::Cycle(0);
        let v = seq.evaluate(&q, 4).unwrap();
        assert!((v[3] + 4.0 * 2.0f64.ln()).abs() <= 1e-9, "F_4 = {}", v[3]);
        // P = Id route.
        let plain = SubadditiveSequence::plain(&c, 0.0);
        let w = plain.evaluate(&q, 4).unwrap();
        assert!((w[3] - 4.0 * 2.0f64.ln()).abs() <= 1e-9);
    }

    #[test]
    fn plain_value_is_birkhoff_sum_for_scalars() {
        let c = scalar_shift();
        let q = BasePoint::Word(crate::base::ShiftWord::periodic(&[0, 1]));
        let seq = SubadditiveSequence::plain(&c, 0.0);
        let v = seq.evaluate(&q, 4).unwrap();
        assert!((v[3] - 2.0).abs() <= 1e-12, "F_4 = {}", v[3]);
    }

    #[test]
    fn subadditivity_exact_for_diagonal_projections() {
        let c = constant(&[2.0, 0.0, 0.0, 0.5], 2);
        let q = vec![BasePoint::Cycle(0)];
        for seq in [
            SubadditiveSequence::plain(&c, 0.0),
            SubadditiveSequence::projected(&c, 1, 0.0),
            SubadditiveSequence::unstable_inverse(&c, 1, 0.0),
        ] {
            let rep = check_subadditivity(&seq, &q, 16).unwrap();
            assert!(rep.max_violation <= 1e-10, "{}: {}", rep.sequence, rep.max_violation);
        }
    }

    #[test]
    fn corrupted_projection_violates_but_respects_defect_bound() {
        let c = Cocycle::new(
            BaseSystem::FinitePeriodic { period: 2 },
            Generator::Constant {
                matrix: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]),
            },
        )
        .unwrap();
        // Deliberately non-equivariant family: P swaps target axes between
        // the two points of the cycle.
        let fam = ProjectionFamily {
            shift: 0.0,
            dim_unstable: 1,
            rank: 1,
            n_max: 16,
            entries: vec![
                ProjectionEntry {
                    point: BasePoint::Cycle(0),
                    projector: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
                    idempotency_defect: 0.0,
                    equivariance_defect: 0.1,
                },
                ProjectionEntry {
                    point: BasePoint::Cycle(1),
                    projector: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
                    idempotency_defect: 0.0,
                    equivariance_defect: 0.1,
                },
            ],
            lipschitz_defect: None,
        };
        let seq = projected_norm_sequence(&c, &fam, 0.0);
        let rep = check_subadditivity(&seq, &[BasePoint::Cycle(0)], 8).unwrap();
        assert!(rep.max_violation > 0.1, "expected a positive violation, got {}", rep.max_violation);
        assert!(
            rep.max_adjusted_violation <= 1e-10,
            "adjusted violation {} exceeds the defect bound",
            rep.max_adjusted_violation
        );
    }

    #[test]
    fn kingman_values_on_scalar_orbits() {
        let c = scalar_shift();
        let seq = SubadditiveSequence::plain(&c, 0.0);
        let one = ErgodicMeasure::periodic_orbit(&[1]);
        let est = lambda_mu(&seq, &one, 256, 3).unwrap();
        assert!((est.value.finite().unwrap() - 1.0).abs() <= 1e-12);
        assert!(est.discrepancy <= 1e-12);

        let bern = ErgodicMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        let est = lambda_mu(&seq, &bern, 512, 11).unwrap();
        assert!(
            (est.value.finite().unwrap() - 0.5).abs() <= 2e-2,
            "Bernoulli mean {:?}",
            est.value
        );
    }

    #[test]
    fn kingman_projected_diagonal_is_minus_log_two() {
        let c = constant(&[2.0, 0.0, 0.0, 0.5], 2);
        let seq = SubadditiveSequence::projected(&c, 1, 0.0);
        let mu = &default_measure_family(c.base(), 1).unwrap()[0];
        let est = lambda_mu(&seq, mu, 64, 0).unwrap();
        assert!((est.value.finite().unwrap() + 2.0f64.ln()).abs() <= 1e-10);
    }

    #[test]
    fn cao_maximization_on_scalar_shift() {
        let c = scalar_shift();
        let seq = SubadditiveSequence::plain(&c, 0.0);
        let family = default_measure_family(c.base(), 2).unwrap();
        let pts = family_points(&family, c.base(), 1024, 5).unwrap();
        let cao = cao_maximize(&seq, &family, &pts, 1024, 5).unwrap();
        assert_eq!(cao.best_measure.as_deref(), Some("orbit(1)"));
        assert!((cao.best_value.finite().unwrap() - 1.0).abs() <= 1e-9);
        assert!(cao.gap <= 5e-2, "gap = {}", cao.gap);
        // Inequality direction is structural.
        for est in &cao.per_measure {
            if let (Some(v), Some(l)) = (est.value.finite(), cao.l_hat.finite()) {
                assert!(v <= l + 1e-9);
            }
        }
    }

    #[test]
    fn ic_upper_sequence_degenerates_for_finite_dim() {
        let c = constant(&[2.0, 0.0, 0.0, 0.5], 2);
        let seq = SubadditiveSequence::ic_upper(&c, 0.0);
        let family = default_measure_family(c.base(), 1).unwrap();
        let pts = family_points(&family, c.base(), 64, 0).unwrap();
        let cao = cao_maximize(&seq, &family, &pts, 64, 0).unwrap();
        assert!(cao.degenerate);
        assert!(cao.best_value.is_neg_inf());
    }

    #[test]
    fn endpoints_of_diagonal_spectrum_are_realized() {
        let c = constant(&[2.0, 0.0, 0.0, 0.5], 2);
        let scan = ScanConfig {
            n_max: 256,
            lower_bound: -2.0,
            ..ScanConfig::default()
        };
        let r = scan_spectrum(&c, &scan).unwrap();
        let family = default_measure_family(c.base(), 1).unwrap();
        let cfg = VerifyConfig {
            n_max: 256,
            ..VerifyConfig::default()
        };
        let rep = verify_endpoints(&c, &r, &family, &cfg).unwrap();
        assert!(rep.all_pass, "{:#?}", rep.endpoints);
        assert_eq!(rep.endpoints.len(), 4);
        for e in &rep.endpoints {
            assert!(e.skipped.is_none());
            // Residual is dominated by where the scan placed the endpoint.
            assert!(e.residual.unwrap() <= 1e-3, "endpoint {} residual {:?}", e.value, e.residual);
            assert_eq!(e.lemma_bound_ok, Some(true));
        }
    }

    #[test]
    fn exact_scalar_endpoints_match_fixed_point_rates() {
        use crate::spectrum::SpectralInterval;
        let c = scalar_shift();
        let samples = crate::dichotomy::default_sample_set(c.base(), 2, 0, 0, 0).unwrap();
        // Spectrum [0,1] handed in exactly: residuals then reflect only the
        // exponent computation, not endpoint location error.
        let r = SpectrumResult {
            intervals: vec![SpectralInterval {
                lo: 0.0,
                hi: 1.0,
                is_point: false,
                touches_floor: false,
                dim_above: Some(0),
                dim_below: Some(1),
            }],
            kappa: ExtReal::NegInf,
            kappa_cut: -0.5,
            scan_top: 1.1,
            log_norm_bound: 1.0,
            lower_tail: false,
            truncated: false,
            scanned_down_to: -0.5,
            alternative: 2,
            accumulation_suspected: false,
            grid_step: 0.02,
            bisect_tol: 1e-3,
            margin: 2.5e-4,
            n_max: 256,
            probe_count: 0,
            trace: vec![],
            samples,
        };
        let family = default_measure_family(c.base(), 1).unwrap();
        let cfg = VerifyConfig {
            n_max: 256,
            ..VerifyConfig::default()
        };
        let rep = verify_endpoints(&c, &r, &family, &cfg).unwrap();
        assert!(rep.all_pass, "{:#?}", rep.endpoints);
        let top = rep.endpoints.iter().find(|e| e.side == "top").unwrap();
        assert_eq!(top.matched_measure.as_deref(), Some("orbit(1)"));
        assert!(top.residual.unwrap() < 1e-6);
        let bottom = rep.endpoints.iter().find(|e| e.side == "bottom").unwrap();
        assert_eq!(bottom.matched_measure.as_deref(), Some("orbit(0)"));
        assert!(bottom.residual.unwrap() < 1e-6);
    }

    #[test]
    fn corrupted_generator_fails_endpoint_verification() {
        let c = Cocycle::new(
            BaseSystem::FullShift { alphabet: 2 },
            Generator::ScalarBlocks {
                alphabet: 2,
                block_len: 4,
                log_values: (0..16)
                    .map(|code| if code == 0b0111 { 1.5 } else { (code >> 3) as f64 })
                    .collect(),
            },
        )
        .unwrap();
        let scan = ScanConfig {
            n_max: 256,
            lower_bound: -0.5,
            p_max: 8,
            ..ScanConfig::default()
        };
        let r = scan_spectrum(&c, &scan).unwrap();
        assert!(
            (r.intervals[0].hi - 1.125).abs() <= 1e-3,
            "scan top {:?}",
            r.intervals[0]
        );
        // Excluding the realizing period-4 orbit from the family leaves the
        // top endpoint unmatched.
        let family = default_measure_family(c.base(), 3).unwrap();
        let cfg = VerifyConfig {
            n_max: 512,
            ..VerifyConfig::default()
        };
        let rep = verify_endpoints(&c, &r, &family, &cfg).unwrap();
        assert!(!rep.all_pass);
        let top = rep
            .endpoints
            .iter()
            .find(|e| e.side == "top" && e.interval_index == 0)
            .unwrap();
        assert!(!top.verdict);
        assert!(top.residual.unwrap() > 1e-2, "residual {:?}", top.residual);
        assert!((top.residual.unwrap() - 0.125).abs() <= 5e-3);
    }
}
