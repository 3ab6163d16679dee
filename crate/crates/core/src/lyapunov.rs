//! Finite-horizon multiplicative ergodic theory: top exponent, exponent
//! ladder with multiplicities, fast subspaces, and the slow space.
//!
//! Exponents are extracted from QR growth sweeps along sampled orbits, not
//! from raw products, so horizons far beyond f64 overflow are fine. For
//! orbit measures the horizon is snapped to a whole number of periods,
//! which makes the estimates exact for constant and periodic data.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::base::{BasePoint, ErgodicMeasure};
use crate::cocycle::Cocycle;
use crate::error::{Error, Result};
use crate::linalg::{
    intersect_subspaces, max_principal_angle, opnorm, orthonormalize, qr_sweep, singular_values,
};
use crate::quasicompact::{kappa_estimate, ExtReal};

/// One rung of the exponent ladder.
#[derive(Clone, Debug, Serialize)]
pub struct ExponentGroup {
    pub lambda: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderDiagnostics {
    /// Largest across-sample spread of any per-direction rate.
    pub sample_spread: f64,
    /// Set when a between-cluster gap is borderline relative to the
    /// clustering resolution (within a factor of 1.5 either way).
    pub ambiguous_clusters: bool,
    /// Directions whose rates fell at or below the kappa estimate and were
    /// folded into the tail instead of being listed.
    pub folded_directions: usize,
    pub samples: usize,
}

/// Exponent ladder of a cocycle with respect to one ergodic measure.
#[derive(Clone, Debug, Serialize)]
pub struct LyapunovSpectrum {
    pub measure: String,
    pub n_max: usize,
    pub exponents: Vec<ExponentGroup>,
    pub kappa: ExtReal,
    pub resolution: f64,
    pub diagnostics: LadderDiagnostics,
}

impl LyapunovSpectrum {
    pub fn dimension_listed(&self) -> usize {
        self.exponents.iter().map(|g| g.multiplicity).sum()
    }

    pub fn top(&self) -> Option<f64> {
        self.exponents.first().map(|g| g.lambda)
    }
}

fn measure_starts(
    c: &Cocycle,
    mu: &ErgodicMeasure,
    n_max: usize,
    backward: usize,
    seed: u64,
) -> Result<(Vec<BasePoint>, usize)> {
    let n_eff = mu.aligned_horizon(n_max);
    let starts = mu.sample_starts(c.base(), 8, n_eff, backward, seed)?;
    Ok((starts, n_eff))
}

/// Mean and spread of the top growth rate over measure-typical samples.
pub fn top_exponent_stats(c: &Cocycle, mu: &ErgodicMeasure, n_max: usize, seed: u64) -> Result<(f64, f64)> {
    if n_max < 8 {
        return Err(Error::InvalidParam("top exponent needs n_max >= 8".into()));
    }
    let (starts, n_eff) = measure_starts(c, mu, n_max, 0, seed)?;
    let mut values = Vec::with_capacity(starts.len());
    for q in &starts {
        values.push(c.product(q, n_eff)?.log_opnorm() / n_eff as f64);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok((mean, spread))
}

/// Top Lyapunov exponent estimate: averaged finite-horizon growth rate of
/// the operator norm over measure-typical samples.
pub fn top_exponent(c: &Cocycle, mu: &ErgodicMeasure, n_max: usize, seed: u64) -> Result<f64> {
    Ok(top_exponent_stats(c, mu, n_max, seed)?.0)
}

/// Per-direction growth rates at one start point: QR sweep accumulators
/// divided by the horizon, shift applied, descending. `-inf` marks killed
/// directions.
fn direction_rates(c: &Cocycle, q: &BasePoint, n_eff: usize) -> Result<Vec<f64>> {
    let sweep = qr_sweep(c.dim(), c.forward_steps(q, n_eff), None)?;
    let mut rates = sweep.rates();
    for r in &mut rates {
        if r.is_finite() {
            *r -= c.shift();
        }
    }
    Ok(rates)
}

/// Full exponent ladder with multiplicities from resolution-based
/// clustering of per-direction growth rates.
pub fn exponent_ladder(
    c: &Cocycle,
    mu: &ErgodicMeasure,
    n_max: usize,
    resolution: f64,
    seed: u64,
) -> Result<LyapunovSpectrum> {
    if n_max < 8 {
        return Err(Error::InvalidParam("exponent ladder needs n_max >= 8".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidParam("clustering resolution must be positive".into()));
    }
    let d = c.dim();
    let (starts, n_eff) = measure_starts(c, mu, n_max, 0, seed)?;
    let mut mean_rates = vec![0.0f64; d];
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for q in &starts {
        let rates = direction_rates(c, q, n_eff)?;
        for j in 0..d {
            mean_rates[j] += rates[j];
            lo[j] = lo[j].min(rates[j]);
            hi[j] = hi[j].max(rates[j]);
        }
    }
    let count = starts.len() as f64;
    for r in &mut mean_rates {
        *r /= count;
    }
    let sample_spread = (0..d)
        .map(|j| hi[j] - lo[j])
        .filter(|s| s.is_finite())
        .fold(0.0, f64::max);

    let kappa = kappa_estimate(c, c.model(), mu, n_max, seed)?;
    let kappa_cut = kappa.finite().unwrap_or(f64::NEG_INFINITY);

    // Cluster the descending rates; a gap strictly above the resolution
    // starts a new group. Gaps within 1.5x of the resolution on either side
    // are borderline and flagged.
    let mut groups: Vec<ExponentGroup> = Vec::new();
    let mut ambiguous = false;
    let mut folded = 0usize;
    let mut cluster: Vec<f64> = Vec::new();
    let flush = |cluster: &mut Vec<f64>, groups: &mut Vec<ExponentGroup>, folded: &mut usize| {
        if cluster.is_empty() {
            return;
        }
        let lambda = cluster.iter().sum::<f64>() / cluster.len() as f64;
        if lambda > kappa_cut {
            groups.push(ExponentGroup {
                lambda,
                multiplicity: cluster.len(),
            });
        } else {
            *folded += cluster.len();
        }
        cluster.clear();
    };
    for (j, &r) in mean_rates.iter().enumerate() {
        if !r.is_finite() {
            folded += 1;
            continue;
        }
        if let Some(&prev) = cluster.last() {
            let gap = prev - r;
            if gap > resolution / 1.5 && gap < resolution * 1.5 {
                ambiguous = true;
            }
            if gap > resolution {
                flush(&mut cluster, &mut groups, &mut folded);
            }
        }
        cluster.push(r);
        let _ = j;
    }
    flush(&mut cluster, &mut groups, &mut folded);

    Ok(LyapunovSpectrum {
        measure: mu.label().to_string(),
        n_max: n_eff,
        exponents: groups,
        kappa,
        resolution,
        diagnostics: LadderDiagnostics {
            sample_spread,
            ambiguous_clusters: ambiguous,
            folded_directions: folded,
            samples: starts.len(),
        },
    })
}

/// Oseledets-type splitting at a point: orthonormal bases for the fast
/// spaces, the slow space, and equivariance diagnostics.
#[derive(Clone, Debug)]
pub struct OseledetsSplitting {
    pub point: String,
    pub groups: Vec<ExponentGroup>,
    /// One orthonormal basis per listed exponent group.
    pub bases: Vec<DMatrix<f64>>,
    /// Directions growing no faster than kappa + resolution.
    pub slow_basis: DMatrix<f64>,
    /// Principal angle between A(q) E_i(q) and E_i(f q), per group.
    pub equivariance_defects: Vec<f64>,
    /// Smallest principal angle between distinct fast spaces (transversality).
    pub min_pairwise_angle: f64,
    /// Smallest principal cosine seen in the defining intersections; near 1
    /// means the forward and backward data agreed.
    pub intersection_quality: f64,
    pub backward_window_used: bool,
    pub rank_collapse: bool,
}

/// Orthonormal frame whose leading columns span the fastest forward
/// directions at the chain end; feeding adjoint steps in reverse yields the
/// right-singular (slow filtration) frame at the chain start.
fn right_singular_frame(c: &Cocycle, q: &BasePoint, n: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = c.dim();
    let q2 = q.clone();
    let steps = (0..n as i64).rev().map(move |j| {
        let a = c.step_at(&q2, j)?;
        Ok(a.transpose())
    });
    let sweep = qr_sweep(d, steps, None)?;
    let n_f = n.max(1) as f64;
    let rates: Vec<f64> = sweep.log_growth.iter().map(|g| g / n_f - c.shift()).collect();
    Ok((sweep.frame, rates))
}

/// Frame of backward-fast directions at q, from a sweep along the backward
/// history; `None` when the point's window does not reach back far enough.
fn backward_fast_frame(c: &Cocycle, q: &BasePoint, n: usize) -> Result<Option<DMatrix<f64>>> {
    match c.base().iterate(q, -(n as i64)) {
        Ok(_) => {}
        Err(Error::WindowTooShort { .. }) => return Ok(None),
        Err(e) => return Err(e),
    }
    let sweep = qr_sweep(c.dim(), c.history_steps(q, n), None)?;
    Ok(Some(sweep.frame))
}

fn splitting_bases(
    c: &Cocycle,
    spectrum: &LyapunovSpectrum,
    q: &BasePoint,
    n: usize,
) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>, f64, bool)> {
    let d = c.dim();
    let (right_frame, right_rates) = right_singular_frame(c, q, n)?;
    let backward = backward_fast_frame(c, q, n)?;
    let used_backward = backward.is_some();
    let mut bases = Vec::with_capacity(spectrum.exponents.len());
    let mut quality = 1.0f64;
    let mut offset = 0usize;
    for group in &spectrum.exponents {
        let m = group.multiplicity;
        let basis = match &backward {
            Some(u) => {
                // Fast side: backward-fast span of the first offset+m
                // directions. Slow side: right-singular span from offset on.
                let fast = u.columns(0, (offset + m).min(d)).into_owned();
                let slow = right_frame.columns(offset, d - offset).into_owned();
                let (b, min_cos) = intersect_subspaces(&fast, &slow, m)?;
                quality = quality.min(min_cos);
                b
            }
            None => orthonormalize(&right_frame.columns(offset, m).into_owned()),
        };
        bases.push(basis);
        offset += m;
    }
    // Slow space: right-singular directions at or below kappa + resolution,
    // including killed (-inf) ones.
    let cut = spectrum
        .kappa
        .finite()
        .map(|k| k + spectrum.resolution)
        .unwrap_or(f64::NEG_INFINITY);
    let slow_cols: Vec<usize> = (0..d)
        .filter(|&j| right_rates[j] <= cut || !right_rates[j].is_finite())
        .collect();
    let mut slow = DMatrix::zeros(d, slow_cols.len());
    for (s, &j) in slow_cols.iter().enumerate() {
        slow.set_column(s, &right_frame.column(j));
    }
    Ok((bases, slow, quality, used_backward))
}

pub fn oseledets_splitting(
    c: &Cocycle,
    spectrum: &LyapunovSpectrum,
    q: &BasePoint,
    n_max: usize,
) -> Result<OseledetsSplitting> {
    if spectrum.dimension_listed() > c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            got: spectrum.dimension_listed(),
        });
    }
    let n = n_max.max(8);
    let (bases, slow_basis, quality, used_backward) = splitting_bases(c, spectrum, q, n)?;
    // Splitting one step ahead, for equivariance defects.
    let fq = c.base().iterate(q, 1)?;
    let n_next = match c.base().iterate(&fq, n as i64) {
        Ok(_) => n,
        Err(_) => n - 1,
    };
    let (next_bases, _, _, _) = splitting_bases(c, spectrum, &fq, n_next)?;
    let a = c.generator().evaluate(q)?;
    let mut defects = Vec::with_capacity(bases.len());
    let mut rank_collapse = false;
    for (b, nb) in bases.iter().zip(&next_bases) {
        let image = &a * b;
        let svals = singular_values(&image);
        let collapsed = b.ncols() > 0 && svals.last().map_or(true, |&s| s <= 1e-12 * opnorm(&a).max(1e-300));
        if collapsed {
            rank_collapse = true;
            defects.push(std::f64::consts::FRAC_PI_2);
            continue;
        }
        defects.push(max_principal_angle(&orthonormalize(&image), nb));
    }
    let mut min_angle = std::f64::consts::FRAC_PI_2;
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            if bases[i].ncols() > 0 && bases[j].ncols() > 0 {
                // Transversality: complement of the largest shared cosine.
                let cos = crate::linalg::principal_cosines(&bases[i], &bases[j]);
                if let Some(&c0) = cos.first() {
                    min_angle = min_angle.min(c0.clamp(0.0, 1.0).acos());
                }
            }
        }
    }
    Ok(OseledetsSplitting {
        point: q.describe(),
        groups: spectrum.exponents.clone(),
        bases,
        slow_basis,
        equivariance_defects: defects,
        min_pairwise_angle: min_angle,
        intersection_quality: quality,
        backward_window_used: used_backward,
        rank_collapse,
    })
}

/// Worst growth rate over the slow-space basis at the given horizon; the
/// multiplicative ergodic bound says this stays at or below kappa plus the
/// clustering resolution.
pub fn slow_space_growth(c: &Cocycle, splitting: &OseledetsSplitting, q: &BasePoint, n: usize) -> Result<Option<f64>> {
    if splitting.slow_basis.ncols() == 0 {
        return Ok(None);
    }
    let prod = c.product(q, n)?;
    let image = &prod.mat * &splitting.slow_basis;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..image.ncols() {
        let ln = image.column(j).norm();
        let rate = if ln > 0.0 {
            (ln.ln() + prod.log_scale) / n as f64
        } else {
            f64::NEG_INFINITY
        };
        worst = worst.max(rate);
    }
    Ok(Some(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseSystem;
    use crate::cocycle::Generator;
    use approx::assert_relative_eq;

    fn constant_cocycle(entries: &[f64], d: usize) -> (Cocycle, ErgodicMeasure) {
        let c = Cocycle::new(
            BaseSystem::FinitePeriodic { period: 1 },
            Generator::Constant {
                matrix: DMatrix::from_row_slice(d, d, entries),
            },
        )
        .unwrap();
        let mu = c.base().periodic_measures(1).unwrap().remove(0);
        (c, mu)
    }

    #[test]
    fn diagonal_top_exponent_is_exact() {
        let (c, mu) = constant_cocycle(&[2.0, 0.0, 0.0, 0.5], 2);
        let top = top_exponent(&c, &mu, 64, 0).unwrap();
        assert_relative_eq!(top, 2.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn ladder_matches_eigenvalue_moduli_with_multiplicity() {
        let (c, mu) = constant_cocycle(
            &[
                2.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 0.5,
            ],
            4,
        );
        let ladder = exponent_ladder(&c, &mu, 512, 0.05, 0).unwrap();
        let got: Vec<(f64, usize)> = ladder.exponents.iter().map(|g| (g.lambda, g.multiplicity)).collect();
        assert_eq!(got.len(), 3);
        assert_relative_eq!(got[0].0, 2.0f64.ln(), epsilon = 1e-9);
        assert_eq!(got[0].1, 1);
        assert_relative_eq!(got[1].0, 0.0, epsilon = 1e-9);
        assert_eq!(got[1].1, 2);
        assert_relative_eq!(got[2].0, -(2.0f64.ln()), epsilon = 1e-9);
        assert_eq!(got[2].1, 1);
        assert!(!ladder.diagnostics.ambiguous_clusters);
    }

    #[test]
    fn triangular_ladder_uses_eigenvalues_not_singular_values() {
        // One-step singular values of [[2,1],[0,1/2]] are not 2 and 1/2, but
        // the growth rates are.
        let (c, mu) = constant_cocycle(&[2.0, 1.0, 0.0, 0.5], 2);
        let ladder = exponent_ladder(&c, &mu, 512, 0.05, 0).unwrap();
        assert_relative_eq!(ladder.exponents[0].lambda, 2.0f64.ln(), epsilon = 1e-6);
        assert_relative_eq!(ladder.exponents[1].lambda, -(2.0f64.ln()), epsilon = 1e-6);
    }

    #[test]
    fn ladder_shift_covariance_is_exact() {
        let (c, mu) = constant_cocycle(&[2.0, 1.0, 0.0, 0.5], 2);
        let plain = exponent_ladder(&c, &mu, 128, 0.05, 0).unwrap();
        let shifted = exponent_ladder(&c.shifted(0.3), &mu, 128, 0.05, 0).unwrap();
        for (a, b) in plain.exponents.iter().zip(&shifted.exponents) {
            assert_relative_eq!(a.lambda - 0.3, b.lambda, epsilon = 1e-10);
            assert_eq!(a.multiplicity, b.multiplicity);
        }
    }

    #[test]
    fn splitting_of_shear_matches_eigenvectors() {
        let (c, mu) = constant_cocycle(&[2.0, 1.0, 0.0, 0.5], 2);
        let ladder = exponent_ladder(&c, &mu, 256, 0.05, 0).unwrap();
        let q = BasePoint::Cycle(0);
        let split = oseledets_splitting(&c, &ladder, &q, 256).unwrap();
        assert!(split.backward_window_used);
        // Fast space: e_1. Slow-exponent space: eigenvector (1, -3/2).
        let e1 = &split.bases[0];
        assert_relative_eq!(e1[(0, 0)].abs(), 1.0, epsilon = 1e-9);
        let v = &split.bases[1];
        let expect = DMatrix::from_column_slice(2, 1, &[1.0, -1.5]);
        let angle = max_principal_angle(&orthonormalize(&expect), v);
        assert!(angle < 1e-6, "angle {angle}");
        assert!(split.equivariance_defects.iter().all(|&d| d < 1e-6));
        assert!(!split.rank_collapse);
        // Finite-dimensional cocycle: slow space below kappa = -inf is {0}.
        assert_eq!(split.slow_basis.ncols(), 0);
    }

    #[test]
    fn killed_directions_fold_into_slow_space() {
        let (c, mu) = constant_cocycle(&[1.0, 0.0, 0.0, 0.0], 2);
        let ladder = exponent_ladder(&c, &mu, 64, 0.05, 0).unwrap();
        assert_eq!(ladder.dimension_listed(), 1);
        assert_eq!(ladder.diagnostics.folded_directions, 1);
        let q = BasePoint::Cycle(0);
        let split = oseledets_splitting(&c, &ladder, &q, 64).unwrap();
        assert_eq!(split.slow_basis.ncols(), 1);
        let growth = slow_space_growth(&c, &split, &q, 64).unwrap().unwrap();
        assert_eq!(growth, f64::NEG_INFINITY);
    }
}
