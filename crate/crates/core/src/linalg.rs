//! Dense linear-algebra support: log-scaled products, QR growth sweeps,
//! and subspace utilities.
//!
//! Long products of matrices with exponential growth overflow `f64` near
//! step 700. Everything here therefore works with a normalized matrix plus
//! a separate log-magnitude, and growth rates are extracted through QR
//! re-orthogonalization rather than by factorizing raw products.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A matrix stored as `exp(log_scale) * mat`, with `mat` kept near unit size.
#[derive(Clone, Debug)]
pub struct ScaledMatrix {
    pub mat: DMatrix<f64>,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn identity(d: usize) -> Self {
        ScaledMatrix {
            mat: DMatrix::identity(d, d),
            log_scale: 0.0,
        }
    }

    pub fn from_matrix(mat: DMatrix<f64>) -> Self {
        let mut s = ScaledMatrix {
            mat,
            log_scale: 0.0,
        };
        s.renormalize();
        s
    }

    /// Replaces `self` by `a * self`, renormalizing as needed.
    pub fn left_mul(&mut self, a: &DMatrix<f64>) {
        self.mat = a * &self.mat;
        self.renormalize();
    }

    /// `a * b` as a scaled product.
    pub fn compose(a: &ScaledMatrix, b: &ScaledMatrix) -> ScaledMatrix {
        let mut out = ScaledMatrix {
            mat: &a.mat * &b.mat,
            log_scale: a.log_scale + b.log_scale,
        };
        out.renormalize();
        out
    }

    /// Adds `t` to the log-magnitude (multiplies the operator by `exp(t)`).
    pub fn scaled_by_log(&self, t: f64) -> ScaledMatrix {
        ScaledMatrix {
            mat: self.mat.clone(),
            log_scale: self.log_scale + t,
        }
    }

    fn renormalize(&mut self) {
        let m = self.mat.amax();
        if m > 0.0 && m.is_finite() {
            if !(1e-8..=1e8).contains(&m) {
                self.mat /= m;
                self.log_scale += m.ln();
            }
        }
        // A zero matrix stays zero; log-norms report -inf.
    }

    /// log of the operator 2-norm; `-inf` for the zero matrix.
    pub fn log_opnorm(&self) -> f64 {
        let n = opnorm(&self.mat);
        if n > 0.0 {
            n.ln() + self.log_scale
        } else {
            f64::NEG_INFINITY
        }
    }

    /// log singular values, descending; zeros map to `-inf`.
    pub fn log_singular_values(&self) -> Vec<f64> {
        singular_values(&self.mat)
            .iter()
            .map(|&s| {
                if s > 0.0 {
                    s.ln() + self.log_scale
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    /// Materializes the raw matrix. Overflows to `inf` entries when the
    /// log-magnitude exceeds what `f64` can hold; callers that iterate far
    /// should stay in scaled form.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        &self.mat * self.log_scale.exp()
    }

    /// Inverse as a scaled matrix. Errors when the stored factor is singular
    /// to working precision.
    pub fn inverse(&self) -> Result<ScaledMatrix> {
        let inv = self
            .mat
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular matrix in scaled inverse".into()))?;
        let mut out = ScaledMatrix {
            mat: inv,
            log_scale: -self.log_scale,
        };
        out.renormalize();
        Ok(out)
    }
}

/// Operator 2-norm (largest singular value).
pub fn opnorm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let sv = m.clone().singular_values();
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Smallest singular value.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// QR factorization with the sign convention `diag(R) >= 0`.
pub fn qr_positive(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let k = r.nrows().min(r.ncols());
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for c in 0..r.ncols() {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    (q, r)
}

/// Result of a QR growth sweep along an orbit segment.
#[derive(Clone, Debug)]
pub struct SweepResult {
    /// Accumulated `sum_k log R_jj(k)` per frame column; `-inf` marks a
    /// direction killed by a singular step.
    pub log_growth: Vec<f64>,
    /// Orthogonal frame transported to the end of the segment.
    pub frame: DMatrix<f64>,
    pub steps: usize,
}

impl SweepResult {
    /// Growth rates `log_growth / steps`, descending. Empty sweep gives zeros.
    pub fn rates(&self) -> Vec<f64> {
        let n = self.steps.max(1) as f64;
        let mut r: Vec<f64> = self.log_growth.iter().map(|g| g / n).collect();
        r.sort_by(|a, b| b.partial_cmp(a).unwrap());
        r
    }
}

/// Runs the discrete QR iteration `A_k Q_k = Q_{k+1} R_{k+1}` over the given
/// step matrices, starting from `start` (identity by default). `on_step` sees
/// the frame after each step, 1-indexed by steps taken.
pub fn qr_sweep_with<I, F>(d: usize, steps: I, start: Option<DMatrix<f64>>, mut on_step: F) -> Result<SweepResult>
where
    I: IntoIterator<Item = Result<DMatrix<f64>>>,
    F: FnMut(usize, &DMatrix<f64>, &DMatrix<f64>),
{
    let mut q = start.unwrap_or_else(|| DMatrix::identity(d, d));
    let cols = q.ncols();
    let mut acc = vec![0.0f64; cols];
    let mut count = 0usize;
    for a in steps {
        let a = a?;
        let m = &a * &q;
        let (qq, r) = qr_positive(&m);
        q = qq;
        for (j, slot) in acc.iter_mut().enumerate() {
            let v = r[(j, j)];
            if v > 0.0 {
                *slot += v.ln();
            } else {
                *slot = f64::NEG_INFINITY;
            }
        }
        count += 1;
        on_step(count, &q, &r);
    }
    Ok(SweepResult {
        log_growth: acc,
        frame: q,
        steps: count,
    })
}

/// QR growth sweep without per-step observation.
pub fn qr_sweep<I>(d: usize, steps: I, start: Option<DMatrix<f64>>) -> Result<SweepResult>
where
    I: IntoIterator<Item = Result<DMatrix<f64>>>,
{
    qr_sweep_with(d, steps, start, |_, _, _| {})
}

/// Orthonormal basis for the column span (thin QR; assumes full column rank).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let (q, _) = qr_positive(m);
    q.columns(0, m.ncols()).into_owned()
}

/// Cosines of the principal angles between the spans of two orthonormal
/// bases, descending.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    singular_values(&(a.transpose() * b))
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect()
}

/// Largest principal angle between two equal-dimension subspaces, radians.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let cos = principal_cosines(a, b);
    match cos.last() {
        Some(&c) => c.acos(),
        None => 0.0,
    }
}

/// Basis (in the ambient space) of a `dim`-dimensional intersection of the
/// spans of `a` and `b`, via principal vectors. Returns the basis and the
/// smallest principal cosine used; the caller judges quality.
pub fn intersect_subspaces(a: &DMatrix<f64>, b: &DMatrix<f64>, dim: usize) -> Result<(DMatrix<f64>, f64)> {
    if dim == 0 {
        return Ok((DMatrix::zeros(a.nrows(), 0), 1.0));
    }
    if a.ncols() < dim || b.ncols() < dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: a.ncols().min(b.ncols()),
        });
    }
    let svd = nalgebra::linalg::SVD::new(a.transpose() * b, true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD did not produce U".into()))?;
    let mut pairs: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let mut basis = DMatrix::zeros(a.nrows(), dim);
    let mut min_cos = 1.0f64;
    for (slot, &(s, idx)) in pairs.iter().take(dim).enumerate() {
        min_cos = min_cos.min(s.clamp(0.0, 1.0));
        let dir = a * u.column(idx);
        basis.set_column(slot, &dir);
    }
    Ok((orthonormalize(&basis), min_cos))
}

/// Oblique projector with image `span(range)` and kernel `span(kernel)`.
/// The two bases must jointly span the ambient space with reasonable
/// conditioning.
pub fn oblique_projector(range: &DMatrix<f64>, kernel: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = range.nrows();
    let s = range.ncols();
    let u = kernel.ncols();
    if s + u != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: s + u,
        });
    }
    let mut m = DMatrix::zeros(d, d);
    for j in 0..s {
        m.set_column(j, &range.column(j));
    }
    for j in 0..u {
        m.set_column(s + j, &kernel.column(j));
    }
    let sv = singular_values(&m);
    let (smax, smin) = (sv[0], sv[d - 1]);
    if !(smin > smax * 1e-12) {
        return Err(Error::Numerical(format!(
            "splitting bases nearly degenerate: cond = {:.3e}",
            smax / smin.max(f64::MIN_POSITIVE)
        )));
    }
    let minv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("splitting basis not invertible".into()))?;
    let mut diag = DMatrix::zeros(d, d);
    for j in 0..s {
        diag[(j, j)] = 1.0;
    }
    Ok(&m * diag * minv)
}

/// Least-squares solve `A x = b` via pseudo-inverse; returns the solution and
/// the residual norm.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = nalgebra::linalg::SVD::new(a.clone(), true, true);
    let x = svd
        .solve(b, 1e-14)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let res = (a * &x - b).norm();
    Ok((x, res))
}

/// Slope and intercept of the least-squares line through `(x_i, y_i)`.
/// Non-finite ys are skipped; returns `None` with fewer than two points.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<&(f64, f64)> = points.iter().filter(|(_, y)| y.is_finite()).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Some((slope, intercept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn scaled_product_tracks_huge_growth() {
        // diag(2, 1/2)^2000 has log top singular value 2000 ln 2.
        let a = mat2(2.0, 0.0, 0.0, 0.5);
        let mut p = ScaledMatrix::identity(2);
        for _ in 0..2000 {
            p.left_mul(&a);
        }
        assert_relative_eq!(p.log_opnorm(), 2000.0 * 2.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn qr_positive_has_nonnegative_diagonal() {
        let m = mat2(-3.0, 1.0, 2.0, -4.0);
        let (q, r) = qr_positive(&m);
        assert!(r[(0, 0)] >= 0.0 && r[(1, 1)] >= 0.0);
        assert_relative_eq!((&q * &r - &m).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((q.transpose() * &q - DMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sweep_rates_match_eigenvalue_moduli_for_triangular_constant() {
        let a = mat2(2.0, 1.0, 0.0, 0.5);
        let steps = (0..256).map(|_| Ok(a.clone()));
        let sweep = qr_sweep(2, steps, None).unwrap();
        let rates = sweep.rates();
        assert_relative_eq!(rates[0], 2.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(rates[1], -(2.0f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn sweep_marks_killed_direction() {
        let a = mat2(1.0, 0.0, 0.0, 0.0);
        let sweep = qr_sweep(2, (0..8).map(|_| Ok(a.clone())), None).unwrap();
        let rates = sweep.rates();
        assert_eq!(rates[0], 0.0);
        assert!(rates[1] == f64::NEG_INFINITY);
    }

    #[test]
    fn projector_splits_along_given_bases() {
        // Range span{(1,0)}, kernel span{(1,1)}: P(x) keeps the range part.
        let range = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let kernel = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let p = oblique_projector(&range, &kernel).unwrap();
        assert_relative_eq!((&p * &p - &p).norm(), 0.0, epsilon = 1e-12);
        let v = DVector::from_column_slice(&[3.0, 2.0]); // = (1,0) + 2*(1,1)
        let pv = &p * v;
        assert_relative_eq!(pv[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(pv[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn projector_rejects_degenerate_bases() {
        let range = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let kernel = DMatrix::from_column_slice(2, 1, &[1.0, 1e-14]);
        assert!(oblique_projector(&range, &kernel).is_err());
    }

    #[test]
    fn intersection_recovers_shared_direction() {
        // span{e1, e2} intersect span{e1, e3} = span{e1} in R^3.
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let (basis, min_cos) = intersect_subspaces(&a, &b, 1).unwrap();
        assert!(min_cos > 1.0 - 1e-12);
        assert_relative_eq!(basis[(0, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_fit_recovers_slope() {
        let pts: Vec<(f64, f64)> = (1..=32).map(|n| (n as f64, 3.0 - 0.25 * n as f64)).collect();
        let (slope, intercept) = linear_fit(&pts).unwrap();
        assert_relative_eq!(slope, -0.25, epsilon = 1e-12);
        assert_relative_eq!(intercept, 3.0, epsilon = 1e-12);
    }
}
