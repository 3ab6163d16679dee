//! Cocycle algebra: generators, n-step products with a doubling cache,
//! exponentially shifted variants, and uniform norm bounds.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use crate::base::{BasePoint, BaseSystem, CacheKey};
use crate::error::{Error, Result};
use crate::linalg::{opnorm, ScaledMatrix};
use crate::quasicompact::NoncompactnessModel;

/// One-step generator A: M -> d x d matrices.
#[derive(Clone, Debug)]
pub enum Generator {
    /// A(q) = matrix for every q.
    Constant { matrix: DMatrix<f64> },
    /// One matrix per alphabet symbol, chosen by the leading symbol of a
    /// shift point.
    PerSymbol { matrices: Vec<DMatrix<f64>> },
    /// Scalar (1x1) generator exp(v) where v is looked up by the leading
    /// block of `block_len` symbols, coded big-endian base `alphabet`.
    ScalarBlocks {
        alphabet: usize,
        block_len: usize,
        log_values: Vec<f64>,
    },
    /// A(theta) = scale * rotation by the angle 2*pi*theta.
    ScaledRotation { scale: f64 },
}

impl Generator {
    pub fn dim(&self) -> usize {
        match self {
            Generator::Constant { matrix } => matrix.nrows(),
            Generator::PerSymbol { matrices } => matrices.first().map_or(0, |m| m.nrows()),
            Generator::ScalarBlocks { .. } => 1,
            Generator::ScaledRotation { .. } => 2,
        }
    }

    fn validate(&self, base: &BaseSystem) -> Result<()> {
        let finite = |m: &DMatrix<f64>| m.iter().all(|x| x.is_finite());
        match self {
            Generator::Constant { matrix } => {
                if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
                    return Err(Error::InvalidParam("constant generator must be square and nonempty".into()));
                }
                if !finite(matrix) {
                    return Err(Error::InvalidParam("constant generator has non-finite entries".into()));
                }
            }
            Generator::PerSymbol { matrices } => {
                let alphabet = match base {
                    BaseSystem::FullShift { alphabet } => *alphabet,
                    _ => {
                        return Err(Error::VariantMismatch {
                            expected: "full shift base",
                            got: "non-shift base",
                        })
                    }
                };
                if matrices.len() != alphabet {
                    return Err(Error::InvalidParam(format!(
                        "per-symbol generator needs exactly {} matrices, got {}",
                        alphabet,
                        matrices.len()
                    )));
                }
                let d = self.dim();
                for m in matrices {
                    if m.nrows() != d || m.ncols() != d || !finite(m) {
                        return Err(Error::InvalidParam(
                            "per-symbol matrices must be square, equal-sized, finite".into(),
                        ));
                    }
                }
            }
            Generator::ScalarBlocks {
                alphabet,
                block_len,
                log_values,
            } => {
                match base {
                    BaseSystem::FullShift { alphabet: k } if k == alphabet => {}
                    _ => {
                        return Err(Error::VariantMismatch {
                            expected: "full shift base with matching alphabet",
                            got: "other base",
                        })
                    }
                }
                let expect = alphabet.pow(*block_len as u32);
                if *block_len == 0 || log_values.len() != expect {
                    return Err(Error::InvalidParam(format!(
                        "scalar block table needs alphabet^block_len = {} values, got {}",
                        expect,
                        log_values.len()
                    )));
                }
                if log_values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParam("scalar block table has non-finite entries".into()));
                }
            }
            Generator::ScaledRotation { scale } => {
                if !matches!(base, BaseSystem::CircleRotation { .. }) {
                    return Err(Error::VariantMismatch {
                        expected: "circle rotation base",
                        got: "other base",
                    });
                }
                if !scale.is_finite() || *scale <= 0.0 {
                    return Err(Error::InvalidParam("rotation scale must be positive and finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Evaluates A(q).
    pub fn evaluate(&self, q: &BasePoint) -> Result<DMatrix<f64>> {
        match self {
            Generator::Constant { matrix } => Ok(matrix.clone()),
            Generator::PerSymbol { matrices } => {
                let s = q.as_word()?.symbol_at(0)? as usize;
                matrices.get(s).cloned().ok_or(Error::DimensionMismatch {
                    expected: matrices.len(),
                    got: s,
                })
            }
            Generator::ScalarBlocks {
                alphabet,
                block_len,
                log_values,
            } => {
                let block = q.as_word()?.leading_block(*block_len)?;
                let mut code = 0usize;
                for &s in &block {
                    if s as usize >= *alphabet {
                        return Err(Error::DimensionMismatch {
                            expected: *alphabet,
                            got: s as usize,
                        });
                    }
                    code = code * alphabet + s as usize;
                }
                Ok(DMatrix::from_element(1, 1, log_values[code].exp()))
            }
            Generator::ScaledRotation { scale } => {
                let t = 2.0 * std::f64::consts::PI * q.as_angle()?;
                let (s, c) = t.sin_cos();
                Ok(DMatrix::from_row_slice(2, 2, &[c * scale, -s * scale, s * scale, c * scale]))
            }
        }
    }
}

/// Exact or grid-sampled bound C with sup_q ||A(q)|| <= C.
#[derive(Clone, Copy, Debug)]
pub struct NormBound {
    pub value: f64,
    /// Grid step when the bound came from angle sampling; `None` when the
    /// maximum is exact (finite generator families).
    pub grid_step: Option<f64>,
}

struct CocycleCore {
    base: BaseSystem,
    generator: Generator,
    model: NoncompactnessModel,
    cache: RwLock<HashMap<(CacheKey, u32), ScaledMatrix>>,
}

/// A linear cocycle over a base system, with an exponential shift parameter:
/// the n-step product of the shifted cocycle is `exp(-shift * n)` times the
/// unshifted one. Clones share the product cache; `shifted` replaces the
/// shift without copying cached products.
#[derive(Clone)]
pub struct Cocycle {
    core: Arc<CocycleCore>,
    shift: f64,
}

impl std::fmt::Debug for Cocycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cocycle")
            .field("base", &self.core.base)
            .field("generator", &self.core.generator)
            .field("shift", &self.shift)
            .finish()
    }
}

impl Cocycle {
    pub fn new(base: BaseSystem, generator: Generator) -> Result<Self> {
        Self::with_model(base, generator, NoncompactnessModel::FiniteDim)
    }

    /// Attaches a noncompactness model describing the operator behind the
    /// stored matrix truncation.
    pub fn with_model(base: BaseSystem, generator: Generator, model: NoncompactnessModel) -> Result<Self> {
        generator.validate(&base)?;
        Ok(Cocycle {
            core: Arc::new(CocycleCore {
                base,
                generator,
                model,
                cache: RwLock::new(HashMap::new()),
            }),
            shift: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.core.generator.dim()
    }

    pub fn base(&self) -> &BaseSystem {
        &self.core.base
    }

    pub fn generator(&self) -> &Generator {
        &self.core.generator
    }

    pub fn model(&self) -> &NoncompactnessModel {
        &self.core.model
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Same cocycle with the shift parameter replaced by `a`.
    pub fn shifted(&self, a: f64) -> Cocycle {
        Cocycle {
            core: Arc::clone(&self.core),
            shift: a,
        }
    }

    /// A(f^j q), unshifted.
    pub fn step_at(&self, q: &BasePoint, j: i64) -> Result<DMatrix<f64>> {
        let p = self.core.base.iterate(q, j)?;
        self.core.generator.evaluate(&p)
    }

    /// Unshifted one-step matrices A(q), A(fq), ..., A(f^{n-1}q).
    pub fn forward_steps<'a>(&'a self, q: &BasePoint, n: usize) -> impl Iterator<Item = Result<DMatrix<f64>>> + 'a {
        let q = q.clone();
        (0..n as i64).map(move |j| self.step_at(&q, j))
    }

    /// Unshifted steps of the backward history in chronological order:
    /// A(f^{-n}q), ..., A(f^{-1}q). Their ordered product is the n-step
    /// product starting at f^{-n}q and ending at q.
    pub fn history_steps<'a>(&'a self, q: &BasePoint, n: usize) -> impl Iterator<Item = Result<DMatrix<f64>>> + 'a {
        let q = q.clone();
        (1..=n as i64).rev().map(move |j| self.step_at(&q, -j))
    }

    /// n-step product of the shifted cocycle as a log-scaled matrix.
    pub fn product(&self, q: &BasePoint, n: usize) -> Result<ScaledMatrix> {
        let d = self.dim();
        let mut acc = ScaledMatrix::identity(d);
        let mut point = q.clone();
        let mut remaining = n;
        while remaining > 0 {
            let level = usize::BITS - 1 - remaining.leading_zeros();
            let len = 1usize << level;
            let seg = self.segment(&point, level)?;
            acc = ScaledMatrix::compose(&seg, &acc);
            point = self.core.base.iterate(&point, len as i64)?;
            remaining -= len;
        }
        Ok(acc.scaled_by_log(-self.shift * n as f64))
    }

    /// n-step product as a raw matrix; overflows for horizons where the
    /// growth exceeds what f64 holds, so intended for short products.
    pub fn product_matrix(&self, q: &BasePoint, n: usize) -> Result<DMatrix<f64>> {
        Ok(self.product(q, n)?.to_matrix())
    }

    fn segment(&self, q: &BasePoint, level: u32) -> Result<ScaledMatrix> {
        if level == 0 {
            return Ok(ScaledMatrix::from_matrix(self.core.generator.evaluate(q)?));
        }
        let key = (q.cache_key(), level);
        if let Some(hit) = self.core.cache.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let half = 1i64 << (level - 1);
        let first = self.segment(q, level - 1)?;
        let mid = self.core.base.iterate(q, half)?;
        let second = self.segment(&mid, level - 1)?;
        let val = ScaledMatrix::compose(&second, &first);
        self.core
            .cache
            .write()
            .expect("cache lock")
            .insert(key, val.clone());
        Ok(val)
    }

    /// Upper bound C on the one-step norms sup_q ||A(q, 1)|| of the cocycle
    /// as handed, shift included, so products obey ||A(q, n)|| <= C^n.
    /// Exact for constant and symbol-table generators; a grid maximum over
    /// `sample_budget` angles for angle-dependent ones.
    pub fn uniform_norm_bound(&self, sample_budget: usize) -> Result<NormBound> {
        let budget = sample_budget.max(1);
        let rescale = (-self.shift()).exp();
        match &self.core.generator {
            Generator::Constant { matrix } => Ok(NormBound {
                value: opnorm(matrix) * rescale,
                grid_step: None,
            }),
            Generator::PerSymbol { matrices } => Ok(NormBound {
                value: matrices.iter().map(|m| opnorm(m)).fold(0.0, f64::max) * rescale,
                grid_step: None,
            }),
            Generator::ScalarBlocks { log_values, .. } => Ok(NormBound {
                value: (log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - self.shift()).exp(),
                grid_step: None,
            }),
            Generator::ScaledRotation { .. } => {
                let step = 1.0 / budget as f64;
                let mut best: f64 = 0.0;
                for i in 0..budget {
                    let q = BasePoint::Angle(i as f64 * step);
                    best = best.max(opnorm(&self.core.generator.evaluate(&q)?));
                }
                Ok(NormBound {
                    value: best * rescale,
                    grid_step: Some(step),
                })
            }
        }
    }
}
