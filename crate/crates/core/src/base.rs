//! Base dynamical systems, their points, and ergodic measures.
//!
//! Three base families cover the needs of the library: full shifts on a
//! finite alphabet, circle rotations, and explicit finite cycles. Points
//! carry enough data to iterate both forward and backward; shift points are
//! either periodic words (iterable forever) or finite windows (iterable
//! until the window runs out, then a hard error rather than a silent wrap).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// A point of a shift space: a symbol array with a current position.
///
/// Periodic words wrap around indefinitely. Window words are finite samples
/// of a longer (conceptually infinite) sequence; stepping outside the stored
/// window is reported as [`Error::WindowTooShort`].
#[derive(Clone, Debug)]
pub struct ShiftWord {
    symbols: Arc<[u8]>,
    fingerprint: u64,
    index: usize,
    periodic: bool,
}

impl ShiftWord {
    pub fn periodic(word: &[u8]) -> Self {
        assert!(!word.is_empty(), "periodic word must be nonempty");
        ShiftWord {
            fingerprint: fnv1a(word),
            symbols: Arc::from(word),
            index: 0,
            periodic: true,
        }
    }

    pub fn window(symbols: Arc<[u8]>, index: usize) -> Self {
        assert!(index < symbols.len(), "window index out of range");
        ShiftWord {
            fingerprint: fnv1a(&symbols),
            symbols,
            index,
            periodic: false,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn word_len(&self) -> usize {
        self.symbols.len()
    }

    /// Symbol at the given offset from the current position.
    pub fn symbol_at(&self, offset: i64) -> Result<u8> {
        let p = self.symbols.len() as i64;
        if self.periodic {
            let j = (self.index as i64 + offset).rem_euclid(p);
            Ok(self.symbols[j as usize])
        } else {
            let j = self.index as i64 + offset;
            if j < 0 || j >= p {
                Err(Error::WindowTooShort {
                    needed: (j - self.index as i64).unsigned_abs() as usize,
                    available: if offset >= 0 {
                        self.symbols.len() - 1 - self.index
                    } else {
                        self.index
                    },
                })
            } else {
                Ok(self.symbols[j as usize])
            }
        }
    }

    pub fn advance(&self, n: i64) -> Result<ShiftWord> {
        let mut out = self.clone();
        let p = self.symbols.len() as i64;
        if self.periodic {
            out.index = (self.index as i64 + n).rem_euclid(p) as usize;
        } else {
            let j = self.index as i64 + n;
            if j < 0 || j >= p {
                return Err(Error::WindowTooShort {
                    needed: n.unsigned_abs() as usize,
                    available: if n >= 0 {
                        self.symbols.len() - 1 - self.index
                    } else {
                        self.index
                    },
                });
            }
            out.index = j as usize;
        }
        Ok(out)
    }

    /// Forward symbols starting at the current position.
    pub fn leading_block(&self, len: usize) -> Result<Vec<u8>> {
        (0..len as i64).map(|j| self.symbol_at(j)).collect()
    }

    fn describe(&self) -> String {
        let shown: String = (0..self.symbols.len().min(16))
            .map(|j| {
                let s = self.symbols[(self.index + j) % self.symbols.len()];
                char::from_digit((s % 36) as u32, 36).unwrap_or('?')
            })
            .collect();
        if self.periodic {
            format!("({shown})^inf")
        } else {
            format!("window[{}]={shown}..", self.index)
        }
    }
}

/// Hashable identity of a base point, used to key product caches.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CacheKey {
    Word {
        fingerprint: u64,
        len: usize,
        index: usize,
        periodic: bool,
    },
    Angle {
        bits: u64,
    },
    Cycle {
        index: usize,
    },
}

/// A point of one of the supported base systems.
#[derive(Clone, Debug)]
pub enum BasePoint {
    Word(ShiftWord),
    Angle(f64),
    Cycle(usize),
}

impl BasePoint {
    pub fn cache_key(&self) -> CacheKey {
        match self {
            BasePoint::Word(w) => CacheKey::Word {
                fingerprint: w.fingerprint,
                len: w.symbols.len(),
                index: w.index,
                periodic: w.periodic,
            },
            BasePoint::Angle(a) => CacheKey::Angle { bits: a.to_bits() },
            BasePoint::Cycle(i) => CacheKey::Cycle { index: *i },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BasePoint::Word(w) => w.describe(),
            BasePoint::Angle(a) => format!("angle {a:.12}"),
            BasePoint::Cycle(i) => format!("cycle point {i}"),
        }
    }

    pub fn as_word(&self) -> Result<&ShiftWord> {
        match self {
            BasePoint::Word(w) => Ok(w),
            other => Err(Error::VariantMismatch {
                expected: "shift word point",
                got: variant_name(other),
            }),
        }
    }

    pub fn as_angle(&self) -> Result<f64> {
        match self {
            BasePoint::Angle(a) => Ok(*a),
            other => Err(Error::VariantMismatch {
                expected: "circle point",
                got: variant_name(other),
            }),
        }
    }

    pub fn as_cycle(&self) -> Result<usize> {
        match self {
            BasePoint::Cycle(i) => Ok(*i),
            other => Err(Error::VariantMismatch {
                expected: "cycle point",
                got: variant_name(other),
            }),
        }
    }
}

fn variant_name(p: &BasePoint) -> &'static str {
    match p {
        BasePoint::Word(_) => "shift word point",
        BasePoint::Angle(_) => "circle point",
        BasePoint::Cycle(_) => "cycle point",
    }
}

/// The base dynamics: a homeomorphism of a compact space, given here as one
/// of three concrete families.
#[derive(Clone, Debug)]
pub enum BaseSystem {
    /// Two-sided full shift on `alphabet` symbols.
    FullShift { alphabet: usize },
    /// Rotation by `rho` on the circle `[0, 1)`; assumed minimal
    /// (irrational `rho`) wherever a unique invariant measure is wanted.
    CircleRotation { rho: f64 },
    /// A single explicit cycle of the given length.
    FinitePeriodic { period: usize },
}

impl BaseSystem {
    /// `n`-th iterate of the base map applied to `q`; `n` may be negative.
    ///
    /// Circle points are stepped one rotation at a time so that
    /// `iterate(iterate(q, n), m)` and `iterate(q, n + m)` agree bit for bit.
    pub fn iterate(&self, q: &BasePoint, n: i64) -> Result<BasePoint> {
        match (self, q) {
            (BaseSystem::FullShift { .. }, BasePoint::Word(w)) => Ok(BasePoint::Word(w.advance(n)?)),
            (BaseSystem::CircleRotation { rho }, BasePoint::Angle(a)) => {
                let mut x = *a;
                if n >= 0 {
                    for _ in 0..n {
                        x = frac(x + rho);
                    }
                } else {
                    for _ in 0..(-n) {
                        x = frac(x - rho);
                    }
                }
                Ok(BasePoint::Angle(x))
            }
            (BaseSystem::FinitePeriodic { period }, BasePoint::Cycle(i)) => {
                Ok(BasePoint::Cycle((*i as i64 + n).rem_euclid(*period as i64) as usize))
            }
            (_, q) => Err(Error::VariantMismatch {
                expected: self.point_kind(),
                got: variant_name(q),
            }),
        }
    }

    fn point_kind(&self) -> &'static str {
        match self {
            BaseSystem::FullShift { .. } => "shift word point",
            BaseSystem::CircleRotation { .. } => "circle point",
            BaseSystem::FinitePeriodic { .. } => "cycle point",
        }
    }

    /// Metric on the base: circle distance, `2^-k` for shift words agreeing
    /// on a symmetric window of radius `k`, discrete metric on cycles.
    pub fn distance(&self, a: &BasePoint, b: &BasePoint) -> Result<f64> {
        match (self, a, b) {
            (BaseSystem::CircleRotation { .. }, BasePoint::Angle(x), BasePoint::Angle(y)) => {
                let d = (x - y).abs();
                Ok(d.min(1.0 - d))
            }
            (BaseSystem::FullShift { .. }, BasePoint::Word(u), BasePoint::Word(v)) => {
                for k in 0..64i64 {
                    let same = |off: i64| match (u.symbol_at(off), v.symbol_at(off)) {
                        (Ok(s), Ok(t)) => s == t,
                        _ => false,
                    };
                    if !same(k) || !same(-k) {
                        return Ok(2.0f64.powi(-(k as i32)));
                    }
                }
                Ok(0.0)
            }
            (BaseSystem::FinitePeriodic { .. }, BasePoint::Cycle(i), BasePoint::Cycle(j)) => {
                Ok(if i == j { 0.0 } else { 1.0 })
            }
            _ => Err(Error::VariantMismatch {
                expected: self.point_kind(),
                got: "mixed point kinds",
            }),
        }
    }

    /// All ergodic measures supported on periodic orbits of primitive period
    /// at most `p_max`, one per orbit. For the circle rotation (no periodic
    /// orbits in the minimal case) this returns the unique invariant measure
    /// instead. A finite cycle always contributes its orbit measure.
    pub fn periodic_measures(&self, p_max: usize) -> Result<Vec<ErgodicMeasure>> {
        match self {
            BaseSystem::FullShift { alphabet } => {
                let mut out = Vec::new();
                for p in 1..=p_max {
                    for word in necklaces(*alphabet, p) {
                        out.push(ErgodicMeasure::periodic_orbit(&word));
                    }
                }
                Ok(out)
            }
            BaseSystem::CircleRotation { .. } => Ok(vec![ErgodicMeasure::LebesgueCircle {
                label: "lebesgue".into(),
            }]),
            BaseSystem::FinitePeriodic { period } => {
                let points: Vec<BasePoint> = (0..*period).map(BasePoint::Cycle).collect();
                Ok(vec![ErgodicMeasure::PeriodicOrbit {
                    label: format!("cycle({period})"),
                    points,
                }])
            }
        }
    }
}

/// Lexicographically minimal representatives of primitive (aperiodic)
/// necklaces of length exactly `p` over `alphabet` symbols.
fn necklaces(alphabet: usize, p: usize) -> Vec<Vec<u8>> {
    assert!(alphabet >= 1 && alphabet <= 256);
    let mut out = Vec::new();
    let mut word = vec![0u8; p];
    loop {
        if is_primitive(&word) && is_min_rotation(&word) {
            out.push(word.clone());
        }
        // Next word in lexicographic order.
        let mut j = p;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            if (word[j] as usize) + 1 < alphabet {
                word[j] += 1;
                for w in word.iter_mut().skip(j + 1) {
                    *w = 0;
                }
                break;
            }
        }
    }
}

fn is_primitive(word: &[u8]) -> bool {
    let p = word.len();
    for d in 1..p {
        if p % d == 0 && (0..p).all(|i| word[i] == word[i % d]) {
            return false;
        }
    }
    true
}

fn is_min_rotation(word: &[u8]) -> bool {
    let p = word.len();
    for r in 1..p {
        let rotated = (0..p).map(|i| word[(i + r) % p]);
        if rotated.lt(word.iter().copied()) {
            return false;
        }
    }
    true
}

/// An ergodic invariant measure of a base system, in a form concrete enough
/// to sample typical points from.
#[derive(Clone, Debug)]
pub enum ErgodicMeasure {
    /// Uniform measure on a finite orbit; `points` lists the whole orbit in
    /// dynamical order.
    PeriodicOrbit { label: String, points: Vec<BasePoint> },
    /// Product measure on a full shift with the given symbol probabilities.
    Bernoulli { label: String, probs: Vec<f64> },
    /// Normalized arc length on the circle.
    LebesgueCircle { label: String },
}

impl ErgodicMeasure {
    /// Orbit measure of the periodic shift word `word` (primitive or not).
    pub fn periodic_orbit(word: &[u8]) -> ErgodicMeasure {
        let base = ShiftWord::periodic(word);
        let label: String = word
            .iter()
            .map(|&s| char::from_digit((s % 36) as u32, 36).unwrap_or('?'))
            .collect();
        let points = (0..word.len())
            .map(|i| BasePoint::Word(base.advance(i as i64).expect("periodic advance")))
            .collect();
        ErgodicMeasure::PeriodicOrbit {
            label: format!("orbit({label})"),
            points,
        }
    }

    pub fn bernoulli(probs: Vec<f64>) -> Result<ErgodicMeasure> {
        let s: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::MeasureMismatch(format!(
                "symbol probabilities must be in [0,1] and sum to 1, got sum {s}"
            )));
        }
        let label = format!(
            "bernoulli({})",
            probs.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(",")
        );
        Ok(ErgodicMeasure::Bernoulli { label, probs })
    }

    pub fn label(&self) -> &str {
        match self {
            ErgodicMeasure::PeriodicOrbit { label, .. } => label,
            ErgodicMeasure::Bernoulli { label, .. } => label,
            ErgodicMeasure::LebesgueCircle { label } => label,
        }
    }

    /// Primitive period for orbit measures.
    pub fn period(&self) -> Option<usize> {
        match self {
            ErgodicMeasure::PeriodicOrbit { points, .. } => Some(points.len()),
            _ => None,
        }
    }

    /// Largest horizon <= n_max that is a whole number of orbit periods
    /// (averages over it are exact for orbit measures); n_max itself for
    /// non-atomic measures.
    pub fn aligned_horizon(&self, n_max: usize) -> usize {
        match self.period() {
            Some(p) if n_max >= p => (n_max / p) * p,
            Some(p) => p,
            None => n_max,
        }
    }

    /// Typical starting points for orbit segments of the requested reach.
    ///
    /// Sampled points support `forward` steps ahead and `backward` steps
    /// behind (plus slack for block lookahead). Orbit measures return the
    /// whole orbit, which makes averages over them exact; random measures
    /// draw `count` independent starts from a stream seeded by `seed`.
    pub fn sample_starts(
        &self,
        base: &BaseSystem,
        count: usize,
        forward: usize,
        backward: usize,
        seed: u64,
    ) -> Result<Vec<BasePoint>> {
        match (self, base) {
            (ErgodicMeasure::PeriodicOrbit { points, .. }, _) => Ok(points.clone()),
            (ErgodicMeasure::Bernoulli { probs, .. }, BaseSystem::FullShift { alphabet }) => {
                if probs.len() != *alphabet {
                    return Err(Error::MeasureMismatch(format!(
                        "measure has {} symbol weights but the shift alphabet has {} symbols",
                        probs.len(),
                        alphabet
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let len = backward + forward + 128;
                let mut starts = Vec::with_capacity(count);
                for _ in 0..count {
                    let symbols: Vec<u8> = (0..len).map(|_| draw_symbol(probs, &mut rng)).collect();
                    starts.push(BasePoint::Word(ShiftWord::window(Arc::from(symbols), backward)));
                }
                Ok(starts)
            }
            (ErgodicMeasure::LebesgueCircle { .. }, BaseSystem::CircleRotation { .. }) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..count).map(|_| BasePoint::Angle(rng.gen::<f64>())).collect())
            }
            (m, b) => Err(Error::MeasureMismatch(format!(
                "measure {} does not live on base {:?}",
                m.label(),
                b
            ))),
        }
    }
}

/// A typical orbit segment (q, f q, ..., f^{length-1} q) with q drawn from
/// the measure; deterministic given the seed.
pub fn sample_orbit(
    mu: &ErgodicMeasure,
    base: &BaseSystem,
    length: usize,
    seed: u64,
) -> Result<Vec<BasePoint>> {
    if length == 0 {
        return Err(Error::InvalidParam("orbit length must be at least 1".into()));
    }
    let start = mu
        .sample_starts(base, 1, length, 0, seed)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::MeasureMismatch("measure produced no sample".into()))?;
    let mut out = Vec::with_capacity(length);
    let mut p = start;
    for _ in 0..length - 1 {
        let next = base.iterate(&p, 1)?;
        out.push(p);
        p = next;
    }
    out.push(p);
    Ok(out)
}

fn draw_symbol(probs: &[f64], rng: &mut ChaCha8Rng) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    (probs.len() - 1) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_word_wraps_and_window_errors() {
        let w = ShiftWord::periodic(&[0, 1, 1]);
        assert_eq!(w.advance(7).unwrap().symbol_at(0).unwrap(), 1);
        assert_eq!(w.advance(-1).unwrap().symbol_at(0).unwrap(), 1);
        let win = ShiftWord::window(Arc::from(vec![0u8, 1, 0, 1]), 1);
        assert!(win.advance(2).is_ok());
        assert!(matches!(win.advance(3), Err(Error::WindowTooShort { .. })));
        assert!(matches!(win.advance(-2), Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn circle_iteration_is_path_consistent() {
        let base = BaseSystem::CircleRotation {
            rho: (5.0f64.sqrt() - 1.0) / 2.0,
        };
        let q = BasePoint::Angle(0.125);
        let two_then_one = base
            .iterate(&base.iterate(&q, 2).unwrap(), 1)
            .unwrap()
            .as_angle()
            .unwrap();
        let three = base.iterate(&q, 3).unwrap().as_angle().unwrap();
        assert_eq!(two_then_one.to_bits(), three.to_bits());
        let back = base.iterate(&base.iterate(&q, 5).unwrap(), -5).unwrap();
        assert_eq!(back.as_angle().unwrap().to_bits(), 0.125f64.to_bits());
    }

    #[test]
    fn necklace_counts_match_known_values() {
        let base = BaseSystem::FullShift { alphabet: 2 };
        // Orbit counts for the binary shift: 2, 3, 5 at periods up to 1, 2, 3
        // and 71 at periods up to 8, carrying 472 points in total.
        assert_eq!(base.periodic_measures(1).unwrap().len(), 2);
        assert_eq!(base.periodic_measures(2).unwrap().len(), 3);
        assert_eq!(base.periodic_measures(3).unwrap().len(), 5);
        let all = base.periodic_measures(8).unwrap();
        assert_eq!(all.len(), 71);
        let points: usize = all.iter().map(|m| m.period().unwrap()).sum();
        assert_eq!(points, 472);
        let mut labels: Vec<&str> = all.iter().map(|m| m.label()).collect();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 71);
    }

    #[test]
    fn bernoulli_sampling_is_seed_deterministic() {
        let base = BaseSystem::FullShift { alphabet: 2 };
        let mu = ErgodicMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        let a = mu.sample_starts(&base, 4, 64, 8, 7).unwrap();
        let b = mu.sample_starts(&base, 4, 64, 8, 7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.cache_key(), y.cache_key());
            assert_eq!(x.as_word().unwrap().leading_block(32).unwrap(), y.as_word().unwrap().leading_block(32).unwrap());
        }
        let c = mu.sample_starts(&base, 4, 64, 8, 8).unwrap();
        assert_ne!(
            a[0].as_word().unwrap().leading_block(32).unwrap(),
            c[0].as_word().unwrap().leading_block(32).unwrap()
        );
    }

    #[test]
    fn orbit_samples_follow_the_dynamics() {
        let base = BaseSystem::FinitePeriodic { period: 2 };
        let mu = &base.periodic_measures(2).unwrap()[0];
        let orbit = sample_orbit(mu, &base, 5, 0).unwrap();
        let idx: Vec<usize> = orbit.iter().map(|p| p.as_cycle().unwrap()).collect();
        assert_eq!(idx, vec![0, 1, 0, 1, 0]);

        let shift = BaseSystem::FullShift { alphabet: 2 };
        let degenerate = ErgodicMeasure::bernoulli(vec![1.0, 0.0]).unwrap();
        let orbit = sample_orbit(&degenerate, &shift, 4, 1).unwrap();
        for p in &orbit {
            assert_eq!(p.as_word().unwrap().symbol_at(0).unwrap(), 0);
        }

        // Equidistribution of the golden rotation: the Birkhoff average of
        // the angle itself approaches 1/2.
        let rot = BaseSystem::CircleRotation {
            rho: (5.0f64.sqrt() - 1.0) / 2.0,
        };
        let leb = ErgodicMeasure::LebesgueCircle { label: "lebesgue".into() };
        let orbit = sample_orbit(&leb, &rot, 10_000, 7).unwrap();
        let mean: f64 = orbit.iter().map(|p| p.as_angle().unwrap()).sum::<f64>() / orbit.len() as f64;
        assert!((mean - 0.5).abs() < 1e-2, "mean angle {mean}");
    }

    #[test]
    fn measure_base_mismatch_is_reported() {
        let rot = BaseSystem::CircleRotation { rho: 0.5 };
        let mu = ErgodicMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            mu.sample_starts(&rot, 1, 8, 0, 0),
            Err(Error::MeasureMismatch(_))
        ));
    }
}
