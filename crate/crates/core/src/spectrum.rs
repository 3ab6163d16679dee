//! Sacker-Sell spectrum computation: probe the shifted cocycle for uniform
//! hyperbolicity on a descending grid, refine pass/fail boundaries and
//! unstable-dimension drops by bisection, and assemble the failing set into
//! disjoint closed intervals with structural classification.

use rayon::prelude::*;
use serde::Serialize;

use crate::base::BasePoint;
use crate::cocycle::Cocycle;
use crate::dichotomy::{default_sample_set, DichotomyParams, DichotomyTester};
use crate::error::{Error, Result};
use crate::quasicompact::ExtReal;

/// Scan configuration. The resonance margin and minimal decay rate for the
/// underlying dichotomy probes are derived from the bisection tolerance so
/// that refined endpoints land within that tolerance of the true ones.
#[derive(Clone, Debug, Serialize)]
pub struct ScanConfig {
    pub grid_step: f64,
    pub bisect_tol: f64,
    /// Envelope horizon for the dichotomy tester.
    pub n_max: usize,
    /// Noncompactness rate; scanning happens strictly above it.
    pub kappa: ExtReal,
    /// Grid floor; the scan covers (max(kappa, lower_bound), log C + 0.1].
    pub lower_bound: f64,
    /// Max intervals to emit before truncating the scan.
    pub max_intervals: usize,
    /// Periodic sample depth on shift bases.
    pub p_max: usize,
    /// Sample counts on rotation bases.
    pub rotation_grid: usize,
    pub rotation_random: usize,
    pub seed: u64,
    /// Sampling budget for the uniform norm bound.
    pub norm_budget: usize,
    /// Optional explicit sample override.
    #[serde(skip)]
    pub explicit_samples: Option<Vec<BasePoint>>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            grid_step: 0.02,
            bisect_tol: 1e-3,
            n_max: 512,
            kappa: ExtReal::NegInf,
            lower_bound: -2.0,
            max_intervals: 32,
            p_max: 8,
            rotation_grid: 64,
            rotation_random: 16,
            seed: 0,
            norm_budget: 64,
            explicit_samples: None,
        }
    }
}

impl ScanConfig {
    /// Resonance margin used by scan probes.
    pub fn margin(&self) -> f64 {
        self.bisect_tol / 4.0
    }

    /// Minimal certified decay rate used by scan probes; 0.9 x margin so
    /// the pass region boundary sits one margin away from spectrum points.
    pub fn lambda_min(&self) -> f64 {
        0.9 * self.margin()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0) || !(self.bisect_tol > 0.0) {
            return Err(Error::InvalidParam("grid step and bisection tolerance must be positive".into()));
        }
        if self.grid_step <= 2.0 * self.margin() {
            return Err(Error::InvalidParam(format!(
                "grid step {} must exceed twice the resonance margin {}",
                self.grid_step,
                self.margin()
            )));
        }
        if self.max_intervals == 0 {
            return Err(Error::InvalidParam("interval budget must be positive".into()));
        }
        if matches!(self.kappa, ExtReal::PosInf) {
            return Err(Error::InvalidParam("kappa = +inf leaves no shifts to scan".into()));
        }
        Ok(())
    }

    pub fn build_samples(&self, c: &Cocycle) -> Result<Vec<BasePoint>> {
        if let Some(s) = &self.explicit_samples {
            if s.is_empty() {
                return Err(Error::InvalidParam("explicit sample set is empty".into()));
            }
            return Ok(s.clone());
        }
        default_sample_set(c.base(), self.p_max, self.rotation_grid, self.rotation_random, self.seed)
    }

    fn dichotomy_params(&self) -> DichotomyParams {
        DichotomyParams {
            n_max: self.n_max,
            margin: self.margin(),
            lambda_min: self.lambda_min(),
            ..DichotomyParams::default()
        }
    }
}

/// One spectral interval `[lo, hi]`; `is_point` marks intervals collapsed
/// to their midpoint because their width was below resolution.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralInterval {
    pub lo: f64,
    pub hi: f64,
    pub is_point: bool,
    /// Whether the interval bottom is the scan floor (lower tail).
    pub touches_floor: bool,
    /// Unstable dimensions on the adjacent resolvent gaps, when observed.
    pub dim_above: Option<usize>,
    pub dim_below: Option<usize>,
}

impl SpectralInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// One probe record for traces.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeRecord {
    pub shift: f64,
    pub pass: bool,
    pub dim_unstable: Option<usize>,
    pub lambda: f64,
    pub reason: Option<String>,
}

/// Computed spectrum with classification and scan provenance.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    /// Intervals in strictly decreasing order: hi_1 >= lo_1 > hi_2 >= ...
    pub intervals: Vec<SpectralInterval>,
    pub kappa: ExtReal,
    /// Effective scan floor: max(kappa, configured lower bound).
    pub kappa_cut: f64,
    /// Scan ceiling: log of the uniform norm bound + 0.1.
    pub scan_top: f64,
    pub log_norm_bound: f64,
    pub lower_tail: bool,
    pub truncated: bool,
    /// Lowest shift that was fully resolved when truncated.
    pub scanned_down_to: f64,
    /// Structural alternative 1..5; 4 and 5 only with the suspicion flag.
    pub alternative: u8,
    pub accumulation_suspected: bool,
    pub grid_step: f64,
    pub bisect_tol: f64,
    pub margin: f64,
    pub n_max: usize,
    pub probe_count: usize,
    pub trace: Vec<ProbeRecord>,
    #[serde(skip)]
    pub samples: Vec<BasePoint>,
}

impl SpectrumResult {
    /// Passing probes (shift, unstable dimension), descending by shift.
    pub fn resolvent_probes(&self) -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = self
            .trace
            .iter()
            .filter_map(|p| p.dim_unstable.map(|k| (p.shift, k)))
            .collect();
        v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        v
    }

    /// Interval endpoints eligible for endpoint-realization checks:
    /// (value, true for a top endpoint / false for a bottom endpoint).
    /// Floor-touching bottoms are excluded.
    pub fn endpoints(&self) -> Vec<(f64, bool)> {
        let mut out = Vec::new();
        for iv in &self.intervals {
            out.push((iv.hi, true));
            if !iv.touches_floor {
                out.push((iv.lo, false));
            }
        }
        out
    }
}

struct ScanState<'a> {
    tester: &'a DichotomyTester,
    trace: Vec<ProbeRecord>,
    probes: usize,
    out: Vec<SpectralInterval>,
    truncated: bool,
    budget: usize,
    bisect_width: f64,
    collapse_width: f64,
    scanned_down_to: f64,
}

impl<'a> ScanState<'a> {
    fn probe(&mut self, a: f64) -> crate::dichotomy::DichotomyCertificate {
        let cert = self.tester.probe(a);
        self.record(&cert);
        cert
    }

    fn record(&mut self, cert: &crate::dichotomy::DichotomyCertificate) {
        self.probes += 1;
        self.trace.push(ProbeRecord {
            shift: cert.shift,
            pass: cert.pass,
            dim_unstable: cert.dim_unstable,
            lambda: cert.lambda,
            reason: cert.fail.as_ref().map(|f| format!("{f:?}")),
        });
    }

    /// Emits an interval (collapsing narrow ones to points); returns false
    /// when the interval budget is exhausted.
    fn emit(&mut self, lo: f64, hi: f64, touches_floor: bool) -> bool {
        if self.truncated {
            return false;
        }
        if self.out.len() >= self.budget {
            self.truncated = true;
            return false;
        }
        let iv = if !touches_floor && hi - lo <= self.collapse_width {
            let mid = 0.5 * (lo + hi);
            SpectralInterval {
                lo: mid,
                hi: mid,
                is_point: true,
                touches_floor: false,
                dim_above: None,
                dim_below: None,
            }
        } else {
            SpectralInterval {
                lo,
                hi,
                is_point: false,
                touches_floor,
                dim_above: None,
                dim_below: None,
            }
        };
        self.scanned_down_to = self.scanned_down_to.min(iv.lo);
        self.out.push(iv);
        true
    }

    /// Refines a pass/fail boundary to `bisect_width`; returns the boundary
    /// estimate and the dimension on the passing side.
    fn bisect_boundary(&mut self, mut fail_a: f64, mut pass_a: f64) -> (f64, f64, usize) {
        let mut pass_dim = self.probe(pass_a).dim_unstable.unwrap_or(0);
        while (fail_a - pass_a).abs() > self.bisect_width {
            let mid = 0.5 * (fail_a + pass_a);
            let cert = self.probe(mid);
            if cert.pass {
                pass_a = mid;
                pass_dim = cert.dim_unstable.unwrap_or(pass_dim);
            } else {
                fail_a = mid;
            }
        }
        (0.5 * (fail_a + pass_a), pass_a, pass_dim)
    }

    /// Resolves spectrum hidden between two passing shifts whose unstable
    /// dimensions differ; emits intervals in descending order.
    fn refine_drop(&mut self, lo_a: f64, lo_k: usize, hi_a: f64, hi_k: usize, depth: usize) {
        if self.truncated || lo_k <= hi_k {
            return;
        }
        if hi_a - lo_a <= self.bisect_width || depth > 60 {
            // Fail zone narrower than the probe resolution: record the
            // midpoint as a point interval.
            let mid = 0.5 * (lo_a + hi_a);
            self.emit(mid, mid, false);
            return;
        }
        let mid = 0.5 * (lo_a + hi_a);
        let cert = self.probe(mid);
        match (cert.pass, cert.dim_unstable) {
            (true, Some(km)) => {
                self.refine_drop(mid, km, hi_a, hi_k, depth + 1);
                self.refine_drop(lo_a, lo_k, mid, km, depth + 1);
            }
            _ => {
                let (b, b_pass, k_up) = self.bisect_boundary(mid, hi_a);
                if k_up > hi_k {
                    self.refine_drop(b_pass, k_up, hi_a, hi_k, depth + 1);
                }
                let (a, a_pass, k_dn) = self.bisect_boundary(mid, lo_a);
                self.emit(a, b, false);
                if lo_k > k_dn {
                    self.refine_drop(lo_a, lo_k, a_pass, k_dn, depth + 1);
                }
            }
        }
    }
}

/// Scans the shifted cocycle family for uniform hyperbolicity and returns
/// the failing set as closed intervals.
pub fn scan_spectrum(c: &Cocycle, cfg: &ScanConfig) -> Result<SpectrumResult> {
    cfg.validate()?;
    let samples = cfg.build_samples(c)?;
    let bound = c.uniform_norm_bound(cfg.norm_budget)?;
    let log_norm_bound = bound.value.max(1e-300).ln();
    let scan_top = log_norm_bound + 0.1;
    let kappa_cut = match cfg.kappa {
        ExtReal::Finite(k) => k.max(cfg.lower_bound),
        _ => cfg.lower_bound,
    };

    // Descending grid over (kappa_cut, scan_top].
    let mut grid = Vec::new();
    let mut a = scan_top;
    while a > kappa_cut {
        grid.push(a);
        a -= cfg.grid_step;
    }

    let empty = |trace: Vec<ProbeRecord>, probes: usize, samples: Vec<BasePoint>| SpectrumResult {
        intervals: Vec::new(),
        kappa: cfg.kappa,
        kappa_cut,
        scan_top,
        log_norm_bound,
        lower_tail: false,
        truncated: false,
        scanned_down_to: kappa_cut,
        alternative: 1,
        accumulation_suspected: false,
        grid_step: cfg.grid_step,
        bisect_tol: cfg.bisect_tol,
        margin: cfg.margin(),
        n_max: cfg.n_max,
        probe_count: probes,
        trace,
        samples,
    };
    if grid.is_empty() {
        return Ok(empty(Vec::new(), 0, samples));
    }

    let tester = DichotomyTester::new(c, &samples, cfg.dichotomy_params())?;
    let grid_certs: Vec<crate::dichotomy::DichotomyCertificate> =
        grid.par_iter().map(|&a| tester.probe(a)).collect();

    let mut st = ScanState {
        tester: &tester,
        trace: Vec::new(),
        probes: 0,
        out: Vec::new(),
        truncated: false,
        budget: cfg.max_intervals,
        bisect_width: cfg.margin(),
        collapse_width: 2.0 * cfg.bisect_tol,
        scanned_down_to: scan_top,
    };
    for cert in &grid_certs {
        st.record(cert);
    }

    let mut lower_tail = false;
    let mut last_pass: Option<(f64, usize)> = None;
    let mut i = 0usize;
    while i < grid.len() {
        if st.truncated {
            break;
        }
        let cert = &grid_certs[i];
        if cert.pass {
            let k = cert.dim_unstable.unwrap_or(0);
            if let Some((pa, pk)) = last_pass {
                if k > pk {
                    st.refine_drop(grid[i], k, pa, pk, 0);
                }
            }
            last_pass = Some((grid[i], k));
            i += 1;
            continue;
        }
        // Maximal failing run.
        let run_start = i;
        while i < grid.len() && !grid_certs[i].pass {
            i += 1;
        }
        let below = if i < grid.len() {
            Some((grid[i], grid_certs[i].dim_unstable.unwrap_or(0)))
        } else {
            None
        };
        // Upper edge.
        let b = match last_pass {
            Some((pa, pk)) => {
                let (b, b_pass, k_up) = st.bisect_boundary(grid[run_start], pa);
                if k_up > pk {
                    st.refine_drop(b_pass, k_up, pa, pk, 0);
                }
                b
            }
            None => scan_top,
        };
        // Lower edge.
        match below {
            Some((ga, _)) => {
                let (a_lo, a_pass, k_dn) = st.bisect_boundary(grid[i - 1], ga);
                st.emit(a_lo, b, false);
                last_pass = Some((a_pass, k_dn));
            }
            None => {
                // Failing all the way to the floor: lower tail.
                if st.emit(kappa_cut, b, true) {
                    lower_tail = true;
                }
                last_pass = None;
            }
        }
    }

    let mut intervals = st.out;
    // The walk emits top-down but drop-refinement above a fail run can
    // interleave; enforce the documented ordering.
    intervals.sort_by(|x, y| y.hi.partial_cmp(&x.hi).unwrap());

    // Resolvent gap dimensions from the passing probes adjacent to each
    // interval.
    let passing: Vec<(f64, usize)> = {
        let mut v: Vec<(f64, usize)> = st
            .trace
            .iter()
            .filter_map(|p| p.dim_unstable.map(|k| (p.shift, k)))
            .collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    };
    let dim_in = |lo: f64, hi: f64| -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for &(a, k) in &passing {
            if a > lo && a < hi {
                // Take the probe nearest to the gap center.
                let score = -((a - 0.5 * (lo + hi)).abs());
                if best.map_or(true, |(s, _)| score > s) {
                    best = Some((score, k));
                }
            }
        }
        best.map(|(_, k)| k)
    };
    let n_iv = intervals.len();
    for j in 0..n_iv {
        let above_hi = if j == 0 { scan_top + cfg.grid_step } else { intervals[j - 1].lo };
        let lo_bound = intervals[j].hi;
        intervals[j].dim_above = dim_in(lo_bound, above_hi);
        let below_lo = if j + 1 < n_iv { intervals[j + 1].hi } else { kappa_cut };
        if !intervals[j].touches_floor && !(st.truncated && j + 1 == n_iv) {
            intervals[j].dim_below = dim_in(below_lo, intervals[j].lo);
        }
    }

    let truncated = st.truncated;
    let scanned_down_to = if truncated { st.scanned_down_to } else { kappa_cut };
    let mut result = SpectrumResult {
        intervals,
        kappa: cfg.kappa,
        kappa_cut,
        scan_top,
        log_norm_bound,
        lower_tail,
        truncated,
        scanned_down_to,
        alternative: 0,
        accumulation_suspected: false,
        grid_step: cfg.grid_step,
        bisect_tol: cfg.bisect_tol,
        margin: cfg.margin(),
        n_max: cfg.n_max,
        probe_count: st.probes,
        trace: st.trace,
        samples,
    };
    let class = classify_structure(&result);
    result.alternative = class.alternative;
    result.accumulation_suspected = class.accumulation_suspected;
    Ok(result)
}

/// Structural alternative per the spectral decomposition: 1 empty, 2
/// finitely many intervals, 3 finitely many plus a lower tail, 4/5 the
/// accumulation variants (only ever reported as suspected).
#[derive(Clone, Debug, Serialize)]
pub struct StructureClass {
    pub alternative: u8,
    pub accumulation_suspected: bool,
    pub interval_count: usize,
    pub lower_tail: bool,
    pub description: String,
}

pub fn classify_structure(r: &SpectrumResult) -> StructureClass {
    let n = r.intervals.len();
    if n == 0 {
        return StructureClass {
            alternative: 1,
            accumulation_suspected: false,
            interval_count: 0,
            lower_tail: false,
            description: "no spectrum above the cutoff".into(),
        };
    }
    let mut accumulation = false;
    if r.truncated && n >= 3 {
        // Resolvent gap widths between consecutive intervals, top-down.
        let gaps: Vec<f64> = r
            .intervals
            .windows(2)
            .map(|w| (w[0].lo - w[1].hi).max(0.0))
            .collect();
        let tail = &gaps[gaps.len().saturating_sub(3)..];
        let shrinking = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let small = *gaps.last().unwrap() < 3.0 * r.bisect_tol;
        accumulation = shrinking && small;
    }
    let alternative = match (accumulation, r.lower_tail) {
        (true, false) => 4,
        (true, true) => 5,
        (false, false) => 2,
        (false, true) => 3,
    };
    let description = match alternative {
        2 => format!("{} disjoint closed intervals", n),
        3 => format!("{} intervals plus a lower tail reaching the cutoff", n),
        4 => format!("{} intervals found before the budget; gaps shrink toward the cutoff (accumulation suspected)", n),
        5 => format!(
            "{} intervals plus a lower tail; gaps shrink toward the cutoff (accumulation suspected)",
            n
        ),
        _ => unreachable!(),
    };
    StructureClass {
        alternative,
        accumulation_suspected: accumulation,
        interval_count: n,
        lower_tail: r.lower_tail,
        description,
    }
}

/// Unstable dimension on each resolvent gap, ascending in the shift, with
/// monotonicity and interval-count consistency checks.
#[derive(Clone, Debug, Serialize)]
pub struct GapDimension {
    pub lo: f64,
    pub hi: f64,
    pub probe: f64,
    pub dim: usize,
}

pub fn resolvent_dimension_profile(c: &Cocycle, r: &SpectrumResult) -> Result<Vec<GapDimension>> {
    let params = DichotomyParams {
        n_max: r.n_max,
        margin: r.margin,
        lambda_min: 0.9 * r.margin,
        ..DichotomyParams::default()
    };
    let tester = DichotomyTester::new(c, &r.samples, params)?;

    // Gaps in descending order: above the top interval, between intervals,
    // and below the lowest (unless it touches the floor or was truncated).
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    if let Some(top) = r.intervals.first() {
        gaps.push((top.hi, r.scan_top));
    } else {
        gaps.push((r.kappa_cut, r.scan_top));
    }
    for w in r.intervals.windows(2) {
        gaps.push((w[1].hi, w[0].lo));
    }
    if let Some(last) = r.intervals.last() {
        if !last.touches_floor && !r.truncated && last.lo > r.kappa_cut {
            gaps.push((r.kappa_cut, last.lo));
        }
    }

    let mut out = Vec::new();
    for (lo, hi) in gaps {
        if hi - lo <= 4.0 * r.margin {
            continue;
        }
        let probe = 0.5 * (lo + hi);
        let cert = tester.probe(probe);
        match (cert.pass, cert.dim_unstable) {
            (true, Some(k)) => out.push(GapDimension { lo, hi, probe, dim: k }),
            _ => {
                return Err(Error::NonMonotoneProfile(format!(
                    "resolvent gap probe at {probe} failed: {:?}",
                    cert.fail
                )))
            }
        }
    }
    out.reverse();
    // Ascending shifts: dims must strictly decrease.
    for w in out.windows(2) {
        if w[1].dim >= w[0].dim {
            return Err(Error::NonMonotoneProfile(format!(
                "dim {} at shift {} does not decrease to dim {} at shift {}",
                w[0].dim, w[0].probe, w[1].dim, w[1].probe
            )));
        }
    }
    // Interval-count consistency: at most dim + 1 intervals above any gap.
    for g in &out {
        let above = r.intervals.iter().filter(|iv| iv.lo > g.probe).count();
        if above > g.dim + 1 {
            return Err(Error::NonMonotoneProfile(format!(
                "{} intervals above the gap at {} with dim {}",
                above, g.probe, g.dim
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseSystem;
    use crate::cocycle::Generator;
    use nalgebra::DMatrix;

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
    fn diagonal_spectrum_is_two_points() {
        let c = constant(&[2.0, 0.0, 0.0, 0.5], 2);
        let cfg = ScanConfig {
            n_max: 256,
            lower_bound: -2.0,
            ..ScanConfig::default()
        };
        let r = scan_spectrum(&c, &cfg).unwrap();
        assert_eq!(r.intervals.len(), 2, "{:?}", r.intervals);
        let top = &r.intervals[0];
        let bot = &r.intervals[1];
        assert!(top.is_point && bot.is_point);
        assert!((top.midpoint() - 2.0f64.ln()).abs() <= 1e-3, "top at {}", top.midpoint());
        assert!((bot.midpoint() + 2.0f64.ln()).abs() <= 1e-3, "bottom at {}", bot.midpoint());
        assert_eq!(top.dim_above, Some(0));
        assert_eq!(top.dim_below, Some(1));
        assert_eq!(bot.dim_above, Some(1));
        assert_eq!(bot.dim_below, Some(2));
        assert!(!r.lower_tail && !r.truncated);
        assert_eq!(r.alternative, 2);
        assert!(top.hi <= r.log_norm_bound + r.bisect_tol);

        let profile = resolvent_dimension_profile(&c, &r).unwrap();
        let dims: Vec<usize> = profile.iter().map(|g| g.dim).collect();
        assert_eq!(dims, vec![2, 1, 0]);
    }

    #[test]
    fn scalar_shift_spectrum_fills_unit_interval() {
        let c = scalar_shift();
        let cfg = ScanConfig {
            n_max: 256,
            lower_bound: -0.5,
            ..ScanConfig::default()
        };
        let r = scan_spectrum(&c, &cfg).unwrap();
        assert_eq!(r.intervals.len(), 1, "{:?}", r.intervals);
        let iv = &r.intervals[0];
        assert!(!iv.is_point);
        assert!(iv.lo.abs() <= 1e-2, "lo = {}", iv.lo);
        assert!((iv.hi - 1.0).abs() <= 1e-2, "hi = {}", iv.hi);
        assert_eq!(r.alternative, 2);
        assert_eq!(iv.dim_above, Some(0));
        assert_eq!(iv.dim_below, Some(1));
        let profile = resolvent_dimension_profile(&c, &r).unwrap();
        let dims: Vec<usize> = profile.iter().map(|g| g.dim).collect();
        assert_eq!(dims, vec![1, 0]);
    }

    #[test]
    fn single_rate_gives_one_point() {
        let c = constant(&[0.3f64.exp()], 1);
        let cfg = ScanConfig {
            n_max: 64,
            lower_bound: -0.5,
            ..ScanConfig::default()
        };
        let r = scan_spectrum(&c, &cfg).unwrap();
        assert_eq!(r.intervals.len(), 1);
        assert!(r.intervals[0].is_point);
        assert!((r.intervals[0].midpoint() - 0.3).abs() <= 1e-3);
    }

    #[test]
    fn floor_above_spectrum_yields_empty_alternative_one() {
        let c = constant(&[0.5], 1);
        let cfg = ScanConfig {
            n_max: 64,
            lower_bound: -0.5,
            ..ScanConfig::default()
        };
        let r = scan_spectrum(&c, &cfg).unwrap();
        assert!(r.intervals.is_empty());
        assert_eq!(r.alternative, 1);
        let class = classify_structure(&r);
        assert_eq!(class.alternative, 1);
    }

    #[test]
    fn accumulating_rates_truncate_with_suspicion() {
        let d = 32;
        let mut m = DMatrix::zeros(d, d);
        m[(0, 0)] = 2.0;
        for k in 2..=d {
            m[(k - 1, k - 1)] = 0.5 + 1.0 / k as f64;
        }
        let c = Cocycle::new(BaseSystem::FinitePeriodic { period: 1 }, Generator::Constant { matrix: m }).unwrap();
        let cfg = ScanConfig {
            n_max: 64,
            lower_bound: -0.75,
            max_intervals: 26,
            ..ScanConfig::default()
        };
        let r = scan_spectrum(&c, &cfg).unwrap();
        assert!(r.truncated);
        assert_eq!(r.intervals.len(), 26);
        assert!(r.accumulation_suspected, "gaps: {:?}", r
            .intervals
            .windows(2)
            .map(|w| w[0].lo - w[1].hi)
            .collect::<Vec<_>>());
        assert_eq!(r.alternative, 4);
        // Leading points at log 2, log 1, log(1/2 + 1/3).
        let expect = [2.0f64.ln(), 0.0, (0.5 + 1.0 / 3.0f64).ln()];
        for (iv, e) in r.intervals.iter().zip(expect.iter()) {
            assert!((iv.midpoint() - e).abs() <= 1e-3, "{} vs {}", iv.midpoint(), e);
        }
    }

    #[test]
    fn grid_step_must_clear_margin() {
        let cfg = ScanConfig {
            grid_step: 1e-4,
            ..ScanConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
