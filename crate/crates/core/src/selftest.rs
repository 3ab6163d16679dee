//! Built-in smoke battery: one fast end-to-end exercise of each major
//! capability on closed-form fixtures. Meant to finish in seconds and to
//! catch wiring mistakes, not to replace the full test suite.

use serde::Serialize;

use crate::base::ErgodicMeasure;
use crate::cocycle::Cocycle;
use crate::error::Result;
use crate::fixtures;
use crate::jps::{
    cao_maximize, check_subadditivity, default_measure_family, family_points, verify_endpoints,
    SubadditiveSequence, VerifyConfig,
};
use crate::linalg::opnorm;
use crate::lyapunov::{exponent_ladder, oseledets_splitting};
use crate::quasicompact::assess_quasicompactness;
use crate::spectrum::{scan_spectrum, ScanConfig};

#[derive(Clone, Debug, Serialize)]
pub struct SelfTestLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelfTestReport {
    pub lines: Vec<SelfTestLine>,
    pub all_pass: bool,
}

fn line(name: &str, outcome: Result<(bool, String)>) -> SelfTestLine {
    match outcome {
        Ok((pass, detail)) => SelfTestLine {
            name: name.to_string(),
            pass,
            detail,
        },
        Err(e) => SelfTestLine {
            name: name.to_string(),
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn single_measure(c: &Cocycle) -> Result<ErgodicMeasure> {
    Ok(c.base().periodic_measures(1)?.remove(0))
}

fn cocycle_law_check() -> Result<(bool, String)> {
    let c = fixtures::shear2();
    let q = crate::base::BasePoint::Cycle(0);
    let (n, m) = (5usize, 7usize);
    let left = c.product(&q, n + m)?.to_matrix();
    let fq = c.base().iterate(&q, n as i64)?;
    let right = c.product(&fq, m)?.to_matrix() * c.product(&q, n)?.to_matrix();
    let rel = opnorm(&(&left - &right)) / opnorm(&left).max(1e-300);
    Ok((rel <= 1e-10, format!("cocycle-law relative residual {rel:.2e}")))
}

fn ladder_check() -> Result<(bool, String)> {
    let c = fixtures::constant_diag2();
    let mu = single_measure(&c)?;
    let ladder = exponent_ladder(&c, &mu, 128, 0.05, 7)?;
    let l2 = 2.0f64.ln();
    let ok = ladder.exponents.len() == 2
        && (ladder.exponents[0].lambda - l2).abs() <= 1e-6
        && (ladder.exponents[1].lambda + l2).abs() <= 1e-6;
    Ok((ok, format!("diag(2,1/2) ladder {:?}", ladder.exponents)))
}

fn spectrum_check() -> Result<(bool, String)> {
    let c = fixtures::constant_diag2();
    let cfg = ScanConfig {
        n_max: 128,
        lower_bound: -1.5,
        ..ScanConfig::default()
    };
    let r = scan_spectrum(&c, &cfg)?;
    let l2 = 2.0f64.ln();
    let ok = r.intervals.len() == 2
        && (r.intervals[0].midpoint() - l2).abs() <= 1e-3
        && (r.intervals[1].midpoint() + l2).abs() <= 1e-3
        && r.alternative == 2;
    Ok((
        ok,
        format!(
            "diag(2,1/2) spectrum {:?} alternative {}",
            r.intervals.iter().map(|iv| iv.midpoint()).collect::<Vec<_>>(),
            r.alternative
        ),
    ))
}

fn scalar_spectrum_check() -> Result<(bool, String)> {
    let c = fixtures::scalar_shift();
    let cfg = ScanConfig {
        n_max: 128,
        p_max: 4,
        lower_bound: -0.5,
        ..ScanConfig::default()
    };
    let r = scan_spectrum(&c, &cfg)?;
    let ok = r.intervals.len() == 1
        && (r.intervals[0].hi - 1.0).abs() <= 1e-2
        && r.intervals[0].lo.abs() <= 1e-2
        && r.alternative == 2;
    Ok((
        ok,
        format!(
            "scalar-shift spectrum [{:.4}, {:.4}]",
            r.intervals.first().map_or(f64::NAN, |iv| iv.lo),
            r.intervals.first().map_or(f64::NAN, |iv| iv.hi)
        ),
    ))
}

fn endpoint_check(seed: u64) -> Result<(bool, String)> {
    let c = fixtures::constant_diag2();
    let cfg = ScanConfig {
        n_max: 128,
        lower_bound: -1.5,
        ..ScanConfig::default()
    };
    let r = scan_spectrum(&c, &cfg)?;
    let family = default_measure_family(c.base(), 1)?;
    let v = VerifyConfig {
        n_max: 128,
        seed,
        ..VerifyConfig::default()
    };
    let rep = verify_endpoints(&c, &r, &family, &v)?;
    let worst = rep
        .endpoints
        .iter()
        .filter_map(|e| e.residual)
        .fold(0.0f64, f64::max);
    Ok((rep.all_pass, format!("endpoint residuals up to {worst:.2e}")))
}

fn cao_check(seed: u64) -> Result<(bool, String)> {
    let c = fixtures::scalar_shift();
    let seq = SubadditiveSequence::plain(&c, 0.0);
    let family = default_measure_family(c.base(), 4)?;
    let pts = family_points(&family, c.base(), 256, seed)?;
    let cao = cao_maximize(&seq, &family, &pts, 256, seed)?;
    let mut direction_ok = true;
    for est in &cao.per_measure {
        if let (Some(v), Some(l)) = (est.value.finite(), cao.l_hat.finite()) {
            direction_ok &= v <= l + 1e-9;
        }
    }
    let ok = cao.gap <= 5e-2 && direction_ok;
    Ok((
        ok,
        format!(
            "L-hat {:?}, argmax {:?} at {:?}, gap {:.2e}",
            cao.l_hat, cao.best_measure, cao.best_value, cao.gap
        ),
    ))
}

fn subadditivity_check() -> Result<(bool, String)> {
    let c = fixtures::constant_diag2();
    let q = vec![crate::base::BasePoint::Cycle(0)];
    let mut worst = f64::NEG_INFINITY;
    for seq in [
        SubadditiveSequence::plain(&c, 0.0),
        SubadditiveSequence::projected(&c, 1, 0.0),
    ] {
        let rep = check_subadditivity(&seq, &q, 12)?;
        worst = worst.max(rep.max_violation);
    }
    Ok((worst <= 1e-10, format!("max subadditivity violation {worst:.2e}")))
}

fn quasicompact_check(seed: u64) -> Result<(bool, String)> {
    let c = fixtures::diagonal_tail(16);
    let mu = single_measure(&c)?;
    let rep = assess_quasicompactness(&c, &mu, 32, seed)?;
    let expect_kappa = (0.5 + 1.0 / 17.0f64).ln();
    let ok = rep.quasicompact
        && rep
            .kappa
            .finite()
            .map_or(false, |k| (k - expect_kappa).abs() <= 1e-6)
        && (rep.lambda - 2.0f64.ln()).abs() <= 1e-6;
    Ok((
        ok,
        format!("kappa {:?} lambda {:.6} quasicompact {}", rep.kappa, rep.lambda, rep.quasicompact),
    ))
}

fn shift_covariance_check() -> Result<(bool, String)> {
    let c = fixtures::constant_diag2();
    let cfg = ScanConfig {
        n_max: 128,
        lower_bound: -1.5,
        ..ScanConfig::default()
    };
    let s = 0.3;
    let shifted = scan_spectrum(&c.shifted(s), &cfg)?;
    let plain = scan_spectrum(&c, &cfg)?;
    let ok = shifted.intervals.len() == plain.intervals.len()
        && shifted
            .intervals
            .iter()
            .zip(&plain.intervals)
            .all(|(a, b)| (a.midpoint() - (b.midpoint() - s)).abs() <= 2e-3);
    Ok((ok, format!("shift {s} moves spectrum points by -{s} within 2e-3: {ok}")))
}

fn met_check(seed: u64) -> Result<(bool, String)> {
    let c = fixtures::shear2();
    let mu = single_measure(&c)?;
    let ladder = exponent_ladder(&c, &mu, 128, 0.05, seed)?;
    let split = oseledets_splitting(&c, &ladder, &crate::base::BasePoint::Cycle(0), 128)?;
    let worst = split
        .equivariance_defects
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    Ok((worst <= 1e-4, format!("max fast-space equivariance defect {worst:.2e}")))
}

/// Runs the battery; each line is independent and failures never panic.
pub fn run_selftest(seed: u64) -> SelfTestReport {
    let lines = vec![
        line("cocycle-law", cocycle_law_check()),
        line("exponent-ladder", ladder_check()),
        line("spectrum-scan", spectrum_check()),
        line("scalar-spectrum", scalar_spectrum_check()),
        line("endpoint-verification", endpoint_check(seed)),
        line("cao-witness", cao_check(seed)),
        line("subadditivity", subadditivity_check()),
        line("quasicompactness", quasicompact_check(seed)),
        line("shift-covariance", shift_covariance_check()),
        line("met-structure", met_check(seed)),
    ];
    let all_pass = lines.iter().all(|l| l.pass);
    SelfTestReport { lines, all_pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_end_to_end() {
        let rep = run_selftest(7);
        for l in &rep.lines {
            assert!(l.pass, "{}: {}", l.name, l.detail);
        }
        assert!(rep.all_pass);
    }
}
