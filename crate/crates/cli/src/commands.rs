//! Command implementations: each builds the requested objects from the
//! config, runs the core computation, and packages a deterministic result
//! document plus CSV traces and a human-readable summary.

use cocyspec::base::ErgodicMeasure;
use cocyspec::cocycle::Cocycle;
use cocyspec::jps::{lambda_mu, verify_endpoints, SubadditiveSequence};
use cocyspec::lyapunov::{exponent_ladder, oseledets_splitting, slow_space_growth};
use cocyspec::quasicompact::assess_quasicompactness;
use cocyspec::spectrum::{classify_structure, resolvent_dimension_profile, scan_spectrum, SpectrumResult};
use cocyspec::selftest::run_selftest;
use cocyspec::ExtReal;
use serde_json::{json, Value};
use std::fmt::Write as _;

use crate::config::{CommandKind, ExperimentConfig};

/// Everything one command run produces besides timing.
pub struct CommandOutcome {
    /// Deterministic result document embedded in the report.
    pub result: Value,
    /// Verification verdict; compute-only commands always pass.
    pub pass: bool,
    pub warnings: Vec<String>,
    /// (file name, contents) pairs written next to the report.
    pub traces: Vec<(String, String)>,
    /// Human-readable summary printed to stdout.
    pub summary: String,
}

pub fn run_command(kind: CommandKind, cfg: &ExperimentConfig) -> Result<CommandOutcome, cocyspec::Error> {
    match kind {
        CommandKind::Selftest => Ok(selftest(cfg.seed)),
        CommandKind::Lyapunov => lyapunov(cfg),
        CommandKind::Spectrum => spectrum(cfg),
        CommandKind::Quasicompact => quasicompact(cfg),
        CommandKind::VerifyJps => verify_jps(cfg),
    }
}

fn build(cfg: &ExperimentConfig) -> Result<(Cocycle, Vec<ErgodicMeasure>), cocyspec::Error> {
    let c = cfg
        .build_cocycle()
        .map_err(cocyspec::Error::InvalidParam)?;
    let family = cfg
        .build_family(c.base())
        .map_err(cocyspec::Error::InvalidParam)?;
    Ok((c, family))
}

/// kappa floor of the cocycle as handed over (tail rate minus shift).
fn model_kappa(c: &Cocycle) -> ExtReal {
    match c.model().per_step_tail_log() {
        None => ExtReal::NegInf,
        Some(t) => ExtReal::Finite(t - c.shift()),
    }
}

fn ext_str(x: ExtReal) -> String {
    match x {
        ExtReal::NegInf => "-inf".into(),
        ExtReal::PosInf => "inf".into(),
        ExtReal::Finite(v) => format!("{v:.6}"),
    }
}

fn selftest(seed: u64) -> CommandOutcome {
    let report = run_selftest(seed);
    let mut summary = String::new();
    for line in &report.lines {
        let tag = if line.pass { "pass" } else { "FAIL" };
        let _ = writeln!(summary, "[{tag}] {:<24} {}", line.name, line.detail);
    }
    let _ = writeln!(
        summary,
        "selftest: {}/{} checks passed",
        report.lines.iter().filter(|l| l.pass).count(),
        report.lines.len()
    );
    CommandOutcome {
        pass: report.all_pass,
        result: serde_json::to_value(&report).expect("selftest serializes"),
        warnings: Vec::new(),
        traces: Vec::new(),
        summary,
    }
}

/// Kingman convergence trace rows for the plain norm sequence: one line per
/// (measure, horizon) pair with the averaged (1/n) F_n value.
fn growth_trace(c: &Cocycle, family: &[ErgodicMeasure], n_max: usize, seed: u64) -> Result<String, cocyspec::Error> {
    let seq = SubadditiveSequence::plain(c, 0.0);
    let mut csv = String::from("measure,n,mean_over_n\n");
    for mu in family {
        let est = lambda_mu(&seq, mu, n_max.max(8), seed)?;
        for (n, v) in &est.evaluations {
            let _ = writeln!(csv, "{},{},{}", mu.label(), n, v);
        }
    }
    Ok(csv)
}

fn scan_trace(r: &SpectrumResult) -> String {
    let mut csv = String::from("shift,pass,dim_unstable,lambda,reason\n");
    for p in &r.trace {
        let dim = p.dim_unstable.map_or(String::new(), |k| k.to_string());
        let reason = p.reason.clone().unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{}", p.shift, u8::from(p.pass), dim, p.lambda, reason);
    }
    csv
}

fn interval_summary(r: &SpectrumResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "spectrum: {} interval(s), alternative {}, kappa {}",
        r.intervals.len(),
        r.alternative,
        ext_str(r.kappa)
    );
    for (i, iv) in r.intervals.iter().enumerate() {
        let shape = if iv.is_point { "point" } else { "interval" };
        let _ = writeln!(
            s,
            "  [{i}] {shape} [{:.6}, {:.6}]  dim above {:?}  dim below {:?}{}",
            iv.lo,
            iv.hi,
            iv.dim_above,
            iv.dim_below,
            if iv.touches_floor { "  (touches scan floor)" } else { "" }
        );
    }
    s
}

fn lyapunov(cfg: &ExperimentConfig) -> Result<CommandOutcome, cocyspec::Error> {
    let (c, family) = build(cfg)?;
    let mut ladders = Vec::new();
    let mut met = Vec::new();
    let mut summary = String::new();
    for mu in &family {
        let ladder = exponent_ladder(&c, mu, cfg.ladder.n_max, cfg.ladder.resolution, cfg.seed)?;
        let exps: Vec<String> = ladder
            .exponents
            .iter()
            .map(|g| format!("{:.6} (x{})", g.lambda, g.multiplicity))
            .collect();
        let _ = writeln!(summary, "{:<24} {}", mu.label(), exps.join("  "));
        let starts = mu.sample_starts(c.base(), 1, cfg.ladder.n_max, 64, cfg.seed)?;
        let q = &starts[0];
        let split = oseledets_splitting(&c, &ladder, q, cfg.ladder.n_max)?;
        let slow = slow_space_growth(&c, &split, q, cfg.ladder.n_max)?;
        met.push(json!({
            "measure": mu.label(),
            "point": split.point,
            "max_equivariance_defect": split.equivariance_defects.iter().cloned().fold(0.0f64, f64::max),
            "min_pairwise_angle": split.min_pairwise_angle,
            "intersection_quality": split.intersection_quality,
            "backward_window_used": split.backward_window_used,
            "rank_collapse": split.rank_collapse,
            "slow_space_growth": slow,
        }));
        ladders.push(ladder);
    }
    let trace = growth_trace(&c, &family, cfg.ladder.n_max, cfg.seed)?;
    Ok(CommandOutcome {
        result: json!({
            "ladders": ladders,
            "met": met,
        }),
        pass: true,
        warnings: Vec::new(),
        traces: vec![("trace_growth.csv".into(), trace)],
        summary,
    })
}

fn spectrum(cfg: &ExperimentConfig) -> Result<CommandOutcome, cocyspec::Error> {
    let (c, _) = build(cfg)?;
    let sc = cfg.scan_config(model_kappa(&c));
    let r = scan_spectrum(&c, &sc)?;
    let structure = classify_structure(&r);
    let gaps = resolvent_dimension_profile(&c, &r)?;
    let mut warnings = Vec::new();
    if r.truncated {
        warnings.push(format!("interval budget hit; scan resolved down to {}", r.scanned_down_to));
    }
    if r.accumulation_suspected {
        warnings.push("interval accumulation suspected near the lower edge".into());
    }
    let mut summary = interval_summary(&r);
    let _ = writeln!(summary, "  {}", structure.description);
    let outcome = CommandOutcome {
        result: json!({
            "spectrum": r,
            "structure": structure,
            "gap_dims": gaps,
        }),
        pass: true,
        warnings,
        traces: vec![("trace_scan.csv".into(), scan_trace(&r))],
        summary,
    };
    Ok(outcome)
}

fn quasicompact(cfg: &ExperimentConfig) -> Result<CommandOutcome, cocyspec::Error> {
    let (c, family) = build(cfg)?;
    let mut reports = Vec::new();
    let mut summary = String::new();
    let mut pass = true;
    for mu in &family {
        let rep = assess_quasicompactness(&c, mu, cfg.quasicompact.n_max, cfg.seed)?;
        let verdict = if rep.quasicompact { "quasicompact" } else { "NOT quasicompact" };
        let _ = writeln!(
            summary,
            "{:<24} kappa {}  lambda {:.6}  margin {}  {verdict}",
            rep.measure,
            ext_str(rep.kappa),
            rep.lambda,
            ext_str(rep.margin)
        );
        pass &= rep.quasicompact;
        reports.push(rep);
    }
    Ok(CommandOutcome {
        result: json!({ "reports": reports }),
        pass,
        warnings: Vec::new(),
        traces: Vec::new(),
        summary,
    })
}

fn verify_jps(cfg: &ExperimentConfig) -> Result<CommandOutcome, cocyspec::Error> {
    let (c, family) = build(cfg)?;
    let sc = cfg.scan_config(model_kappa(&c));
    let r = scan_spectrum(&c, &sc)?;
    let vcfg = cfg.verify_config();
    let report = verify_endpoints(&c, &r, &family, &vcfg)?;

    let mut summary = interval_summary(&r);
    let _ = writeln!(summary);
    let _ = writeln!(
        summary,
        "{:<12} {:<7} {:<4} {:<28} {:<12} {:<10} verdict",
        "endpoint", "side", "dimU", "matched measure", "exponent", "residual"
    );
    for e in &report.endpoints {
        if let Some(reason) = &e.skipped {
            let _ = writeln!(summary, "{:<12.6} {:<7} {:<4} skipped: {reason}", e.value, e.side, opt_dim(e.dim_unstable));
            continue;
        }
        let _ = writeln!(
            summary,
            "{:<12.6} {:<7} {:<4} {:<28} {:<12} {:<10} {}",
            e.value,
            e.side,
            opt_dim(e.dim_unstable),
            e.matched_measure.clone().unwrap_or_else(|| "-".into()),
            e.exponent.map_or("-".into(), |x| format!("{x:.6}")),
            e.residual.map_or("-".into(), |x| format!("{x:.2e}")),
            if e.verdict { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(summary, "{}", report.family_note);
    let _ = writeln!(
        summary,
        "endpoint verification: {}",
        if report.all_pass { "all endpoints realized" } else { "some endpoint is NOT matched by the family" }
    );

    let pass = report.all_pass;
    let growth = growth_trace(&c, &family, vcfg.n_max.min(512), cfg.seed)?;
    Ok(CommandOutcome {
        result: json!({
            "spectrum": r,
            "endpoints": report,
        }),
        pass,
        warnings: Vec::new(),
        traces: vec![
            ("trace_scan.csv".into(), scan_trace(&r)),
            ("trace_growth.csv".into(), growth),
        ],
        summary,
    })
}

fn opt_dim(k: Option<usize>) -> String {
    k.map_or("-".into(), |v| v.to_string())
}
