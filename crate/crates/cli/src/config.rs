//! Experiment config: JSON with a fixed schema. Validation is aggregated
//! (every problem is reported, not just the first), unknown keys are
//! rejected with a nearest-key suggestion, and messages carry the line of
//! the offending key where it can be located in the source text.

use cocyspec::base::{BaseSystem, ErgodicMeasure};
use cocyspec::cocycle::{Cocycle, Generator};
use cocyspec::jps::VerifyConfig;
use cocyspec::quasicompact::{NoncompactnessModel, WeightForm};
use cocyspec::spectrum::ScanConfig;
use cocyspec::ExtReal;
use nalgebra::DMatrix;
use serde_json::{Map, Value};

#[derive(Clone, Debug)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {}: {}: {}", l, self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Lyapunov,
    Spectrum,
    Quasicompact,
    VerifyJps,
    Selftest,
}

impl CommandKind {
    pub const NAMES: [&'static str; 5] =
        ["lyapunov", "spectrum", "quasicompact", "verify-jps", "selftest"];

    pub fn parse(s: &str) -> Option<CommandKind> {
        match s {
            "lyapunov" => Some(CommandKind::Lyapunov),
            "spectrum" => Some(CommandKind::Spectrum),
            "quasicompact" => Some(CommandKind::Quasicompact),
            "verify-jps" => Some(CommandKind::VerifyJps),
            "selftest" => Some(CommandKind::Selftest),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Lyapunov => "lyapunov",
            CommandKind::Spectrum => "spectrum",
            CommandKind::Quasicompact => "quasicompact",
            CommandKind::VerifyJps => "verify-jps",
            CommandKind::Selftest => "selftest",
        }
    }

    /// Commands other than selftest need a base and a generator.
    pub fn needs_cocycle(self) -> bool {
        self != CommandKind::Selftest
    }
}

#[derive(Clone, Debug)]
pub enum BaseSpec {
    FullShift { alphabet: usize },
    CircleRotation { rho: f64 },
    FinitePeriodic { period: usize },
}

impl BaseSpec {
    pub fn to_core(&self) -> BaseSystem {
        match self {
            BaseSpec::FullShift { alphabet } => BaseSystem::FullShift { alphabet: *alphabet },
            BaseSpec::CircleRotation { rho } => BaseSystem::CircleRotation { rho: *rho },
            BaseSpec::FinitePeriodic { period } => BaseSystem::FinitePeriodic { period: *period },
        }
    }
}

#[derive(Clone, Debug)]
pub enum GenSpec {
    Constant { matrix: DMatrix<f64> },
    PerSymbol { matrices: Vec<DMatrix<f64>> },
    ScalarBlocks { block_len: usize, log_values: Vec<f64> },
    ScaledRotation { scale: f64 },
    /// Named built-in family from the fixture battery.
    Builtin { name: String, truncation: Option<usize> },
}

const BUILTIN_GENERATORS: [&str; 5] = ["diag2", "diag4", "diagonal-tail", "scalar-shift", "shear2"];

#[derive(Clone, Debug)]
pub enum ModelSpec {
    FiniteDim,
    DiagonalTail { form: WeightForm, truncation: usize },
    Banded { truncation: usize, log_tail_rate: f64 },
}

impl ModelSpec {
    pub fn to_core(&self) -> NoncompactnessModel {
        match self {
            ModelSpec::FiniteDim => NoncompactnessModel::FiniteDim,
            ModelSpec::DiagonalTail { form, truncation } => NoncompactnessModel::DiagonalTail {
                form: form.clone(),
                truncation: *truncation,
            },
            ModelSpec::Banded { truncation, log_tail_rate } => NoncompactnessModel::Banded {
                truncation: *truncation,
                log_tail_rate: *log_tail_rate,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub enum ExtraMeasure {
    PeriodicOrbit { word: Vec<u8> },
    Bernoulli { probs: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct MeasureSpec {
    pub p_max: usize,
    pub extra: Vec<ExtraMeasure>,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec { p_max: 8, extra: Vec::new() }
    }
}

#[derive(Clone, Debug)]
pub struct ScanSpec {
    pub grid_step: f64,
    pub bisect_tol: f64,
    pub n_max: usize,
    pub lower_bound: f64,
    pub max_intervals: usize,
    pub p_max: usize,
    pub rotation_grid: usize,
    pub rotation_random: usize,
    pub norm_budget: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        let d = ScanConfig::default();
        ScanSpec {
            grid_step: d.grid_step,
            bisect_tol: d.bisect_tol,
            n_max: d.n_max,
            lower_bound: d.lower_bound,
            max_intervals: d.max_intervals,
            p_max: d.p_max,
            rotation_grid: d.rotation_grid,
            rotation_random: d.rotation_random,
            norm_budget: d.norm_budget,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LadderSpec {
    pub n_max: usize,
    pub resolution: f64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec { n_max: 512, resolution: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct VerifySpec {
    pub n_max: usize,
    pub match_tolerance: f64,
    pub ladder_resolution: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        let d = VerifyConfig::default();
        VerifySpec {
            n_max: d.n_max,
            match_tolerance: d.match_tolerance,
            ladder_resolution: d.ladder_resolution,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuasiSpec {
    pub n_max: usize,
}

impl Default for QuasiSpec {
    fn default() -> Self {
        QuasiSpec { n_max: 256 }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: Option<CommandKind>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub base: Option<BaseSpec>,
    pub generator: Option<GenSpec>,
    pub model: Option<ModelSpec>,
    pub shift: f64,
    pub measures: MeasureSpec,
    pub scan: ScanSpec,
    pub ladder: LadderSpec,
    pub verify: VerifySpec,
    pub quasicompact: QuasiSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: None,
            seed: 7,
            threads: None,
            out: None,
            base: None,
            generator: None,
            model: None,
            shift: 0.0,
            measures: MeasureSpec::default(),
            scan: ScanSpec::default(),
            ladder: LadderSpec::default(),
            verify: VerifySpec::default(),
            quasicompact: QuasiSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Assembles the core cocycle (with model and shift) from the specs.
    pub fn build_cocycle(&self) -> Result<Cocycle, String> {
        let base = self.base.as_ref().ok_or("base system missing")?.to_core();
        let generator = match self.generator.as_ref().ok_or("generator missing")? {
            GenSpec::Constant { matrix } => Generator::Constant { matrix: matrix.clone() },
            GenSpec::PerSymbol { matrices } => Generator::PerSymbol { matrices: matrices.clone() },
            GenSpec::ScalarBlocks { block_len, log_values } => {
                let alphabet = match &base {
                    BaseSystem::FullShift { alphabet } => *alphabet,
                    _ => return Err("scalar-blocks generator needs a full-shift base".into()),
                };
                Generator::ScalarBlocks {
                    alphabet,
                    block_len: *block_len,
                    log_values: log_values.clone(),
                }
            }
            GenSpec::ScaledRotation { scale } => Generator::ScaledRotation { scale: *scale },
            GenSpec::Builtin { name, truncation } => match name.as_str() {
                "diag2" => cocyspec::fixtures::constant_diag2().generator().clone(),
                "diag4" => cocyspec::fixtures::constant_diag4().generator().clone(),
                "shear2" => cocyspec::fixtures::shear2().generator().clone(),
                "scalar-shift" => cocyspec::fixtures::scalar_shift().generator().clone(),
                "diagonal-tail" => {
                    let t = truncation.ok_or("builtin diagonal-tail needs \"truncation\"")?;
                    cocyspec::fixtures::diagonal_tail(t).generator().clone()
                }
                other => return Err(format!("unknown builtin generator \"{other}\"")),
            },
        };
        let model = self.model.as_ref().map(|m| m.to_core()).unwrap_or(NoncompactnessModel::FiniteDim);
        let c = Cocycle::with_model(base, generator, model).map_err(|e| e.to_string())?;
        Ok(c.shifted(self.shift))
    }

    /// Periodic family up to p_max plus any configured extras.
    pub fn build_family(&self, base: &BaseSystem) -> Result<Vec<ErgodicMeasure>, String> {
        let mut family = base.periodic_measures(self.measures.p_max).map_err(|e| e.to_string())?;
        for extra in &self.measures.extra {
            match extra {
                ExtraMeasure::PeriodicOrbit { word } => {
                    family.push(ErgodicMeasure::periodic_orbit(word));
                }
                ExtraMeasure::Bernoulli { probs } => {
                    family.push(ErgodicMeasure::bernoulli(probs.clone()).map_err(|e| e.to_string())?);
                }
            }
        }
        Ok(family)
    }

    /// Scan configuration with the noncompactness floor wired in.
    pub fn scan_config(&self, kappa: ExtReal) -> ScanConfig {
        ScanConfig {
            grid_step: self.scan.grid_step,
            bisect_tol: self.scan.bisect_tol,
            n_max: self.scan.n_max,
            kappa,
            lower_bound: self.scan.lower_bound,
            max_intervals: self.scan.max_intervals,
            p_max: self.scan.p_max,
            rotation_grid: self.scan.rotation_grid,
            rotation_random: self.scan.rotation_random,
            seed: self.seed,
            norm_budget: self.scan.norm_budget,
            explicit_samples: None,
        }
    }

    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            n_max: self.verify.n_max,
            match_tolerance: self.verify.match_tolerance,
            ladder_resolution: self.verify.ladder_resolution,
            seed: self.seed,
        }
    }
}

const ROOT_KEYS: [&str; 13] = [
    "base",
    "command",
    "generator",
    "ladder",
    "measures",
    "model",
    "out",
    "quasicompact",
    "scan",
    "seed",
    "shift",
    "threads",
    "verify",
];
const BASE_KEYS: [&str; 4] = ["alphabet", "kind", "period", "rho"];
const GEN_KEYS: [&str; 8] =
    ["block_len", "kind", "log_values", "matrices", "matrix", "name", "scale", "truncation"];
const MODEL_KEYS: [&str; 4] = ["kind", "log_tail_rate", "truncation", "weights"];
const WEIGHT_KEYS: [&str; 3] = ["kind", "ratio", "value"];
const MEASURE_KEYS: [&str; 2] = ["extra", "p_max"];
const EXTRA_KEYS: [&str; 3] = ["kind", "probs", "word"];
const SCAN_KEYS: [&str; 9] = [
    "bisect_tol",
    "grid_step",
    "lower_bound",
    "max_intervals",
    "n_max",
    "norm_budget",
    "p_max",
    "rotation_grid",
    "rotation_random",
];
const LADDER_KEYS: [&str; 2] = ["n_max", "resolution"];
const VERIFY_KEYS: [&str; 3] = ["ladder_resolution", "match_tolerance", "n_max"];
const QUASI_KEYS: [&str; 1] = ["n_max"];

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn nearest<'a>(key: &str, valid: &[&'a str]) -> &'a str {
    valid
        .iter()
        .min_by_key(|v| levenshtein(key, v))
        .copied()
        .unwrap_or("")
}

/// Collects every config problem instead of stopping at the first one.
struct Checker<'t> {
    text: &'t str,
    errors: Vec<ConfigError>,
}

impl<'t> Checker<'t> {
    fn err(&mut self, path: &str, anchor: &str, message: String) {
        self.errors.push(ConfigError {
            path: path.to_string(),
            line: line_of(self.text, anchor),
            message,
        });
    }

    fn reject_unknown(&mut self, obj: &Map<String, Value>, path: &str, valid: &[&str]) {
        for key in obj.keys() {
            if !valid.contains(&key.as_str()) {
                let hint = nearest(key, valid);
                self.err(
                    path,
                    key,
                    format!("unknown key \"{key}\"; nearest valid key is \"{hint}\""),
                );
            }
        }
    }

    fn as_object<'v>(&mut self, v: &'v Value, path: &str, anchor: &str) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(o) => Some(o),
            None => {
                self.err(path, anchor, "expected a JSON object".into());
                None
            }
        }
    }

    fn str_field<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v str> {
        match obj.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.err(&format!("{path}.{key}"), key, "expected a string".into());
                None
            }
        }
    }

    fn f64_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match obj.get(key) {
            None => None,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.err(&format!("{path}.{key}"), key, "expected a finite number".into());
                    None
                }
            },
        }
    }

    fn usize_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<usize> {
        match obj.get(key) {
            None => None,
            Some(v) => match v.as_u64() {
                Some(x) => Some(x as usize),
                None => {
                    self.err(&format!("{path}.{key}"), key, "expected a nonnegative integer".into());
                    None
                }
            },
        }
    }

    /// Range check helper: pushes an error and returns None when out of range.
    fn expect<T: Copy>(
        &mut self,
        val: Option<T>,
        ok: impl Fn(T) -> bool,
        path: &str,
        key: &str,
        message: &str,
    ) -> Option<T> {
        match val {
            Some(x) if ok(x) => Some(x),
            Some(_) => {
                self.err(&format!("{path}.{key}"), key, message.to_string());
                None
            }
            None => None,
        }
    }

    fn matrix(&mut self, v: &Value, path: &str, anchor: &str) -> Option<DMatrix<f64>> {
        let rows = match v.as_array() {
            Some(r) if !r.is_empty() => r,
            _ => {
                self.err(path, anchor, "expected a nonempty array of rows".into());
                return None;
            }
        };
        let d = rows.len();
        if d > 64 {
            self.err(path, anchor, format!("matrix dimension {d} exceeds the supported 64"));
            return None;
        }
        let mut entries = Vec::with_capacity(d * d);
        for (i, row) in rows.iter().enumerate() {
            let cells = match row.as_array() {
                Some(c) => c,
                None => {
                    self.err(path, anchor, format!("row {i} is not an array"));
                    return None;
                }
            };
            if cells.len() != d {
                self.err(
                    path,
                    anchor,
                    format!("matrix must be square: row {i} has {} entries, expected {d}", cells.len()),
                );
                return None;
            }
            for (j, cell) in cells.iter().enumerate() {
                match cell.as_f64() {
                    Some(x) if x.is_finite() => entries.push(x),
                    _ => {
                        self.err(path, anchor, format!("entry ({i},{j}) is not a finite number"));
                        return None;
                    }
                }
            }
        }
        Some(DMatrix::from_row_slice(d, d, &entries))
    }
}

/// 1-based line of the first occurrence of `"key"` in the source text.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|pos| text[..pos].bytes().filter(|&b| b == b'\n').count() + 1)
}

fn parse_base(ck: &mut Checker, v: &Value) -> Option<BaseSpec> {
    let obj = ck.as_object(v, "base", "base")?;
    ck.reject_unknown(obj, "base", &BASE_KEYS);
    let kind = match ck.str_field(obj, "base", "kind") {
        Some(k) => k.to_string(),
        None => {
            ck.err("base.kind", "base", "missing base kind".into());
            return None;
        }
    };
    match kind.as_str() {
        "full-shift" => {
            let alphabet = ck.usize_field(obj, "base", "alphabet");
            let alphabet = ck.expect(
                alphabet.or(Some(0)),
                |a| (2..=16).contains(&a),
                "base",
                "alphabet",
                "alphabet must lie in 2..=16",
            )?;
            Some(BaseSpec::FullShift { alphabet })
        }
        "circle-rotation" => {
            let rho = ck.f64_field(obj, "base", "rho");
            let rho = ck.expect(
                rho.or(Some(f64::NAN)),
                |r: f64| r > 0.0 && r < 1.0,
                "base",
                "rho",
                "rho must lie strictly between 0 and 1",
            )?;
            Some(BaseSpec::CircleRotation { rho })
        }
        "finite-periodic" => {
            let period = ck.usize_field(obj, "base", "period");
            let period = ck.expect(
                period.or(Some(0)),
                |p| (1..=64).contains(&p),
                "base",
                "period",
                "period must lie in 1..=64",
            )?;
            Some(BaseSpec::FinitePeriodic { period })
        }
        other => {
            let hint = nearest(other, &["full-shift", "circle-rotation", "finite-periodic"]);
            ck.err(
                "base.kind",
                "kind",
                format!("unknown base kind \"{other}\"; nearest is \"{hint}\""),
            );
            None
        }
    }
}

fn parse_generator(ck: &mut Checker, v: &Value) -> Option<GenSpec> {
    let obj = ck.as_object(v, "generator", "generator")?;
    ck.reject_unknown(obj, "generator", &GEN_KEYS);
    let kind = match ck.str_field(obj, "generator", "kind") {
        Some(k) => k.to_string(),
        None => {
            ck.err("generator.kind", "generator", "missing generator kind".into());
            return None;
        }
    };
    match kind.as_str() {
        "constant" => {
            let m = obj.get("matrix").or_else(|| {
                ck.err("generator.matrix", "generator", "constant generator needs \"matrix\"".into());
                None
            })?;
            Some(GenSpec::Constant { matrix: ck.matrix(m, "generator.matrix", "matrix")? })
        }
        "per-symbol" => {
            let arr = match obj.get("matrices").and_then(Value::as_array) {
                Some(a) if !a.is_empty() => a,
                _ => {
                    ck.err(
                        "generator.matrices",
                        "generator",
                        "per-symbol generator needs a nonempty \"matrices\" array".into(),
                    );
                    return None;
                }
            };
            let mut out = Vec::with_capacity(arr.len());
            for (i, m) in arr.iter().enumerate() {
                out.push(ck.matrix(m, &format!("generator.matrices[{i}]"), "matrices")?);
            }
            if out.iter().any(|m| m.nrows() != out[0].nrows()) {
                ck.err("generator.matrices", "matrices", "all symbol matrices must share one dimension".into());
                return None;
            }
            Some(GenSpec::PerSymbol { matrices: out })
        }
        "scalar-blocks" => {
            let block_len = ck.usize_field(obj, "generator", "block_len");
            let block_len = ck.expect(
                block_len.or(Some(0)),
                |b| (1..=16).contains(&b),
                "generator",
                "block_len",
                "block_len must lie in 1..=16",
            );
            let values = match obj.get("log_values").and_then(Value::as_array) {
                Some(a) if !a.is_empty() => a,
                _ => {
                    ck.err(
                        "generator.log_values",
                        "generator",
                        "scalar-blocks generator needs a nonempty \"log_values\" array".into(),
                    );
                    return None;
                }
            };
            let mut log_values = Vec::with_capacity(values.len());
            for (i, v) in values.iter().enumerate() {
                match v.as_f64() {
                    Some(x) if x.is_finite() => log_values.push(x),
                    _ => {
                        ck.err(
                            "generator.log_values",
                            "log_values",
                            format!("entry {i} is not a finite number"),
                        );
                        return None;
                    }
                }
            }
            Some(GenSpec::ScalarBlocks { block_len: block_len?, log_values })
        }
        "scaled-rotation" => {
            let scale = ck.f64_field(obj, "generator", "scale");
            let scale = ck.expect(
                scale.or(Some(f64::NAN)),
                |s: f64| s > 0.0 && s.is_finite(),
                "generator",
                "scale",
                "scale must be a positive finite number",
            )?;
            Some(GenSpec::ScaledRotation { scale })
        }
        "builtin" => {
            let name = match ck.str_field(obj, "generator", "name") {
                Some(n) if BUILTIN_GENERATORS.contains(&n) => n.to_string(),
                Some(other) => {
                    let hint = nearest(other, &BUILTIN_GENERATORS);
                    ck.err(
                        "generator.name",
                        "name",
                        format!("unknown builtin generator \"{other}\"; nearest is \"{hint}\""),
                    );
                    return None;
                }
                None => {
                    ck.err("generator.name", "generator", "builtin generator needs a \"name\"".into());
                    return None;
                }
            };
            let truncation = ck.usize_field(obj, "generator", "truncation");
            let truncation = match truncation {
                Some(t) => Some(ck.expect(
                    Some(t),
                    |t| (1..=4096).contains(&t),
                    "generator",
                    "truncation",
                    "truncation must lie in 1..=4096",
                )?),
                None => None,
            };
            if name == "diagonal-tail" && truncation.is_none() {
                ck.err("generator.truncation", "generator", "builtin diagonal-tail needs \"truncation\"".into());
                return None;
            }
            Some(GenSpec::Builtin { name, truncation })
        }
        other => {
            let hint = nearest(
                other,
                &["builtin", "constant", "per-symbol", "scalar-blocks", "scaled-rotation"],
            );
            ck.err(
                "generator.kind",
                "kind",
                format!("unknown generator kind \"{other}\"; nearest is \"{hint}\""),
            );
            None
        }
    }
}

fn parse_weights(ck: &mut Checker, v: &Value) -> Option<WeightForm> {
    match v {
        Value::String(s) if s == "half_plus_inv_k" => Some(WeightForm::HalfPlusInvK),
        Value::String(s) => {
            ck.err(
                "model.weights",
                "weights",
                format!("unknown weight form \"{s}\"; nearest is \"half_plus_inv_k\""),
            );
            None
        }
        Value::Object(obj) => {
            ck.reject_unknown(obj, "model.weights", &WEIGHT_KEYS);
            match ck.str_field(obj, "model.weights", "kind") {
                Some("geometric") => {
                    let ratio = ck.f64_field(obj, "model.weights", "ratio");
                    let ratio = ck.expect(
                        ratio.or(Some(f64::NAN)),
                        |r: f64| r > 0.0 && r <= 1.0,
                        "model.weights",
                        "ratio",
                        "geometric ratio must lie in (0, 1]",
                    )?;
                    Some(WeightForm::Geometric { ratio })
                }
                Some("constant") => {
                    let value = ck.f64_field(obj, "model.weights", "value");
                    let value = ck.expect(
                        value.or(Some(f64::NAN)),
                        |w: f64| w > 0.0 && w.is_finite(),
                        "model.weights",
                        "value",
                        "constant weight must be positive",
                    )?;
                    Some(WeightForm::ConstantWeight { value })
                }
                Some(other) => {
                    let hint = nearest(other, &["geometric", "constant"]);
                    ck.err(
                        "model.weights.kind",
                        "weights",
                        format!("unknown weight kind \"{other}\"; nearest is \"{hint}\""),
                    );
                    None
                }
                None => {
                    ck.err("model.weights.kind", "weights", "missing weight kind".into());
                    None
                }
            }
        }
        _ => {
            ck.err("model.weights", "weights", "expected a string or an object".into());
            None
        }
    }
}

fn parse_model(ck: &mut Checker, v: &Value) -> Option<ModelSpec> {
    let obj = ck.as_object(v, "model", "model")?;
    ck.reject_unknown(obj, "model", &MODEL_KEYS);
    match ck.str_field(obj, "model", "kind") {
        Some("finite-dim") => Some(ModelSpec::FiniteDim),
        Some("diagonal-tail") => {
            let truncation = ck.usize_field(obj, "model", "truncation");
            let truncation = ck.expect(
                truncation.or(Some(0)),
                |t| (1..=4096).contains(&t),
                "model",
                "truncation",
                "truncation must lie in 1..=4096",
            );
            let form = match obj.get("weights") {
                Some(w) => parse_weights(ck, w),
                None => {
                    ck.err("model.weights", "model", "diagonal-tail model needs \"weights\"".into());
                    None
                }
            };
            Some(ModelSpec::DiagonalTail { form: form?, truncation: truncation? })
        }
        Some("banded") => {
            let truncation = ck.usize_field(obj, "model", "truncation");
            let truncation = ck.expect(
                truncation.or(Some(0)),
                |t| (1..=4096).contains(&t),
                "model",
                "truncation",
                "truncation must lie in 1..=4096",
            );
            let rate = ck.f64_field(obj, "model", "log_tail_rate");
            if rate.is_none() {
                ck.err("model.log_tail_rate", "model", "banded model needs a finite \"log_tail_rate\"".into());
            }
            Some(ModelSpec::Banded { truncation: truncation?, log_tail_rate: rate? })
        }
        Some(other) => {
            let hint = nearest(other, &["finite-dim", "diagonal-tail", "banded"]);
            ck.err(
                "model.kind",
                "kind",
                format!("unknown model kind \"{other}\"; nearest is \"{hint}\""),
            );
            None
        }
        None => {
            ck.err("model.kind", "model", "missing model kind".into());
            None
        }
    }
}

fn parse_measures(ck: &mut Checker, v: &Value, alphabet: Option<usize>) -> MeasureSpec {
    let mut spec = MeasureSpec::default();
    let obj = match ck.as_object(v, "measures", "measures") {
        Some(o) => o,
        None => return spec,
    };
    ck.reject_unknown(obj, "measures", &MEASURE_KEYS);
    if let Some(p) = ck.usize_field(obj, "measures", "p_max") {
        if (1..=12).contains(&p) {
            spec.p_max = p;
        } else {
            ck.err("measures.p_max", "p_max", "p_max must lie in 1..=12".into());
        }
    }
    let Some(extra) = obj.get("extra") else {
        return spec;
    };
    let Some(items) = extra.as_array() else {
        ck.err("measures.extra", "extra", "expected an array".into());
        return spec;
    };
    for (i, item) in items.iter().enumerate() {
        let path = format!("measures.extra[{i}]");
        let Some(obj) = ck.as_object(item, &path, "extra") else {
            continue;
        };
        ck.reject_unknown(obj, &path, &EXTRA_KEYS);
        match ck.str_field(obj, &path, "kind") {
            Some("periodic-orbit") => {
                let Some(word) = obj.get("word").and_then(Value::as_array) else {
                    ck.err(&path, "word", "periodic-orbit measure needs a \"word\" array".into());
                    continue;
                };
                let mut symbols = Vec::with_capacity(word.len());
                let mut good = !word.is_empty();
                if word.is_empty() {
                    ck.err(&path, "word", "orbit word must be nonempty".into());
                }
                for s in word {
                    match s.as_u64() {
                        Some(x) if alphabet.map_or(x < 256, |a| (x as usize) < a) => symbols.push(x as u8),
                        _ => {
                            ck.err(&path, "word", "orbit symbols must be integers below the alphabet size".into());
                            good = false;
                            break;
                        }
                    }
                }
                if good {
                    spec.extra.push(ExtraMeasure::PeriodicOrbit { word: symbols });
                }
            }
            Some("bernoulli") => {
                let Some(probs) = obj.get("probs").and_then(Value::as_array) else {
                    ck.err(&path, "probs", "bernoulli measure needs a \"probs\" array".into());
                    continue;
                };
                let mut ps = Vec::with_capacity(probs.len());
                let mut good = true;
                for p in probs {
                    match p.as_f64() {
                        Some(x) if x > 0.0 && x.is_finite() => ps.push(x),
                        _ => {
                            ck.err(&path, "probs", "probabilities must be positive finite numbers".into());
                            good = false;
                            break;
                        }
                    }
                }
                if good && (ps.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    ck.err(&path, "probs", "probabilities must sum to 1".into());
                    good = false;
                }
                if good && alphabet.is_some_and(|a| a != ps.len()) {
                    ck.err(&path, "probs", "need exactly one probability per alphabet symbol".into());
                    good = false;
                }
                if good {
                    spec.extra.push(ExtraMeasure::Bernoulli { probs: ps });
                }
            }
            Some(other) => {
                let hint = nearest(other, &["periodic-orbit", "bernoulli"]);
                ck.err(
                    &path,
                    "kind",
                    format!("unknown measure kind \"{other}\"; nearest is \"{hint}\""),
                );
            }
            None => ck.err(&path, "extra", "missing measure kind".into()),
        }
    }
    spec
}

fn parse_scan(ck: &mut Checker, v: &Value) -> ScanSpec {
    let mut spec = ScanSpec::default();
    let Some(obj) = ck.as_object(v, "scan", "scan") else {
        return spec;
    };
    ck.reject_unknown(obj, "scan", &SCAN_KEYS);
    if let Some(x) = ck.f64_field(obj, "scan", "grid_step") {
        if x > 0.0 {
            spec.grid_step = x;
        } else {
            ck.err("scan.grid_step", "grid_step", "grid step must be > 0".into());
        }
    }
    if let Some(x) = ck.f64_field(obj, "scan", "bisect_tol") {
        if x > 0.0 {
            spec.bisect_tol = x;
        } else {
            ck.err("scan.bisect_tol", "bisect_tol", "bisection tolerance must be > 0".into());
        }
    }
    if let Some(x) = ck.usize_field(obj, "scan", "n_max") {
        if (16..=1 << 16).contains(&x) {
            spec.n_max = x;
        } else {
            ck.err("scan.n_max", "n_max", "scan n_max must lie in 16..=65536".into());
        }
    }
    if let Some(x) = ck.f64_field(obj, "scan", "lower_bound") {
        spec.lower_bound = x;
    }
    if let Some(x) = ck.usize_field(obj, "scan", "max_intervals") {
        if x >= 1 {
            spec.max_intervals = x;
        } else {
            ck.err("scan.max_intervals", "max_intervals", "interval budget must be at least 1".into());
        }
    }
    if let Some(x) = ck.usize_field(obj, "scan", "p_max") {
        if (1..=12).contains(&x) {
            spec.p_max = x;
        } else {
            ck.err("scan.p_max", "p_max", "scan p_max must lie in 1..=12".into());
        }
    }
    if let Some(x) = ck.usize_field(obj, "scan", "rotation_grid") {
        if x >= 1 {
            spec.rotation_grid = x;
        } else {
            ck.err("scan.rotation_grid", "rotation_grid", "rotation grid must be at least 1".into());
        }
    }
    if let Some(x) = ck.usize_field(obj, "scan", "rotation_random") {
        spec.rotation_random = x;
    }
    if let Some(x) = ck.usize_field(obj, "scan", "norm_budget") {
        if x >= 1 {
            spec.norm_budget = x;
        } else {
            ck.err("scan.norm_budget", "norm_budget", "norm budget must be at least 1".into());
        }
    }
    // The scanner itself requires the grid to clear the resonance margin.
    if spec.grid_step <= spec.bisect_tol / 2.0 {
        ck.err(
            "scan.grid_step",
            "grid_step",
            format!(
                "grid step {} must exceed half the bisection tolerance {}",
                spec.grid_step, spec.bisect_tol
            ),
        );
    }
    spec
}

fn parse_ladder(ck: &mut Checker, v: &Value) -> LadderSpec {
    let mut spec = LadderSpec::default();
    let Some(obj) = ck.as_object(v, "ladder", "ladder") else {
        return spec;
    };
    ck.reject_unknown(obj, "ladder", &LADDER_KEYS);
    if let Some(x) = ck.usize_field(obj, "ladder", "n_max") {
        if (8..=1 << 16).contains(&x) {
            spec.n_max = x;
        } else {
            ck.err("ladder.n_max", "n_max", "ladder n_max must lie in 8..=65536".into());
        }
    }
    if let Some(x) = ck.f64_field(obj, "ladder", "resolution") {
        if x > 0.0 {
            spec.resolution = x;
        } else {
            ck.err("ladder.resolution", "resolution", "clustering resolution must be > 0".into());
        }
    }
    spec
}

fn parse_verify(ck: &mut Checker, v: &Value) -> VerifySpec {
    let mut spec = VerifySpec::default();
    let Some(obj) = ck.as_object(v, "verify", "verify") else {
        return spec;
    };
    ck.reject_unknown(obj, "verify", &VERIFY_KEYS);
    if let Some(x) = ck.usize_field(obj, "verify", "n_max") {
        if (8..=1 << 16).contains(&x) {
            spec.n_max = x;
        } else {
            ck.err("verify.n_max", "n_max", "verify n_max must lie in 8..=65536".into());
        }
    }
    if let Some(x) = ck.f64_field(obj, "verify", "match_tolerance") {
        if x > 0.0 {
            spec.match_tolerance = x;
        } else {
            ck.err("verify.match_tolerance", "match_tolerance", "match tolerance must be > 0".into());
        }
    }
    if let Some(x) = ck.f64_field(obj, "verify", "ladder_resolution") {
        if x > 0.0 {
            spec.ladder_resolution = x;
        } else {
            ck.err("verify.ladder_resolution", "ladder_resolution", "ladder resolution must be > 0".into());
        }
    }
    spec
}

fn parse_quasi(ck: &mut Checker, v: &Value) -> QuasiSpec {
    let mut spec = QuasiSpec::default();
    let Some(obj) = ck.as_object(v, "quasicompact", "quasicompact") else {
        return spec;
    };
    ck.reject_unknown(obj, "quasicompact", &QUASI_KEYS);
    if let Some(x) = ck.usize_field(obj, "quasicompact", "n_max") {
        if (2..=1 << 16).contains(&x) {
            spec.n_max = x;
        } else {
            ck.err("quasicompact.n_max", "n_max", "quasicompact n_max must lie in 2..=65536".into());
        }
    }
    spec
}

/// Full-schema validation: returns the parsed config or every problem found.
pub fn validate(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let root: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            return Err(vec![ConfigError {
                path: "<json>".into(),
                line: Some(e.line()),
                message: format!("not valid JSON: {e}"),
            }])
        }
    };
    let mut ck = Checker { text, errors: Vec::new() };
    let mut cfg = ExperimentConfig::default();

    let Some(obj) = root.as_object() else {
        return Err(vec![ConfigError {
            path: "<root>".into(),
            line: Some(1),
            message: "config must be a JSON object".into(),
        }]);
    };
    ck.reject_unknown(obj, "<root>", &ROOT_KEYS);

    if let Some(cmd) = ck.str_field(obj, "<root>", "command") {
        match CommandKind::parse(cmd) {
            Some(k) => cfg.command = Some(k),
            None => {
                let hint = nearest(cmd, &CommandKind::NAMES);
                ck.err(
                    "command",
                    "command",
                    format!("unknown command \"{cmd}\"; nearest is \"{hint}\""),
                );
            }
        }
    }
    if let Some(v) = obj.get("seed") {
        match v.as_u64() {
            Some(s) => cfg.seed = s,
            None => ck.err("seed", "seed", "seed must be a nonnegative integer".into()),
        }
    }
    if let Some(t) = ck.usize_field(obj, "<root>", "threads") {
        if (1..=512).contains(&t) {
            cfg.threads = Some(t);
        } else {
            ck.err("threads", "threads", "threads must lie in 1..=512".into());
        }
    }
    if let Some(s) = ck.str_field(obj, "<root>", "out") {
        cfg.out = Some(s.to_string());
    }
    if let Some(v) = obj.get("base") {
        cfg.base = parse_base(&mut ck, v);
    }
    if let Some(v) = obj.get("generator") {
        cfg.generator = parse_generator(&mut ck, v);
    }
    if let Some(v) = obj.get("model") {
        cfg.model = parse_model(&mut ck, v);
    }
    if let Some(x) = ck.f64_field(obj, "<root>", "shift") {
        cfg.shift = x;
    }
    let alphabet = match &cfg.base {
        Some(BaseSpec::FullShift { alphabet }) => Some(*alphabet),
        _ => None,
    };
    if let Some(v) = obj.get("measures") {
        cfg.measures = parse_measures(&mut ck, v, alphabet);
    }
    if let Some(v) = obj.get("scan") {
        cfg.scan = parse_scan(&mut ck, v);
    }
    if let Some(v) = obj.get("ladder") {
        cfg.ladder = parse_ladder(&mut ck, v);
    }
    if let Some(v) = obj.get("verify") {
        cfg.verify = parse_verify(&mut ck, v);
    }
    if let Some(v) = obj.get("quasicompact") {
        cfg.quasicompact = parse_quasi(&mut ck, v);
    }

    // Cross-field compatibility between base and generator.
    match (&cfg.base, &cfg.generator) {
        (Some(b), Some(g)) => {
            let ok = match (b, g) {
                (_, GenSpec::Constant { .. }) => true,
                (BaseSpec::FullShift { alphabet }, GenSpec::PerSymbol { matrices }) => {
                    if matrices.len() != *alphabet {
                        ck.err(
                            "generator.matrices",
                            "matrices",
                            format!("need exactly {alphabet} matrices (one per symbol), got {}", matrices.len()),
                        );
                    }
                    true
                }
                (BaseSpec::FullShift { alphabet }, GenSpec::ScalarBlocks { block_len, log_values }) => {
                    let expect = alphabet.pow(*block_len as u32);
                    if log_values.len() != expect {
                        ck.err(
                            "generator.log_values",
                            "log_values",
                            format!("need alphabet^block_len = {expect} values, got {}", log_values.len()),
                        );
                    }
                    true
                }
                (BaseSpec::CircleRotation { .. }, GenSpec::ScaledRotation { .. }) => true,
                (b, GenSpec::Builtin { name, .. }) => {
                    let scalar_ok = matches!(b, BaseSpec::FullShift { alphabet: 2 });
                    if name == "scalar-shift" && !scalar_ok {
                        ck.err(
                            "generator.name",
                            "name",
                            "builtin scalar-shift needs a full-shift base with alphabet 2".into(),
                        );
                    }
                    true
                }
                (_, GenSpec::PerSymbol { .. }) | (_, GenSpec::ScalarBlocks { .. }) => {
                    ck.err("generator.kind", "generator", "this generator kind needs a full-shift base".into());
                    false
                }
                (_, GenSpec::ScaledRotation { .. }) => {
                    ck.err("generator.kind", "generator", "scaled-rotation needs a circle-rotation base".into());
                    false
                }
            };
            let _ = ok;
        }
        _ => {}
    }

    if ck.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ck.errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spectrum_config_parses() {
        let text = r#"{
            "command": "spectrum",
            "base": {"kind": "finite-periodic", "period": 1},
            "generator": {"kind": "constant", "matrix": [[2.0, 0.0], [0.0, 0.5]]}
        }"#;
        let cfg = validate(text).expect("valid");
        assert_eq!(cfg.command, Some(CommandKind::Spectrum));
        let c = cfg.build_cocycle().expect("buildable");
        assert_eq!(c.dim(), 2);
    }

    #[test]
    fn zero_grid_step_is_rejected_with_the_documented_message() {
        let text = r#"{
            "command": "spectrum",
            "base": {"kind": "finite-periodic", "period": 1},
            "generator": {"kind": "constant", "matrix": [[2.0]]},
            "scan": {"grid_step": 0.0}
        }"#;
        let errs = validate(text).expect_err("invalid");
        assert!(errs.iter().any(|e| e.message == "grid step must be > 0"), "{errs:?}");
        assert!(errs.iter().all(|e| e.line.is_some() || e.path == "<root>"));
    }

    #[test]
    fn unknown_key_suggests_the_nearest_valid_one() {
        let text = r#"{
            "command": "spectrum",
            "base": {"kind": "finite-periodic", "period": 1},
            "generator": {"kind": "constant", "matrix": [[2.0]]},
            "scan": {"gridd": 0.1}
        }"#;
        let errs = validate(text).expect_err("invalid");
        let hit = errs.iter().find(|e| e.message.contains("gridd")).expect("unknown key reported");
        assert!(hit.message.contains("grid_step"), "{}", hit.message);
        assert_eq!(hit.line, Some(5));
    }

    #[test]
    fn errors_are_aggregated_not_first_only() {
        let text = r#"{
            "command": "spextrum",
            "base": {"kind": "finite-periodic", "period": 0},
            "generator": {"kind": "constant", "matrix": [[2.0]]},
            "scan": {"grid_step": -1.0, "n_max": 4}
        }"#;
        let errs = validate(text).expect_err("invalid");
        assert!(errs.len() >= 4, "want all four problems, got {errs:?}");
        assert!(errs.iter().any(|e| e.message.contains("spectrum")));
    }

    #[test]
    fn mismatched_generator_base_pair_is_rejected() {
        let text = r#"{
            "command": "lyapunov",
            "base": {"kind": "circle-rotation", "rho": 0.41},
            "generator": {"kind": "scalar-blocks", "block_len": 1, "log_values": [0.0, 1.0]}
        }"#;
        let errs = validate(text).expect_err("invalid");
        assert!(errs.iter().any(|e| e.message.contains("full-shift base")));
    }

    #[test]
    fn scalar_block_table_length_is_cross_checked() {
        let text = r#"{
            "command": "spectrum",
            "base": {"kind": "full-shift", "alphabet": 2},
            "generator": {"kind": "scalar-blocks", "block_len": 2, "log_values": [0.0, 1.0]}
        }"#;
        let errs = validate(text).expect_err("invalid");
        assert!(errs.iter().any(|e| e.message.contains("alphabet^block_len = 4")), "{errs:?}");
    }
}
