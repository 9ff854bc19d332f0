//! Flat `key = value` configuration with dotted namespaces.
//!
//! The document is read as TOML and flattened, so `model.q = 4.0` and a
//! `[model]` table with `q = 4.0` are the same key. Validation collects every
//! violation before reporting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::conformal::ScatterOptions;
use crate::evolution::{EvolveControls, Model};
use crate::functionals::{CoeffTriple, ModelParams, Regime};
use crate::ground_state::{GridPolicy, MinimizeOptions, NamedThreshold, ShapeSeed, ThresholdOptions, DEFAULT_EPS_GRID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Threshold,
    NamedThresholds,
    Groundstate,
    Evolve,
    Scatter,
    Verify,
    Sweep,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Threshold,
        Subcommand::NamedThresholds,
        Subcommand::Groundstate,
        Subcommand::Evolve,
        Subcommand::Scatter,
        Subcommand::Verify,
        Subcommand::Sweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Threshold => "threshold",
            Subcommand::NamedThresholds => "named-thresholds",
            Subcommand::Groundstate => "groundstate",
            Subcommand::Evolve => "evolve",
            Subcommand::Scatter => "scatter",
            Subcommand::Verify => "verify",
            Subcommand::Sweep => "sweep",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL.iter().find(|c| c.name() == s).copied().ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Float,
    Bool,
    Str,
    FloatList,
}

impl Ty {
    fn describe(&self) -> &'static str {
        match self {
            Ty::Int => "an integer",
            Ty::Float => "a number",
            Ty::Bool => "a boolean",
            Ty::Str => "a string",
            Ty::FloatList => "an array of numbers",
        }
    }
}

const SCHEMA: &[(&str, Ty)] = &[
    ("run.seed", Ty::Int),
    ("run.out", Ty::Str),
    ("model.d", Ty::Int),
    ("model.q", Ty::Float),
    ("model.p", Ty::Float),
    ("coeffs.alpha", Ty::Float),
    ("coeffs.beta", Ty::Float),
    ("coeffs.gamma", Ty::Float),
    ("coeffs.named", Ty::Str),
    ("coeffs.a", Ty::Float),
    ("coeffs.eps", Ty::Float),
    ("grid.n", Ty::Int),
    ("grid.L", Ty::Float),
    ("profile.kind", Ty::Str),
    ("profile.amplitude", Ty::Float),
    ("profile.width", Ty::Float),
    ("profile.mass", Ty::Float),
    ("profile.chirp", Ty::Float),
    ("profile.boost", Ty::Float),
    ("profile.rho", Ty::Float),
    ("profile.rho_from", Ty::Str),
    ("profile.path", Ty::Str),
    ("threshold.tol", Ty::Float),
    ("threshold.lo", Ty::Float),
    ("threshold.hi", Ty::Float),
    ("threshold.expand_decades", Ty::Float),
    ("minimize.rho", Ty::Float),
    ("minimize.max_iter", Ty::Int),
    ("minimize.residual_tol", Ty::Float),
    ("minimize.tol_neg_rel", Ty::Float),
    ("minimize.spread_factor", Ty::Float),
    ("minimize.seed_widths", Ty::FloatList),
    ("minimize.shape_seed", Ty::Bool),
    ("minimize.n", Ty::Int),
    ("minimize.box_widths", Ty::Float),
    ("minimize.jitter", Ty::Float),
    ("named.a_grid", Ty::FloatList),
    ("named.a_points", Ty::Int),
    ("named.eps_grid", Ty::FloatList),
    ("evolve.model", Ty::Str),
    ("evolve.t_max", Ty::Float),
    ("evolve.dt", Ty::Float),
    ("evolve.c_adapt", Ty::Float),
    ("evolve.phase_cap", Ty::Float),
    ("evolve.cadence", Ty::Int),
    ("evolve.a_list", Ty::FloatList),
    ("evolve.epsilon", Ty::Float),
    ("evolve.snapshots", Ty::FloatList),
    ("evolve.halt_on_unsound", Ty::Bool),
    ("evolve.max_steps", Ty::Int),
    ("evolve.free_flow", Ty::Bool),
    ("evolve.envelope_factor", Ty::Float),
    ("scatter.probes", Ty::FloatList),
    ("scatter.tol_rel", Ty::Float),
    ("sweep.d", Ty::Int),
    ("sweep.q_min", Ty::Float),
    ("sweep.q_max", Ty::Float),
    ("sweep.p_max", Ty::Float),
    ("sweep.q_points", Ty::Int),
    ("sweep.p_points", Ty::Int),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.key, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug)]
pub enum CoeffSpec {
    Explicit(CoeffTriple),
    Named(NamedThreshold),
}

impl CoeffSpec {
    pub fn resolve(&self, params: &ModelParams) -> crate::Result<CoeffTriple> {
        match self {
            CoeffSpec::Explicit(c) => Ok(*c),
            CoeffSpec::Named(n) => n.coeffs(params),
        }
    }
}

#[derive(Clone, Debug)]
pub enum ProfileSpec {
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    Sech {
        amplitude: f64,
        width: f64,
    },
    /// Energy minimizer at mass `rho²`, or at the upper end of the energy
    /// threshold bracket when `rho` is `None`.
    GroundState {
        rho: Option<f64>,
    },
    Snapshot {
        path: String,
    },
}

#[derive(Clone, Debug)]
pub struct DatumSpec {
    pub profile: ProfileSpec,
    /// Renormalize to this mass when set.
    pub mass: Option<f64>,
    pub chirp: f64,
    /// Plane-wave factor `e^{i k₀ x₁}`.
    pub boost: f64,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub d: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub p_max: f64,
    pub q_points: usize,
    pub p_points: usize,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub params: ModelParams,
    pub coeffs: CoeffSpec,
    pub grid_n: usize,
    pub grid_len: f64,
    pub datum: DatumSpec,
    pub threshold: ThresholdOptions,
    pub minimize_rho: f64,
    pub a_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub model: Model,
    pub t_max: f64,
    pub controls: EvolveControls,
    pub free_flow: bool,
    pub envelope_factor: f64,
    pub scatter: ScatterOptions,
    pub sweep: SweepSpec,
    pub seed: u64,
    pub out: Option<String>,
    /// Flattened input, for the manifest.
    pub echo: BTreeMap<String, String>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Reader {
    map: BTreeMap<String, toml::Value>,
    violations: Vec<Violation>,
}

impl Reader {
    fn flag(&mut self, key: &str, message: impl Into<String>) {
        self.violations.push(Violation { key: key.to_string(), message: message.into() });
    }

    fn mismatch(&mut self, key: &str, ty: Ty) {
        self.flag(key, format!("expected {}", ty.describe()));
    }

    fn float_opt(&mut self, key: &str) -> Option<f64> {
        match self.map.get(key) {
            None => None,
            Some(toml::Value::Float(v)) => Some(*v),
            Some(toml::Value::Integer(v)) => Some(*v as f64),
            Some(_) => {
                self.mismatch(key, Ty::Float);
                None
            }
        }
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        self.float_opt(key).unwrap_or(default)
    }

    fn int_opt(&mut self, key: &str) -> Option<i64> {
        match self.map.get(key) {
            None => None,
            Some(toml::Value::Integer(v)) => Some(*v),
            Some(_) => {
                self.mismatch(key, Ty::Int);
                None
            }
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        match self.int_opt(key) {
            None => default,
            Some(v) if v >= min as i64 => v as usize,
            Some(v) => {
                self.flag(key, format!("must be >= {min}, got {v}"));
                default
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.map.get(key) {
            None => default,
            Some(toml::Value::Boolean(b)) => *b,
            Some(_) => {
                self.mismatch(key, Ty::Bool);
                default
            }
        }
    }

    fn string_opt(&mut self, key: &str) -> Option<String> {
        match self.map.get(key) {
            None => None,
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.mismatch(key, Ty::Str);
                None
            }
        }
    }

    fn list_opt(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.map.get(key) {
            None => None,
            Some(toml::Value::Array(items)) => {
                let vals: Option<Vec<f64>> = items
                    .iter()
                    .map(|v| match v {
                        toml::Value::Float(x) => Some(*x),
                        toml::Value::Integer(x) => Some(*x as f64),
                        _ => None,
                    })
                    .collect();
                if vals.is_none() {
                    self.mismatch(key, Ty::FloatList);
                }
                vals
            }
            Some(_) => {
                self.mismatch(key, Ty::FloatList);
                None
            }
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.float(key, default);
        if !(v > 0.0 && v.is_finite()) {
            self.flag(key, format!("must be positive, got {v}"));
            return default;
        }
        v
    }
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn requires_scattering(sub: Subcommand, model: Model) -> bool {
    match sub {
        Subcommand::Scatter | Subcommand::NamedThresholds | Subcommand::Sweep => true,
        Subcommand::Evolve => model == Model::Conformal,
        _ => false,
    }
}

/// Parse and validate a configuration for `sub`.
pub fn parse_config(text: &str, sub: Subcommand) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        violations: vec![Violation { key: "<document>".into(), message: e.message().to_string() }],
    })?;
    let mut map = BTreeMap::new();
    flatten("", &table, &mut map);
    let echo = map.iter().map(|(k, v)| (k.clone(), render(v))).collect();
    let known: BTreeSet<&str> = SCHEMA.iter().map(|(k, _)| *k).collect();
    let mut r = Reader { map, violations: Vec::new() };
    let unknown: Vec<String> = r.map.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
    for k in unknown {
        r.flag(&k, "unknown key");
    }

    let seed = r.int_opt("run.seed").map_or(0, |v| v as u64);
    let out = r.string_opt("run.out");

    // model
    let model = match r.string_opt("evolve.model").as_deref() {
        None | Some("conformal") => Model::Conformal,
        Some("physical") => Model::Physical,
        Some(other) => {
            r.flag("evolve.model", format!("expected `physical` or `conformal`, got `{other}`"));
            Model::Conformal
        }
    };
    let d = r.count("model.d", 1, 1);
    let q = r.float("model.q", 4.0);
    let p = r.float("model.p", 4.5);
    let df = d as f64;
    let fallback = ModelParams { d: 1, q: 4.0, p: 4.5, regime: Regime::Variational };
    let scattering = requires_scattering(sub, model);
    let params = if !(1..=3).contains(&d) {
        r.flag("model.d", format!("dimension must be 1, 2 or 3, got {d}"));
        fallback
    } else {
        let upper = 1.0 + 4.0 / df;
        let mut ok = true;
        if !(q > 1.0) {
            r.flag("model.q", format!("must exceed 1, got {q}"));
            ok = false;
        }
        if scattering && !(q > 1.0 + 2.0 / df) {
            let lower = 1.0 + 2.0 / df;
            r.flag("model.q", format!("scattering regime requires q > {lower} strictly (d = {d}), got {q}"));
            ok = false;
        }
        if !(p > q) {
            r.flag("model.p", format!("must exceed q = {q}, got {p}"));
            ok = false;
        }
        if !(p < upper) {
            r.flag("model.p", format!("must be mass-subcritical, p < {upper} (d = {d}), got {p}"));
            ok = false;
        }
        let regime = if scattering { Regime::Scattering } else { Regime::Variational };
        if ok {
            ModelParams::new(d, q, p, regime).unwrap_or(fallback)
        } else {
            fallback
        }
    };

    // coefficients
    let named = r.string_opt("coeffs.named");
    let explicit: Vec<Option<f64>> =
        ["coeffs.alpha", "coeffs.beta", "coeffs.gamma"].iter().map(|k| r.float_opt(k)).collect();
    let coeffs = match (named, explicit.iter().any(|v| v.is_some())) {
        (Some(_), true) => {
            r.flag("coeffs.named", "give either coeffs.named or coeffs.alpha/beta/gamma, not both");
            CoeffSpec::Named(NamedThreshold::Energy)
        }
        (Some(name), false) => {
            let which = match name.as_str() {
                "energy" => Some(NamedThreshold::Energy),
                "standing_wave" => Some(NamedThreshold::StandingWave),
                "star" => Some(NamedThreshold::Star),
                "rho1" => {
                    let a = r.float("coeffs.a", 0.75);
                    Some(NamedThreshold::Rho1 { a })
                }
                "rho2" => {
                    let eps = r.float("coeffs.eps", 0.1);
                    Some(NamedThreshold::Rho2 { eps })
                }
                _ => None,
            };
            match which {
                Some(w) => {
                    if let Err(e) = w.coeffs(&params) {
                        let key = match w {
                            NamedThreshold::Rho1 { .. } => "coeffs.a",
                            NamedThreshold::Rho2 { .. } => "coeffs.eps",
                            _ => "coeffs.named",
                        };
                        r.flag(key, e.to_string());
                    }
                    CoeffSpec::Named(w)
                }
                None => {
                    r.flag(
                        "coeffs.named",
                        format!("unknown threshold `{name}` (energy, standing_wave, star, rho1, rho2)"),
                    );
                    CoeffSpec::Named(NamedThreshold::Energy)
                }
            }
        }
        (None, true) => {
            let mut vals = [0.0; 3];
            for (i, key) in ["coeffs.alpha", "coeffs.beta", "coeffs.gamma"].iter().enumerate() {
                match explicit[i] {
                    Some(v) if v > 0.0 && v.is_finite() => vals[i] = v,
                    Some(v) => r.flag(key, format!("must be positive, got {v}")),
                    None => r.flag(key, "missing; explicit coefficients need all three"),
                }
            }
            match CoeffTriple::new(vals[0], vals[1], vals[2]) {
                Ok(c) => CoeffSpec::Explicit(c),
                Err(_) => CoeffSpec::Named(NamedThreshold::Energy),
            }
        }
        (None, false) => CoeffSpec::Named(NamedThreshold::Energy),
    };

    // grid
    let grid_n = r.count("grid.n", 512, 4);
    if !grid_n.is_power_of_two() {
        r.flag("grid.n", format!("must be a power of two, got {grid_n}"));
    }
    let grid_len = r.positive("grid.L", 64.0);

    // profile
    let amplitude = r.positive("profile.amplitude", 1.0);
    let width = r.positive("profile.width", 1.0);
    let kind = r.string_opt("profile.kind").unwrap_or_else(|| "gaussian".into());
    let profile = match kind.as_str() {
        "gaussian" => ProfileSpec::Gaussian { amplitude, width },
        "sech" => ProfileSpec::Sech { amplitude, width },
        "groundstate" => {
            let rho = r.float_opt("profile.rho");
            let from = r.string_opt("profile.rho_from");
            match (rho, from.as_deref()) {
                (Some(v), None) if v > 0.0 => ProfileSpec::GroundState { rho: Some(v) },
                (Some(v), None) => {
                    r.flag("profile.rho", format!("must be positive, got {v}"));
                    ProfileSpec::GroundState { rho: None }
                }
                (None, Some("energy_threshold")) => ProfileSpec::GroundState { rho: None },
                (None, Some(other)) => {
                    r.flag("profile.rho_from", format!("only `energy_threshold` is supported, got `{other}`"));
                    ProfileSpec::GroundState { rho: None }
                }
                (Some(_), Some(_)) => {
                    r.flag("profile.rho", "give either profile.rho or profile.rho_from, not both");
                    ProfileSpec::GroundState { rho: None }
                }
                (None, None) => {
                    r.flag("profile.rho", "ground-state profile needs profile.rho or profile.rho_from");
                    ProfileSpec::GroundState { rho: None }
                }
            }
        }
        "snapshot" => match r.string_opt("profile.path") {
            Some(path) => ProfileSpec::Snapshot { path },
            None => {
                r.flag("profile.path", "snapshot profile needs a path");
                ProfileSpec::Snapshot { path: String::new() }
            }
        },
        other => {
            r.flag("profile.kind", format!("expected gaussian, sech, groundstate or snapshot, got `{other}`"));
            ProfileSpec::Gaussian { amplitude, width }
        }
    };
    let mass = r.float_opt("profile.mass");
    if let Some(m) = mass {
        if !(m > 0.0 && m.is_finite()) {
            r.flag("profile.mass", format!("must be positive, got {m}"));
        }
    }
    let chirp = r.float("profile.chirp", 0.0);
    let boost = r.float("profile.boost", 0.0);
    let datum = DatumSpec { profile, mass: mass.filter(|m| *m > 0.0), chirp, boost };

    // threshold and minimization
    let tol = r.float("threshold.tol", 0.02);
    if !(tol > 0.0 && tol < 1.0) {
        r.flag("threshold.tol", format!("must lie in (0, 1), got {tol}"));
    }
    let mut threshold = ThresholdOptions::new(params.d, tol.clamp(1e-12, 0.5));
    threshold.lo = r.positive("threshold.lo", threshold.lo);
    threshold.hi = r.positive("threshold.hi", threshold.hi);
    if !(threshold.hi > threshold.lo) {
        r.flag("threshold.hi", format!("must exceed threshold.lo = {}", threshold.lo));
    }
    threshold.expand_decades = r.float("threshold.expand_decades", threshold.expand_decades);
    if !(threshold.expand_decades >= 0.0) {
        r.flag("threshold.expand_decades", "must be >= 0");
    }
    let m = &mut threshold.minimize;
    *m = minimize_options(&mut r, params.d, seed);
    let minimize_rho = r.positive("minimize.rho", 1.0);
    if sub == Subcommand::Groundstate && !r.map.contains_key("minimize.rho") {
        r.flag("minimize.rho", "groundstate needs the mass radius minimize.rho");
    }

    // named thresholds
    let dq = params.delta_q();
    let a_grid = match r.list_opt("named.a_grid") {
        Some(v) => v,
        None => {
            let pts = r.count("named.a_points", 5, 1);
            crate::ground_state::default_a_grid(&params, pts)
        }
    };
    let check_grid = sub == Subcommand::NamedThresholds || r.map.contains_key("named.a_grid");
    if let Some(a) = a_grid.iter().find(|&&a| check_grid && !(a > dq && a < 1.0)) {
        r.flag("named.a_grid", format!("A = {a} outside (δ(q), 1) = ({dq}, 1)"));
    }
    let eps_grid = r.list_opt("named.eps_grid").unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
    if let Some(e) = eps_grid.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
        r.flag("named.eps_grid", format!("ε = {e} outside (0, 0.5)"));
    }

    // evolution
    let mut controls = EvolveControls::default();
    let t_max = match r.float_opt("evolve.t_max") {
        Some(t) => t,
        None => {
            if sub == Subcommand::Evolve {
                r.flag("evolve.t_max", "evolve needs an end clock");
            }
            0.9
        }
    };
    if !(t_max > 0.0) || (model == Model::Conformal && !(t_max < 1.0)) {
        r.flag("evolve.t_max", format!("must be positive (and < 1 for the conformal model), got {t_max}"));
    }
    controls.dt_base = r.positive("evolve.dt", controls.dt_base);
    controls.c_adapt = r.positive("evolve.c_adapt", controls.c_adapt);
    controls.phase_cap = match r.float_opt("evolve.phase_cap") {
        None => controls.phase_cap,
        Some(0.0) => None,
        Some(v) if v > 0.0 => Some(v),
        Some(v) => {
            r.flag("evolve.phase_cap", format!("must be >= 0 (0 disables), got {v}"));
            controls.phase_cap
        }
    };
    controls.cadence = r.count("evolve.cadence", controls.cadence, 1);
    if let Some(a) = r.list_opt("evolve.a_list") {
        if a.is_empty() {
            r.flag("evolve.a_list", "must not be empty");
        } else if let Some(bad) = a.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            r.flag("evolve.a_list", format!("A = {bad} outside (0, 1]"));
        } else {
            controls.a_list = a;
        }
    }
    let eps = r.float("evolve.epsilon", controls.epsilon);
    if !(eps > 0.0 && eps < 1.0) {
        r.flag("evolve.epsilon", format!("must lie in (0, 1), got {eps}"));
    } else {
        controls.epsilon = eps;
    }
    if let Some(s) = r.list_opt("evolve.snapshots") {
        if let Some(bad) = s.iter().find(|&&t| !(t > 0.0 && t <= t_max)) {
            r.flag("evolve.snapshots", format!("snapshot clock {bad} outside (0, t_max]"));
        }
        controls.snapshot_clocks = s;
    }
    controls.halt_on_unsound = r.boolean("evolve.halt_on_unsound", controls.halt_on_unsound);
    controls.max_steps = r.count("evolve.max_steps", controls.max_steps, 1);
    let free_flow = r.boolean("evolve.free_flow", false);
    let envelope_factor = r.positive("evolve.envelope_factor", 10.0);

    // scattering
    let mut scatter = ScatterOptions::default();
    if let Some(pr) = r.list_opt("scatter.probes") {
        if pr.len() < 2 || pr.windows(2).any(|w| !(w[1] > w[0])) || pr.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            r.flag("scatter.probes", "need at least two strictly increasing clocks in (0, 1)");
        } else {
            scatter.probes = pr;
        }
    }
    scatter.tol_rel = r.positive("scatter.tol_rel", scatter.tol_rel);

    // sweep
    let sd = r.count("sweep.d", params.d, 1);
    if !(1..=3).contains(&sd) {
        r.flag("sweep.d", format!("dimension must be 1, 2 or 3, got {sd}"));
    }
    let sdf = sd.clamp(1, 3) as f64;
    let sweep = SweepSpec {
        d: sd.clamp(1, 3),
        q_min: r.float("sweep.q_min", 1.0 + 2.0 / sdf),
        q_max: r.float("sweep.q_max", 1.0 + 4.0 / sdf),
        p_max: r.float("sweep.p_max", 1.0 + 4.0 / sdf),
        q_points: r.count("sweep.q_points", 10, 1),
        p_points: r.count("sweep.p_points", 10, 1),
    };
    if !(sweep.q_min >= 1.0 + 2.0 / sdf
        && sweep.q_min < sweep.q_max
        && sweep.q_max <= sweep.p_max
        && sweep.p_max <= 1.0 + 4.0 / sdf)
    {
        r.flag("sweep.q_min", format!("need 1 + 2/d <= q_min < q_max <= p_max <= 1 + 4/d (d = {sd})"));
    }

    if !r.violations.is_empty() {
        return Err(ConfigError { violations: r.violations });
    }
    Ok(RunConfig {
        subcommand: sub,
        params,
        coeffs,
        grid_n,
        grid_len,
        datum,
        threshold,
        minimize_rho,
        a_grid,
        eps_grid,
        model,
        t_max,
        controls,
        free_flow,
        envelope_factor,
        scatter,
        sweep,
        seed,
        out,
        echo,
    })
}

fn minimize_options(r: &mut Reader, d: usize, seed: u64) -> MinimizeOptions {
    let mut m = MinimizeOptions::for_dim(d.clamp(1, 3));
    m.rng_seed = seed;
    m.max_iter = r.count("minimize.max_iter", m.max_iter, 1);
    m.residual_tol = r.positive("minimize.residual_tol", m.residual_tol);
    m.tol_neg_rel = r.positive("minimize.tol_neg_rel", m.tol_neg_rel);
    m.spread_factor = r.float("minimize.spread_factor", m.spread_factor);
    if !(m.spread_factor > 1.0) {
        r.flag("minimize.spread_factor", format!("must exceed 1, got {}", m.spread_factor));
    }
    if let Some(s) = r.list_opt("minimize.seed_widths") {
        if s.is_empty() || s.iter().any(|w| !(*w > 0.0)) {
            r.flag("minimize.seed_widths", "need at least one positive seed width");
        } else {
            m.seed_widths = s;
        }
    }
    if !r.boolean("minimize.shape_seed", true) {
        m.shape_seed = ShapeSeed::Off;
    }
    if let GridPolicy::Auto { n, box_widths } = m.grid {
        let n = r.count("minimize.n", n, 4);
        if !n.is_power_of_two() {
            r.flag("minimize.n", format!("must be a power of two, got {n}"));
        }
        let box_widths = r.positive("minimize.box_widths", box_widths);
        m.grid = GridPolicy::Auto { n, box_widths };
    }
    m.jitter = r.float("minimize.jitter", 0.0);
    if !(0.0..1.0).contains(&m.jitter) {
        r.flag("minimize.jitter", format!("must lie in [0, 1), got {}", m.jitter));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_EVOLVE: &str = r#"
model.d = 1
model.q = 4.0
model.p = 4.5
grid.n = 512
grid.L = 64.0
profile.kind = "gaussian"
profile.mass = 1.0
evolve.model = "conformal"
evolve.t_max = 0.9
"#;

    #[test]
    fn minimal_evolve_is_valid() {
        let c = parse_config(MINIMAL_EVOLVE, Subcommand::Evolve).unwrap();
        assert_eq!(c.grid_n, 512);
        assert_eq!(c.model, Model::Conformal);
        assert_eq!(c.params.regime, Regime::Scattering);
        assert_eq!(c.echo["grid.L"], "64.0");
    }

    #[test]
    fn tables_and_dotted_keys_agree() {
        let a = parse_config("[model]\nq = 4.0\np = 4.5\n", Subcommand::Threshold).unwrap();
        let b = parse_config("model.q = 4.0\nmodel.p = 4.5\n", Subcommand::Threshold).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn scatter_rejects_q_three_in_one_dimension() {
        let err = parse_config("model.q = 3.0\nmodel.p = 4.0\n", Subcommand::Scatter).unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert_eq!(err.violations[0].key, "model.q");
        assert!(err.violations[0].message.contains("q > 3 strictly"));
        // the same exponents are fine for a variational run
        assert!(parse_config("model.q = 3.0\nmodel.p = 4.0\n", Subcommand::Threshold).is_ok());
    }

    #[test]
    fn all_violations_reported() {
        let text = "grid.n = 100\nbogus.key = 1\nmodel.q = \"four\"\nevolve.cadence = 0\n";
        let err = parse_config(text, Subcommand::Evolve).unwrap_err();
        let keys: Vec<&str> = err.violations.iter().map(|v| v.key.as_str()).collect();
        for k in ["grid.n", "bogus.key", "model.q", "evolve.cadence", "evolve.t_max"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
        let n = err.violations.iter().find(|v| v.key == "grid.n").unwrap();
        assert!(n.message.contains("power of two"));
    }

    #[test]
    fn syntax_error_is_a_violation() {
        let err = parse_config("model.q = = 3", Subcommand::Threshold).unwrap_err();
        assert_eq!(err.violations[0].key, "<document>");
    }

    #[test]
    fn named_coeffs() {
        let c = parse_config("coeffs.named = \"rho1\"\ncoeffs.a = 0.75\n", Subcommand::Threshold).unwrap();
        assert!(matches!(c.coeffs, CoeffSpec::Named(NamedThreshold::Rho1 { a }) if a == 0.75));
        let err = parse_config("coeffs.named = \"rho1\"\ncoeffs.a = 0.3\n", Subcommand::Threshold).unwrap_err();
        assert_eq!(err.violations[0].key, "coeffs.a");
        let err = parse_config("coeffs.alpha = 1.0\n", Subcommand::Threshold).unwrap_err();
        assert_eq!(err.violations.len(), 2);
    }
}
