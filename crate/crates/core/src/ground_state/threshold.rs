use rayon::prelude::*;
use serde::Serialize;

use super::closed_form::lambda_reduction;
use super::minimize::{minimize_on_sphere, Classification, GridPolicy, MinimizeOptions, MinimizeResult};
use crate::error::{Error, Result};
use crate::functionals::{CoeffTriple, ModelParams};

#[derive(Clone, Debug)]
pub struct ThresholdOptions {
    /// Final bracket width relative to the estimate.
    pub bracket_tol: f64,
    pub lo: f64,
    pub hi: f64,
    /// Auto-expansion range on each side, in decades.
    pub expand_decades: f64,
    pub minimize: MinimizeOptions,
}

impl ThresholdOptions {
    pub fn new(d: usize, bracket_tol: f64) -> Self {
        ThresholdOptions { bracket_tol, lo: 0.05, hi: 5.0, expand_decades: 2.0, minimize: MinimizeOptions::for_dim(d) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeClass {
    Zero,
    Negative,
}

/// One row of the bisection probe table.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeRecord {
    pub rho: f64,
    pub class: Option<ProbeClass>,
    pub classification: Classification,
    pub energy: f64,
    pub i_est: f64,
    pub residual: f64,
    pub iterations: usize,
    pub sound: bool,
    pub retried: bool,
    pub seed_classes: Vec<Classification>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdResult {
    pub coeffs: CoeffTriple,
    pub lambda: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub rho0_est: f64,
    pub bracket_tol: f64,
    pub tol_neg_rel: f64,
    pub probes: Vec<ProbeRecord>,
    #[serde(skip)]
    pub lo_result: MinimizeResult,
    #[serde(skip)]
    pub hi_result: MinimizeResult,
}

impl ThresholdResult {
    pub fn width(&self) -> f64 {
        self.rho_hi - self.rho_lo
    }
}

fn refine(opts: &MinimizeOptions) -> MinimizeOptions {
    let mut o = opts.clone();
    o.max_iter *= 4;
    o.grid = match &opts.grid {
        GridPolicy::Auto { n, box_widths } => GridPolicy::Auto { n: n * 2, box_widths: box_widths * 1.5 },
        GridPolicy::Fixed(g) => GridPolicy::Fixed(g.clone()),
    };
    o
}

fn classify(result: &MinimizeResult) -> Option<ProbeClass> {
    if !result.sound {
        return None;
    }
    if result.is_negative() {
        Some(ProbeClass::Negative)
    } else if result.is_zero_side() {
        Some(ProbeClass::Zero)
    } else {
        None
    }
}

/// Probe with one retry on a refined grid and larger budget when the first
/// attempt is unsound or undecided.
fn probe(
    params: &ModelParams,
    coeffs: &CoeffTriple,
    rho: f64,
    opts: &MinimizeOptions,
) -> Result<(ProbeRecord, MinimizeResult)> {
    let mut res = minimize_on_sphere(params, coeffs, rho, opts)?;
    let mut retried = false;
    if classify(&res).is_none() {
        res = minimize_on_sphere(params, coeffs, rho, &refine(opts))?;
        retried = true;
    }
    let rec = ProbeRecord {
        rho,
        class: classify(&res),
        classification: res.classification,
        energy: res.energy,
        i_est: res.i_est,
        residual: res.residual,
        iterations: res.iterations,
        sound: res.sound,
        retried,
        seed_classes: res.seeds.iter().map(|s| s.classification).collect(),
    };
    Ok((rec, res))
}

fn undecided(rho: f64, probes: Vec<ProbeRecord>) -> Error {
    Error::Bracket { reason: format!("probe at ρ = {rho} could not be classified soundly"), probes }
}

/// Bisection for `ρ₀(α,β,γ)`: the zero side is `I_{ρ²} = 0`, the negative
/// side `I_{ρ²} < 0`.
pub fn threshold_mass(params: &ModelParams, coeffs: &CoeffTriple, opts: &ThresholdOptions) -> Result<ThresholdResult> {
    if !(opts.bracket_tol > 0.0) || !(opts.lo > 0.0 && opts.hi > opts.lo) {
        return Err(Error::domain("threshold needs bracket_tol > 0 and 0 < lo < hi"));
    }
    let mut opts = opts.clone();
    opts.minimize.shape_seed = opts.minimize.shape_seed.resolve(params, coeffs)?;
    let opts = &opts;
    let mut probes = Vec::new();
    let step = 10f64.sqrt();
    let max_steps = (2.0 * opts.expand_decades).round() as usize;

    let (mut lo, mut hi) = (opts.lo, opts.hi);
    let (rec, mut lo_res) = probe(params, coeffs, lo, &opts.minimize)?;
    let mut lo_class = rec.class;
    probes.push(rec);
    let mut n = 0;
    while lo_class != Some(ProbeClass::Zero) {
        if n == max_steps || lo_class.is_none() {
            let reason = format!("no zero-energy probe found down to ρ = {lo}");
            return Err(Error::Bracket { reason, probes });
        }
        lo /= step;
        n += 1;
        let (rec, res) = probe(params, coeffs, lo, &opts.minimize)?;
        lo_class = rec.class;
        lo_res = res;
        probes.push(rec);
    }
    let (rec, mut hi_res) = probe(params, coeffs, hi, &opts.minimize)?;
    let mut hi_class = rec.class;
    probes.push(rec);
    n = 0;
    while hi_class != Some(ProbeClass::Negative) {
        if n == max_steps || hi_class.is_none() {
            let reason = format!("no negative-energy probe found up to ρ = {hi}");
            return Err(Error::Bracket { reason, probes });
        }
        hi *= step;
        n += 1;
        let (rec, res) = probe(params, coeffs, hi, &opts.minimize)?;
        hi_class = rec.class;
        hi_res = res;
        probes.push(rec);
    }

    while hi - lo > opts.bracket_tol * 0.5 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        let (rec, res) = probe(params, coeffs, mid, &opts.minimize)?;
        let class = rec.class;
        probes.push(rec);
        match class {
            Some(ProbeClass::Zero) => {
                lo = mid;
                lo_res = res;
            }
            Some(ProbeClass::Negative) => {
                hi = mid;
                hi_res = res;
            }
            None => return Err(undecided(mid, probes)),
        }
    }
    Ok(ThresholdResult {
        coeffs: *coeffs,
        lambda: lambda_reduction(coeffs, params),
        rho_lo: lo,
        rho_hi: hi,
        rho0_est: 0.5 * (lo + hi),
        bracket_tol: opts.bracket_tol,
        tol_neg_rel: opts.minimize.tol_neg_rel,
        probes,
        lo_result: lo_res,
        hi_result: hi_res,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamedThreshold {
    Energy,
    StandingWave,
    Star,
    Rho1 { a: f64 },
    Rho2 { eps: f64 },
}

impl NamedThreshold {
    pub fn coeffs(&self, params: &ModelParams) -> Result<CoeffTriple> {
        match *self {
            NamedThreshold::Energy => Ok(CoeffTriple::energy(params)),
            NamedThreshold::StandingWave => Ok(CoeffTriple::standing_wave(params)),
            NamedThreshold::Star => CoeffTriple::scattering_mass(params),
            NamedThreshold::Rho1 { a } => CoeffTriple::rho1(params, a),
            NamedThreshold::Rho2 { eps } => CoeffTriple::rho2(params, eps),
        }
    }

    pub fn label(&self) -> String {
        match self {
            NamedThreshold::Energy => "rho_E".into(),
            NamedThreshold::StandingWave => "rho_SW".into(),
            NamedThreshold::Star => "rho_star".into(),
            NamedThreshold::Rho1 { a } => format!("rho1(A={a})"),
            NamedThreshold::Rho2 { eps } => format!("rho2(eps={eps})"),
        }
    }
}

pub struct NamedThresholds {
    pub entries: Vec<(NamedThreshold, Result<ThresholdResult>)>,
}

impl NamedThresholds {
    pub fn get(&self, which: NamedThreshold) -> Option<&ThresholdResult> {
        self.entries.iter().find(|(n, _)| *n == which).and_then(|(_, r)| r.as_ref().ok())
    }
}

pub fn default_a_grid(params: &ModelParams, points: usize) -> Vec<f64> {
    let dq = params.delta_q();
    (0..points).map(|i| dq + (1.0 - dq) * (i as f64 + 0.5) / points as f64).collect()
}

pub const DEFAULT_EPS_GRID: [f64; 5] = [0.4, 0.3, 0.2, 0.1, 0.05];

/// All named thresholds, computed in parallel and returned in a fixed order:
/// energy, standing wave, star, ρ₁ over `a_grid`, ρ₂ over `eps_grid`.
pub fn named_thresholds(
    params: &ModelParams,
    a_grid: &[f64],
    eps_grid: &[f64],
    opts: &ThresholdOptions,
) -> Result<NamedThresholds> {
    if !params.is_scattering_admissible() {
        return Err(Error::domain("named thresholds need the scattering regime q > 1 + 2/d"));
    }
    let dq = params.delta_q();
    if let Some(a) = a_grid.iter().find(|&&a| !(a > dq && a < 1.0)) {
        return Err(Error::domain(format!("A = {a} outside (δ(q), 1)")));
    }
    if let Some(e) = eps_grid.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
        return Err(Error::domain(format!("ε = {e} outside (0, 0.5)")));
    }
    let mut opts = opts.clone();
    opts.minimize.shape_seed = opts.minimize.shape_seed.resolve(params, &CoeffTriple::energy(params))?;
    let opts = &opts;
    let mut names = vec![NamedThreshold::Energy, NamedThreshold::StandingWave, NamedThreshold::Star];
    names.extend(a_grid.iter().map(|&a| NamedThreshold::Rho1 { a }));
    names.extend(eps_grid.iter().map(|&eps| NamedThreshold::Rho2 { eps }));
    let entries =
        names.par_iter().map(|n| (*n, n.coeffs(params).and_then(|c| threshold_mass(params, &c, opts)))).collect();
    Ok(NamedThresholds { entries })
}
