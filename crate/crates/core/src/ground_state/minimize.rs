//! Descent on the mass sphere `S_ρ = {‖u‖₂ = ρ}` for `E^{α,β,γ}`.
//!
//! Each iteration takes a preconditioned projected-gradient step
//! `u ← ρ (u − s d)/‖u − s d‖` with `P = c₀ + 2α|k|²`, accepts it only if the
//! energy does not increase, and otherwise halves `s`. Fixed points are exact
//! constrained critical points; the residual `‖g − μu‖/‖g‖` bottoms out near
//! the square root of the energy's relative precision.
//!
//! Gaussian seeds alone sit far from the minimizer just above the threshold
//! and drift into spreading there. The shape seed (the maximizer of the
//! threshold quotient, dilated to the best scale) is negative from the start
//! exactly when `ρ` exceeds the threshold.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::shape::{default_shape_grid, energy_dilation, optimal_shape};
use crate::error::{Error, Result};
use crate::functionals::{pohozaev_of, CoeffTriple, EnergyBreakdown, ModelParams};
use crate::spectral::{eval_profile, AnalyticProfile, Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Width grew past the spreading factor without the energy going negative.
    SpreadToZeroEnergy,
    /// Energy below `−tol_neg`.
    ConvergedNegative,
    /// Converged to a critical point with `E >= −tol_neg` (a local, not global, minimizer).
    ConvergedNonNegative,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub enum GridPolicy {
    /// Box of `box_widths` seed widths with `n` points per axis, chosen per ρ.
    Auto {
        n: usize,
        box_widths: f64,
    },
    Fixed(Grid),
}

#[derive(Clone, Debug)]
pub enum ShapeSeed {
    Off,
    /// Compute the quotient maximizer on the default shape grid when the
    /// coefficients allow it (`β > 0`).
    Auto,
    /// Unit-mass profile, any grid of the right dimension.
    Given(Arc<Field>),
}

impl ShapeSeed {
    /// Resolve `Auto` to a concrete profile (or `Off` when not applicable).
    pub fn resolve(&self, params: &ModelParams, coeffs: &CoeffTriple) -> Result<ShapeSeed> {
        match self {
            ShapeSeed::Auto => {
                if !(coeffs.beta > 0.0) {
                    return Ok(ShapeSeed::Off);
                }
                let grid = default_shape_grid(params.d)?;
                match optimal_shape(params, &grid, 20_000, 1e-9) {
                    Ok(s) => Ok(ShapeSeed::Given(Arc::new(s.field))),
                    Err(Error::Domain(_)) => Ok(ShapeSeed::Off),
                    Err(e) => Err(e),
                }
            }
            other => Ok(other.clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop when `‖g − μu‖ / ‖g‖` drops below this.
    pub residual_tol: f64,
    /// `tol_neg = tol_neg_rel · ρ²`.
    pub tol_neg_rel: f64,
    pub spread_factor: f64,
    /// Seed widths as multiples of the Gaussian-ansatz width.
    pub seed_widths: Vec<f64>,
    /// Extra seed shaped like the maximizer of the threshold quotient.
    pub shape_seed: ShapeSeed,
    pub grid: GridPolicy,
    pub initial_step: f64,
    /// Relative amplitude of multiplicative seed noise; 0 disables.
    pub jitter: f64,
    pub rng_seed: u64,
    /// Boundary-shell mass fraction above which a run is unsound.
    pub truncation_tol: f64,
    /// Spectral energy fraction beyond 2/3 of Nyquist above which a run is unsound.
    pub resolution_tol: f64,
}

impl MinimizeOptions {
    pub fn for_dim(d: usize) -> Self {
        let grid = match d {
            1 => GridPolicy::Auto { n: 2048, box_widths: 112.0 },
            2 => GridPolicy::Auto { n: 256, box_widths: 48.0 },
            _ => GridPolicy::Auto { n: 64, box_widths: 32.0 },
        };
        MinimizeOptions {
            max_iter: 20_000,
            residual_tol: 1e-5,
            tol_neg_rel: 1e-6,
            spread_factor: 4.0,
            seed_widths: vec![0.5, 1.0, 2.0],
            shape_seed: ShapeSeed::Auto,
            grid,
            initial_step: 0.5,
            jitter: 0.0,
            rng_seed: 0,
            truncation_tol: 1e-6,
            resolution_tol: 1e-10,
        }
    }
}

/// One descent from one seed.
#[derive(Clone, Debug, Serialize)]
pub struct SeedRun {
    pub seed_width: f64,
    #[serde(skip)]
    pub field: Field,
    pub breakdown: EnergyBreakdown,
    pub initial_energy: f64,
    pub residual: f64,
    pub multiplier: f64,
    pub pohozaev: f64,
    pub iterations: usize,
    pub classification: Classification,
    pub width_ratio: f64,
    pub boundary_fraction: f64,
    pub spectral_tail: f64,
    pub sound: bool,
}

impl SeedRun {
    pub fn energy(&self) -> f64 {
        self.breakdown.total
    }

    /// `|G| / (αK + βN_q + γN_p)`
    pub fn pohozaev_relative(&self, coeffs: &CoeffTriple) -> f64 {
        self.pohozaev.abs() / self.breakdown.magnitude(coeffs)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimizeResult {
    pub rho: f64,
    pub coeffs: CoeffTriple,
    pub tol_neg: f64,
    pub classification: Classification,
    /// Best final energy over seeds.
    pub energy: f64,
    /// Estimate of the infimum: `min(energy, 0)`.
    pub i_est: f64,
    pub residual: f64,
    pub iterations: usize,
    pub sound: bool,
    /// Index into `seeds` of the run that decided the classification.
    pub deciding_seed: usize,
    pub seeds: Vec<SeedRun>,
}

impl MinimizeResult {
    pub fn field(&self) -> &Field {
        &self.seeds[self.deciding_seed].field
    }

    pub fn deciding(&self) -> &SeedRun {
        &self.seeds[self.deciding_seed]
    }

    pub fn is_negative(&self) -> bool {
        self.classification == Classification::ConvergedNegative
    }

    /// Zero-energy side of the dichotomy: every seed spread or stopped at a
    /// nonnegative critical point.
    pub fn is_zero_side(&self) -> bool {
        matches!(self.classification, Classification::SpreadToZeroEnergy | Classification::ConvergedNonNegative)
    }
}

/// Gaussian ansatz `a·exp(−|x|²/(2w²))` at mass `ρ²`: `(K, N_{q+1}, N_{p+1})`.
fn ansatz_terms(d: usize, q: f64, p: f64, rho: f64, w: f64) -> (f64, f64, f64) {
    let df = d as f64;
    let m = rho * rho;
    let k = m * df / (2.0 * w * w);
    let n = |s: f64| {
        rho.powf(s)
            * (std::f64::consts::PI * w * w).powf(-df * s / 4.0)
            * (2.0 * std::f64::consts::PI * w * w / s).powf(df / 2.0)
    };
    (k, n(q + 1.0), n(p + 1.0))
}

/// Width of the Gaussian ansatz used to size seeds and grids: the energy
/// minimizer over widths when its energy is negative, otherwise the width at
/// which the defocusing and focusing terms balance.
pub fn ansatz_width(params: &ModelParams, coeffs: &CoeffTriple, rho: f64) -> f64 {
    let (d, q, p) = (params.d, params.q, params.p);
    let e = |w: f64| {
        let (k, nq, np) = ansatz_terms(d, q, p, rho, w);
        coeffs.alpha * k + coeffs.beta * nq - coeffs.gamma * np
    };
    let mut best = (f64::INFINITY, 1.0);
    for i in 0..=3200 {
        let w = 10f64.powf(-8.0 + 16.0 * i as f64 / 3200.0);
        let v = e(w);
        if v < best.0 {
            best = (v, w);
        }
    }
    if best.0 < 0.0 {
        return best.1;
    }
    if coeffs.beta > 0.0 {
        // β N_q(w) = γ N_p(w) with N ∝ w^{−d(s−2)/2}
        let (_, nq1, np1) = ansatz_terms(d, q, p, rho, 1.0);
        let expo = d as f64 * (p - q) / 2.0;
        return (coeffs.gamma * np1 / (coeffs.beta * nq1)).powf(1.0 / expo);
    }
    1.0
}

fn grid_for(params: &ModelParams, width: f64, policy: &GridPolicy) -> Result<Grid> {
    match policy {
        GridPolicy::Fixed(g) => {
            if g.dim() != params.d {
                return Err(Error::domain("fixed minimization grid has the wrong dimension"));
            }
            Ok(g.clone())
        }
        GridPolicy::Auto { n, box_widths } => Grid::new(params.d, *n, box_widths * width),
    }
}

struct Workspace<'a> {
    grid: &'a Grid,
    params: &'a ModelParams,
    coeffs: &'a CoeffTriple,
    rho: f64,
}

impl Workspace<'_> {
    fn inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>() * self.grid.cell_volume()
    }

    fn breakdown(&self, u: &Field) -> EnergyBreakdown {
        EnergyBreakdown::measure(u, self.params).with_coeffs(self.coeffs)
    }

    /// L² gradient `−2αΔu + (q+1)β|u|^{q−1}u − (p+1)γ|u|^{p−1}u`.
    fn gradient(&self, u: &Field) -> Vec<Complex64> {
        let c = self.coeffs;
        let (q, p) = (self.params.q, self.params.p);
        let mut lap = u.spectrum();
        for (v, k2) in lap.iter_mut().zip(self.grid.k2()) {
            *v *= 2.0 * c.alpha * k2;
        }
        self.grid.inverse(&mut lap);
        lap.iter()
            .zip(u.values())
            .map(|(l, v)| {
                let a = v.norm();
                l + v * ((q + 1.0) * c.beta * a.powf(q - 1.0) - (p + 1.0) * c.gamma * a.powf(p - 1.0))
            })
            .collect()
    }

    fn precondition(&self, v: &[Complex64], c0: f64) -> Vec<Complex64> {
        let mut s = v.to_vec();
        self.grid.forward(&mut s);
        for (x, k2) in s.iter_mut().zip(self.grid.k2()) {
            *x /= c0 + 2.0 * self.coeffs.alpha * k2;
        }
        self.grid.inverse(&mut s);
        s
    }

    fn normalize(&self, vals: Vec<Complex64>) -> Result<Field> {
        let f = Field::new(self.grid.clone(), vals).map_err(|_| Error::Minimize("non-finite iterate".into()))?;
        let m = f.mass();
        if !(m > 0.0) {
            return Err(Error::Minimize("iterate collapsed to zero".into()));
        }
        Ok(f.scaled(self.rho / m.sqrt()))
    }
}

fn descend(ws: &Workspace, seed: Field, seed_width: f64, opts: &MinimizeOptions) -> Result<SeedRun> {
    let tol_neg = opts.tol_neg_rel * ws.rho * ws.rho;
    let mut u = ws.normalize(seed.into_values())?;
    let w0 = u.rms_width();
    let mut b = ws.breakdown(&u);
    let initial_energy = b.total;
    let mut step = opts.initial_step;
    let mut residual = f64::INFINITY;
    let mut mu = 0.0;
    let mut iterations = 0;
    let mut classification = Classification::BudgetExhausted;
    while iterations < opts.max_iter {
        let g = ws.gradient(&u);
        let gg = ws.inner(&g, &g).sqrt();
        mu = ws.inner(u.values(), &g) / (ws.rho * ws.rho);
        let r: Vec<Complex64> = g.iter().zip(u.values()).map(|(gi, ui)| gi - ui * mu).collect();
        residual = if gg > 0.0 { ws.inner(&r, &r).sqrt() / gg } else { 0.0 };
        if residual < opts.residual_tol {
            classification = Classification::ConvergedNonNegative;
            break;
        }
        if u.rms_width() >= opts.spread_factor * w0 && b.total >= -tol_neg {
            classification = Classification::SpreadToZeroEnergy;
            break;
        }
        let c0 = mu.abs().max(2.0 * ws.coeffs.alpha * b.kinetic / b.mass);
        let pg = ws.precondition(&g, c0);
        let pu = ws.precondition(u.values(), c0);
        let lam = ws.inner(u.values(), &pg) / ws.inner(u.values(), &pu);
        let dir: Vec<Complex64> = pg.iter().zip(&pu).map(|(a, b)| a - b * lam).collect();
        let accept_tol = 1e-12 * b.magnitude(ws.coeffs);
        let mut accepted = false;
        while step > 1e-14 {
            let trial: Vec<Complex64> = u.values().iter().zip(&dir).map(|(a, d)| a - d * step).collect();
            let cand = ws.normalize(trial)?;
            let cb = ws.breakdown(&cand);
            if !cb.total.is_finite() {
                return Err(Error::Minimize("energy became non-finite".into()));
            }
            if cb.total <= b.total + accept_tol {
                u = cand;
                b = cb;
                step = (step * 1.5).min(1e3);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // no descent direction left at working precision
            classification =
                if residual < 1e-4 { Classification::ConvergedNonNegative } else { Classification::BudgetExhausted };
            break;
        }
    }
    if b.total < -tol_neg && classification != Classification::BudgetExhausted {
        classification = Classification::ConvergedNegative;
    }
    let boundary_fraction = u.boundary_mass_fraction();
    let spectral_tail = u.spectral_tail_fraction(2.0 / 3.0);
    let sound = classification == Classification::SpreadToZeroEnergy
        || (boundary_fraction <= opts.truncation_tol && spectral_tail <= opts.resolution_tol);
    Ok(SeedRun {
        seed_width,
        breakdown: b,
        initial_energy,
        residual,
        multiplier: mu,
        pohozaev: pohozaev_of(&b, ws.params, ws.coeffs),
        iterations,
        classification,
        width_ratio: u.rms_width() / w0,
        boundary_fraction,
        spectral_tail,
        sound,
        field: u,
    })
}

/// `ρλ^{d/2} S(λx)` with `λ` from [`energy_dilation`].
fn shape_profile(
    shape: &Field,
    params: &ModelParams,
    coeffs: &CoeffTriple,
    rho: f64,
) -> Result<(AnalyticProfile, f64)> {
    if shape.grid().dim() != params.d {
        return Err(Error::domain("shape seed has the wrong dimension"));
    }
    let unit = shape.scaled(1.0 / shape.mass().sqrt());
    let b = EnergyBreakdown::measure(&unit, params);
    let at_rho = EnergyBreakdown {
        kinetic: b.kinetic * rho * rho,
        nq: b.nq * rho.powf(params.q + 1.0),
        np: b.np * rho.powf(params.p + 1.0),
        mass: rho * rho,
        total: 0.0,
    };
    let lam = energy_dilation(&at_rho, coeffs, params);
    let mut prof = AnalyticProfile::snapshot(unit);
    prof.amplitude = rho * lam.powf(params.d as f64 / 2.0);
    prof.width = 1.0 / lam;
    Ok((prof, lam))
}

fn seed_field(grid: &Grid, width: f64, rho: f64, opts: &MinimizeOptions, salt: u64) -> Result<Field> {
    let amp = rho / AnalyticProfile::gaussian_mass(grid.dim(), 1.0, width).sqrt();
    let (f, _) = eval_profile(grid, &AnalyticProfile::gaussian(amp, width))?;
    if opts.jitter == 0.0 {
        return Ok(f);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let vals = f.into_values().into_iter().map(|v| v * (1.0 + opts.jitter * rng.gen_range(-1.0..1.0))).collect();
    Field::new(grid.clone(), vals)
}

/// Multi-seed minimization of `E^{α,β,γ}` on `S_ρ`. The result is negative
/// if any seed reaches `E < −tol_neg` at a converged point.
pub fn minimize_on_sphere(
    params: &ModelParams,
    coeffs: &CoeffTriple,
    rho: f64,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("mass radius ρ = {rho} must be positive")));
    }
    if opts.seed_widths.is_empty() {
        return Err(Error::domain("at least one seed width is required"));
    }
    let shape = match opts.shape_seed.resolve(params, coeffs)? {
        ShapeSeed::Given(f) => Some(shape_profile(&f, params, coeffs, rho)?),
        _ => None,
    };
    // Gaussian-equivalent width of the shape seed sets the scale when present
    let w = match &shape {
        Some((prof, _)) => prof.characteristic_width() * std::f64::consts::SQRT_2,
        None => ansatz_width(params, coeffs, rho),
    };
    let grid = grid_for(params, w, &opts.grid)?;
    let ws = Workspace { grid: &grid, params, coeffs, rho };
    let mut seeds = Vec::with_capacity(opts.seed_widths.len() + 1);
    if let Some((prof, _)) = &shape {
        let (seed, _) = eval_profile(&grid, prof)?;
        seeds.push(descend(&ws, seed, w, opts)?);
    }
    for (i, f) in opts.seed_widths.iter().enumerate() {
        let seed = seed_field(&grid, f * w, rho, opts, i as u64)?;
        seeds.push(descend(&ws, seed, f * w, opts)?);
    }
    let tol_neg = opts.tol_neg_rel * rho * rho;
    let lowest = (0..seeds.len()).min_by(|&a, &b| seeds[a].energy().total_cmp(&seeds[b].energy())).unwrap();
    let any_neg = seeds.iter().any(|s| s.classification == Classification::ConvergedNegative);
    let all_zero = seeds
        .iter()
        .all(|s| matches!(s.classification, Classification::SpreadToZeroEnergy | Classification::ConvergedNonNegative));
    let (classification, deciding) = if any_neg {
        let idx = (0..seeds.len())
            .filter(|&i| seeds[i].classification == Classification::ConvergedNegative)
            .min_by(|&a, &b| seeds[a].energy().total_cmp(&seeds[b].energy()))
            .unwrap();
        (Classification::ConvergedNegative, idx)
    } else if all_zero {
        let idx = seeds.iter().position(|s| s.classification == Classification::SpreadToZeroEnergy).unwrap_or(lowest);
        (seeds[idx].classification, idx)
    } else {
        let idx = seeds.iter().position(|s| s.classification == Classification::BudgetExhausted).unwrap_or(lowest);
        (Classification::BudgetExhausted, idx)
    };
    let energy = seeds[lowest].energy();
    let sound = match classification {
        Classification::ConvergedNegative => seeds[deciding].sound,
        _ => seeds.iter().all(|s| s.sound),
    };
    Ok(MinimizeResult {
        rho,
        coeffs: *coeffs,
        tol_neg,
        classification,
        energy,
        i_est: energy.min(0.0),
        residual: seeds[deciding].residual,
        iterations: seeds.iter().map(|s| s.iterations).sum(),
        sound,
        deciding_seed: deciding,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, CoeffTriple) {
        let p = ModelParams::scattering(1, 4.0, 4.5).unwrap();
        (p, CoeffTriple::energy(&p))
    }

    #[test]
    fn ansatz_terms_match_profile() {
        let g = Grid::new(1, 1024, 40.0).unwrap();
        let (rho, w) = (1.3, 1.7);
        let amp = rho / AnalyticProfile::gaussian_mass(1, 1.0, w).sqrt();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(amp, w)).unwrap();
        let (k, nq, np) = ansatz_terms(1, 4.0, 4.5, rho, w);
        assert!((u.mass() - rho * rho).abs() < 1e-10);
        assert!((crate::spectral::gradient_sq_norm(&u) - k).abs() < 1e-10);
        assert!((u.lp_power(5.0) - nq).abs() < 1e-10);
        assert!((u.lp_power(5.5) - np).abs() < 1e-10);
    }

    #[test]
    fn small_mass_spreads() {
        let (p, c) = setup();
        let r = minimize_on_sphere(&p, &c, 0.2, &MinimizeOptions::for_dim(1)).unwrap();
        assert_eq!(r.classification, Classification::SpreadToZeroEnergy);
        assert!(r.i_est <= 0.0 && r.i_est >= -r.tol_neg);
        for s in &r.seeds {
            assert!(s.energy() <= s.initial_energy + 1e-12 * s.initial_energy.abs());
            assert!((s.field.mass() - 0.04).abs() < 1e-10 * 0.04);
        }
    }

    #[test]
    fn large_mass_converges_negative() {
        let (p, c) = setup();
        let r = minimize_on_sphere(&p, &c, 4.0, &MinimizeOptions::for_dim(1)).unwrap();
        assert_eq!(r.classification, Classification::ConvergedNegative);
        assert!(r.sound);
        let s = r.deciding();
        assert!(s.residual < 1e-5);
        assert!(s.pohozaev_relative(&c) < 1e-4);
        assert!((s.field.mass() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_rho() {
        let (p, c) = setup();
        assert!(minimize_on_sphere(&p, &c, 0.0, &MinimizeOptions::for_dim(1)).is_err());
    }
}
