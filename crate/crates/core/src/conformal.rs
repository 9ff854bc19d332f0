//! Pseudo-conformal change of variables, the `J` operator and the L²
//! scattering detector.
//!
//! With `s = 1 + t = 1/(1 − τ)` the transform reads
//! `φ(τ, ξ) = s^{d/2} ψ(t, sξ) e^{−i s|ξ|²/4}`. Both directions demodulate or
//! remodulate a chirp on the native grid and resample the smooth remainder
//! by trigonometric interpolation.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{Model, Trajectory};
use crate::functionals::ModelParams;
use crate::spectral::interp::sample_tensor;
use crate::spectral::{gradient_sq_norm, sobolev_norm, weighted_l2, Field};

/// Spectral energy fraction beyond the representable band that still counts
/// as alias-free.
pub const ALIAS_TOL: f64 = 1e-10;

pub fn time_map(t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("physical time {t} must be finite and >= 0")));
    }
    Ok(t / (1.0 + t))
}

pub fn inverse_time_map(tau: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::domain(format!("conformal time {tau} must lie in [0, 1)")));
    }
    Ok(tau / (1.0 - tau))
}

#[derive(Clone, Debug)]
pub struct ConformalPair {
    pub psi: Field,
    pub t: f64,
    pub phi: Field,
    pub tau: f64,
}

impl ConformalPair {
    /// `1 + t`
    pub fn dilation(&self) -> f64 {
        1.0 + self.t
    }
}

fn dilated_axes(field: &Field, factor: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = field.grid().axis().iter().map(|x| x * factor).collect();
    vec![axis; field.grid().dim()]
}

/// Max-axis wavenumber below which all but `tol` of the spectral energy lives.
fn bandwidth(field: &Field, tol: f64) -> f64 {
    let g = field.grid();
    let ks = g.wavenumbers();
    let d = g.dim();
    let mut modes: Vec<(f64, f64)> = field
        .spectrum()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let idx = g.index(i);
            let k = idx[..d].iter().map(|&j| ks[j].abs()).fold(0.0, f64::max);
            (k, v.norm_sqr())
        })
        .collect();
    let total: f64 = modes.iter().map(|m| m.1).sum();
    if total == 0.0 {
        return 0.0;
    }
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tail = 0.0;
    for (k, w) in modes {
        tail += w;
        if tail > tol * total {
            return k;
        }
    }
    0.0
}

/// `ψ(t) ↦ φ(τ)` on the same grid.
pub fn to_conformal(psi: &Field, t: f64) -> Result<ConformalPair> {
    let tau = time_map(t)?;
    let s = 1.0 + t;
    let d = psi.grid().dim() as i32;
    let chi = psi.chirped(-1.0 / (4.0 * s));
    let phi = if t == 0.0 {
        chi
    } else {
        let tail = chi.spectral_tail_fraction(1.0 / s);
        if tail > ALIAS_TOL {
            return Err(Error::Alias { factor: s, tail });
        }
        let vals = sample_tensor(&chi, &dilated_axes(&chi, s));
        Field::new(psi.grid().clone(), vals)?.scaled(s.powf(d as f64 / 2.0))
    };
    Ok(ConformalPair { psi: psi.clone(), t, phi, tau })
}

/// `φ(τ) ↦ ψ(t)` on the same grid.
pub fn from_conformal(phi: &Field, tau: f64) -> Result<ConformalPair> {
    let t = inverse_time_map(tau)?;
    let s = 1.0 + t;
    let g = phi.grid();
    let d = g.dim() as f64;
    let psi = if t == 0.0 {
        phi.chirped(0.25)
    } else {
        // the remodulated field has local wavenumber up to (|x|/2 + k_φ)/s
        let kb = bandwidth(phi, ALIAS_TOL);
        let reach = 2.0 * (s * g.nyquist() - kb);
        let env = Field::new(g.clone(), sample_tensor(phi, &dilated_axes(phi, 1.0 / s)))?;
        let total = env.mass();
        let outside: f64 = env
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| g.point(*i)[..g.dim()].iter().any(|x| x.abs() > reach))
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            * g.cell_volume();
        let tail = if total > 0.0 { outside / total } else { 0.0 };
        if reach <= 0.0 || tail > ALIAS_TOL {
            return Err(Error::Alias { factor: s, tail: if reach <= 0.0 { 1.0 } else { tail } });
        }
        env.scaled(s.powf(-d / 2.0)).chirped(1.0 / (4.0 * s))
    };
    Ok(ConformalPair { psi, t, phi: phi.clone(), tau })
}

/// `e^{−it|k|²}` applied exactly; `t` may be negative.
pub fn free_propagate(field: &Field, t: f64) -> Field {
    if t == 0.0 {
        return field.clone();
    }
    let g = field.grid();
    let mut s = field.spectrum();
    for (v, k2) in s.iter_mut().zip(g.k2()) {
        *v *= Complex64::from_polar(1.0, -k2 * t);
    }
    g.inverse(&mut s);
    Field::new(g.clone(), s).expect("unit-modulus multiplier keeps values finite")
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct JNorm {
    pub value: f64,
    /// Boundary shell carries more than the truncation tolerance, so the
    /// `x/2` weight sees the box edge.
    pub truncated: bool,
}

pub const TRUNCATION_TOL: f64 = 1e-6;

/// `‖(x/2)ψ + i(1+t)∇ψ‖₂`.
pub fn j_norm(psi: &Field, t: f64) -> Result<JNorm> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("physical time {t} must be finite and >= 0")));
    }
    let g = psi.grid();
    let s = 1.0 + t;
    let mut sum = 0.0;
    for axis in 0..g.dim() {
        let grad = psi.derivative(axis);
        for (i, (v, dv)) in psi.values().iter().zip(&grad).enumerate() {
            let x = g.point(i)[axis];
            let w = v * (0.5 * x) + Complex64::new(0.0, s) * dv;
            sum += w.norm_sqr();
        }
    }
    Ok(JNorm { value: (sum * g.cell_volume()).sqrt(), truncated: psi.boundary_mass_fraction() > TRUNCATION_TOL })
}

#[derive(Clone, Debug, Serialize)]
pub struct NormIdentityReport {
    pub t: f64,
    pub tau: f64,
    /// `|‖φ‖₂ − ‖ψ‖₂| / ‖ψ‖₂`
    pub l2: f64,
    /// `(r, relative error of ‖φ‖_r^r = (1+t)^{−d+dr/2}‖ψ‖_r^r)`
    pub lr: Vec<(f64, f64)>,
    /// `‖|ξ|φ‖₂ = ‖|x|ψ‖₂/(1+t)`
    pub variance: f64,
    /// `‖∇φ‖₂ = ‖J(1+t)ψ‖₂`
    pub gradient: f64,
    pub truncated: bool,
}

impl NormIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.lr.iter().map(|x| x.1).fold(self.l2.max(self.variance).max(self.gradient), f64::max)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

pub fn verify_norm_identities(pair: &ConformalPair, r_list: &[f64]) -> Result<NormIdentityReport> {
    if let Some(r) = r_list.iter().find(|&&r| !(r >= 1.0)) {
        return Err(Error::domain(format!("L^r identity needs r >= 1, got {r}")));
    }
    let s = pair.dilation();
    let d = pair.psi.grid().dim() as f64;
    let j = j_norm(&pair.psi, pair.t)?;
    let lr = r_list
        .iter()
        .map(|&r| (r, rel(pair.phi.lp_power(r), s.powf(-d + d * r / 2.0) * pair.psi.lp_power(r))))
        .collect();
    Ok(NormIdentityReport {
        t: pair.t,
        tau: pair.tau,
        l2: rel(pair.phi.mass().sqrt(), pair.psi.mass().sqrt()),
        lr,
        variance: rel(weighted_l2(&pair.phi), weighted_l2(&pair.psi) / s),
        gradient: rel(gradient_sq_norm(&pair.phi).sqrt(), j.value),
        truncated: j.truncated || pair.phi.boundary_mass_fraction() > TRUNCATION_TOL,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ScatteringConsistent,
    Inconclusive,
    Violated,
}

#[derive(Clone, Debug)]
pub struct ScatterOptions {
    pub probes: Vec<f64>,
    /// Finest residual must be below `tol_rel · ‖φ₀‖₂`.
    pub tol_rel: f64,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        ScatterOptions { probes: vec![0.9, 0.95, 0.99, 0.995, 0.999], tol_rel: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatterReport {
    pub probes: Vec<f64>,
    /// `‖v_i − v_j‖₂` with `v_i = U(−τ_i)φ(τ_i)`.
    pub residuals: Vec<Vec<f64>>,
    /// `‖v_i − v_last‖₂` for each probe.
    pub tail_residuals: Vec<f64>,
    /// Residual of the two finest probes.
    pub finest_residual: f64,
    pub initial_norm: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub reason: String,
    #[serde(skip)]
    pub back_propagated: Vec<Field>,
    /// `e^{i|x|²/4} v_last`
    #[serde(skip)]
    pub psi_plus: Option<Field>,
}

fn inconclusive(opts: &ScatterOptions, norm: f64, reason: String) -> ScatterReport {
    ScatterReport {
        probes: opts.probes.clone(),
        residuals: Vec::new(),
        tail_residuals: Vec::new(),
        finest_residual: f64::NAN,
        initial_norm: norm,
        tol: opts.tol_rel * norm,
        verdict: Verdict::Inconclusive,
        reason,
        back_propagated: Vec::new(),
        psi_plus: None,
    }
}

/// Cauchy test for `U(−τ)φ(τ)` as `τ → 1⁻` on the trajectory's snapshots.
pub fn scattering_probe(traj: &Trajectory, opts: &ScatterOptions) -> Result<ScatterReport> {
    if traj.model != Model::Conformal {
        return Err(Error::domain("scattering probe needs a conformal trajectory"));
    }
    if opts.probes.len() < 2 || opts.probes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("need at least two strictly increasing probe clocks"));
    }
    if !(opts.tol_rel > 0.0) {
        return Err(Error::domain("scatter tolerance must be positive"));
    }
    let norm = traj.initial.mass().sqrt();
    let mut snaps = Vec::with_capacity(opts.probes.len());
    for &tau in &opts.probes {
        match traj.snapshot_at(tau) {
            Some(s) => {
                let sound = traj.unsound_from.is_none_or(|u| s.record < u);
                if !sound {
                    let why = format!("trajectory unsound at or before probe τ = {tau}");
                    return Ok(inconclusive(opts, norm, why));
                }
                snaps.push(s);
            }
            None if traj.halted.is_some() => {
                let why = format!("trajectory halted ({:?}) before probe τ = {tau}", traj.halted.unwrap());
                return Ok(inconclusive(opts, norm, why));
            }
            None => return Err(Error::domain(format!("no snapshot recorded at probe τ = {tau}"))),
        }
    }
    let back: Vec<Field> = snaps.par_iter().map(|s| free_propagate(&s.field, -s.clock)).collect();
    let m = back.len();
    let mut residuals = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let r = back[i].distance(&back[j]);
            residuals[i][j] = r;
            residuals[j][i] = r;
        }
    }
    let tail_residuals: Vec<f64> = (0..m).map(|i| residuals[i][m - 1]).collect();
    let finest_residual = residuals[m - 2][m - 1];
    let tol = opts.tol_rel * norm;
    let slack = 1e-14 * norm;
    let monotone = tail_residuals[..m - 1].windows(2).all(|w| w[1] <= w[0] + slack);
    let (verdict, reason) = if finest_residual >= tol {
        (Verdict::Violated, format!("finest residual {finest_residual:.3e} >= tolerance {tol:.3e}"))
    } else if !monotone {
        (Verdict::Inconclusive, "residuals toward the finest probe are not monotone".to_string())
    } else {
        (Verdict::ScatteringConsistent, format!("finest residual {finest_residual:.3e} < tolerance {tol:.3e}"))
    };
    let psi_plus = Some(back[m - 1].chirped(0.25));
    Ok(ScatterReport {
        probes: opts.probes.clone(),
        residuals,
        tail_residuals,
        finest_residual,
        initial_norm: norm,
        tol,
        verdict,
        reason,
        back_propagated: back,
        psi_plus,
    })
}

/// `‖φ‖₂ + (1−τ)^{−δq}‖|φ|^{q−1}φ‖_{H^{−2}} + (1−τ)^{−δp}‖|φ|^{p−1}φ‖_{H^{−2}}`
pub fn forcing_majorant(phi: &Field, tau: f64, params: &ModelParams) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::domain(format!("conformal time {tau} must lie in [0, 1)")));
    }
    let power = |e: f64| phi.map(|v| v * v.norm().powf(e - 1.0));
    let nq = sobolev_norm(&power(params.q)?, -2.0)?;
    let np = sobolev_norm(&power(params.p)?, -2.0)?;
    let s = 1.0 - tau;
    Ok(phi.mass().sqrt() + s.powf(-params.delta_q()) * nq + s.powf(-params.delta_p()) * np)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ForcingPoint {
    pub tau0: f64,
    pub tau1: f64,
    /// `‖(φ(τ₁) − φ(τ₀))/(τ₁ − τ₀)‖_{H^{−2}}`
    pub difference_quotient: f64,
    /// Larger of the majorants at the two ends.
    pub majorant: f64,
    pub ratio: f64,
}

/// Difference quotients of consecutive snapshots against the forcing majorant.
pub fn forcing_bound(traj: &Trajectory) -> Result<Vec<ForcingPoint>> {
    if traj.model != Model::Conformal {
        return Err(Error::domain("forcing bound needs a conformal trajectory"));
    }
    traj.snapshots
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let h = b.clock - a.clock;
            let diff = Field::new(
                a.field.grid().clone(),
                b.field.values().iter().zip(a.field.values()).map(|(x, y)| (x - y) / h).collect(),
            )?;
            let dq = sobolev_norm(&diff, -2.0)?;
            let maj = forcing_majorant(&a.field, a.clock, &traj.params)?.max(forcing_majorant(
                &b.field,
                b.clock,
                &traj.params,
            )?);
            Ok(ForcingPoint { tau0: a.clock, tau1: b.clock, difference_quotient: dq, majorant: maj, ratio: dq / maj })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve, EvolutionState, EvolveControls};
    use crate::spectral::{eval_profile, make_grid, AnalyticProfile};
    use std::f64::consts::PI;

    fn gaussian(n: usize, len: f64) -> Field {
        eval_profile(&make_grid(1, n, len).unwrap(), &AnalyticProfile::gaussian(1.0, 1.0)).unwrap().0
    }

    #[test]
    fn time_maps() {
        assert_eq!(time_map(0.0).unwrap(), 0.0);
        assert_eq!(time_map(1.0).unwrap(), 0.5);
        assert!((inverse_time_map(0.9).unwrap() - 9.0).abs() < 1e-14);
        assert!(inverse_time_map(1.0).is_err());
        assert!(time_map(-1.0).is_err());
        for t in [0.1, 2.5, 77.0] {
            assert!((inverse_time_map(time_map(t).unwrap()).unwrap() - t).abs() < 1e-14 * t.max(1.0));
        }
    }

    #[test]
    fn t_zero_is_pure_chirp() {
        let u = gaussian(256, 40.0);
        let pair = to_conformal(&u, 0.0).unwrap();
        for (i, (a, b)) in pair.phi.values().iter().zip(u.values()).enumerate() {
            let x = u.grid().point(i)[0];
            assert!((a - b * Complex64::from_polar(1.0, -x * x / 4.0)).norm() < 1e-15);
        }
        let rep = verify_norm_identities(&pair, &[2.0, 5.0, 5.5]).unwrap();
        assert!(rep.max_residual() < 1e-12, "{rep:?}");
    }

    #[test]
    fn roundtrip() {
        let u = free_propagate(&gaussian(512, 64.0), 1.0);
        for t in [0.5, 1.0, 3.0] {
            let pair = to_conformal(&u, t).unwrap();
            let back = from_conformal(&pair.phi, pair.tau).unwrap();
            assert!((back.t - t).abs() < 1e-14);
            assert!(back.psi.distance(&u) < 1e-10, "t = {t}: {}", back.psi.distance(&u));
        }
    }

    #[test]
    fn aliasing_rejected() {
        // narrow bump: its spectrum cannot be compressed by 20
        let g = make_grid(1, 128, 20.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 0.3)).unwrap();
        assert!(matches!(to_conformal(&u, 19.0), Err(Error::Alias { .. })));
    }

    #[test]
    fn j_norm_cancels_chirp() {
        let u = gaussian(512, 64.0);
        let psi = u.chirped(0.25);
        let j = j_norm(&psi, 0.0).unwrap();
        assert!((j.value - gradient_sq_norm(&u).sqrt()).abs() < 1e-10);
        assert!(!j.truncated);
        // real field: cross term vanishes
        let j = j_norm(&u, 0.0).unwrap();
        let expect = 0.25 * weighted_l2(&u).powi(2) + gradient_sq_norm(&u);
        assert!((j.value.powi(2) - expect).abs() < 1e-10);
        // Gaussian moments: ¼·√π/2 + √π/2
        assert!((expect - 1.25 * PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn free_propagation() {
        let u = gaussian(256, 40.0).chirped(0.1);
        assert!(free_propagate(&u, 0.0).distance(&u) == 0.0);
        let back = free_propagate(&free_propagate(&u, 2.3), -2.3);
        assert!(back.distance(&u) < 1e-13);
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let k0 = 3.0;
        let m = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k0 * x[0])).unwrap();
        let e = free_propagate(&m, 0.7);
        for (a, b) in e.values().iter().zip(m.values()) {
            assert!((a - b * Complex64::from_polar(1.0, -k0 * k0 * 0.7)).norm() < 1e-13);
        }
    }

    #[test]
    fn free_flow_scatter_residuals_vanish() {
        let u = gaussian(256, 64.0);
        let p = ModelParams::scattering(1, 4.0, 4.5).unwrap();
        let st = EvolutionState::new(u.chirped(-0.25), 0.0, Model::Conformal, p).unwrap().with_free_flow();
        let opts = ScatterOptions { probes: vec![0.5, 0.8, 0.9], tol_rel: 1e-3 };
        let c =
            EvolveControls { dt_base: 0.01, cadence: 100, snapshot_clocks: opts.probes.clone(), ..Default::default() };
        let traj = evolve(st, 0.9, &c).unwrap();
        let rep = scattering_probe(&traj, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::ScatteringConsistent);
        for row in &rep.residuals {
            assert!(row.iter().all(|&r| r < 1e-12));
        }
    }
}
