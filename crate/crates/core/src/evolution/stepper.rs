use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::ModelParams;
use crate::spectral::{Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `i∂_tψ + Δψ = |ψ|^{q−1}ψ − |ψ|^{p−1}ψ`, `t >= 0`
    Physical,
    /// `i∂_τφ + Δφ = (1−τ)^{−δq}|φ|^{q−1}φ − (1−τ)^{−δp}|φ|^{p−1}φ`, `τ ∈ [0, 1)`
    Conformal,
}

/// `∫_s^{s+dt} (1−σ)^{−δ} dσ` written to avoid cancellation for small `dt`.
fn conformal_weight(tau: f64, dt: f64, delta: f64) -> f64 {
    let s = 1.0 - tau;
    let e = 1.0 - delta;
    -s.powf(e) * (e * (-dt / s).ln_1p()).exp_m1() / e
}

/// Exact integrals `(W_q, W_p)` of the nonlinear coefficients over `[clock, clock + dt]`.
pub fn nonlinear_phase_weights(model: Model, clock: f64, dt: f64, params: &ModelParams) -> Result<(f64, f64)> {
    match model {
        Model::Physical => Ok((dt, dt)),
        Model::Conformal => {
            if !(clock >= 0.0 && clock + dt < 1.0) {
                return Err(Error::domain(format!("conformal step [{clock}, {clock} + {dt}] must end before 1")));
            }
            let (dq, dp) = (params.delta_q(), params.delta_p());
            if !(dq > 0.0 && dq < 1.0 && dp > 0.0 && dp < 1.0) {
                return Err(Error::domain("conformal weights need δ(q), δ(p) in (0, 1)"));
            }
            Ok((conformal_weight(clock, dt, dq), conformal_weight(clock, dt, dp)))
        }
    }
}

/// Current coefficients `(c_q, c_p)` of the nonlinearity.
pub fn nonlinear_coefficients(model: Model, clock: f64, params: &ModelParams) -> (f64, f64) {
    match model {
        Model::Physical => (1.0, 1.0),
        Model::Conformal => {
            let s = 1.0 - clock;
            (s.powf(-params.delta_q()), s.powf(-params.delta_p()))
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionState {
    pub field: Field,
    pub clock: f64,
    pub model: Model,
    pub params: ModelParams,
    /// Drop the nonlinearity (test hook): the flow is then exactly `U(t)`.
    pub free_flow: bool,
}

impl EvolutionState {
    pub fn new(field: Field, clock: f64, model: Model, params: ModelParams) -> Result<Self> {
        let ok = match model {
            Model::Physical => clock >= 0.0 && clock.is_finite(),
            Model::Conformal => (0.0..1.0).contains(&clock),
        };
        if !ok {
            return Err(Error::domain(format!("clock {clock} invalid for the {model:?} model")));
        }
        if field.grid().dim() != params.d {
            return Err(Error::domain("field dimension differs from model dimension"));
        }
        Ok(EvolutionState { field, clock, model, params, free_flow: false })
    }

    pub fn with_free_flow(mut self) -> Self {
        self.free_flow = true;
        self
    }
}

/// Strang substeps with a cached linear multiplier.
pub(crate) struct Stepper {
    grid: Grid,
    cached: Option<(f64, Vec<Complex64>)>,
}

impl Stepper {
    pub fn new(grid: &Grid) -> Self {
        Stepper { grid: grid.clone(), cached: None }
    }

    fn linear(&mut self, vals: &mut [Complex64], t: f64) {
        let fresh = !matches!(&self.cached, Some((c, _)) if *c == t);
        if fresh {
            let m = self.grid.k2().iter().map(|k2| Complex64::from_polar(1.0, -k2 * t)).collect();
            self.cached = Some((t, m));
        }
        let mult = &self.cached.as_ref().unwrap().1;
        self.grid.forward(vals);
        for (v, m) in vals.iter_mut().zip(mult) {
            *v *= m;
        }
        self.grid.inverse(vals);
    }

    fn nonlinear(vals: &mut [Complex64], params: &ModelParams, wq: f64, wp: f64) {
        let (eq, ep) = ((params.q - 1.0) / 2.0, (params.p - 1.0) / 2.0);
        for v in vals.iter_mut() {
            let a2 = v.norm_sqr();
            if a2 == 0.0 {
                continue;
            }
            let theta = a2.powf(eq) * wq - a2.powf(ep) * wp;
            *v *= Complex64::from_polar(1.0, -theta);
        }
    }

    /// `L(sign·dt/2) N(sign·W) L(sign·dt/2)` for the interval `[t0, t0 + dt]`.
    pub fn apply(&mut self, state: &EvolutionState, t0: f64, dt: f64, sign: f64) -> Result<Vec<Complex64>> {
        let mut vals = state.field.values().to_vec();
        self.linear(&mut vals, sign * dt / 2.0);
        if !state.free_flow {
            let (wq, wp) = nonlinear_phase_weights(state.model, t0, dt, &state.params)?;
            Self::nonlinear(&mut vals, &state.params, sign * wq, sign * wp);
        }
        self.linear(&mut vals, sign * dt / 2.0);
        Ok(vals)
    }
}

fn finish(state: &EvolutionState, vals: Vec<Complex64>, clock: f64) -> Result<EvolutionState> {
    let field =
        Field::new(state.field.grid().clone(), vals).map_err(|_| Error::NonFinite { clock, last_record: None })?;
    Ok(EvolutionState { field, clock, ..state.clone() })
}

/// One symmetric split step of size `dt`.
pub fn step_strang(state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("step size {dt} must be positive")));
    }
    let mut s = Stepper::new(state.field.grid());
    let vals = s.apply(state, state.clock, dt, 1.0)?;
    finish(state, vals, state.clock + dt)
}

/// Exact inverse of the forward step of size `dt` that ended at `state.clock`.
pub fn unstep_strang(state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
    let t0 = state.clock - dt;
    if !(dt > 0.0 && t0 >= 0.0) {
        return Err(Error::domain(format!("cannot step back by {dt} from {}", state.clock)));
    }
    let mut s = Stepper::new(state.field.grid());
    let vals = s.apply(state, t0, dt, -1.0)?;
    finish(state, vals, t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eval_profile, make_grid, AnalyticProfile};
    use std::f64::consts::PI;

    fn params() -> ModelParams {
        ModelParams::scattering(1, 4.0, 4.5).unwrap()
    }

    #[test]
    fn weights() {
        let p = params();
        assert_eq!(nonlinear_phase_weights(Model::Physical, 3.0, 0.01, &p).unwrap(), (0.01, 0.01));
        let (wq, _) = nonlinear_phase_weights(Model::Conformal, 0.0, 0.75, &p).unwrap();
        assert!((wq - 1.0).abs() < 1e-14);
        let (wq, wp) = nonlinear_phase_weights(Model::Conformal, 0.6, 1e-9, &p).unwrap();
        assert!((wq / 1e-9 - 0.4f64.powf(-0.5)).abs() < 1e-7);
        assert!((wp / 1e-9 - 0.4f64.powf(-0.25)).abs() < 1e-7);
        assert!(nonlinear_phase_weights(Model::Conformal, 0.5, 0.5, &p).is_err());
    }

    #[test]
    fn weights_match_quadrature() {
        let p = params();
        let (t0, dt) = (0.3, 0.25);
        let (wq, wp) = nonlinear_phase_weights(Model::Conformal, t0, dt, &p).unwrap();
        let n = 20000;
        let h = dt / n as f64;
        let quad = |delta: f64| -> f64 { (0..n).map(|i| (1.0 - (t0 + (i as f64 + 0.5) * h)).powf(-delta) * h).sum() };
        assert!((wq - quad(0.5)).abs() < 1e-9);
        assert!((wp - quad(0.25)).abs() < 1e-9);
    }

    #[test]
    fn free_single_mode_phase() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let k0 = 3.0;
        let u = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k0 * x[0])).unwrap();
        let st = EvolutionState::new(u.clone(), 0.0, Model::Physical, params()).unwrap().with_free_flow();
        let dt = 0.013;
        let next = step_strang(&st, dt).unwrap();
        for (a, b) in next.field.values().iter().zip(u.values()) {
            assert!((a - b * Complex64::from_polar(1.0, -k0 * k0 * dt)).norm() < 1e-13);
        }
    }

    #[test]
    fn reversible_both_models() {
        let g = make_grid(1, 256, 40.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.5, 1.0).with_chirp(0.1)).unwrap();
        for (model, t0) in [(Model::Physical, 2.0), (Model::Conformal, 0.4)] {
            let st = EvolutionState::new(u.clone(), t0, model, params()).unwrap();
            let fwd = step_strang(&st, 0.01).unwrap();
            let back = unstep_strang(&fwd, 0.01).unwrap();
            assert!(back.field.distance(&u) < 1e-10 * u.mass().sqrt());
            assert!((back.clock - t0).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_preserved() {
        let g = make_grid(1, 256, 40.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.5, 1.0)).unwrap();
        let mut st = EvolutionState::new(u.clone(), 0.0, Model::Physical, params()).unwrap();
        for _ in 0..1000 {
            st = step_strang(&st, 0.005).unwrap();
        }
        assert!((st.field.mass() - u.mass()).abs() < 1e-12 * u.mass());
    }

    #[test]
    fn conformal_clock_checked() {
        let g = make_grid(1, 16, 4.0).unwrap();
        assert!(EvolutionState::new(Field::zeros(&g), 1.0, Model::Conformal, params()).is_err());
        assert!(EvolutionState::new(Field::zeros(&g), 5.0, Model::Physical, params()).is_ok());
    }
}
