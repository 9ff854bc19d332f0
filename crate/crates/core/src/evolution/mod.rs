//! Split-step integration of the physical and pseudo-conformal equations,
//! with diagnostic recording.

mod diagnostics;
mod stepper;

pub use diagnostics::{decay_envelopes, energy_balance, BalancePoint, EnvelopeReport};
pub use stepper::{nonlinear_coefficients, nonlinear_phase_weights, step_strang, unstep_strang, EvolutionState, Model};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{
    correction_energy_of, delta_exponents, modified_energy_of, split_energy_star_of, EnergyBreakdown, ModelParams,
};
use crate::spectral::{momentum, Field};
use stepper::Stepper;

#[derive(Clone, Debug)]
pub struct EvolveControls {
    pub dt_base: f64,
    /// Conformal runs: `dt <= c_adapt·(1 − τ)`.
    pub c_adapt: f64,
    /// Bound on the nonlinear phase accumulated in one step (radians).
    pub phase_cap: Option<f64>,
    /// Record every `cadence` steps (stop clocks are always recorded).
    pub cadence: usize,
    pub a_list: Vec<f64>,
    pub epsilon: f64,
    /// Clocks at which to land exactly and keep a copy of the field.
    pub snapshot_clocks: Vec<f64>,
    pub halt_on_unsound: bool,
    pub max_steps: usize,
    pub truncation_tol: f64,
    /// Spectral energy fraction beyond 2/3 of Nyquist tolerated before the
    /// run is flagged under-resolved.
    pub resolution_tol: f64,
}

impl Default for EvolveControls {
    fn default() -> Self {
        EvolveControls {
            dt_base: 1e-3,
            c_adapt: 0.01,
            phase_cap: Some(0.1),
            cadence: 10,
            a_list: vec![0.75],
            epsilon: 0.05,
            snapshot_clocks: Vec::new(),
            halt_on_unsound: false,
            max_steps: 10_000_000,
            truncation_tol: 1e-6,
            resolution_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModifiedTerms {
    pub a: f64,
    pub e_a: f64,
    pub r_a: f64,
    pub e_star: f64,
    /// `(1−τ)^A K`, `(1−τ)^{A−δq} N_q`, `(1−τ)^{A−δp} N_p`
    pub envelopes: [f64; 3],
}

impl ModifiedTerms {
    pub fn compute(tau: f64, b: &EnergyBreakdown, a: f64, params: &ModelParams, eps: f64) -> Result<Self> {
        let s = 1.0 - tau;
        let (dq, dp) = delta_exponents(params);
        Ok(ModifiedTerms {
            a,
            e_a: modified_energy_of(tau, b, a, params)?,
            r_a: correction_energy_of(tau, b, a, params)?,
            e_star: split_energy_star_of(tau, b, a, params, eps)?,
            envelopes: [s.powf(a) * b.kinetic, s.powf(a - dq) * b.nq, s.powf(a - dp) * b.np],
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagRecord {
    pub step: usize,
    pub clock: f64,
    pub dt: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    /// Raw integrals; `total` is the conserved-energy combination.
    pub breakdown: EnergyBreakdown,
    /// Conformal runs only, one entry per configured `A`.
    pub modified: Vec<ModifiedTerms>,
    pub boundary_fraction: f64,
    pub spectral_tail: f64,
    pub sound: bool,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub clock: f64,
    pub record: usize,
    pub field: Field,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Unsound,
    StepBudget,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub model: Model,
    pub params: ModelParams,
    pub a_list: Vec<f64>,
    pub epsilon: f64,
    pub records: Vec<DiagRecord>,
    pub snapshots: Vec<Snapshot>,
    /// First record flagged by the truncation or resolution monitor.
    pub unsound_from: Option<usize>,
    pub halted: Option<HaltReason>,
    pub steps: usize,
    pub initial: Field,
    pub final_state: EvolutionState,
}

impl Trajectory {
    pub fn is_sound(&self) -> bool {
        self.unsound_from.is_none() && self.halted.is_none()
    }

    pub fn sound_records(&self) -> &[DiagRecord] {
        &self.records[..self.unsound_from.unwrap_or(self.records.len())]
    }

    pub fn snapshot_at(&self, clock: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.clock - clock).abs() <= 1e-12 * clock.abs().max(1.0))
    }
}

fn record(state: &EvolutionState, step: usize, dt: f64, c: &EvolveControls) -> Result<DiagRecord> {
    let f = &state.field;
    let breakdown = EnergyBreakdown::measure(f, &state.params);
    let modified = match state.model {
        Model::Physical => Vec::new(),
        Model::Conformal => c
            .a_list
            .iter()
            .map(|&a| ModifiedTerms::compute(state.clock, &breakdown, a, &state.params, c.epsilon))
            .collect::<Result<_>>()?,
    };
    let boundary_fraction = f.boundary_mass_fraction();
    let spectral_tail = f.spectral_tail_fraction(2.0 / 3.0);
    Ok(DiagRecord {
        step,
        clock: state.clock,
        dt,
        mass: breakdown.mass,
        momentum: momentum(f),
        breakdown,
        modified,
        boundary_fraction,
        spectral_tail,
        sound: boundary_fraction <= c.truncation_tol && spectral_tail <= c.resolution_tol,
    })
}

fn validate(state: &EvolutionState, end: f64, c: &EvolveControls) -> Result<()> {
    if !(end > state.clock) {
        return Err(Error::domain(format!("end clock {end} must exceed the current clock {}", state.clock)));
    }
    if state.model == Model::Conformal && !(end < 1.0) {
        return Err(Error::domain(format!("conformal end clock {end} must be < 1")));
    }
    if !(c.dt_base > 0.0) || !(c.c_adapt > 0.0) || c.cadence == 0 {
        return Err(Error::domain("dt_base, c_adapt and cadence must be positive"));
    }
    if matches!(c.phase_cap, Some(v) if !(v > 0.0)) {
        return Err(Error::domain("phase cap must be positive"));
    }
    if !(c.epsilon > 0.0 && c.epsilon < 1.0) {
        return Err(Error::domain("split-energy ε must lie in (0, 1)"));
    }
    if c.a_list.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::domain("A values must be nonnegative"));
    }
    Ok(())
}

fn next_dt(state: &EvolutionState, c: &EvolveControls, stop: f64) -> f64 {
    let mut dt = c.dt_base;
    if state.model == Model::Conformal {
        dt = dt.min(c.c_adapt * (1.0 - state.clock));
    }
    if let (Some(cap), false) = (c.phase_cap, state.free_flow) {
        let amax = state.field.max_abs();
        let (cq, cp) = nonlinear_coefficients(state.model, state.clock, &state.params);
        let rate = amax.powf(state.params.q - 1.0) * cq + amax.powf(state.params.p - 1.0) * cp;
        if rate > 0.0 {
            dt = dt.min(cap / rate);
        }
    }
    let remaining = stop - state.clock;
    if remaining <= dt * (1.0 + 1e-9) {
        remaining
    } else {
        dt
    }
}

/// Integrate from the current clock to `end_clock`.
pub fn evolve(state: EvolutionState, end_clock: f64, controls: &EvolveControls) -> Result<Trajectory> {
    validate(&state, end_clock, controls)?;
    let mut stops: Vec<f64> =
        controls.snapshot_clocks.iter().copied().filter(|&t| t > state.clock && t < end_clock).collect();
    stops.push(end_clock);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut traj = Trajectory {
        model: state.model,
        params: state.params,
        a_list: controls.a_list.clone(),
        epsilon: controls.epsilon,
        records: vec![record(&state, 0, 0.0, controls)?],
        snapshots: Vec::new(),
        unsound_from: None,
        halted: None,
        steps: 0,
        initial: state.field.clone(),
        final_state: state.clone(),
    };
    if !traj.records[0].sound {
        traj.unsound_from = Some(0);
    }
    let mut stepper = Stepper::new(state.field.grid());
    let mut cur = state;
    let mut stop_idx = 0;
    while stop_idx < stops.len() {
        let stop = stops[stop_idx];
        let dt = next_dt(&cur, controls, stop);
        let landed = dt == stop - cur.clock;
        let vals = stepper.apply(&cur, cur.clock, dt, 1.0)?;
        let clock = if landed { stop } else { cur.clock + dt };
        let field = match Field::new(cur.field.grid().clone(), vals) {
            Ok(f) => f,
            Err(_) => {
                return Err(Error::NonFinite { clock, last_record: traj.records.last().cloned().map(Box::new) });
            }
        };
        cur = EvolutionState { field, clock, ..cur };
        traj.steps += 1;
        let budget_hit = traj.steps >= controls.max_steps;
        if landed || budget_hit || traj.steps.is_multiple_of(controls.cadence) {
            let rec = record(&cur, traj.steps, dt, controls)?;
            if !rec.sound && traj.unsound_from.is_none() {
                traj.unsound_from = Some(traj.records.len());
            }
            traj.records.push(rec);
            if landed {
                if controls.snapshot_clocks.contains(&stop) {
                    traj.snapshots.push(Snapshot {
                        clock: stop,
                        record: traj.records.len() - 1,
                        field: cur.field.clone(),
                    });
                }
                stop_idx += 1;
            }
            if traj.unsound_from.is_some() && controls.halt_on_unsound {
                traj.halted = Some(HaltReason::Unsound);
                break;
            }
        }
        if budget_hit && stop_idx < stops.len() {
            traj.halted = Some(HaltReason::StepBudget);
            break;
        }
    }
    traj.final_state = cur;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eval_profile, make_grid, AnalyticProfile};

    fn gaussian_state(model: Model) -> EvolutionState {
        let g = make_grid(1, 256, 40.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(0.8, 1.5)).unwrap();
        let p = ModelParams::scattering(1, 4.0, 4.5).unwrap();
        EvolutionState::new(u, 0.0, model, p).unwrap()
    }

    #[test]
    fn lands_on_snapshots_and_end() {
        let c = EvolveControls { snapshot_clocks: vec![0.25, 0.5], cadence: 1000, ..Default::default() };
        let traj = evolve(gaussian_state(Model::Conformal), 0.6, &c).unwrap();
        assert_eq!(traj.snapshots.len(), 2);
        assert_eq!(traj.snapshots[0].clock, 0.25);
        assert_eq!(traj.records.last().unwrap().clock, 0.6);
        assert!(traj.records.windows(2).all(|w| w[1].clock > w[0].clock));
        assert_eq!(traj.records[0].modified.len(), 1);
    }

    #[test]
    fn adaptive_step_respects_distance_to_one() {
        let c = EvolveControls { dt_base: 0.1, cadence: 1, phase_cap: None, ..Default::default() };
        let traj = evolve(gaussian_state(Model::Conformal), 0.9, &c).unwrap();
        for w in traj.records.windows(2) {
            assert!(w[1].dt <= 0.01 * (1.0 - w[0].clock) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn step_budget_halts() {
        let c = EvolveControls { max_steps: 5, cadence: 1, ..Default::default() };
        let traj = evolve(gaussian_state(Model::Physical), 1.0, &c).unwrap();
        assert_eq!(traj.halted, Some(HaltReason::StepBudget));
        assert_eq!(traj.steps, 5);
        assert!(!traj.is_sound());
    }

    #[test]
    fn rejects_bad_end() {
        let c = EvolveControls::default();
        assert!(evolve(gaussian_state(Model::Conformal), 1.0, &c).is_err());
        assert!(evolve(gaussian_state(Model::Physical), 0.0, &c).is_err());
    }
}
