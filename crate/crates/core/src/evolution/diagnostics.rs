use serde::Serialize;

use super::{Model, ModifiedTerms, Trajectory};
use crate::error::{Error, Result};
use crate::functionals::{correction_energy_of, modified_energy_of};

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub a: f64,
    pub clocks: Vec<f64>,
    pub sound: Vec<bool>,
    pub products: Vec<[f64; 3]>,
    pub running_sup: Vec<[f64; 3]>,
    pub initial: [f64; 3],
    /// Largest `product / initial` per term.
    pub max_ratio: [f64; 3],
    /// First record at which some product exceeds `factor × initial`, if any.
    pub first_exceed: Option<(usize, f64)>,
    pub factor: f64,
}

/// Products `(1−τ)^A‖∇φ‖²`, `(1−τ)^{A−δq}‖φ‖_{q+1}^{q+1}`, `(1−τ)^{A−δp}‖φ‖_{p+1}^{p+1}`
/// along a conformal trajectory, with running suprema.
pub fn decay_envelopes(traj: &Trajectory, a: f64, factor: f64) -> Result<EnvelopeReport> {
    if traj.model != Model::Conformal {
        return Err(Error::domain("decay envelopes need a conformal trajectory"));
    }
    let mut products = Vec::with_capacity(traj.records.len());
    for r in &traj.records {
        let m = ModifiedTerms::compute(r.clock, &r.breakdown, a, &traj.params, traj.epsilon)?;
        products.push(m.envelopes);
    }
    let initial = products[0];
    let mut running_sup = Vec::with_capacity(products.len());
    let mut sup = [0.0f64; 3];
    let mut max_ratio = [0.0f64; 3];
    let mut first_exceed = None;
    for (i, p) in products.iter().enumerate() {
        for j in 0..3 {
            sup[j] = sup[j].max(p[j]);
            if initial[j] > 0.0 {
                max_ratio[j] = max_ratio[j].max(p[j] / initial[j]);
                if first_exceed.is_none() && p[j] > factor * initial[j] {
                    first_exceed = Some((i, traj.records[i].clock));
                }
            }
        }
        running_sup.push(sup);
    }
    Ok(EnvelopeReport {
        a,
        clocks: traj.records.iter().map(|r| r.clock).collect(),
        sound: traj.records.iter().map(|r| r.sound).collect(),
        products,
        running_sup,
        initial,
        max_ratio,
        first_exceed,
        factor,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BalancePoint {
    pub clock: f64,
    pub e_a: f64,
    pub integral_r_a: f64,
    /// `E_A(τ) + ∫₀^τ R_A − E_A(0)`
    pub residual: f64,
}

/// Trapezoid-rule check of `E_A(τ) + ∫₀^τ R_A dσ = E_A(0)` on the recorded samples.
pub fn energy_balance(traj: &Trajectory, a: f64) -> Result<Vec<BalancePoint>> {
    if traj.model != Model::Conformal {
        return Err(Error::domain("energy balance needs a conformal trajectory"));
    }
    let p = &traj.params;
    let first = &traj.records[0];
    let e0 = modified_energy_of(first.clock, &first.breakdown, a, p)?;
    let mut prev_r = correction_energy_of(first.clock, &first.breakdown, a, p)?;
    let mut prev_t = first.clock;
    let mut integral = 0.0;
    let mut out = vec![BalancePoint { clock: first.clock, e_a: e0, integral_r_a: 0.0, residual: 0.0 }];
    for r in &traj.records[1..] {
        let e = modified_energy_of(r.clock, &r.breakdown, a, p)?;
        let ra = correction_energy_of(r.clock, &r.breakdown, a, p)?;
        integral += 0.5 * (ra + prev_r) * (r.clock - prev_t);
        out.push(BalancePoint { clock: r.clock, e_a: e, integral_r_a: integral, residual: e + integral - e0 });
        prev_r = ra;
        prev_t = r.clock;
    }
    Ok(out)
}
