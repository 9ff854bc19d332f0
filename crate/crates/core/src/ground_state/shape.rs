//! The dilation-invariant quotient `Q(u) = N_p / (K^{1−r} N_q^r M^{κ/2})`
//! and its maximizer.
//!
//! Along the mass-preserving dilations `λ^{d/2}u(λx)` the energy
//! `E^{α,β,γ}` takes a negative value iff `Λ·Q(u)·ρ^κ > c_r` with
//! `c_r = r^{−r}(1−r)^{−(1−r)}` and `κ = (p−1) − r(q−1)`. The maximizer of
//! `Q` is therefore the profile of the minimizer at the threshold, and
//! `ρ₀ = (c_r / (Λ Q_max))^{1/κ}`.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{CoeffTriple, EnergyBreakdown, ModelParams};
use crate::spectral::{eval_profile, AnalyticProfile, Field, Grid};

fn exponents(params: &ModelParams) -> Result<(f64, f64)> {
    let (dq, dp) = (params.delta_q(), params.delta_p());
    if !(dq > dp && dp > 0.0) {
        return Err(Error::domain("threshold quotient needs δ(q) > δ(p) > 0"));
    }
    let r = dp / dq;
    let kappa = (params.p - 1.0) - r * (params.q - 1.0);
    if !(kappa > 0.0) {
        return Err(Error::domain("threshold quotient needs (p−1) > r(q−1)"));
    }
    Ok((r, kappa))
}

/// `c_r = r^{−r}(1−r)^{−(1−r)}`
pub fn amgm_constant(r: f64) -> f64 {
    r.powf(-r) * (1.0 - r).powf(r - 1.0)
}

pub fn threshold_quotient_of(b: &EnergyBreakdown, params: &ModelParams) -> Result<f64> {
    let (r, kappa) = exponents(params)?;
    if !(b.kinetic > 0.0 && b.nq > 0.0 && b.mass > 0.0) {
        return Err(Error::domain("threshold quotient needs a non-zero, non-constant field"));
    }
    Ok(b.np / (b.kinetic.powf(1.0 - r) * b.nq.powf(r) * b.mass.powf(kappa / 2.0)))
}

pub fn threshold_quotient(field: &Field, params: &ModelParams) -> Result<f64> {
    threshold_quotient_of(&EnergyBreakdown::measure(field, params), params)
}

/// Threshold implied by a quotient value `q_max`: `(c_r / (Λ q_max))^{1/κ}`.
pub fn threshold_from_quotient(q_max: f64, coeffs: &CoeffTriple, params: &ModelParams) -> Result<f64> {
    let (r, kappa) = exponents(params)?;
    if !(coeffs.beta > 0.0) {
        return Err(Error::domain("threshold needs a defocusing coefficient β > 0"));
    }
    let lambda = coeffs.gamma / (coeffs.alpha.powf(1.0 - r) * coeffs.beta.powf(r));
    Ok((amgm_constant(r) / (lambda * q_max)).powf(1.0 / kappa))
}

/// Dilation `λ` at which `αKλ^{δp} + βN_qλ^{−(δq−δp)}` is smallest, for the
/// profile with raw integrals `b`.
pub fn best_dilation(b: &EnergyBreakdown, coeffs: &CoeffTriple, params: &ModelParams) -> f64 {
    let (dq, dp) = (params.delta_q(), params.delta_p());
    let (a, c) = (dp, dq - dp);
    (c * coeffs.beta * b.nq / (a * coeffs.alpha * b.kinetic)).powf(1.0 / (a + c))
}

/// Dilation minimizing `E^{α,β,γ}(λ^{d/2}u(λx))` when that minimum is
/// negative, else [`best_dilation`].
pub fn energy_dilation(b: &EnergyBreakdown, coeffs: &CoeffTriple, params: &ModelParams) -> f64 {
    let lam0 = best_dilation(b, coeffs, params);
    let d = params.d as f64;
    let (eq, ep) = (d * (params.q - 1.0) / 2.0, d * (params.p - 1.0) / 2.0);
    let e = |s: f64| {
        coeffs.alpha * b.kinetic * (2.0 * s).exp() + coeffs.beta * b.nq * (eq * s).exp()
            - coeffs.gamma * b.np * (ep * s).exp()
    };
    let s0 = lam0.ln();
    let (mut best_s, mut best_e) = (s0, e(s0));
    for i in 0..=8000 {
        let s = s0 - 20.0 + 80.0 * i as f64 / 8000.0;
        let v = e(s);
        if v < best_e {
            best_s = s;
            best_e = v;
        }
    }
    if !(best_e < 0.0) {
        return lam0;
    }
    let (mut lo, mut hi) = (best_s - 0.01, best_s + 0.01);
    for _ in 0..100 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if e(m1) < e(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalShape {
    /// Unit-mass maximizer.
    #[serde(skip)]
    pub field: Field,
    pub quotient: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub fn default_shape_grid(d: usize) -> Result<Grid> {
    match d {
        1 => Grid::new(1, 2048, 64.0),
        2 => Grid::new(2, 256, 32.0),
        _ => Grid::new(d, 64, 24.0),
    }
}

/// Preconditioned projected ascent of `log Q` on the unit sphere, started
/// from a unit Gaussian.
pub fn optimal_shape(params: &ModelParams, grid: &Grid, max_iter: usize, tol: f64) -> Result<OptimalShape> {
    let (r, _) = exponents(params)?;
    if grid.dim() != params.d {
        return Err(Error::domain("shape grid has the wrong dimension"));
    }
    let (q, p) = (params.q, params.p);
    let h = grid.cell_volume();
    let inner = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>() * h;
    let normalize = |vals: Vec<Complex64>| -> Result<Field> {
        let f = Field::new(grid.clone(), vals).map_err(|_| Error::Minimize("non-finite shape iterate".into()))?;
        let m = f.mass();
        if !(m > 0.0) {
            return Err(Error::Minimize("shape iterate collapsed".into()));
        }
        Ok(f.scaled(1.0 / m.sqrt()))
    };
    let log_q = |u: &Field| -> Result<f64> { Ok(threshold_quotient(u, params)?.ln()) };
    let precondition = |v: &[Complex64], c0: f64| -> Vec<Complex64> {
        let mut s = v.to_vec();
        grid.forward(&mut s);
        for (x, k2) in s.iter_mut().zip(grid.k2()) {
            *x /= c0 + k2;
        }
        grid.inverse(&mut s);
        s
    };

    let (seed, _) = eval_profile(grid, &AnalyticProfile::gaussian(1.0, 1.0))?;
    let mut u = normalize(seed.into_values())?;
    let mut lq = log_q(&u)?;
    let mut step = 0.1;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let b = EnergyBreakdown::measure(&u, params);
        let mut lap = u.spectrum();
        for (v, k2) in lap.iter_mut().zip(grid.k2()) {
            *v *= k2;
        }
        grid.inverse(&mut lap);
        // ∇ log Q, with ∇K = −2Δu and ∇N_s = (s+1)|u|^{s−1}u
        let g: Vec<Complex64> = u
            .values()
            .iter()
            .zip(&lap)
            .map(|(v, l)| {
                let a = v.norm();
                v * ((p + 1.0) * a.powf(p - 1.0) / b.np - r * (q + 1.0) * a.powf(q - 1.0) / b.nq)
                    - l * (2.0 * (1.0 - r) / b.kinetic)
            })
            .collect();
        let mu = inner(u.values(), &g);
        let proj: Vec<Complex64> = g.iter().zip(u.values()).map(|(gi, ui)| gi - ui * mu).collect();
        let gn = inner(&g, &g).sqrt();
        residual = if gn > 0.0 { inner(&proj, &proj).sqrt() / gn } else { 0.0 };
        if residual < tol {
            break;
        }
        let c0 = b.kinetic / b.mass;
        let pg = precondition(&g, c0);
        let pu = precondition(u.values(), c0);
        let lam = inner(u.values(), &pg) / inner(u.values(), &pu);
        let dir: Vec<Complex64> = pg.iter().zip(&pu).map(|(a, b)| a - b * lam).collect();
        let mut accepted = false;
        while step > 1e-14 {
            let trial: Vec<Complex64> = u.values().iter().zip(&dir).map(|(a, d)| a + d * step).collect();
            let cand = normalize(trial)?;
            let lc = log_q(&cand)?;
            if lc >= lq - 1e-15 {
                u = cand;
                lq = lc;
                step = (step * 1.5).min(1e3);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }
    Ok(OptimalShape { quotient: lq.exp(), field: u, residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amgm() {
        assert!((amgm_constant(0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quotient_is_dilation_and_amplitude_invariant() {
        let p = ModelParams::scattering(1, 4.0, 4.5).unwrap();
        let g = Grid::new(1, 2048, 80.0).unwrap();
        let (a, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 1.0)).unwrap();
        let (b, _) = eval_profile(&g, &AnalyticProfile::gaussian(3.0, 2.0)).unwrap();
        let (qa, qb) = (threshold_quotient(&a, &p).unwrap(), threshold_quotient(&b, &p).unwrap());
        assert!((qa - qb).abs() < 1e-10 * qa);
    }

    #[test]
    fn gaussian_threshold_is_an_upper_bound() {
        let p = ModelParams::scattering(1, 4.0, 4.5).unwrap();
        let g = default_shape_grid(1).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 1.0)).unwrap();
        let c = CoeffTriple::energy(&p);
        let gauss = threshold_from_quotient(threshold_quotient(&u, &p).unwrap(), &c, &p).unwrap();
        let best = optimal_shape(&p, &g, 5000, 1e-9).unwrap();
        let opt = threshold_from_quotient(best.quotient, &c, &p).unwrap();
        assert!(opt < gauss);
        // Gaussian moments: K = √π/2, N_s = √(2π/s), M = √π
        let pi = std::f64::consts::PI;
        let q_gauss = (2.0 * pi / 5.5).sqrt() / ((pi.sqrt() / 2.0).sqrt() * (2.0 * pi / 5.0).sqrt().sqrt() * pi.sqrt());
        let lam = (1.0 / 5.5) / (0.5f64 * 0.2).sqrt();
        assert!((gauss - (2.0 / (lam * q_gauss)).sqrt()).abs() < 1e-9, "{gauss}");
    }
}
