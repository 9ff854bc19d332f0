//! Scalar functionals: energies, Pohozaev functional, modified energy and
//! the standing-wave algebra. Everything is a weighted recombination of the
//! four raw integrals held in [`EnergyBreakdown`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{gradient_sq_norm, Field};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `1 < q < p < 1 + 4/d`
    Variational,
    /// `1 + 2/d < q < p < 1 + 4/d`
    Scattering,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub q: f64,
    pub p: f64,
    pub regime: Regime,
}

/// `δ(r) = (4 − d(r−1))/2`.
pub fn delta(d: usize, r: f64) -> f64 {
    (4.0 - d as f64 * (r - 1.0)) / 2.0
}

impl ModelParams {
    pub fn new(d: usize, q: f64, p: f64, regime: Regime) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::domain(format!("dimension {d} not supported")));
        }
        let df = d as f64;
        let upper = 1.0 + 4.0 / df;
        let lower = match regime {
            Regime::Variational => 1.0,
            Regime::Scattering => 1.0 + 2.0 / df,
        };
        if !(q.is_finite() && p.is_finite() && lower < q && q < p && p < upper) {
            return Err(Error::domain(format!(
                "{regime:?} regime needs {lower} < q < p < {upper} (d = {d}), got q = {q}, p = {p}"
            )));
        }
        Ok(ModelParams { d, q, p, regime })
    }

    pub fn variational(d: usize, q: f64, p: f64) -> Result<Self> {
        Self::new(d, q, p, Regime::Variational)
    }

    pub fn scattering(d: usize, q: f64, p: f64) -> Result<Self> {
        Self::new(d, q, p, Regime::Scattering)
    }

    pub fn delta_q(&self) -> f64 {
        delta(self.d, self.q)
    }

    pub fn delta_p(&self) -> f64 {
        delta(self.d, self.p)
    }

    /// `δ(p)/δ(q)`
    pub fn delta_ratio(&self) -> f64 {
        self.delta_p() / self.delta_q()
    }

    pub fn is_scattering_admissible(&self) -> bool {
        self.q > 1.0 + 2.0 / self.d as f64
    }
}

pub fn delta_exponents(params: &ModelParams) -> (f64, f64) {
    (params.delta_q(), params.delta_p())
}

/// Weights `(α, β, γ)` of `E^{α,β,γ}(u) = α‖∇u‖² + β‖u‖_{q+1}^{q+1} − γ‖u‖_{p+1}^{p+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CoeffTriple {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} = {v} must be positive")));
            }
        }
        Ok(CoeffTriple { alpha, beta, gamma })
    }

    /// Triple with no defocusing term. Only meaningful for the pure-focusing
    /// scaling checks; most of the crate assumes `β > 0`.
    #[doc(hidden)]
    pub fn focusing_only(alpha: f64, gamma: f64) -> Self {
        CoeffTriple { alpha, beta: 0.0, gamma }
    }

    /// `(1/2, 1/(q+1), 1/(p+1))`: the conserved energy.
    pub fn energy(params: &ModelParams) -> Self {
        CoeffTriple { alpha: 0.5, beta: 1.0 / (params.q + 1.0), gamma: 1.0 / (params.p + 1.0) }
    }

    /// `(1, d(q−1)/(2(q+1)), d(p−1)/(2(p+1)))`: standing-wave threshold.
    pub fn standing_wave(params: &ModelParams) -> Self {
        let (d, q, p) = (params.d as f64, params.q, params.p);
        CoeffTriple { alpha: 1.0, beta: d * (q - 1.0) / (2.0 * (q + 1.0)), gamma: d * (p - 1.0) / (2.0 * (p + 1.0)) }
    }

    /// Triple for `ρ₁(A)`: `(A/2, (A−δq)(A−δp)^{−δq/δp}/(q+1), 1/(p+1))`.
    pub fn rho1(params: &ModelParams, a: f64) -> Result<Self> {
        let (dq, dp) = delta_exponents(params);
        if !(a > dq) {
            return Err(Error::domain(format!("A = {a} must exceed δ(q) = {dq}")));
        }
        CoeffTriple::new(a / 2.0, (a - dq) * (a - dp).powf(-dq / dp) / (params.q + 1.0), 1.0 / (params.p + 1.0))
    }

    /// `ρ*` uses the `ρ₁` triple at `A = 1`.
    pub fn scattering_mass(params: &ModelParams) -> Result<Self> {
        Self::rho1(params, 1.0)
    }

    /// Triple for `ρ₂(ε)`: `(1/2, 1/(q+1), (1+ε)/((1−ε)(p+1)))`.
    pub fn rho2(params: &ModelParams, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::domain(format!("ε = {eps} must lie in (0, 1)")));
        }
        CoeffTriple::new(0.5, 1.0 / (params.q + 1.0), (1.0 + eps) / ((1.0 - eps) * (params.p + 1.0)))
    }

    pub fn scaled(&self, c: f64) -> Self {
        CoeffTriple { alpha: c * self.alpha, beta: c * self.beta, gamma: c * self.gamma }
    }
}

/// The four raw integrals of a field plus the weighted total they produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `‖∇u‖₂²`
    pub kinetic: f64,
    /// `‖u‖_{q+1}^{q+1}`
    pub nq: f64,
    /// `‖u‖_{p+1}^{p+1}`
    pub np: f64,
    /// `‖u‖₂²`
    pub mass: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Raw integrals with `total` set to the conserved energy.
    pub fn measure(field: &Field, params: &ModelParams) -> Self {
        let mut b = EnergyBreakdown {
            kinetic: gradient_sq_norm(field),
            nq: field.lp_power(params.q + 1.0),
            np: field.lp_power(params.p + 1.0),
            mass: field.mass(),
            total: 0.0,
        };
        b.total = b.weighted(&CoeffTriple::energy(params));
        b
    }

    pub fn weighted(&self, c: &CoeffTriple) -> f64 {
        c.alpha * self.kinetic + c.beta * self.nq - c.gamma * self.np
    }

    pub fn with_coeffs(mut self, c: &CoeffTriple) -> Self {
        self.total = self.weighted(c);
        self
    }

    /// `αK + βN_q + γN_p`, the natural scale for relative comparisons.
    pub fn magnitude(&self, c: &CoeffTriple) -> f64 {
        c.alpha * self.kinetic + c.beta * self.nq + c.gamma * self.np
    }
}

pub fn energy_abg(field: &Field, params: &ModelParams, coeffs: &CoeffTriple) -> EnergyBreakdown {
    EnergyBreakdown::measure(field, params).with_coeffs(coeffs)
}

/// `G = 2αK + (d(q−1)/2)βN_q − (d(p−1)/2)γN_p`
pub fn pohozaev_of(b: &EnergyBreakdown, params: &ModelParams, c: &CoeffTriple) -> f64 {
    let d = params.d as f64;
    2.0 * c.alpha * b.kinetic + d * (params.q - 1.0) / 2.0 * c.beta * b.nq - d * (params.p - 1.0) / 2.0 * c.gamma * b.np
}

pub fn pohozaev(field: &Field, params: &ModelParams, coeffs: &CoeffTriple) -> f64 {
    pohozaev_of(&EnergyBreakdown::measure(field, params), params, coeffs)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::domain(format!("conformal time τ = {tau} must lie in [0, 1)")));
    }
    Ok(())
}

fn check_a(a: f64) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("A = {a} must be nonnegative")));
    }
    Ok(())
}

/// Weights `(w_K, w_q, w_p)` of `E_A` so that `E_A = w_K K + w_q N_q + w_p N_p`.
pub fn modified_energy_weights(tau: f64, a: f64, params: &ModelParams) -> Result<[f64; 3]> {
    check_tau(tau)?;
    check_a(a)?;
    let s = 1.0 - tau;
    let (dq, dp) = delta_exponents(params);
    Ok([s.powf(a) / 2.0, s.powf(a - dq) / (params.q + 1.0), -s.powf(a - dp) / (params.p + 1.0)])
}

pub fn modified_energy_of(tau: f64, b: &EnergyBreakdown, a: f64, params: &ModelParams) -> Result<f64> {
    let w = modified_energy_weights(tau, a, params)?;
    Ok(w[0] * b.kinetic + w[1] * b.nq + w[2] * b.np)
}

/// `E_A(τ, φ)`
pub fn modified_energy(tau: f64, field: &Field, a: f64, params: &ModelParams) -> Result<f64> {
    modified_energy_of(tau, &EnergyBreakdown::measure(field, params), a, params)
}

pub fn correction_energy_of(tau: f64, b: &EnergyBreakdown, a: f64, params: &ModelParams) -> Result<f64> {
    check_tau(tau)?;
    check_a(a)?;
    let s = 1.0 - tau;
    let (dq, dp) = delta_exponents(params);
    Ok(a / 2.0 * s.powf(a - 1.0) * b.kinetic + (a - dq) / (params.q + 1.0) * s.powf(a - dq - 1.0) * b.nq
        - (a - dp) / (params.p + 1.0) * s.powf(a - dp - 1.0) * b.np)
}

/// `R_A(τ, φ)`, the rate in `E_A(τ) + ∫₀^τ R_A = E_A(0)`.
pub fn correction_energy(tau: f64, field: &Field, a: f64, params: &ModelParams) -> Result<f64> {
    correction_energy_of(tau, &EnergyBreakdown::measure(field, params), a, params)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("ε = {eps} must lie in (0, 1)")));
    }
    Ok(())
}

/// `E_A^⋆`: `E_A` with weights scaled by `(1−ε), (1−ε), (1+ε)`.
pub fn split_energy_star_of(tau: f64, b: &EnergyBreakdown, a: f64, params: &ModelParams, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let w = modified_energy_weights(tau, a, params)?;
    Ok((1.0 - eps) * w[0] * b.kinetic + (1.0 - eps) * w[1] * b.nq + (1.0 + eps) * w[2] * b.np)
}

pub fn split_energy_star(tau: f64, field: &Field, a: f64, params: &ModelParams, eps: f64) -> Result<f64> {
    split_energy_star_of(tau, &EnergyBreakdown::measure(field, params), a, params, eps)
}

/// The remainder `E_A − E_A^⋆`: all three terms with positive weights, times ε.
pub fn split_energy_positive_of(tau: f64, b: &EnergyBreakdown, a: f64, params: &ModelParams, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let w = modified_energy_weights(tau, a, params)?;
    Ok(eps * (w[0] * b.kinetic + w[1] * b.nq - w[2] * b.np))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandingWave {
    pub omega: f64,
    /// `E ≤ 0`, in which case `ω > 0` is expected.
    pub positive_if_e_nonpositive: bool,
    /// `K = 0` and `E = 0`.
    pub degenerate: bool,
}

/// `ω` from `−(2/d)K + 2E + ωM = 0`.
pub fn standing_wave_multiplier(b: &EnergyBreakdown, params: &ModelParams) -> Result<StandingWave> {
    if !(b.mass > 0.0) {
        return Err(Error::domain("standing-wave multiplier needs positive mass"));
    }
    let omega = (2.0 * b.kinetic / params.d as f64 - 2.0 * b.total) / b.mass;
    Ok(StandingWave {
        omega,
        positive_if_e_nonpositive: b.total <= 0.0,
        degenerate: b.kinetic == 0.0 && b.total == 0.0,
    })
}

/// Integrals of a standing wave `−Δu + ωu + |u|^{q−1}u − |u|^{p−1}u = 0`
/// with prescribed `K`, `N_q` and `M`: the Pohozaev identity fixes `N_p`,
/// the energy follows, and the Nehari identity `K + ωM + N_q − N_p = 0`
/// gives `ω`. Returns the breakdown and that Nehari `ω`.
pub fn standing_wave_system(params: &ModelParams, kinetic: f64, nq: f64, mass: f64) -> Result<(EnergyBreakdown, f64)> {
    if !(kinetic > 0.0 && nq > 0.0 && mass > 0.0) {
        return Err(Error::domain("standing-wave system needs K, N_q, M > 0"));
    }
    let (d, q, p) = (params.d as f64, params.q, params.p);
    let (bq, bp) = (d * (q - 1.0) / (2.0 * (q + 1.0)), d * (p - 1.0) / (2.0 * (p + 1.0)));
    let np = (kinetic + bq * nq) / bp;
    let mut b = EnergyBreakdown { kinetic, nq, np, mass, total: 0.0 };
    b.total = b.weighted(&CoeffTriple::energy(params));
    Ok((b, (np - kinetic - nq) / mass))
}

/// `Q(u) = N_p / (‖∇u‖₂^{d(p−1)/2} ‖u‖₂^{p+1−d(p−1)/2})`, invariant under
/// `u ↦ s·λ^{d/2}u(λx)`.
pub fn gn_quotient(field: &Field, params: &ModelParams) -> Result<f64> {
    let b = EnergyBreakdown::measure(field, params);
    if !(b.mass > 0.0) || !(b.kinetic > 0.0) {
        return Err(Error::domain("Gagliardo–Nirenberg quotient needs a non-zero, non-constant field"));
    }
    let theta = params.d as f64 * (params.p - 1.0) / 2.0;
    Ok(b.np / (b.kinetic.powf(theta / 2.0) * b.mass.powf((params.p + 1.0 - theta) / 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eval_profile, make_grid, AnalyticProfile};
    use std::f64::consts::PI;

    fn params() -> ModelParams {
        ModelParams::scattering(1, 4.0, 4.5).unwrap()
    }

    fn gaussian_moments() -> EnergyBreakdown {
        // a = w = 1: K = √π/2, N_r = √(2π/(r+1)) for ‖u‖_{r+1}^{r+1}, M = √π
        EnergyBreakdown {
            kinetic: PI.sqrt() / 2.0,
            nq: (2.0 * PI / 5.0).sqrt(),
            np: (2.0 * PI / 5.5).sqrt(),
            mass: PI.sqrt(),
            total: 0.0,
        }
    }

    #[test]
    fn deltas() {
        assert_eq!(delta_exponents(&params()), (0.5, 0.25));
        let p2 = ModelParams::variational(2, 2.0, 2.5).unwrap();
        assert_eq!(delta_exponents(&p2), (1.0, 0.5));
    }

    #[test]
    fn regime_validation() {
        assert!(ModelParams::scattering(1, 3.0, 4.0).is_err());
        assert!(ModelParams::variational(1, 3.0, 4.0).is_ok());
        assert!(ModelParams::variational(1, 4.5, 4.0).is_err());
        assert!(ModelParams::variational(1, 2.0, 5.0).is_err());
        assert!(CoeffTriple::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_energy_from_moments() {
        let g = make_grid(1, 1024, 40.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 1.0)).unwrap();
        let c = CoeffTriple::new(0.5, 0.2, 1.0 / 5.5).unwrap();
        let b = energy_abg(&u, &params(), &c);
        let m = gaussian_moments();
        assert!((b.kinetic - m.kinetic).abs() < 1e-12);
        assert!((b.nq - m.nq).abs() < 1e-12);
        assert!((b.np - m.np).abs() < 1e-12);
        let expect = 0.5 * m.kinetic + 0.2 * m.nq - m.np / 5.5;
        assert!((b.total - expect).abs() < 1e-12);
        let g_expect = 2.0 * 0.5 * m.kinetic + 1.5 * 0.2 * m.nq - 1.75 * m.np / 5.5;
        assert!((pohozaev(&u, &params(), &c) - g_expect).abs() < 1e-12);
    }

    #[test]
    fn modified_and_correction_at_half() {
        let m = gaussian_moments();
        let p = params();
        let e = modified_energy_of(0.5, &m, 0.75, &p).unwrap();
        let expect = 0.5f64.powf(0.75) / 2.0 * m.kinetic + 0.5f64.powf(0.25) / 5.0 * m.nq - 0.5f64.sqrt() / 5.5 * m.np;
        assert!((e - expect).abs() < 1e-14);
        let r = correction_energy_of(0.5, &m, 0.75, &p).unwrap();
        let expect_r = 0.375 * 0.5f64.powf(-0.25) * m.kinetic + 0.25 / 5.0 * 0.5f64.powf(-0.75) * m.nq
            - 0.5 / 5.5 * 0.5f64.powf(-0.5) * m.np;
        assert!((r - expect_r).abs() < 1e-14);
        let s = split_energy_star_of(0.5, &m, 0.75, &p, 0.1).unwrap();
        let expect_s = 0.9 * 0.5f64.powf(0.75) / 2.0 * m.kinetic + 0.9 * 0.5f64.powf(0.25) / 5.0 * m.nq
            - 1.1 * 0.5f64.sqrt() / 5.5 * m.np;
        assert!((s - expect_s).abs() < 1e-14);
    }

    #[test]
    fn tau_zero_is_energy_and_tau_one_rejected() {
        let m = gaussian_moments();
        let p = params();
        let e0 = modified_energy_of(0.0, &m, 0.6, &p).unwrap();
        assert!((e0 - m.weighted(&CoeffTriple::energy(&p))).abs() < 1e-15);
        assert!(modified_energy_of(1.0, &m, 0.6, &p).is_err());
        assert!(correction_energy_of(1.0, &m, 0.6, &p).is_err());
        assert!(split_energy_star_of(0.3, &m, 0.6, &p, 1.0).is_err());
    }

    #[test]
    fn coefficient_edge_cases() {
        let p = params();
        let m = EnergyBreakdown { kinetic: 0.0, nq: 1.0, np: 0.0, mass: 1.0, total: 0.0 };
        // A = δq kills the q-term of R_A
        assert_eq!(correction_energy_of(0.3, &m, 0.5, &p).unwrap(), 0.0);
        // A = 0, τ = 0: R = −δq/(q+1) N_q
        assert!((correction_energy_of(0.0, &m, 0.0, &p).unwrap() + 0.5 / 5.0).abs() < 1e-15);
        // A = δp: the p weight is −(1−τ)^0/(p+1)
        let w = modified_energy_weights(0.7, 0.25, &p).unwrap();
        assert!((w[2] + 1.0 / 5.5).abs() < 1e-15);
    }

    #[test]
    fn standing_wave_examples() {
        let p1 = params();
        let b = EnergyBreakdown { kinetic: 1.0, nq: 0.0, np: 0.0, mass: 1.0, total: 0.0 };
        assert!((standing_wave_multiplier(&b, &p1).unwrap().omega - 2.0).abs() < 1e-15);
        let p2 = ModelParams::variational(2, 1.5, 2.0).unwrap();
        let b = EnergyBreakdown { kinetic: 1.0, nq: 0.0, np: 0.0, mass: 2.0, total: -0.5 };
        let sw = standing_wave_multiplier(&b, &p2).unwrap();
        assert!((sw.omega - 1.0).abs() < 1e-15 && sw.positive_if_e_nonpositive);
        let b = EnergyBreakdown { kinetic: 0.0, nq: 0.0, np: 0.0, mass: 1.0, total: 0.0 };
        let sw = standing_wave_multiplier(&b, &p1).unwrap();
        assert!(sw.degenerate && sw.omega == 0.0);
        let b = EnergyBreakdown { kinetic: 1.0, nq: 0.0, np: 0.0, mass: 0.0, total: 0.0 };
        assert!(standing_wave_multiplier(&b, &p1).is_err());
    }

    #[test]
    fn standing_wave_system_is_consistent() {
        let p = params();
        let (b, omega) = standing_wave_system(&p, 2.0, 0.7, 1.3).unwrap();
        let c = CoeffTriple::energy(&p);
        assert!(b.total < 0.0);
        assert!(pohozaev_of(&b, &p, &c).abs() < 1e-13);
        let sw = standing_wave_multiplier(&b, &p).unwrap();
        assert!((sw.omega - omega).abs() < 1e-13 && omega > 0.0);
        assert!(standing_wave_system(&p, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gn_quotient_cubic_gaussian() {
        let g = make_grid(1, 1024, 40.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 1.0)).unwrap();
        let p = ModelParams::variational(1, 2.0, 3.0).unwrap();
        // N_3 = √(π/2), K = √π/2, M = √π; θ = 1
        let expect = (PI / 2.0).sqrt() / ((PI.sqrt() / 2.0).sqrt() * PI.sqrt().powf(1.5));
        assert!((gn_quotient(&u, &p).unwrap() - expect).abs() < 1e-12);
        assert!(gn_quotient(&Field::zeros(&g), &p).is_err());
    }

    #[test]
    fn presets() {
        let p = params();
        let e = CoeffTriple::energy(&p);
        assert_eq!((e.alpha, e.beta, e.gamma), (0.5, 0.2, 1.0 / 5.5));
        let sw = CoeffTriple::standing_wave(&p);
        assert!((sw.beta - 0.3).abs() < 1e-15 && (sw.gamma - 3.5 / 11.0).abs() < 1e-15);
        let star = CoeffTriple::scattering_mass(&p).unwrap();
        assert!((star.beta - 0.5 * 0.75f64.powi(-2) / 5.0).abs() < 1e-15);
        assert!(CoeffTriple::rho1(&p, 0.5).is_err());
        assert!(CoeffTriple::rho2(&p, 0.0).is_err());
    }
}
