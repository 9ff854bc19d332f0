//! Closed-form layer: Λ reduction, f(A), F(x) and the threshold ordering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{delta_exponents, CoeffTriple, ModelParams};

/// `Λ(α,β,γ) = γ / (α^{1−r} β^{r})`, `r = δ(p)/δ(q)`.
pub fn lambda_reduction(coeffs: &CoeffTriple, params: &ModelParams) -> f64 {
    let r = params.delta_ratio();
    coeffs.gamma / (coeffs.alpha.powf(1.0 - r) * coeffs.beta.powf(r))
}

/// `f(A) = (1 − δp/A)(1 − δq/A)^{−δp/δq}` from the exponents directly.
pub fn f_from_deltas(a: f64, dq: f64, dp: f64) -> f64 {
    (1.0 - dp / a) * (1.0 - dq / a).powf(-dp / dq)
}

pub fn f_of_a(a: f64, params: &ModelParams) -> Result<f64> {
    let (dq, dp) = delta_exponents(params);
    if !(a > dq && a <= 1.0) {
        return Err(Error::domain(format!("f(A) needs δ(q) = {dq} < A <= 1, got {a}")));
    }
    Ok(f_from_deltas(a, dq, dp))
}

/// `F(x) = (1 − δq/x)^{−δp/δq}(1 − δp/x)`, defined for `x >= 1`.
pub fn big_f_of_x(x: f64, params: &ModelParams) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::domain(format!("F(x) needs x >= 1, got {x}")));
    }
    let (dq, dp) = delta_exponents(params);
    Ok(f_from_deltas(x, dq, dp))
}

/// `2^{1−r}(q+1)^r/(p+1)`: the common factor of the three Λ values below.
fn ordering_constant(params: &ModelParams) -> f64 {
    let r = params.delta_ratio();
    2f64.powf(1.0 - r) * (params.q + 1.0).powf(r) / (params.p + 1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderingReport {
    pub d: usize,
    pub q: f64,
    pub p: f64,
    /// Λ for the ρ* triple
    pub lambda_star: f64,
    /// Λ for the standing-wave triple
    pub lambda_sw: f64,
    /// Λ for the energy triple
    pub lambda_e: f64,
    pub margin_star_sw: f64,
    pub margin_sw_e: f64,
    /// `Λ_star/Λ_sw − 1` and `Λ_sw/Λ_e − 1`
    pub rel_margin_star_sw: f64,
    pub rel_margin_sw_e: f64,
    pub strictly_decreasing: bool,
}

/// Larger Λ means a smaller threshold, so `Λ* > Λ_SW > Λ_E` is the
/// ordering `ρ* < ρ_SW < ρ_E`.
pub fn ordering_check(params: &ModelParams) -> Result<OrderingReport> {
    if !params.is_scattering_admissible() {
        return Err(Error::domain("ordering check needs q > 1 + 2/d"));
    }
    let lambda_star = lambda_reduction(&CoeffTriple::scattering_mass(params)?, params);
    let lambda_sw = lambda_reduction(&CoeffTriple::standing_wave(params), params);
    let lambda_e = lambda_reduction(&CoeffTriple::energy(params), params);
    let margin_star_sw = lambda_star - lambda_sw;
    let margin_sw_e = lambda_sw - lambda_e;
    Ok(OrderingReport {
        d: params.d,
        q: params.q,
        p: params.p,
        lambda_star,
        lambda_sw,
        lambda_e,
        margin_star_sw,
        margin_sw_e,
        rel_margin_star_sw: lambda_star / lambda_sw - 1.0,
        rel_margin_sw_e: lambda_sw / lambda_e - 1.0,
        strictly_decreasing: margin_star_sw > 0.0 && margin_sw_e > 0.0,
    })
}

/// The same three values written through F: `const·F(1)`, `const·F(2)`, `const`.
pub fn ordering_via_f(params: &ModelParams) -> Result<[f64; 3]> {
    let c = ordering_constant(params);
    Ok([c * big_f_of_x(1.0, params)?, c * big_f_of_x(2.0, params)?, c])
}

/// Right-hand side of the admissibility bound on `A` used in the scattering
/// argument: `(1−q)/2·(2 − d(q−1)/2) + (q+1)/2`.
pub fn cond_aqp_bound(params: &ModelParams) -> f64 {
    let (d, q) = (params.d as f64, params.q);
    (1.0 - q) / 2.0 * (2.0 - d * (q - 1.0) / 2.0) + (q + 1.0) / 2.0
}

pub fn cond_aqp(a: f64, params: &ModelParams) -> bool {
    a < cond_aqp_bound(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::scattering(1, 4.0, 4.5).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let p = params();
        let c = CoeffTriple::new(1.0, 1.0, 0.37).unwrap();
        assert_eq!(lambda_reduction(&c, &p), 0.37);
        let c = CoeffTriple::new(4.0, 1.0, 2.0).unwrap();
        assert!((lambda_reduction(&c, &p) - 1.0).abs() < 1e-15);
        let c = CoeffTriple::new(0.3, 0.7, 1.9).unwrap();
        let a = lambda_reduction(&c, &p);
        let b = lambda_reduction(&c.scaled(13.0), &p);
        assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn f_values() {
        let p = params();
        assert!((f_of_a(1.0, &p).unwrap() - 0.75 / 0.5f64.sqrt()).abs() < 1e-14);
        assert!((f_of_a(0.75, &p).unwrap() - 2.0 / 3.0 * 3f64.sqrt()).abs() < 1e-14);
        assert!((big_f_of_x(2.0, &p).unwrap() - 0.875 / 0.75f64.sqrt()).abs() < 1e-14);
        assert!(f_of_a(0.5, &p).is_err());
        assert!(big_f_of_x(0.9, &p).is_err());
    }

    #[test]
    fn ordering_default_params() {
        let p = params();
        let r = ordering_check(&p).unwrap();
        assert!(r.strictly_decreasing);
        assert!(r.margin_star_sw > 1e-3 && r.margin_sw_e > 1e-3);
        let v = ordering_via_f(&p).unwrap();
        assert!((v[0] - r.lambda_star).abs() < 1e-14);
        assert!((v[1] - r.lambda_sw).abs() < 1e-14);
        assert!((v[2] - r.lambda_e).abs() < 1e-14);
    }

    #[test]
    fn cond_aqp_above_one() {
        for q in [3.01, 3.5, 4.0, 4.9] {
            let p = ModelParams::scattering(1, q, 4.95).unwrap();
            assert!(cond_aqp_bound(&p) > 1.0);
        }
    }
}
