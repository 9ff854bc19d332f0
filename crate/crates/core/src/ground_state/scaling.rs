use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::AnalyticProfile;

/// Result of `u ↦ λ^a u(λx)` with the predicted growth of each integral.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub profile: AnalyticProfile,
    pub exponent_a: f64,
    pub lambda: f64,
    pub d: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScaleFactors {
    pub mass: f64,
    pub kinetic: f64,
}

impl Rescaled {
    pub fn factors(&self) -> ScaleFactors {
        ScaleFactors { mass: self.mass_factor(), kinetic: self.kinetic_factor() }
    }

    /// `λ^{2a−d}`
    pub fn mass_factor(&self) -> f64 {
        self.lambda.powf(2.0 * self.exponent_a - self.d as f64)
    }

    /// `λ^{2a−d+2}`
    pub fn kinetic_factor(&self) -> f64 {
        self.lambda.powf(2.0 * self.exponent_a - self.d as f64 + 2.0)
    }

    /// Factor for `∫|u|^s`: `λ^{as−d}`.
    pub fn lp_power_factor(&self, s: f64) -> f64 {
        self.lambda.powf(self.exponent_a * s - self.d as f64)
    }
}

/// `λ^a u(λx)`: amplitude times `λ^a`, width over `λ`, chirp times `λ²`,
/// centre over `λ`. For snapshots the width is a dilation factor.
pub fn rescale(profile: &AnalyticProfile, d: usize, exponent_a: f64, lambda: f64) -> Result<Rescaled> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("scale λ = {lambda} must be positive")));
    }
    profile.validate()?;
    let mut out = profile.clone();
    out.amplitude *= lambda.powf(exponent_a);
    out.width /= lambda;
    out.chirp *= lambda * lambda;
    for c in out.center.iter_mut() {
        *c /= lambda;
    }
    Ok(Rescaled { profile: out, exponent_a, lambda, d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eval_profile, gradient_sq_norm, make_grid};

    #[test]
    fn mass_preserving_and_kinetic_factor() {
        let g = make_grid(1, 2048, 80.0).unwrap();
        let base = AnalyticProfile::sech(1.3, 1.5).with_chirp(0.1);
        let (u, _) = eval_profile(&g, &base).unwrap();
        for (a, lambda) in [(0.5, 1.7), (1.0, 0.6), (2.0 / 3.5, 2.2)] {
            let r = rescale(&base, 1, a, lambda).unwrap();
            let (v, _) = eval_profile(&g, &r.profile).unwrap();
            assert!((v.mass() / u.mass() - r.mass_factor()).abs() < 1e-6 * r.mass_factor());
            let ratio = gradient_sq_norm(&v) / gradient_sq_norm(&u);
            assert!((ratio - r.kinetic_factor()).abs() < 1e-6 * r.kinetic_factor());
            let ratio = v.lp_power(5.0) / u.lp_power(5.0);
            assert!((ratio - r.lp_power_factor(5.0)).abs() < 1e-6 * ratio);
        }
        assert_eq!(rescale(&base, 1, 0.5, 3.0).unwrap().mass_factor(), 1.0);
        assert_eq!(rescale(&base, 1, 1.0, 3.0).unwrap().mass_factor(), 3.0);
        assert!(rescale(&base, 1, 1.0, 0.0).is_err());
    }
}
