use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::field::Field;
use super::grid::Grid;
use super::interp::sample_tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum ProfileKind {
    /// `a · exp(-|x|²/(2w²))`
    Gaussian,
    /// `a · sech(|x|/w)`
    Sech,
    /// `a · S(x/w)` for a stored field `S` (sampled band-limited, zero outside its box)
    Snapshot(Arc<Field>),
}

#[derive(Clone, Debug)]
pub struct AnalyticProfile {
    pub kind: ProfileKind,
    pub amplitude: f64,
    pub width: f64,
    /// coefficient `c` of the phase `e^{ic|x-x0|²}`
    pub chirp: f64,
    pub center: [f64; 3],
}

/// Sampling diagnostics for [`eval_profile`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProfileFlags {
    pub under_resolved: bool,
    pub uncontained: bool,
}

impl ProfileFlags {
    pub fn any(&self) -> bool {
        self.under_resolved || self.uncontained
    }
}

impl AnalyticProfile {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::with_kind(ProfileKind::Gaussian, amplitude, width)
    }

    pub fn sech(amplitude: f64, width: f64) -> Self {
        Self::with_kind(ProfileKind::Sech, amplitude, width)
    }

    pub fn snapshot(field: Field) -> Self {
        Self::with_kind(ProfileKind::Snapshot(Arc::new(field)), 1.0, 1.0)
    }

    fn with_kind(kind: ProfileKind, amplitude: f64, width: f64) -> Self {
        AnalyticProfile { kind, amplitude, width, chirp: 0.0, center: [0.0; 3] }
    }

    pub fn with_chirp(mut self, c: f64) -> Self {
        self.chirp = c;
        self
    }

    pub fn with_center(mut self, center: [f64; 3]) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::domain(format!("profile amplitude {} must be positive", self.amplitude)));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::domain(format!("profile width {} must be positive", self.width)));
        }
        if !self.chirp.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("profile chirp and centre must be finite"));
        }
        Ok(())
    }

    /// Length scale used for the resolution and containment flags.
    pub fn characteristic_width(&self) -> f64 {
        match &self.kind {
            ProfileKind::Snapshot(s) => self.width * s.rms_width(),
            _ => self.width,
        }
    }

    /// Analytic mass `‖u‖₂²` for the Gaussian kind.
    pub fn gaussian_mass(d: usize, amplitude: f64, width: f64) -> f64 {
        amplitude * amplitude * (std::f64::consts::PI * width * width).powf(d as f64 / 2.0)
    }
}

/// Sample `profile` on `grid`. The flags report `w < 4h` or `w > L/8`.
pub fn eval_profile(grid: &Grid, profile: &AnalyticProfile) -> Result<(Field, ProfileFlags)> {
    profile.validate()?;
    let d = grid.dim();
    let (a, w, c, x0) = (profile.amplitude, profile.width, profile.chirp, profile.center);
    let shifted_r2 = |p: [f64; 3]| -> f64 { (0..d).map(|i| (p[i] - x0[i]).powi(2)).sum() };
    let field = match &profile.kind {
        ProfileKind::Gaussian => Field::from_fn(grid, |p| {
            let r2 = shifted_r2(p);
            Complex64::from_polar(a * (-r2 / (2.0 * w * w)).exp(), c * r2)
        })?,
        ProfileKind::Sech => Field::from_fn(grid, |p| {
            let r2 = shifted_r2(p);
            Complex64::from_polar(a / (r2.sqrt() / w).cosh(), c * r2)
        })?,
        ProfileKind::Snapshot(snap) => {
            if snap.grid().dim() != d {
                return Err(Error::domain("snapshot dimension differs from target grid"));
            }
            let coords: Vec<Vec<f64>> = (0..d).map(|i| grid.axis().iter().map(|x| (x - x0[i]) / w).collect()).collect();
            let vals = sample_tensor(snap, &coords);
            let vals = vals
                .into_iter()
                .enumerate()
                .map(|(i, v)| a * v * Complex64::from_polar(1.0, c * shifted_r2(grid.point(i))))
                .collect();
            Field::new(grid.clone(), vals)?
        }
    };
    let cw = profile.characteristic_width();
    let flags = ProfileFlags { under_resolved: cw < 4.0 * grid.spacing(), uncontained: cw > grid.length() / 8.0 };
    Ok((field, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_mass_matches_closed_form() {
        let g = make_grid(1, 1024, 40.0).unwrap();
        let (u, flags) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 1.0)).unwrap();
        assert!((u.mass() - PI.sqrt()).abs() < 1e-8);
        assert!(!flags.any());
        let (v, _) = eval_profile(&g, &AnalyticProfile::gaussian(0.5, 1.0)).unwrap();
        assert!((v.mass() - 0.25 * PI.sqrt()).abs() < 1e-12);
        assert!((AnalyticProfile::gaussian_mass(1, 1.0, 1.0) - PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn chirp_only_changes_phase() {
        let g = make_grid(1, 256, 30.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 1.0)).unwrap();
        let (v, _) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 1.0).with_chirp(0.25)).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn sech_mass() {
        // ∫ sech²(x/w) dx = 2w
        let g = make_grid(1, 1024, 80.0).unwrap();
        let (u, _) = eval_profile(&g, &AnalyticProfile::sech(1.0, 2.0)).unwrap();
        assert!((u.mass() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn flags_and_validation() {
        let g = make_grid(1, 64, 64.0).unwrap();
        let (_, f) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 2.0)).unwrap();
        assert!(f.under_resolved && !f.uncontained);
        let (_, f) = eval_profile(&g, &AnalyticProfile::gaussian(1.0, 10.0)).unwrap();
        assert!(f.uncontained);
        assert!(eval_profile(&g, &AnalyticProfile::gaussian(0.0, 1.0)).is_err());
        assert!(eval_profile(&g, &AnalyticProfile::gaussian(1.0, -1.0)).is_err());
    }

    #[test]
    fn snapshot_dilation() {
        let src = make_grid(1, 256, 20.0).unwrap();
        let (u, _) = eval_profile(&src, &AnalyticProfile::gaussian(1.0, 1.0)).unwrap();
        let dst = make_grid(1, 512, 40.0).unwrap();
        let mut prof = AnalyticProfile::snapshot(u);
        prof.width = 2.0;
        prof.amplitude = 3.0;
        let (v, _) = eval_profile(&dst, &prof).unwrap();
        let (w, _) = eval_profile(&dst, &AnalyticProfile::gaussian(3.0, 2.0)).unwrap();
        assert!(v.distance(&w) < 1e-10);
    }
}
