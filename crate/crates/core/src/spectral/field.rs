use rustfft::num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Complex field sampled on a [`Grid`]. Values are always finite.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.len_total() {
            return Err(Error::Field(format!("{} values for a grid of {} points", values.len(), grid.len_total())));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Field(format!("non-finite value at index {i}")));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Field {
        Field { values: vec![Complex64::default(); grid.len_total()], grid: grid.clone() }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> Complex64) -> Result<Field> {
        let values = (0..grid.len_total()).map(|i| f(grid.point(i))).collect();
        Field::new(grid.clone(), values)
    }

    /// Field from unnormalized DFT coefficients.
    pub fn from_spectrum(grid: &Grid, mut spec: Vec<Complex64>) -> Result<Field> {
        grid.inverse(&mut spec);
        Field::new(grid.clone(), spec)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Unnormalized DFT coefficients.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.values.clone();
        self.grid.forward(&mut s);
        s
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn conj(&self) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|v| v.conj()).collect() }
    }

    /// Multiply by `e^{i c |x|^2}`.
    pub fn chirped(&self, c: f64) -> Field {
        let values =
            self.values.iter().zip(self.grid.r2()).map(|(v, r2)| v * Complex64::from_polar(1.0, c * r2)).collect();
        Field { grid: self.grid.clone(), values }
    }

    /// `‖u‖₂²`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫|u|^r`, without the root.
    pub fn lp_power(&self, r: f64) -> f64 {
        let h = self.grid.cell_volume();
        if r == 2.0 {
            return self.mass();
        }
        let half = r / 2.0;
        self.values.iter().map(|v| v.norm_sqr().powf(half)).sum::<f64>() * h
    }

    /// `‖u − v‖₂`.
    pub fn distance(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Spectral derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Vec<Complex64> {
        assert!(axis < self.grid.dim());
        let mut s = self.spectrum();
        for (i, v) in s.iter_mut().enumerate() {
            *v *= Complex64::new(0.0, self.grid.k_component_odd(i, axis));
        }
        self.grid.inverse(&mut s);
        s
    }

    /// Fraction of the mass in the outer shell `max_i |x_i| >= 3L/8`.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let edge = 0.375 * self.grid.length();
        let d = self.grid.dim();
        let (mut shell, mut total) = (0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let w = v.norm_sqr();
            total += w;
            let p = self.grid.point(i);
            if p[..d].iter().any(|x| x.abs() >= edge) {
                shell += w;
            }
        }
        if total > 0.0 {
            shell / total
        } else {
            0.0
        }
    }

    /// Fraction of spectral energy in modes with some `|k_i| > frac · k_nyquist`.
    pub fn spectral_tail_fraction(&self, frac: f64) -> f64 {
        let s = self.spectrum();
        let cut = frac * self.grid.nyquist();
        let ks = self.grid.wavenumbers();
        let d = self.grid.dim();
        let (mut tail, mut total) = (0.0, 0.0);
        for (i, v) in s.iter().enumerate() {
            let w = v.norm_sqr();
            total += w;
            let idx = self.grid.index(i);
            if idx[..d].iter().any(|&j| ks[j].abs() > cut) {
                tail += w;
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    /// RMS radius `sqrt(∫|x|²|u|² / ∫|u|²)`.
    pub fn rms_width(&self) -> f64 {
        let m = self.mass();
        if m == 0.0 {
            return 0.0;
        }
        weighted_l2(self) / m.sqrt()
    }
}

/// `(Σ|u_j|^r h^d)^{1/r}`.
pub fn lp_norm(field: &Field, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::domain(format!("L^r norm needs r >= 1, got {r}")));
    }
    Ok(field.lp_power(r).powf(1.0 / r))
}

/// `‖∇u‖₂²` via the multiplier |k|².
pub fn gradient_sq_norm(field: &Field) -> f64 {
    let s = field.spectrum();
    let g = field.grid();
    let norm = g.cell_volume() / g.len_total() as f64;
    s.iter().zip(g.k2()).map(|(v, k2)| k2 * v.norm_sqr()).sum::<f64>() * norm
}

/// `‖|x| u‖₂` with box-centred coordinates.
pub fn weighted_l2(field: &Field) -> f64 {
    let s: f64 = field.values().iter().zip(field.grid().r2()).map(|(v, r2)| r2 * v.norm_sqr()).sum();
    (s * field.grid().cell_volume()).sqrt()
}

/// `‖(1+|k|²)^{s/2} û‖₂` by discrete Plancherel.
pub fn sobolev_norm(field: &Field, s: f64) -> Result<f64> {
    if !(-4.0..=4.0).contains(&s) {
        return Err(Error::domain(format!("Sobolev index {s} outside [-4, 4]")));
    }
    let spec = field.spectrum();
    let g = field.grid();
    let norm = g.cell_volume() / g.len_total() as f64;
    let sum: f64 = spec.iter().zip(g.k2()).map(|(v, k2)| (1.0 + k2).powf(s) * v.norm_sqr()).sum();
    Ok((sum * norm).sqrt())
}

/// `P = Im ∫ ū ∇u`, one component per axis.
///
/// The conjugate sits on the field, not on the gradient; flip the sign for
/// the other placement.
pub fn momentum(field: &Field) -> Vec<f64> {
    let g = field.grid();
    let spec = field.spectrum();
    let norm = g.cell_volume() / g.len_total() as f64;
    (0..g.dim())
        .map(|axis| spec.iter().enumerate().map(|(i, v)| g.k_component_odd(i, axis) * v.norm_sqr()).sum::<f64>() * norm)
        .collect()
}

pub const MOMENTUM_CONVENTION: &str = "P = Im int conj(psi) grad(psi) dx";
