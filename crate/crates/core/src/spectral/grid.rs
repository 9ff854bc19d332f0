use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic box `[-L/2, L/2)^d` with `n` points per axis.
///
/// Cloning is cheap: coordinate tables and FFT plans are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<Inner>,
}

struct Inner {
    d: usize,
    n: usize,
    len: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    r2: Vec<f64>,
    k2: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

pub fn make_grid(d: usize, n: usize, len: f64) -> Result<Grid> {
    Grid::new(d, n, len)
}

impl Grid {
    pub fn new(d: usize, n: usize, len: f64) -> Result<Grid> {
        if !(1..=3).contains(&d) {
            return Err(Error::Grid(format!("dimension {d} not supported (1, 2 or 3)")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("n = {n} must be a power of two >= 8")));
        }
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::Grid(format!("box length {len} must be positive")));
        }
        let h = len / n as f64;
        let x: Vec<f64> = (0..n).map(|j| -len / 2.0 + j as f64 * h).collect();
        let dk = 2.0 * PI / len;
        let k: Vec<f64> = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
                m as f64 * dk
            })
            .collect();
        let total = n.pow(d as u32);
        let mut r2 = vec![0.0; total];
        let mut k2 = vec![0.0; total];
        let mut idx = [0usize; 3];
        for flat in 0..total {
            unflatten(flat, n, d, &mut idx);
            let (mut sx, mut sk) = (0.0, 0.0);
            for &i in &idx[..d] {
                sx += x[i] * x[i];
                sk += k[i] * k[i];
            }
            r2[flat] = sx;
            k2[flat] = sk;
        }
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid { inner: Arc::new(Inner { d, n, len, x, k, r2, k2, fwd, inv }) })
    }

    pub fn dim(&self) -> usize {
        self.inner.d
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.len
    }

    pub fn spacing(&self) -> f64 {
        self.inner.len / self.inner.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.d as i32)
    }

    pub fn len_total(&self) -> usize {
        self.inner.r2.len()
    }

    /// Coordinates along one axis.
    pub fn axis(&self) -> &[f64] {
        &self.inner.x
    }

    /// Angular wavenumbers along one axis in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.k
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// |x|^2 at every point (row-major, last axis fastest).
    pub fn r2(&self) -> &[f64] {
        &self.inner.r2
    }

    /// |k|^2 at every mode.
    pub fn k2(&self) -> &[f64] {
        &self.inner.k2
    }

    /// Per-axis indices of a flat index.
    pub fn index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        unflatten(flat, self.inner.n, self.inner.d, &mut idx);
        idx
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.index(flat);
        let mut p = [0.0; 3];
        for a in 0..self.inner.d {
            p[a] = self.inner.x[idx[a]];
        }
        p
    }

    /// Wavenumber component along `axis` at a flat mode index, with the
    /// Nyquist mode mapped to zero (odd derivatives).
    pub fn k_component_odd(&self, flat: usize, axis: usize) -> f64 {
        let i = self.index(flat)[axis];
        if i == self.inner.n / 2 {
            0.0
        } else {
            self.inner.k[i]
        }
    }

    /// In-place unnormalized forward transform over all axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.fwd);
    }

    /// In-place inverse transform including the 1/n^d factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inv);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let Inner { d, n, .. } = *self.inner;
        assert_eq!(data.len(), self.len_total(), "buffer does not match grid");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if d == 1 {
            return;
        }
        let mut line = vec![Complex64::default(); n];
        for axis in 0..d - 1 {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + off + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + off + j * stride] = *v;
                    }
                }
            }
        }
    }
}

fn unflatten(mut flat: usize, n: usize, d: usize, idx: &mut [usize; 3]) {
    for a in (0..d).rev() {
        idx[a] = flat % n;
        flat /= n;
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.n() == other.n() && self.length() == other.length()
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("d", &self.dim()).field("n", &self.n()).field("L", &self.length()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_coordinates() {
        let g = make_grid(1, 8, 16.0).unwrap();
        assert_eq!(g.axis(), &[-8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0]);
        assert!((g.wavenumbers()[1] - PI / 8.0).abs() < 1e-15);
        assert_eq!(g.cell_volume(), 2.0);
        assert_eq!(g.wavenumbers()[4], -4.0 * PI / 8.0);
    }

    #[test]
    fn two_dimensional_counts() {
        let g = make_grid(2, 16, 32.0).unwrap();
        assert_eq!(g.len_total(), 256);
        assert_eq!(g.cell_volume(), 4.0);
        assert_eq!(g.point(17), [-14.0, -14.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_grid(1, 100, 1.0).is_err());
        assert!(make_grid(1, 4, 1.0).is_err());
        assert!(make_grid(1, 64, 0.0).is_err());
        assert!(make_grid(4, 64, 1.0).is_err());
    }

    #[test]
    fn transform_roundtrip_3d() {
        let g = make_grid(3, 8, 5.0).unwrap();
        let orig: Vec<Complex64> =
            (0..g.len_total()).map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos())).collect();
        let mut data = orig.clone();
        g.forward(&mut data);
        g.inverse(&mut data);
        let err: f64 = data.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn single_mode_lands_in_one_bin_2d() {
        let g = make_grid(2, 16, 2.0 * PI).unwrap();
        let mut data: Vec<Complex64> = (0..g.len_total())
            .map(|f| {
                let p = g.point(f);
                Complex64::from_polar(1.0, 3.0 * p[0] - 2.0 * p[1])
            })
            .collect();
        g.forward(&mut data);
        let peak =
            data.iter().map(|v| v.norm()).enumerate().fold((0, 0.0), |a, (i, v)| if v > a.1 { (i, v) } else { a });
        let idx = g.index(peak.0);
        assert_eq!(g.wavenumbers()[idx[0]], 3.0);
        assert_eq!(g.wavenumbers()[idx[1]], -2.0);
        assert!((peak.1 - 256.0).abs() < 1e-9);
    }
}
