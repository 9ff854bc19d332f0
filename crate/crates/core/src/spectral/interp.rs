//! Band-limited (trigonometric) interpolation of grid fields at off-grid points.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::field::Field;

/// Sample the trigonometric interpolant of `field` on the tensor product of
/// `coords[axis]`. Points outside the source box map to zero rather than to a
/// periodic image. Output is row-major with `coords[a].len()` points on axis `a`.
pub fn sample_tensor(field: &Field, coords: &[Vec<f64>]) -> Vec<Complex64> {
    let g = field.grid();
    let d = g.dim();
    assert_eq!(coords.len(), d, "one coordinate list per axis");
    let n = g.n();
    let len = g.length();
    let mut shape: Vec<usize> = vec![n; d];
    let mut data = field.values().to_vec();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); n];
    for axis in 0..d {
        let m = coords[axis].len();
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut out_shape = shape.clone();
        out_shape[axis] = m;
        let mut out = vec![Complex64::default(); outer * m * inner];
        let table = PhaseTable::new(&coords[axis], n, len);
        for o in 0..outer {
            for i in 0..inner {
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[(o * n + j) * inner + i];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, y) in table.eval(&line).into_iter().enumerate() {
                    out[(o * m + t) * inner + i] = y;
                }
            }
        }
        data = out;
        shape = out_shape;
    }
    data
}

struct PhaseTable {
    n: usize,
    // e^{i k θ_t} for k = 0..=n/2, per target point; None when outside the box
    rows: Vec<Option<Vec<Complex64>>>,
}

impl PhaseTable {
    fn new(points: &[f64], n: usize, len: f64) -> Self {
        let half = n / 2;
        let rows = points
            .iter()
            .map(|&y| {
                if y < -len / 2.0 || y > len / 2.0 {
                    return None;
                }
                let theta = 2.0 * PI * (y + len / 2.0) / len;
                let w = Complex64::from_polar(1.0, theta);
                let mut row = Vec::with_capacity(half + 1);
                let mut cur = Complex64::new(1.0, 0.0);
                for k in 0..=half {
                    if k % 32 == 0 {
                        cur = Complex64::from_polar(1.0, k as f64 * theta);
                    }
                    row.push(cur);
                    cur *= w;
                }
                Some(row)
            })
            .collect();
        PhaseTable { n, rows }
    }

    /// Evaluate from unnormalized DFT coefficients.
    fn eval(&self, coefs: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let half = n / 2;
        let scale = 1.0 / n as f64;
        self.rows
            .iter()
            .map(|row| match row {
                None => Complex64::default(),
                Some(e) => {
                    let mut s = coefs[0];
                    for k in 1..half {
                        s += coefs[k] * e[k] + coefs[n - k] * e[k].conj();
                    }
                    s += coefs[half] * e[half].re;
                    s * scale
                }
            })
            .collect()
    }
}
