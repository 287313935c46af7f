//! Spectral second derivative along z on cell-centred nodes.
//!
//! Each radial column is extended oddly (Dirichlet: zero one step beyond
//! both ends) or evenly (Neumann: mirror about the outer faces) to a periodic
//! sequence. Multipliers even in `k` keep that symmetry, so one FFT pair per
//! column applies any function of `∂²_z`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::Boundary;

#[derive(Clone)]
pub struct AxialSpectrum {
    n: usize,
    boundary: Boundary,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl fmt::Debug for AxialSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AxialSpectrum")
            .field("n", &self.n)
            .field("boundary", &self.boundary)
            .finish()
    }
}

impl AxialSpectrum {
    pub fn new(n: usize, dz: f64, boundary: Boundary) -> Self {
        let m = match boundary {
            Boundary::Dirichlet => 2 * (n + 1),
            Boundary::Neumann => 2 * n,
        };
        let mut planner = FftPlanner::new();
        let k2 = (0..m)
            .map(|q| {
                let s = if q <= m / 2 { q as f64 } else { q as f64 - m as f64 };
                let k = 2.0 * std::f64::consts::PI * s / (m as f64 * dz);
                k * k
            })
            .collect();
        Self {
            n,
            boundary,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            k2,
        }
    }

    /// Length of the periodic extension.
    pub fn period(&self) -> usize {
        self.k2.len()
    }

    /// `k²` of every frequency of the extension, in FFT order.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Multiplier `f(k²)` with the inverse-transform normalisation folded in.
    pub fn multiplier<T, F>(&self, f: F) -> Vec<T>
    where
        F: Fn(f64) -> T,
        T: std::ops::Div<f64, Output = T>,
    {
        let m = self.period() as f64;
        self.k2.iter().map(|&k| f(k) / m).collect()
    }

    fn extend(&self, get: impl Fn(usize) -> C64, out: &mut [C64]) {
        let n = self.n;
        match self.boundary {
            Boundary::Dirichlet => {
                out[0] = C64::new(0.0, 0.0);
                out[n + 1] = C64::new(0.0, 0.0);
                for j in 0..n {
                    let v = get(j);
                    out[j + 1] = v;
                    out[2 * n + 1 - j] = -v;
                }
            }
            Boundary::Neumann => {
                for j in 0..n {
                    let v = get(j);
                    out[j] = v;
                    out[2 * n - 1 - j] = v;
                }
            }
        }
    }

    fn offset(&self) -> usize {
        match self.boundary {
            Boundary::Dirichlet => 1,
            Boundary::Neumann => 0,
        }
    }

    /// Applies the multiplier in place to every column of a field stored
    /// with `width` columns running fastest.
    pub fn apply(&self, data: &mut [C64], width: usize, multiplier: &[C64]) {
        let m = self.period();
        let mut buf = vec![C64::new(0.0, 0.0); m * width];
        for (i, chunk) in buf.chunks_exact_mut(m).enumerate() {
            self.extend(|j| data[j * width + i], chunk);
        }
        self.transform(&mut buf, |chunk| {
            chunk.iter_mut().zip(multiplier).for_each(|(v, f)| *v *= f)
        });
        let off = self.offset();
        for (i, chunk) in buf.chunks_exact(m).enumerate() {
            for j in 0..self.n {
                data[j * width + i] = chunk[j + off];
            }
        }
    }

    /// Real-field version writing into `out`; two columns share one complex
    /// transform since the multiplier is real.
    pub fn apply_real(&self, data: &[f64], out: &mut [f64], width: usize, multiplier: &[f64]) {
        let m = self.period();
        let pairs = width.div_ceil(2);
        let mut buf = vec![C64::new(0.0, 0.0); m * pairs];
        for (p, chunk) in buf.chunks_exact_mut(m).enumerate() {
            let (a, b) = (2 * p, 2 * p + 1);
            self.extend(
                |j| C64::new(data[j * width + a], if b < width { data[j * width + b] } else { 0.0 }),
                chunk,
            );
        }
        self.transform(&mut buf, |chunk| {
            chunk.iter_mut().zip(multiplier).for_each(|(v, f)| *v *= f)
        });
        let off = self.offset();
        for (p, chunk) in buf.chunks_exact(m).enumerate() {
            let (a, b) = (2 * p, 2 * p + 1);
            for j in 0..self.n {
                let v = chunk[j + off];
                out[j * width + a] = v.re;
                if b < width {
                    out[j * width + b] = v.im;
                }
            }
        }
    }

    fn transform<F: Fn(&mut [C64])>(&self, buf: &mut [C64], scale: F) {
        let m = self.period();
        let mut scratch = vec![
            C64::new(0.0, 0.0);
            self.forward
                .get_inplace_scratch_len()
                .max(self.inverse.get_inplace_scratch_len())
        ];
        self.forward.process_with_scratch(buf, &mut scratch);
        buf.chunks_exact_mut(m).for_each(&scale);
        self.inverse.process_with_scratch(buf, &mut scratch);
    }
}
