//! Cholesky factorisation of symmetric positive-definite banded matrices.

/// Lower band stored row by row: entry `(i, i - d)` at `i * (bw + 1) + d`.
#[derive(Debug, Clone)]
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)] = v;
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + (i - j)]
    }

    /// In-place factorisation `A = L Lᵀ`. Returns `false` if a pivot is not
    /// strictly positive.
    pub fn factor(&mut self) -> bool {
        let w = self.bw + 1;
        for i in 0..self.n {
            let start = i.saturating_sub(self.bw);
            for j in start..=i {
                let mut s = self.at(i, j);
                let row_i = i * w;
                let row_j = j * w;
                for m in start..j {
                    s -= self.data[row_i + (i - m)] * self.data[row_j + (j - m)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return false;
                    }
                    self.data[row_i] = s.sqrt();
                } else {
                    self.data[row_i + (i - j)] = s / self.data[row_j];
                }
            }
        }
        true
    }

    /// Solves `L Lᵀ x = b` in place after [`factor`](Self::factor).
    pub fn solve(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let start = i.saturating_sub(self.bw);
            let mut s = x[i];
            for m in start..i {
                s -= self.data[i * w + (i - m)] * x[m];
            }
            x[i] = s / self.data[i * w];
        }
        for i in (0..self.n).rev() {
            let end = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for m in i + 1..=end {
                s -= self.data[m * w + (m - i)] * x[m];
            }
            x[i] = s / self.data[i * w];
        }
    }
}
