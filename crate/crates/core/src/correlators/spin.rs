//! Collective spins, rotated quadratures and the EPR witness.

use num_complex::Complex64 as C64;

use super::{CorrelatorEngine, CorrelatorError, MultiIndex};
use crate::meanfield::{Component, Well};

/// Order of the six spin components in [`SpinMoments`].
pub const SPIN_LABELS: [&str; 6] = ["Sx_a", "Sy_a", "Sz_a", "Sx_b", "Sy_b", "Sz_b"];

/// First and symmetrized second moments of the two collective spins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMoments {
    /// `⟨S_i⟩` in the order of [`SPIN_LABELS`].
    pub mean: [f64; 6],
    /// `½⟨{S_i, S_j}⟩`.
    pub second: [[f64; 6]; 6],
    /// Rotation angles `φ_σ = atan2(⟨S_y^σ⟩, ⟨S_x^σ⟩)`.
    pub phi: [f64; 2],
    /// Atom numbers `N_a`, `N_b`.
    pub n: [u64; 2],
    /// Largest imaginary part met while assembling Hermitian averages,
    /// relative to the largest modulus.
    pub max_imag: f64,
}

impl SpinMoments {
    pub fn new(mean: [f64; 6], second: [[f64; 6]; 6], n: [u64; 2], max_imag: f64) -> Self {
        let phi = [mean[1].atan2(mean[0]), mean[4].atan2(mean[3])];
        Self {
            mean,
            second,
            phi,
            n,
            max_imag,
        }
    }

    pub fn covariance(&self) -> [[f64; 6]; 6] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.second[i][j] - self.mean[i] * self.mean[j]))
    }

    /// `⟨(S^σ)²⟩ = ⟨S_x²⟩ + ⟨S_y²⟩ + ⟨S_z²⟩`.
    pub fn casimir(&self, well: Well) -> f64 {
        let o = 3 * well.index();
        (0..3).map(|k| self.second[o + k][o + k]).sum()
    }

    /// `⟨S_xφ^σ⟩ = |⟨S_x^σ⟩ + i⟨S_y^σ⟩|`.
    pub fn transverse_length(&self, well: Well) -> f64 {
        let o = 3 * well.index();
        self.mean[o].hypot(self.mean[o + 1])
    }

    /// Moments with the roles of the two wells exchanged.
    pub fn swapped(&self) -> Self {
        let p = |i: usize| (i + 3) % 6;
        Self {
            mean: std::array::from_fn(|i| self.mean[p(i)]),
            second: std::array::from_fn(|i| std::array::from_fn(|j| self.second[p(i)][p(j)])),
            phi: [self.phi[1], self.phi[0]],
            n: [self.n[1], self.n[0]],
            max_imag: self.max_imag,
        }
    }
}

/// `A_p = ∫ψ†_α ψ_β` with both components in one well, `p = 4σ + 2ε + ε'`.
fn a_operator(p: usize) -> (Component, Component) {
    let well = if p < 4 { Well::A } else { Well::B };
    let c = well.components();
    (c[(p % 4) / 2], c[p % 2])
}

/// Coefficients of `S_x, S_y, S_z` of one well on `A_00, A_01, A_10, A_11`.
fn spin_coefficients() -> [[C64; 4]; 3] {
    let h = 0.5;
    let z = C64::new(0.0, 0.0);
    [
        [z, C64::new(h, 0.0), C64::new(h, 0.0), z],
        [z, C64::new(0.0, h), C64::new(0.0, -h), z],
        [C64::new(-h, 0.0), z, z, C64::new(h, 0.0)],
    ]
}

/// All first and symmetrized second moments of the collective spins.
pub fn spin_moments(engine: &mut CorrelatorEngine<'_>) -> SpinMoments {
    let ops: Vec<(Component, Component)> = (0..8).map(a_operator).collect();
    let mut indices: Vec<MultiIndex> = ops.iter().map(|&(a, b)| MultiIndex::one_body(a, b)).collect();
    for p in 0..8 {
        for q in p..8 {
            indices.push(MultiIndex::two_body(ops[p], ops[q]));
        }
    }
    engine.prepare(&indices);

    let one: Vec<C64> = indices[..8].iter().map(|m| engine.fock_sum_average(m)).collect();
    let mut normal = [[C64::new(0.0, 0.0); 8]; 8];
    let mut it = indices[8..].iter();
    for p in 0..8 {
        for q in p..8 {
            let v = engine.fock_sum_average(it.next().unwrap());
            normal[p][q] = v;
            normal[q][p] = v;
        }
    }
    // A_{αβ} A_{γδ} = :A_{αβ} A_{γδ}: + δ_{βγ} A_{αδ}
    let product = |p: usize, q: usize| -> C64 {
        let (_, beta) = ops[p];
        let (gamma, delta) = ops[q];
        let mut v = normal[p][q];
        if beta == gamma {
            let (alpha, _) = ops[p];
            v += one[ops.iter().position(|&o| o == (alpha, delta)).unwrap()];
        }
        v
    };

    let coef = spin_coefficients();
    // spin s = 3σ + axis, acting on A_{4σ + k}
    let expand = |s: usize| -> [(usize, C64); 4] { std::array::from_fn(|k| (4 * (s / 3) + k, coef[s % 3][k])) };

    let mut scale = 0.0f64;
    let mut imag = 0.0f64;
    let mut mean = [0.0; 6];
    for (s, m) in mean.iter_mut().enumerate() {
        let v: C64 = expand(s).iter().map(|&(p, c)| c * one[p]).sum();
        scale = scale.max(v.norm());
        imag = imag.max(v.im.abs());
        *m = v.re;
    }
    let mut second = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in i..6 {
            let mut v = C64::new(0.0, 0.0);
            for &(p, cp) in &expand(i) {
                for &(q, cq) in &expand(j) {
                    v += cp * cq * product(p, q);
                }
            }
            scale = scale.max(v.norm());
            if i / 3 != j / 3 || i == j {
                // cross-well products and squares are Hermitian as they stand
                imag = imag.max(v.im.abs());
            }
            second[i][j] = v.re;
            second[j][i] = v.re;
        }
    }
    let n = engine.input.central;
    SpinMoments::new(
        mean,
        second,
        [n.n_a(), n.n_b()],
        if scale > 0.0 { imag / scale } else { 0.0 },
    )
}

/// Moments of `(S_α^a, S_{α+π/2}^a, S_β^b, S_{β+π/2}^b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMoments {
    pub mean: [f64; 4],
    pub cov: [[f64; 4]; 4],
}

/// Quadrature `cos θ S_yφ^σ + sin θ S_z^σ` as a vector on the six spins.
fn quadrature_vector(m: &SpinMoments, well: Well, theta: f64) -> [f64; 6] {
    let o = 3 * well.index();
    let phi = m.phi[well.index()];
    let (s, c) = theta.sin_cos();
    let mut v = [0.0; 6];
    // S_yφ = -sin φ S_x + cos φ S_y
    v[o] = -c * phi.sin();
    v[o + 1] = c * phi.cos();
    v[o + 2] = s;
    v
}

pub fn quadrature_moments(m: &SpinMoments, alpha: f64, beta: f64) -> QuadratureMoments {
    let half = std::f64::consts::FRAC_PI_2;
    let vecs = [
        quadrature_vector(m, Well::A, alpha),
        quadrature_vector(m, Well::A, alpha + half),
        quadrature_vector(m, Well::B, beta),
        quadrature_vector(m, Well::B, beta + half),
    ];
    let cov6 = m.covariance();
    let mean = std::array::from_fn(|k| (0..6).map(|i| vecs[k][i] * m.mean[i]).sum());
    let cov = std::array::from_fn(|k| {
        std::array::from_fn(|l| {
            let mut acc = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    acc += vecs[k][i] * cov6[i][j] * vecs[l][j];
                }
            }
            acc
        })
    });
    QuadratureMoments { mean, cov }
}

/// Optimized witness and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprResult {
    pub e_epr: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `2⟨S_xφ^σ⟩/N_σ`.
    pub spin_len: [f64; 2],
    /// Density overlaps of the two components of each well; NaN when unknown.
    pub overlap: [f64; 2],
    /// `Δ²S_β - C²/Δ²S_α` for the two conjugate pairs.
    pub inferred_var: [f64; 2],
    pub t: f64,
}

fn inferred(q: &QuadratureMoments) -> [f64; 2] {
    let c = &q.cov;
    [
        (c[0][0] * c[2][2] - c[0][2] * c[0][2]) / c[0][0],
        (c[1][1] * c[3][3] - c[1][3] * c[1][3]) / c[1][1],
    ]
}

/// `E_EPR²` at fixed angles; infinite where a variance vanishes.
pub fn witness_squared_at(m: &SpinMoments, alpha: f64, beta: f64) -> f64 {
    let q = quadrature_moments(m, alpha, beta);
    if q.cov[0][0] <= 0.0 || q.cov[1][1] <= 0.0 {
        return f64::INFINITY;
    }
    let [i1, i2] = inferred(&q);
    let len = m.transverse_length(Well::B);
    4.0 * i1 * i2 / (len * len)
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes the witness over `(α, β) ∈ [0, π)²`.
pub fn epr_witness(m: &SpinMoments) -> Result<EprResult, CorrelatorError> {
    let len_b = m.transverse_length(Well::B);
    let min = 1e-6 * m.n[1] as f64 / 2.0;
    if !(len_b >= min) || len_b == 0.0 {
        return Err(CorrelatorError::WitnessUndefined { length: len_b, min });
    }
    let pi = std::f64::consts::PI;
    let step = pi / 90.0;
    let mut best = (0.0, 0.0, witness_squared_at(m, 0.0, 0.0));
    for i in 0..90 {
        for j in 0..90 {
            let (a, b) = (i as f64 * step, j as f64 * step);
            let v = witness_squared_at(m, a, b);
            if v < best.2 {
                best = (a, b, v);
            }
        }
    }
    let (mut a, mut b, mut v) = best;
    for _ in 0..50 {
        let prev = v;
        let (na, fa) = golden(|x| witness_squared_at(m, x, b), a - step, a + step, 1e-6);
        if fa < v {
            a = na;
            v = fa;
        }
        let (nb, fb) = golden(|y| witness_squared_at(m, a, y), b - step, b + step, 1e-6);
        if fb < v {
            b = nb;
            v = fb;
        }
        if prev - v <= 1e-15 * prev.abs() {
            break;
        }
    }
    let q = quadrature_moments(m, a, b);
    Ok(EprResult {
        e_epr: v.max(0.0).sqrt(),
        alpha: a.rem_euclid(pi),
        beta: b.rem_euclid(pi),
        spin_len: [
            2.0 * m.transverse_length(Well::A) / m.n[0] as f64,
            2.0 * len_b / m.n[1] as f64,
        ],
        overlap: [f64::NAN; 2],
        inferred_var: inferred(&q),
        t: f64::NAN,
    })
}
