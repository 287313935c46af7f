//! Exact four-mode model: frozen spatial modes, Hamiltonian diagonal in the
//! Fock basis,
//!
//! ```text
//! H = χ_a (S_z^a)² + χ_b (S_z^b)² - χ_ab S_z^a S_z^b,   S_z^σ = (N_σ1 - N_σ0)/2.
//! ```

use num_complex::Complex64 as C64;

use crate::correlators::{epr_witness, CorrelatorError, EprResult, SpinMoments};
use crate::meanfield::FockVector;

/// Amplitudes `c(N_a0, N_b0)` on the `(N_a + 1) × (N_b + 1)` Fock grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FourModeState {
    n: [u64; 2],
    c: Vec<C64>,
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    let lf = |m: u64| (1..=m).map(|j| (j as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

impl FourModeState {
    /// State after the pulses: each well in the coherent spin state with
    /// amplitudes `C_σ0, C_σ1`.
    pub fn coherent(n_a: u64, n_b: u64, pulse: [C64; 4]) -> Self {
        let well = |n: u64, c0: C64, c1: C64| -> Vec<C64> {
            (0..=n)
                .map(|k| {
                    let mag = 0.5 * ln_binomial(n, k);
                    let pow = |c: C64, e: u64| if e == 0 { C64::new(1.0, 0.0) } else { c.powu(e as u32) };
                    let lc = |c: C64, e: u64| if e == 0 { 0.0 } else { e as f64 * c.norm().ln() };
                    let m = (mag + lc(c0, k) + lc(c1, n - k)).exp();
                    let ph = pow(c0 / c0.norm().max(f64::MIN_POSITIVE), k)
                        * pow(c1 / c1.norm().max(f64::MIN_POSITIVE), n - k);
                    ph * m
                })
                .collect()
        };
        let a = well(n_a, pulse[0], pulse[1]);
        let b = well(n_b, pulse[2], pulse[3]);
        let mut c = Vec::with_capacity(a.len() * b.len());
        for x in &a {
            for y in &b {
                c.push(x * y);
            }
        }
        Self { n: [n_a, n_b], c }
    }

    pub fn n(&self) -> [u64; 2] {
        self.n
    }

    pub fn amplitude(&self, n_a0: u64, n_b0: u64) -> C64 {
        self.c[self.index(n_a0, n_b0)]
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.c
    }

    fn index(&self, n_a0: u64, n_b0: u64) -> usize {
        (n_a0 * (self.n[1] + 1) + n_b0) as usize
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `c(N) → c(N) e^{-i Φ(N)}` for an arbitrary diagonal phase.
    pub fn apply_phase<F: Fn(&FockVector) -> f64>(&self, phase: F) -> Self {
        let mut out = self.clone();
        for a0 in 0..=self.n[0] {
            for b0 in 0..=self.n[1] {
                let n = FockVector::new(a0, self.n[0] - a0, b0, self.n[1] - b0);
                let i = self.index(a0, b0);
                out.c[i] *= C64::from_polar(1.0, -phase(&n));
            }
        }
        out
    }
}

/// `S_z^σ` eigenvalue `(N_σ1 - N_σ0)/2`.
pub fn sz(n: &FockVector) -> [f64; 2] {
    [
        (n.0[1] as f64 - n.0[0] as f64) / 2.0,
        (n.0[3] as f64 - n.0[2] as f64) / 2.0,
    ]
}

/// Evolution with the time integrals `∫χ_a dt`, `∫χ_b dt`, `∫χ_ab dt`.
pub fn evolve_exact(state: &FourModeState, int_chi_a: f64, int_chi_b: f64, int_chi_ab: f64) -> FourModeState {
    state.apply_phase(|n| {
        let [za, zb] = sz(n);
        int_chi_a * za * za + int_chi_b * zb * zb - int_chi_ab * za * zb
    })
}

/// Exact first and symmetrized second spin moments.
pub fn oracle_moments(state: &FourModeState) -> SpinMoments {
    let [n_a, n_b] = state.n;
    let i = C64::new(0.0, 1.0);
    let zero = C64::new(0.0, 0.0);
    let amp = |a0: i64, b0: i64| -> C64 {
        if a0 < 0 || b0 < 0 || a0 > n_a as i64 || b0 > n_b as i64 {
            zero
        } else {
            state.amplitude(a0 as u64, b0 as u64)
        }
    };
    let mut mean = [zero; 6];
    let mut second = [[zero; 6]; 6];
    for a0 in 0..=n_a as i64 {
        for b0 in 0..=n_b as i64 {
            let psi = amp(a0, b0);
            // components of S_k|ψ⟩ on the basis state (a0, b0)
            let mut s = [zero; 6];
            for (w, (n0, total)) in [(a0, n_a as i64), (b0, n_b as i64)].into_iter().enumerate() {
                let n1 = total - n0;
                let (lower, higher) = if w == 0 {
                    (amp(a0 - 1, b0), amp(a0 + 1, b0))
                } else {
                    (amp(a0, b0 - 1), amp(a0, b0 + 1))
                };
                // ψ†_0 ψ_1 raises N_0; ψ†_1 ψ_0 lowers it
                let a01 = lower * ((n0 * (n1 + 1)) as f64).sqrt();
                let a10 = higher * (((n0 + 1) * n1) as f64).sqrt();
                s[3 * w] = 0.5 * (a01 + a10);
                s[3 * w + 1] = 0.5 * i * (a01 - a10);
                s[3 * w + 2] = psi * (0.5 * (n1 - n0) as f64);
            }
            for k in 0..6 {
                mean[k] += psi.conj() * s[k];
                for l in k..6 {
                    second[k][l] += s[k].conj() * s[l];
                }
            }
        }
    }
    let mut scale = 0.0f64;
    let mut imag = 0.0f64;
    for v in mean.iter() {
        scale = scale.max(v.norm());
        imag = imag.max(v.im.abs());
    }
    let mean_re = mean.map(|v| v.re);
    let second_re =
        std::array::from_fn(|k| std::array::from_fn(|l| if k <= l { second[k][l].re } else { second[l][k].re }));
    SpinMoments::new(
        mean_re,
        second_re,
        state.n,
        if scale > 0.0 { imag / scale } else { 0.0 },
    )
}

/// Optimized witness of the exact state; the frozen modes overlap perfectly.
pub fn oracle_witness(state: &FourModeState) -> Result<EprResult, CorrelatorError> {
    let mut r = epr_witness(&oracle_moments(state))?;
    r.overlap = [1.0, 1.0];
    Ok(r)
}

/// Nonlinearity coefficients of the four-mode Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Chi {
    pub a: f64,
    pub b: f64,
    pub ab: f64,
}

/// Finite-difference step `max(1, round(sqrt(N)/4))`.
pub fn chi_step(n: u64) -> u64 {
    ((n as f64).sqrt() / 4.0).round().max(1.0) as u64
}

/// `χ_σ = ½(∂_{N_σ0} - ∂_{N_σ1})(μ_σ0 - μ_σ1)` and
/// `χ_ab = ½(∂μ_b1/∂N_a0 + ∂μ_a0/∂N_b1)` by centered differences of step
/// `dn` around `n`. `mu` returns the four chemical potentials at given
/// populations.
pub fn extract_chi<E, F>(n: FockVector, dn: u64, mut mu: F) -> Result<Chi, E>
where
    F: FnMut(FockVector) -> Result<[f64; 4], E>,
{
    let d = dn as i64;
    let h = dn as f64;
    let at = |s: [i64; 4]| n.shifted(s).expect("finite-difference step exceeds the populations");
    let diff = |m: [f64; 4], k: usize, l: usize| m[k] - m[l];

    let pa = mu(at([d, -d, 0, 0]))?;
    let ma = mu(at([-d, d, 0, 0]))?;
    // (∂_0 - ∂_1) along a transfer of step h spans 2h in N_0 - N_1
    let chi_a = 0.5 * (diff(pa, 0, 1) - diff(ma, 0, 1)) / (2.0 * h);
    let pb = mu(at([0, 0, d, -d]))?;
    let mb = mu(at([0, 0, -d, d]))?;
    let chi_b = 0.5 * (diff(pb, 2, 3) - diff(mb, 2, 3)) / (2.0 * h);

    let p_a0 = mu(at([d, 0, 0, 0]))?;
    let m_a0 = mu(at([-d, 0, 0, 0]))?;
    let p_b1 = mu(at([0, 0, 0, d]))?;
    let m_b1 = mu(at([0, 0, 0, -d]))?;
    let chi_ab = 0.5 * ((p_a0[3] - m_a0[3]) / (2.0 * h) + (p_b1[0] - m_b1[0]) / (2.0 * h));
    Ok(Chi {
        a: chi_a,
        b: chi_b,
        ab: chi_ab,
    })
}

/// `χ` tabulated against the trap displacement, for the adiabatic model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiProfile {
    pub displacement: Vec<f64>,
    pub chi: Vec<Chi>,
}

impl ChiProfile {
    /// Linear interpolation, clamped to the tabulated range.
    pub fn at(&self, d: f64) -> Chi {
        let x = &self.displacement;
        if d <= x[0] {
            return self.chi[0];
        }
        let last = x.len() - 1;
        if d >= x[last] {
            return self.chi[last];
        }
        let k = x.partition_point(|&v| v <= d) - 1;
        let f = (d - x[k]) / (x[k + 1] - x[k]);
        let (p, q) = (self.chi[k], self.chi[k + 1]);
        Chi {
            a: p.a + f * (q.a - p.a),
            b: p.b + f * (q.b - p.b),
            ab: p.ab + f * (q.ab - p.ab),
        }
    }

    /// `∫₀ᵀ χ(d(t)) dt` by the trapezoid rule on `steps` intervals.
    pub fn integrate<D: Fn(f64) -> f64>(&self, displacement: D, t_end: f64, steps: usize) -> Chi {
        let mut acc = Chi::default();
        if t_end <= 0.0 || steps == 0 {
            return acc;
        }
        let h = t_end / steps as f64;
        for k in 0..=steps {
            let w = if k == 0 || k == steps { 0.5 * h } else { h };
            let c = self.at(displacement(k as f64 * h));
            acc.a += w * c.a;
            acc.b += w * c.b;
            acc.ab += w * c.ab;
        }
        acc
    }
}
