//! Explicit Fock-space construction of the superposition state on a few
//! lattice sites, with linearized mode phases and arbitrary accumulated
//! phases, and direct operator averaging on the state vector.

use std::collections::HashMap;

use eprbec::correlators::{ln_overlap, CorrelatorEngine, CorrelatorInput, ThetaSource};
use eprbec::fockflow::PhaseGradients;
use eprbec::meanfield::{Component, FockVector, Well};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random mode functions, gradients, pulse and accumulated phases.
pub struct Synthetic {
    pub n: [u64; 2],
    pub weights: Vec<f64>,
    pub phi: [Vec<C64>; 4],
    pub grads: PhaseGradients,
    pub pulse: [C64; 4],
    pub central: FockVector,
    /// `A(N)` for every population vector.
    pub accumulated: HashMap<FockVector, f64>,
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

impl Synthetic {
    pub fn random(n_a: u64, n_b: u64, sites: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<f64> = (0..sites).map(|_| rng.gen_range(0.5..2.0)).collect();
        let phi: [Vec<C64>; 4] = std::array::from_fn(|_| {
            let mut v: Vec<C64> = (0..sites).map(|_| random_c(&mut rng)).collect();
            let norm: f64 = v.iter().zip(&weights).map(|(p, w)| w * p.norm_sqr()).sum();
            v.iter_mut().for_each(|p| *p /= norm.sqrt());
            v
        });
        let mut grads = PhaseGradients::zeros(sites);
        for g in grads.g.iter_mut().flatten().flatten() {
            *g = rng.gen_range(-0.4..0.4);
        }
        let mut pulse = [C64::new(0.0, 0.0); 4];
        for well in Well::BOTH {
            let [c0, c1] = well.components();
            let theta: f64 = rng.gen_range(0.6..1.0);
            pulse[c0.index()] = C64::from_polar(theta.cos(), rng.gen_range(-3.0..3.0));
            pulse[c1.index()] = C64::from_polar(theta.sin(), rng.gen_range(-3.0..3.0));
        }
        let mut accumulated = HashMap::new();
        for a0 in 0..=n_a {
            for b0 in 0..=n_b {
                accumulated.insert(FockVector::new(a0, n_a - a0, b0, n_b - b0), rng.gen_range(-10.0..10.0));
            }
        }
        Self {
            n: [n_a, n_b],
            weights,
            phi,
            grads,
            pulse,
            central: FockVector::balanced(n_a, n_b),
            accumulated,
        }
    }

    /// `φ_α(N)` with the phase linearized around the central populations.
    pub fn mode(&self, alpha: Component, n: &FockVector) -> Vec<C64> {
        let k_a = n.0[0] as f64 - self.central.0[0] as f64;
        let k_b = n.0[2] as f64 - self.central.0[2] as f64;
        (0..self.weights.len())
            .map(|c| self.phi[alpha.index()][c] * C64::from_polar(1.0, self.grads.dot(alpha, k_a, k_b, c)))
            .collect()
    }

    pub fn theta(&self) -> SyntheticTheta<'_> {
        SyntheticTheta { src: self }
    }

    pub fn engine<'a>(&'a self, theta: &'a SyntheticTheta<'a>) -> CorrelatorEngine<'a> {
        CorrelatorEngine::new(CorrelatorInput {
            weights: &self.weights,
            phi: std::array::from_fn(|k| self.phi[k].as_slice()),
            central: self.central,
            grads: &self.grads,
            theta,
            pulse: self.pulse,
            window_mult: 8.0,
        })
        .expect("window")
    }
}

/// `Θ(N, Δ) = A(N + Δ) - A(N) - i Σ_α (N_α + (Δ_α - 1)/2) ln⟨φ_α(N + Δ)|φ_α(N)⟩`.
pub struct SyntheticTheta<'a> {
    src: &'a Synthetic,
}

impl ThetaSource for SyntheticTheta<'_> {
    fn theta(&self, n: &FockVector, d_a: i64, d_b: i64) -> C64 {
        let s = self.src;
        let Some(np) = n.transferred(d_a, d_b) else {
            return C64::new(0.0, 0.0);
        };
        let shift = [d_a, -d_a, d_b, -d_b];
        let mut v = C64::new(s.accumulated[&np] - s.accumulated[n], 0.0);
        for alpha in Component::ALL {
            let k = alpha.index();
            let l = ln_overlap(&s.weights, &s.phi[k], &s.grads, alpha, d_a, d_b);
            v -= C64::new(0.0, n.0[k] as f64 + (shift[k] as f64 - 1.0) / 2.0) * l;
        }
        v
    }
}

type Occupation = Vec<u8>;

/// State vector on the occupation basis of `4 × sites` lattice modes.
pub struct BruteForce {
    sites: usize,
    index: HashMap<Occupation, usize>,
    basis: Vec<Occupation>,
    pub psi: Vec<C64>,
}

fn compositions(total: u64, parts: usize) -> Vec<Vec<u8>> {
    if parts == 1 {
        return vec![vec![total as u8]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

fn ln_fact(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

impl BruteForce {
    /// `|Ψ⟩ = Σ_N sqrt(N_a! N_b! / Π N_α!) e^{-iA(N)} Π_α C_α^{N_α} |{N_α : φ_α(N)}⟩`,
    /// each Fock state expanded on the lattice modes `b_i = sqrt(w_i) ψ(r_i)`.
    pub fn build(s: &Synthetic) -> Self {
        let sites = s.weights.len();
        let mut index = HashMap::new();
        let mut basis = Vec::new();
        let mut psi = Vec::new();
        for a0 in 0..=s.n[0] {
            for b0 in 0..=s.n[1] {
                let n = FockVector::new(a0, s.n[0] - a0, b0, s.n[1] - b0);
                let mut log_mult = ln_fact(s.n[0]) + ln_fact(s.n[1]);
                let mut pref = C64::from_polar(1.0, -s.accumulated[&n]);
                // per component: list of (site occupations, amplitude)
                let mut factors: Vec<Vec<(Vec<u8>, C64)>> = Vec::new();
                for alpha in Component::ALL {
                    let na = n.get(alpha);
                    log_mult -= ln_fact(na);
                    pref *= s.pulse[alpha.index()].powu(na as u32);
                    let c: Vec<C64> = s
                        .mode(alpha, &n)
                        .iter()
                        .zip(&s.weights)
                        .map(|(p, w)| p * w.sqrt())
                        .collect();
                    let list = compositions(na, sites)
                        .into_iter()
                        .map(|occ| {
                            let mut amp = C64::new((0.5 * ln_fact(na)).exp(), 0.0);
                            for (i, &k) in occ.iter().enumerate() {
                                amp *= c[i].powu(k as u32) / (0.5 * ln_fact(k as u64)).exp();
                            }
                            (occ, amp)
                        })
                        .collect();
                    factors.push(list);
                }
                pref *= (0.5 * log_mult).exp();
                for (o0, v0) in &factors[0] {
                    for (o1, v1) in &factors[1] {
                        for (o2, v2) in &factors[2] {
                            for (o3, v3) in &factors[3] {
                                let occ: Occupation = [o0, o1, o2, o3].iter().flat_map(|o| o.iter().copied()).collect();
                                index.insert(occ.clone(), basis.len());
                                basis.push(occ);
                                psi.push(pref * v0 * v1 * v2 * v3);
                            }
                        }
                    }
                }
            }
        }
        Self {
            sites,
            index,
            basis,
            psi,
        }
    }

    /// `Σ_i b†_{α,i} b_{β,i} v`.
    pub fn apply(&self, op: (Component, Component), v: &[C64]) -> Vec<C64> {
        let (alpha, beta) = op;
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (j, occ) in self.basis.iter().enumerate() {
            if v[j] == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..self.sites {
                let ib = beta.index() * self.sites + i;
                let ia = alpha.index() * self.sites + i;
                if occ[ib] == 0 {
                    continue;
                }
                let mut next = occ.clone();
                let mut amp = (occ[ib] as f64).sqrt();
                next[ib] -= 1;
                amp *= (next[ia] as f64 + 1.0).sqrt();
                next[ia] += 1;
                out[self.index[&next]] += v[j] * amp;
            }
        }
        out
    }

    pub fn inner(a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }
}
