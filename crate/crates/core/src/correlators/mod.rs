//! Quantum averages of products of field operators over the Fock-state
//! superposition, in the modulus-phase approximation.
//!
//! For an operator
//!
//! ```text
//! W(r, r') = Π_α ψ†_α(r)^γ_α ψ†_α(r')^γ'_α ψ_α(r)^δ_α ψ_α(r')^δ'_α
//! ```
//!
//! the average is a sum over the population vectors `N = N̄ + (k_a, -k_a,
//! k_b, -k_b)` of a multinomial weight, a phase that is linear in `k`, the
//! reduced phase `Θ` and a product of mode overlaps. The `k` dependence of
//! the spatial integrand is a plane wave in the phase gradients, so each
//! spatial slot is tabulated once per `(slot, Δ)` over the whole `k` window
//! and reused by every operator that needs it.

mod spin;

pub use spin::{
    epr_witness, quadrature_moments, spin_moments, witness_squared_at, EprResult, QuadratureMoments, SpinMoments,
    SPIN_LABELS,
};

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fockflow::{PhaseGradients, TrajectorySet};
use crate::meanfield::{Component, FockVector, Well};

/// Default half-width of the population window in units of `sqrt(N_σ)/2`.
pub const DEFAULT_WINDOW_MULT: f64 = 8.0;
/// Relative weight at a non-physical window edge above which the window is
/// declared too narrow.
pub const WINDOW_EDGE_TOL: f64 = 1e-12;
/// Cells whose integrand is below this fraction of the largest one are
/// dropped from the tables.
const CELL_CUTOFF: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelatorError {
    #[error("population window of well {well:?} too narrow: edge weight {ratio:e} of the peak")]
    WindowTooNarrow { well: Well, ratio: f64 },
    #[error("spin length {length:e} too small for the witness (needs ≥ {min:e})")]
    WitnessUndefined { length: f64, min: f64 },
    #[error("inconsistent correlator input: {0}")]
    BadInput(String),
}

/// Exponents of creation (`γ`, `γ'`) and annihilation (`δ`, `δ'`) operators
/// at the two positions `r` and `r'`, per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    pub gamma: [u8; 4],
    pub gamma_p: [u8; 4],
    pub delta: [u8; 4],
    pub delta_p: [u8; 4],
}

impl MultiIndex {
    /// `ψ†_α(r) ψ_β(r)`.
    pub fn one_body(alpha: Component, beta: Component) -> Self {
        let mut m = Self::default();
        m.gamma[alpha.index()] += 1;
        m.delta[beta.index()] += 1;
        m
    }

    /// `ψ†_α(r) ψ†_γ(r') ψ_β(r) ψ_δ(r')`, the normal-ordered product of
    /// `ψ†_α ψ_β` at `r` and `ψ†_γ ψ_δ` at `r'`.
    pub fn two_body(first: (Component, Component), second: (Component, Component)) -> Self {
        let mut m = Self::one_body(first.0, first.1);
        m.gamma_p[second.0.index()] += 1;
        m.delta_p[second.1.index()] += 1;
        m
    }

    pub fn gamma_plus(&self) -> [i64; 4] {
        std::array::from_fn(|k| (self.gamma[k] + self.gamma_p[k]) as i64)
    }

    pub fn delta_plus(&self) -> [i64; 4] {
        std::array::from_fn(|k| (self.delta[k] + self.delta_p[k]) as i64)
    }

    /// Population change `Δ = γ⁺ - δ⁺` between bra and ket.
    pub fn shift(&self) -> [i64; 4] {
        let (g, d) = (self.gamma_plus(), self.delta_plus());
        std::array::from_fn(|k| g[k] - d[k])
    }

    /// Whether the operator conserves the atom number of each well.
    pub fn conserves_wells(&self) -> bool {
        let s = self.shift();
        s[0] + s[1] == 0 && s[2] + s[3] == 0
    }

    pub fn is_one_point(&self) -> bool {
        self.gamma_p == [0; 4] && self.delta_p == [0; 4]
    }

    fn slots(&self) -> [Slot; 2] {
        [
            Slot {
                gamma: self.gamma,
                delta: self.delta,
            },
            Slot {
                gamma: self.gamma_p,
                delta: self.delta_p,
            },
        ]
    }
}

/// Reduced phase `Θ(N, Δ)` for the within-well transfers `(d_a, d_b)`.
pub trait ThetaSource: Sync {
    fn theta(&self, n: &FockVector, d_a: i64, d_b: i64) -> C64;

    /// True if `theta` does not depend on `n`.
    fn is_population_independent(&self) -> bool {
        false
    }
}

impl ThetaSource for TrajectorySet {
    fn theta(&self, _n: &FockVector, d_a: i64, d_b: i64) -> C64 {
        C64::new(TrajectorySet::theta(self, d_a, d_b), 0.0)
    }

    fn is_population_independent(&self) -> bool {
        true
    }
}

/// `Θ = d_a Θ_a + d_b Θ_b` with fixed unit values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearTheta(pub [f64; 2]);

impl ThetaSource for LinearTheta {
    fn theta(&self, _n: &FockVector, d_a: i64, d_b: i64) -> C64 {
        C64::new(d_a as f64 * self.0[0] + d_b as f64 * self.0[1], 0.0)
    }

    fn is_population_independent(&self) -> bool {
        true
    }
}

/// Everything the Fock sum needs at one instant.
pub struct CorrelatorInput<'a> {
    /// Quadrature weights of the spatial cells.
    pub weights: &'a [f64],
    /// Central mode functions `φ̄_α`.
    pub phi: [&'a [C64]; 4],
    /// Central populations `N̄`.
    pub central: FockVector,
    pub grads: &'a PhaseGradients,
    pub theta: &'a dyn ThetaSource,
    /// Pulse coefficients `C_α`.
    pub pulse: [C64; 4],
    /// Window half-width in units of `sqrt(N_σ)/2`.
    pub window_mult: f64,
}

impl<'a> CorrelatorInput<'a> {
    /// Input assembled from a trajectory set and its gradients.
    pub fn from_set(
        weights: &'a [f64],
        set: &'a TrajectorySet,
        grads: &'a PhaseGradients,
        pulse: [C64; 4],
        window_mult: f64,
    ) -> Self {
        let c = set.central();
        Self {
            weights,
            phi: std::array::from_fn(|k| c.psi[k].as_slice()),
            central: set.central_fock(),
            grads,
            theta: set,
            pulse,
            window_mult,
        }
    }
}

/// Spatial slot of a [`MultiIndex`]: exponents at one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Slot {
    gamma: [u8; 4],
    delta: [u8; 4],
}

impl Slot {
    fn is_empty(&self) -> bool {
        self.gamma == [0; 4] && self.delta == [0; 4]
    }
}

/// `F(k) = Σ_r f0(r) e^{i (k_a X_a(r) + k_b X_b(r))}` over the window.
#[derive(Debug, Clone)]
enum Table {
    Constant(C64),
    /// Row-major in `k_b`, `k_a` fastest.
    Grid(Vec<C64>),
}

impl Table {
    #[inline]
    fn at(&self, ia: usize, ib: usize, width: usize) -> C64 {
        match self {
            Table::Constant(v) => *v,
            Table::Grid(t) => t[ib * width + ia],
        }
    }
}

/// Population window of one well, as offsets from `N̄_σ0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

/// Evaluates Fock-sum averages at one instant; caches spatial tables.
pub struct CorrelatorEngine<'a> {
    input: CorrelatorInput<'a>,
    windows: [Window; 2],
    ln_fact: Vec<f64>,
    ln_abs_c: [f64; 4],
    tables: HashMap<(Slot, i64, i64), Table>,
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

impl<'a> CorrelatorEngine<'a> {
    pub fn new(input: CorrelatorInput<'a>) -> Result<Self, CorrelatorError> {
        let n = input.weights.len();
        if input.phi.iter().any(|p| p.len() != n) || input.grads.g.iter().flatten().any(|g| g.len() != n) {
            return Err(CorrelatorError::BadInput(
                "field lengths differ from the weight count".into(),
            ));
        }
        let nbar = input.central;
        let totals = [nbar.n_a(), nbar.n_b()];
        let ln_fact = ln_factorials(totals[0].max(totals[1]));
        let ln_abs_c: [f64; 4] = std::array::from_fn(|k| input.pulse[k].norm().ln());
        let mut windows = [Window { lo: 0, hi: 0 }; 2];
        for well in Well::BOTH {
            let s = well.index();
            let [c0, c1] = well.components();
            let total = totals[s] as i64;
            let n0 = nbar.get(c0) as i64;
            let p0 = input.pulse[c0.index()].norm_sqr();
            let p1 = input.pulse[c1.index()].norm_sqr();
            let mode = if p0 + p1 > 0.0 {
                (total as f64 * p0 / (p0 + p1)).round() as i64
            } else {
                n0
            };
            let half = (input.window_mult * (total as f64).sqrt() / 2.0).ceil() as i64;
            let lo = (mode - half).max(0);
            let hi = (mode + half).min(total);
            windows[s] = Window {
                lo: lo - n0,
                hi: hi - n0,
            };
            // binomial weight of the population vector at the edges
            let lw = |m: i64| -> f64 {
                let term = |cnt: i64, lc: f64| if cnt == 0 { 0.0 } else { 2.0 * cnt as f64 * lc };
                ln_fact[total as usize] - ln_fact[m as usize] - ln_fact[(total - m) as usize]
                    + term(m, ln_abs_c[c0.index()])
                    + term(total - m, ln_abs_c[c1.index()])
            };
            let peak = lw(mode.clamp(0, total));
            for (edge, physical) in [(lo, lo == 0), (hi, hi == total)] {
                if physical {
                    continue;
                }
                let ratio = (lw(edge) - peak).exp();
                if ratio > WINDOW_EDGE_TOL {
                    return Err(CorrelatorError::WindowTooNarrow { well, ratio });
                }
            }
        }
        Ok(Self {
            input,
            windows,
            ln_fact,
            ln_abs_c,
            tables: HashMap::new(),
        })
    }

    pub fn windows(&self) -> [Window; 2] {
        self.windows
    }

    /// Branch-continuous `ln ⟨φ_α(N + Δ) | φ_α(N)⟩` for the transfer
    /// `(d_a, d_b)`: the density-weighted mean phase is pulled out
    /// analytically and the principal logarithm is taken of the remainder.
    pub fn ln_overlap(&self, alpha: Component, d_a: i64, d_b: i64) -> C64 {
        ln_overlap(
            self.input.weights,
            self.input.phi[alpha.index()],
            self.input.grads,
            alpha,
            d_a,
            d_b,
        )
    }

    fn slot_fields(&self, slot: &Slot, d_a: i64, d_b: i64) -> (Vec<C64>, Vec<f64>, Vec<f64>) {
        let n = self.input.weights.len();
        let grads = self.input.grads;
        let (da, db) = (d_a as f64, d_b as f64);
        let mut f0 = vec![C64::new(0.0, 0.0); n];
        let mut xa = vec![0.0; n];
        let mut xb = vec![0.0; n];
        for c in 0..n {
            let mut v = C64::new(self.input.weights[c], 0.0);
            let mut phase = 0.0;
            for alpha in Component::ALL {
                let k = alpha.index();
                let p = self.input.phi[k][c];
                for _ in 0..slot.gamma[k] {
                    v *= p.conj();
                }
                for _ in 0..slot.delta[k] {
                    v *= p;
                }
                let net = slot.delta[k] as f64 - slot.gamma[k] as f64;
                xa[c] += net * grads.g[k][0][c];
                xb[c] += net * grads.g[k][1][c];
                phase += slot.gamma[k] as f64 * grads.dot(alpha, da, db, c);
            }
            f0[c] = v * C64::from_polar(1.0, -phase);
        }
        (f0, xa, xb)
    }

    fn build_table(&self, slot: &Slot, d_a: i64, d_b: i64) -> Table {
        let (f0, xa, xb) = self.slot_fields(slot, d_a, d_b);
        let peak = f0.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let keep: Vec<usize> = (0..f0.len())
            .filter(|&c| f0[c].norm() >= CELL_CUTOFF * peak && peak > 0.0)
            .collect();
        if keep.iter().all(|&c| xa[c] == 0.0 && xb[c] == 0.0) {
            return Table::Constant(keep.iter().map(|&c| f0[c]).sum());
        }
        let [wa, wb] = self.windows;
        let (width, height) = (wa.len(), wb.len());
        let f: Vec<C64> = keep.iter().map(|&c| f0[c]).collect();
        let step: Vec<C64> = keep.iter().map(|&c| C64::from_polar(1.0, xa[c])).collect();
        let mut out = vec![C64::new(0.0, 0.0); width * height];
        let mut cur = vec![C64::new(0.0, 0.0); keep.len()];
        for (ib, row) in out.chunks_exact_mut(width).enumerate() {
            let kb = (wb.lo + ib as i64) as f64;
            let ka0 = wa.lo as f64;
            for (j, &c) in keep.iter().enumerate() {
                cur[j] = f[j] * C64::from_polar(1.0, ka0 * xa[c] + kb * xb[c]);
            }
            for slot_out in row.iter_mut() {
                let mut acc = C64::new(0.0, 0.0);
                for (v, s) in cur.iter_mut().zip(&step) {
                    acc += *v;
                    *v *= s;
                }
                *slot_out = acc;
            }
        }
        Table::Grid(out)
    }

    /// Makes sure the spatial tables of all `indices` are cached, building
    /// the missing ones in parallel.
    pub fn prepare(&mut self, indices: &[MultiIndex]) {
        let mut missing = Vec::new();
        for idx in indices {
            if !idx.conserves_wells() {
                continue;
            }
            let s = idx.shift();
            let (d_a, d_b) = (s[0], s[2]);
            for slot in idx.slots() {
                if slot.is_empty() {
                    continue;
                }
                let key = (slot, d_a, d_b);
                if !self.tables.contains_key(&key) && !missing.contains(&key) {
                    missing.push(key);
                }
            }
        }
        let built: Vec<Table> = missing
            .par_iter()
            .map(|(slot, d_a, d_b)| self.build_table(slot, *d_a, *d_b))
            .collect();
        for (key, table) in missing.into_iter().zip(built) {
            self.tables.insert(key, table);
        }
    }

    fn table(&mut self, slot: Slot, d_a: i64, d_b: i64) -> &Table {
        let key = (slot, d_a, d_b);
        if !self.tables.contains_key(&key) {
            let t = self.build_table(&slot, d_a, d_b);
            self.tables.insert(key, t);
        }
        &self.tables[&key]
    }

    /// Spatially integrated average of `W`. Two-point operators are summed
    /// over both positions; for one-point operators (`γ' = δ' = 0`) only the
    /// `r` quadrature is performed.
    pub fn fock_sum_average(&mut self, idx: &MultiIndex) -> C64 {
        if !idx.conserves_wells() {
            return C64::new(0.0, 0.0);
        }
        let shift = idx.shift();
        let (d_a, d_b) = (shift[0], shift[2]);
        let dplus = idx.delta_plus();
        let gplus = idx.gamma_plus();
        let nbar = self.input.central;

        // k-independent prefactor: pulse phases and mode overlaps
        let mut log_pref = C64::new(0.0, 0.0);
        for alpha in Component::ALL {
            let k = alpha.index();
            if shift[k] != 0 {
                log_pref -= C64::new(0.0, shift[k] as f64 * self.input.pulse[k].arg());
            }
            if d_a != 0 || d_b != 0 {
                let expo = (dplus[k] + gplus[k] - 1) as f64 / 2.0;
                log_pref -= expo * self.ln_overlap(alpha, d_a, d_b);
            }
        }
        let pref = log_pref.exp();

        let [slot_r, slot_rp] = idx.slots();
        let t1 = self.table(slot_r, d_a, d_b).clone();
        let t2 = if slot_rp.is_empty() {
            Table::Constant(C64::new(1.0, 0.0))
        } else {
            self.table(slot_rp, d_a, d_b).clone()
        };

        let [wa, wb] = self.windows;
        let width = wa.len();
        let lw = |well: Well, k: i64| -> Option<f64> {
            let [c0, c1] = well.components();
            let total = match well {
                Well::A => nbar.n_a(),
                Well::B => nbar.n_b(),
            } as i64;
            let n0 = nbar.get(c0) as i64 + k;
            let n1 = total - n0;
            let (i0, i1) = (c0.index(), c1.index());
            let r0 = n0 - dplus[i0];
            let r1 = n1 - dplus[i1];
            if r0 < 0 || r1 < 0 {
                return None;
            }
            let term = |e: i64, lc: f64| if e == 0 { 0.0 } else { e as f64 * lc };
            Some(
                self.ln_fact[total as usize] - self.ln_fact[r0 as usize] - self.ln_fact[r1 as usize]
                    + term(2 * n0 + shift[i0], self.ln_abs_c[i0])
                    + term(2 * n1 + shift[i1], self.ln_abs_c[i1]),
            )
        };
        let lwa: Vec<Option<f64>> = (wa.lo..=wa.hi).map(|k| lw(Well::A, k)).collect();
        let lwb: Vec<Option<f64>> = (wb.lo..=wb.hi).map(|k| lw(Well::B, k)).collect();
        let theta = self.input.theta;
        let fixed_theta = theta
            .is_population_independent()
            .then(|| (C64::new(0.0, 1.0) * theta.theta(&nbar, d_a, d_b)).exp());

        let mut total = C64::new(0.0, 0.0);
        for (ib, lb) in lwb.iter().enumerate() {
            let Some(lb) = lb else { continue };
            let kb = wb.lo + ib as i64;
            let mut row = C64::new(0.0, 0.0);
            for (ia, la) in lwa.iter().enumerate() {
                let Some(la) = la else { continue };
                let weight = (la + lb).exp();
                if weight == 0.0 {
                    continue;
                }
                let mut term = t1.at(ia, ib, width) * t2.at(ia, ib, width) * weight;
                match fixed_theta {
                    Some(f) => term *= f,
                    None => {
                        let ka = wa.lo + ia as i64;
                        let n = nbar.shifted([ka, -ka, kb, -kb]).expect("window within physical range");
                        term *= (C64::new(0.0, 1.0) * theta.theta(&n, d_a, d_b)).exp();
                    }
                }
                row += term;
            }
            total += row;
        }
        total * pref
    }
}

/// Branch-continuous logarithm of `Σ w |φ̄|² e^{-i (d_a G^a + d_b G^b)}`.
pub fn ln_overlap(weights: &[f64], phi: &[C64], grads: &PhaseGradients, alpha: Component, d_a: i64, d_b: i64) -> C64 {
    if d_a == 0 && d_b == 0 {
        return C64::new(0.0, 0.0);
    }
    let (da, db) = (d_a as f64, d_b as f64);
    let mut mass = 0.0;
    let mut mean = 0.0;
    for (c, (w, p)) in weights.iter().zip(phi).enumerate() {
        let m = w * p.norm_sqr();
        mass += m;
        mean += m * grads.dot(alpha, da, db, c);
    }
    if mass == 0.0 {
        return C64::new(f64::NEG_INFINITY, 0.0);
    }
    mean /= mass;
    let mut acc = C64::new(0.0, 0.0);
    for (c, (w, p)) in weights.iter().zip(phi).enumerate() {
        acc += C64::from_polar(w * p.norm_sqr(), -(grads.dot(alpha, da, db, c) - mean));
    }
    acc.ln() - C64::new(0.0, mean)
}
