//! Mean-field dynamics of the four condensate components.
//!
//! Each component `α ∈ {a0, a1, b0, b1}` carries a unit-normalised mode
//! function that depends on the full population vector `N`. The modes evolve
//! under the coupled Gross-Pitaevskii equation
//!
//! ```text
//! i ∂φ_α/∂t = [h_α + g_αα (N_α - 1)|φ_α|² + Σ_{α'≠α} g_αα' N_α' |φ_α'|²] φ_α
//! ```
//!
//! with the exact `N_α - 1` / `N_α'` prefactors, because the Fock-state
//! machinery differentiates the modes with respect to the populations.

mod banded;
mod ground;
mod params;
mod propagate;
pub mod snapshot;

pub use ground::{ground_state, ground_state_from, GroundState, GroundStateOptions};
pub use params::{Couplings, PhysicalParams, ATOMIC_MASS_UNIT, BOHR_RADIUS, HBAR, RB87_MASS};
pub use propagate::{gpe_step, stable_dt, Propagator};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::grid::CylGrid;

#[derive(Debug, Error, PartialEq)]
pub enum MeanFieldError {
    #[error("norm of component {component:?} drifted by {drift:e} in one step")]
    NormDrift { component: Component, drift: f64 },
    #[error("non-finite value in component {0:?}")]
    NonFinite(Component),
    #[error("ground state did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("banded factorisation lost positive definiteness")]
    NotPositiveDefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Well {
    A,
    B,
}

impl Well {
    pub const BOTH: [Well; 2] = [Well::A, Well::B];

    pub fn index(self) -> usize {
        match self {
            Well::A => 0,
            Well::B => 1,
        }
    }

    /// The (state 0, state 1) components living in this well.
    pub fn components(self) -> [Component; 2] {
        match self {
            Well::A => [Component::A0, Component::A1],
            Well::B => [Component::B0, Component::B1],
        }
    }

    pub fn other(self) -> Well {
        match self {
            Well::A => Well::B,
            Well::B => Well::A,
        }
    }
}

/// One of the four distinguishable components (well, internal state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    A0,
    A1,
    B0,
    B1,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::A0, Component::A1, Component::B0, Component::B1];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Component {
        Self::ALL[i]
    }

    pub fn well(self) -> Well {
        match self {
            Component::A0 | Component::A1 => Well::A,
            Component::B0 | Component::B1 => Well::B,
        }
    }

    /// Internal (hyperfine) state, 0 or 1.
    pub fn internal(self) -> u8 {
        match self {
            Component::A0 | Component::B0 => 0,
            Component::A1 | Component::B1 => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::A0 => "a0",
            Component::A1 => "a1",
            Component::B0 => "b0",
            Component::B1 => "b1",
        }
    }
}

/// Populations `(N_a0, N_a1, N_b0, N_b1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockVector(pub [u64; 4]);

impl FockVector {
    pub fn new(n_a0: u64, n_a1: u64, n_b0: u64, n_b1: u64) -> Self {
        Self([n_a0, n_a1, n_b0, n_b1])
    }

    #[inline]
    pub fn get(&self, c: Component) -> u64 {
        self.0[c.index()]
    }

    pub fn well_total(&self, w: Well) -> u64 {
        let [c0, c1] = w.components();
        self.get(c0) + self.get(c1)
    }

    pub fn n_a(&self) -> u64 {
        self.well_total(Well::A)
    }

    pub fn n_b(&self) -> u64 {
        self.well_total(Well::B)
    }

    /// Moves `d_a` atoms from a1 to a0 and `d_b` from b1 to b0 (negative
    /// values move the other way). Returns `None` if a population would go
    /// negative.
    pub fn transferred(&self, d_a: i64, d_b: i64) -> Option<FockVector> {
        let shift = [d_a, -d_a, d_b, -d_b];
        let mut out = [0u64; 4];
        for k in 0..4 {
            let v = self.0[k] as i64 + shift[k];
            if v < 0 {
                return None;
            }
            out[k] = v as u64;
        }
        Some(FockVector(out))
    }

    /// Adds an arbitrary integer shift to each population.
    pub fn shifted(&self, shift: [i64; 4]) -> Option<FockVector> {
        let mut out = [0u64; 4];
        for k in 0..4 {
            let v = self.0[k] as i64 + shift[k];
            if v < 0 {
                return None;
            }
            out[k] = v as u64;
        }
        Some(FockVector(out))
    }

    /// Central configuration for wells of `n_a` and `n_b` atoms: the larger
    /// half of an odd well goes to state 0.
    pub fn balanced(n_a: u64, n_b: u64) -> FockVector {
        FockVector([n_a.div_ceil(2), n_a / 2, n_b.div_ceil(2), n_b / 2])
    }
}

/// Mode functions of the four components for one population vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentState {
    pub fock: FockVector,
    pub psi: [Vec<C64>; 4],
    pub t: f64,
}

impl ComponentState {
    pub fn new(fock: FockVector, psi: [Vec<C64>; 4], t: f64) -> Self {
        Self { fock, psi, t }
    }

    pub fn component(&self, c: Component) -> &[C64] {
        &self.psi[c.index()]
    }

    pub fn densities(&self) -> [Vec<f64>; 4] {
        std::array::from_fn(|k| self.psi[k].iter().map(|v| v.norm_sqr()).collect())
    }

    pub fn max_norm_error(&self, grid: &CylGrid) -> f64 {
        self.psi
            .iter()
            .map(|p| (grid.norm_sqr(p) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// External trapping potentials, one per component, in units of ħω.
pub trait Potentials: Sync {
    fn value(&self, component: Component, t: f64, r: f64, z: f64) -> f64;

    fn fill(&self, grid: &CylGrid, component: Component, t: f64, out: &mut [f64]) {
        let n_r = grid.n_r();
        for (j, &z) in grid.z().iter().enumerate() {
            for (i, &r) in grid.r().iter().enumerate() {
                out[j * n_r + i] = self.value(component, t, r, z);
            }
        }
    }

    fn sample(&self, grid: &CylGrid, component: Component, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; grid.len()];
        self.fill(grid, component, t, &mut v);
        v
    }
}

/// Static isotropic harmonic traps (frequency 1 in trap units) centred on
/// the axis at `z = centers[α]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicTraps {
    pub centers: [f64; 4],
}

impl HarmonicTraps {
    pub fn all_at(z0: f64) -> Self {
        Self { centers: [z0; 4] }
    }
}

impl Potentials for HarmonicTraps {
    fn value(&self, component: Component, _t: f64, r: f64, z: f64) -> f64 {
        let dz = z - self.centers[component.index()];
        0.5 * (r * r + dz * dz)
    }
}

/// No external potential at all (homogeneous test boxes).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FreeSpace;

impl Potentials for FreeSpace {
    fn value(&self, _component: Component, _t: f64, _r: f64, _z: f64) -> f64 {
        0.0
    }
}

/// Effective atom number multiplying `g_αα'` in the equation of motion of
/// component `alpha`. An empty mode feels no self-interaction.
#[inline]
pub(crate) fn mean_field_count(fock: &FockVector, alpha: Component, other: Component) -> f64 {
    let n = fock.get(other);
    if alpha == other {
        n.saturating_sub(1) as f64
    } else {
        n as f64
    }
}

/// Mean-field potential `Σ_α' g_αα' N_eff |φ_α'|²` felt by `alpha`.
pub(crate) fn nonlinear_potential(
    couplings: &Couplings,
    fock: &FockVector,
    alpha: Component,
    densities: &[Vec<f64>; 4],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for other in Component::ALL {
        let coef = couplings.get(alpha, other) * mean_field_count(fock, alpha, other);
        if coef == 0.0 {
            continue;
        }
        for (o, n) in out.iter_mut().zip(&densities[other.index()]) {
            *o += coef * n;
        }
    }
}

/// Mean-field energy of a Fock configuration (in ħω):
/// single-particle part, intra-species `g N(N-1)/2 ∫|φ|⁴` and inter-species
/// `g N N'/2 ∫|φ|²|φ'|²` summed over ordered pairs.
pub fn energy<P: Potentials + ?Sized>(
    state: &ComponentState,
    grid: &CylGrid,
    potentials: &P,
    couplings: &Couplings,
) -> f64 {
    let dens = state.densities();
    let mut total = 0.0;
    let mut v = vec![0.0; grid.len()];
    for a in Component::ALL {
        let n_a = state.fock.get(a) as f64;
        if n_a == 0.0 {
            continue;
        }
        potentials.fill(grid, a, state.t, &mut v);
        let h = grid.apply_kinetic_potential(state.component(a), &v);
        total += n_a * grid.inner(state.component(a), &h).re;
    }
    for a in Component::ALL {
        for b in Component::ALL {
            let g = couplings.get(a, b);
            if g == 0.0 {
                continue;
            }
            let n_a = state.fock.get(a) as f64;
            let n_b = state.fock.get(b) as f64;
            let pair = if a == b { n_a * (n_a - 1.0) } else { n_a * n_b };
            if pair == 0.0 {
                continue;
            }
            let overlap: f64 = dens[a.index()]
                .iter()
                .zip(&dens[b.index()])
                .zip(grid.weights())
                .map(|((x, y), w)| x * y * w)
                .sum();
            total += 0.5 * g * pair * overlap;
        }
    }
    total
}

/// `μ_α = ⟨φ_α| h_α + g_αα(N_α-1)|φ_α|² + Σ g_αα' N_α'|φ_α'|² |φ_α⟩`.
pub fn chemical_potential<P: Potentials + ?Sized>(
    state: &ComponentState,
    grid: &CylGrid,
    potentials: &P,
    couplings: &Couplings,
) -> [f64; 4] {
    let dens = state.densities();
    let mut v = vec![0.0; grid.len()];
    let mut nl = vec![0.0; grid.len()];
    let mut mu = [0.0; 4];
    for a in Component::ALL {
        potentials.fill(grid, a, state.t, &mut v);
        nonlinear_potential(couplings, &state.fock, a, &dens, &mut nl);
        for (x, y) in v.iter_mut().zip(&nl) {
            *x += y;
        }
        let h = grid.apply_kinetic_potential(state.component(a), &v);
        mu[a.index()] = grid.inner(state.component(a), &h).re;
    }
    mu
}

/// Normalised density overlap `∫n n' / sqrt(∫n² ∫n'²)` of two modes.
pub fn density_overlap(grid: &CylGrid, phi: &[C64], chi: &[C64]) -> f64 {
    let mut cross = 0.0;
    let mut self_a = 0.0;
    let mut self_b = 0.0;
    for ((a, b), w) in phi.iter().zip(chi).zip(grid.weights()) {
        let na = a.norm_sqr();
        let nb = b.norm_sqr();
        cross += w * na * nb;
        self_a += w * na * na;
        self_b += w * nb * nb;
    }
    if self_a == 0.0 || self_b == 0.0 {
        return 0.0;
    }
    (cross / (self_a * self_b).sqrt()).clamp(0.0, 1.0)
}
