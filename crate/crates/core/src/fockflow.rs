//! Nine-trajectory modulus-phase engine.
//!
//! Around the central population vector `N̄` we evolve the configurations
//! `N̄ + (d_a, -d_a, d_b, -d_b)` for `d_a, d_b ∈ {-β, 0, β}`. Centered
//! differences of their phases give the gradients `G_α^σ = ∂θ_α/∂u_σ` along
//! the two within-well transfer directions, and the reduced phase `Θ` is
//! integrated from the central densities. Since the reduced-phase rate is
//! linear in the displacement, only its two unit-transfer components are
//! integrated; every other displacement is an exact integer combination.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::CylGrid;
use crate::meanfield::{
    self, Component, ComponentState, Couplings, FockVector, MeanFieldError, Potentials, Propagator, Well,
};

/// Cells whose central density is below this fraction of the peak carry no
/// phase gradient.
pub const DENSITY_FLOOR: f64 = 1e-8;

/// Displacement offsets in units of `β`, in storage order.
const OFFSETS: [i64; 3] = [-1, 0, 1];
const CENTRAL: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum FockFlowError {
    #[error("displacement β = {beta} must satisfy 1 ≤ β ≤ N̄_min/10 (N̄_min = {n_min})")]
    BadDisplacement { beta: u64, n_min: u64 },
    #[error("initial state has a different grid size ({0} cells)")]
    GridMismatch(usize),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
}

/// Storage index of the configuration displaced by `(s_a β, s_b β)`.
#[inline]
pub fn config_index(s_a: i64, s_b: i64) -> usize {
    ((s_a + 1) * 3 + (s_b + 1)) as usize
}

#[derive(Debug, Clone)]
pub struct TrajectorySet {
    central: FockVector,
    beta: u64,
    configs: Vec<ComponentState>,
    /// Reduced phase of the unit transfers `u_a`, `u_b`.
    theta: [f64; 2],
    /// Continuously unwrapped `arg ⟨φ̄_α | φ_α⟩` of every configuration.
    mean_phase: Vec<[f64; 4]>,
    /// Potentials at the current time, reused as the start of the next step.
    cached: Option<(f64, [Vec<f64>; 4])>,
}

/// Phase-gradient fields `G[α][σ]` on the grid, zero where masked.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradients {
    pub g: [[Vec<f64>; 2]; 4],
}

impl PhaseGradients {
    pub fn zeros(n: usize) -> Self {
        Self {
            g: std::array::from_fn(|_| [vec![0.0; n], vec![0.0; n]]),
        }
    }

    pub fn get(&self, alpha: Component, well: Well) -> &[f64] {
        &self.g[alpha.index()][well.index()]
    }

    /// `d_a G^a_α + d_b G^b_α` at cell `k`.
    #[inline]
    pub fn dot(&self, alpha: Component, d_a: f64, d_b: f64, k: usize) -> f64 {
        let g = &self.g[alpha.index()];
        d_a * g[0][k] + d_b * g[1][k]
    }

    pub fn max_abs(&self) -> f64 {
        self.g.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Central populations for wells of `n_a` and `n_b` atoms: an odd well puts
/// the extra atom in state 0.
pub fn central_populations(n_a: u64, n_b: u64) -> FockVector {
    FockVector::balanced(n_a, n_b)
}

/// Builds the nine configurations from the prepared state of each well. The
/// a0 (b0) mode of `prepared` seeds both internal states of well a (b).
pub fn init_trajectories(
    n_a: u64,
    n_b: u64,
    beta: u64,
    prepared: &ComponentState,
) -> Result<TrajectorySet, FockFlowError> {
    let central = central_populations(n_a, n_b);
    let n_min = *central.0.iter().min().unwrap();
    if beta == 0 || beta * 10 > n_min {
        return Err(FockFlowError::BadDisplacement { beta, n_min });
    }
    let a = prepared.component(Component::A0).to_vec();
    let b = prepared.component(Component::B0).to_vec();
    if a.len() != b.len() {
        return Err(FockFlowError::GridMismatch(b.len()));
    }
    let psi = [a.clone(), a, b.clone(), b];
    let mut configs = Vec::with_capacity(9);
    for &s_a in &OFFSETS {
        for &s_b in &OFFSETS {
            let fock = central
                .transferred(s_a * beta as i64, s_b * beta as i64)
                .expect("β bounded by the central populations");
            configs.push(ComponentState::new(fock, psi.clone(), prepared.t));
        }
    }
    Ok(TrajectorySet {
        central,
        beta,
        configs,
        theta: [0.0; 2],
        mean_phase: vec![[0.0; 4]; 9],
        cached: None,
    })
}

impl TrajectorySet {
    pub fn central_fock(&self) -> FockVector {
        self.central
    }

    pub fn beta(&self) -> u64 {
        self.beta
    }

    pub fn t(&self) -> f64 {
        self.configs[CENTRAL].t
    }

    pub fn central(&self) -> &ComponentState {
        &self.configs[CENTRAL]
    }

    /// Configuration displaced by `(s_a β, s_b β)` with `s_σ ∈ {-1, 0, 1}`.
    pub fn config(&self, s_a: i64, s_b: i64) -> &ComponentState {
        &self.configs[config_index(s_a, s_b)]
    }

    pub fn configs(&self) -> &[ComponentState] {
        &self.configs
    }

    /// Reduced phase for the displacement `(d_a, -d_a, d_b, -d_b)`.
    pub fn theta(&self, d_a: i64, d_b: i64) -> f64 {
        d_a as f64 * self.theta[0] + d_b as f64 * self.theta[1]
    }

    /// Reduced phases of the unit transfers in wells a and b.
    pub fn theta_units(&self) -> [f64; 2] {
        self.theta
    }

    /// Table of `Θ(d_a, d_b)` for `d_a, d_b ∈ {-2, …, 2}`, row index `d_a + 2`.
    pub fn theta_table(&self) -> [[f64; 5]; 5] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.theta(i as i64 - 2, j as i64 - 2)))
    }

    /// Advances all nine configurations by one step of `prop` and updates
    /// the reduced phases and the tracked mean phases.
    pub fn advance<P: Potentials + ?Sized>(&mut self, prop: &Propagator, potentials: &P) -> Result<(), FockFlowError> {
        let grid = prop.grid();
        let t = self.t();
        let dt = prop.dt();
        let now = match self.cached.take() {
            Some((tc, v)) if tc == t => v,
            _ => sample_all(grid, potentials, t),
        };
        let next = sample_all(grid, potentials, t + dt);
        let now_ref: [&[f64]; 4] = std::array::from_fn(|k| now[k].as_slice());
        let next_ref: [&[f64]; 4] = std::array::from_fn(|k| next[k].as_slice());

        let rate_before = theta_rate(grid, prop.couplings(), self.central());
        let results: Vec<Result<(), MeanFieldError>> = self
            .configs
            .par_iter_mut()
            .map(|c| prop.step_with(c, &now_ref, &next_ref))
            .collect();
        for r in results {
            r?;
        }
        let rate_after = theta_rate(grid, prop.couplings(), self.central());
        for s in 0..2 {
            self.theta[s] += 0.5 * dt * (rate_before[s] + rate_after[s]);
        }
        self.track_mean_phases(grid);
        self.cached = Some((self.t(), next));
        Ok(())
    }

    fn track_mean_phases(&mut self, grid: &CylGrid) {
        let central = &self.configs[CENTRAL];
        let overlaps: Vec<[C64; 4]> = self
            .configs
            .par_iter()
            .map(|c| std::array::from_fn(|k| grid.inner(&central.psi[k], &c.psi[k])))
            .collect();
        for (m, o) in self.mean_phase.iter_mut().zip(overlaps) {
            for k in 0..4 {
                m[k] = unwrap_near(o[k].arg(), m[k]);
            }
        }
    }

    /// Relative phase field of configuration `idx`, component `k`, anchored
    /// to the continuously tracked mean phase.
    fn relative_phase(&self, idx: usize, k: usize, cell: usize) -> f64 {
        let m = self.mean_phase[idx][k];
        let bar = self.configs[CENTRAL].psi[k][cell];
        let z = self.configs[idx].psi[k][cell] * bar.conj() * C64::from_polar(1.0, -m);
        m + z.arg()
    }

    fn masks(&self) -> [Vec<bool>; 4] {
        std::array::from_fn(|k| {
            let dens: Vec<f64> = self.configs[CENTRAL].psi[k].iter().map(|v| v.norm_sqr()).collect();
            let peak = dens.iter().cloned().fold(0.0, f64::max);
            dens.iter().map(|&d| d >= DENSITY_FLOOR * peak && d > 0.0).collect()
        })
    }

    /// Phase gradients by centered differences between the `±β`
    /// configurations of each well.
    pub fn phase_gradients(&self) -> PhaseGradients {
        let n = self.configs[CENTRAL].psi[0].len();
        let masks = self.masks();
        let two_beta = 2.0 * self.beta as f64;
        let fields: Vec<Vec<f64>> = (0..8)
            .into_par_iter()
            .map(|job| {
                let (k, s) = (job / 2, job % 2);
                let (plus, minus) = if s == 0 {
                    (config_index(1, 0), config_index(-1, 0))
                } else {
                    (config_index(0, 1), config_index(0, -1))
                };
                (0..n)
                    .map(|c| {
                        if masks[k][c] {
                            (self.relative_phase(plus, k, c) - self.relative_phase(minus, k, c)) / two_beta
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let mut it = fields.into_iter();
        let g = std::array::from_fn(|_| {
            let ga = it.next().unwrap();
            let gb = it.next().unwrap();
            [ga, gb]
        });
        PhaseGradients { g }
    }

    /// Density-weighted RMS of the mixed derivative `∂²θ_α/∂u_a∂u_b`
    /// estimated from the four corner configurations. The linearisation
    /// neglects it, so it measures the modulus-phase error.
    pub fn mixed_curvature(&self, grid: &CylGrid) -> [f64; 4] {
        let masks = self.masks();
        let b2 = 4.0 * (self.beta * self.beta) as f64;
        std::array::from_fn(|k| {
            let mut acc = 0.0;
            for c in 0..grid.len() {
                if !masks[k][c] {
                    continue;
                }
                let p = |sa, sb| self.relative_phase(config_index(sa, sb), k, c);
                let mixed = (p(1, 1) - p(1, -1) - p(-1, 1) + p(-1, -1)) / b2;
                acc += grid.weights()[c] * self.configs[CENTRAL].psi[k][c].norm_sqr() * mixed * mixed;
            }
            acc.sqrt()
        })
    }

    /// Normalised density overlap between the two internal states of `well`
    /// in the central configuration.
    pub fn density_overlap(&self, grid: &CylGrid, well: Well) -> f64 {
        let [c0, c1] = well.components();
        meanfield::density_overlap(grid, self.central().component(c0), self.central().component(c1))
    }
}

fn sample_all<P: Potentials + ?Sized>(grid: &CylGrid, potentials: &P, t: f64) -> [Vec<f64>; 4] {
    std::array::from_fn(|k| potentials.sample(grid, Component::ALL[k], t))
}

/// Value of `2πm + x` closest to `previous`.
fn unwrap_near(x: f64, previous: f64) -> f64 {
    let turns = ((previous - x) / (2.0 * PI)).round();
    x + 2.0 * PI * turns
}

/// Rate of the reduced phase for the unit transfers `u_a`, `u_b`:
/// `-Σ_α Σ_{α'≠α} (g_αα'/2) u_α' ∫ n̄_α n̄_α'`.
pub fn theta_rate(grid: &CylGrid, couplings: &Couplings, central: &ComponentState) -> [f64; 2] {
    let dens = central.densities();
    let w = grid.weights();
    let mut overlap = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in (a + 1)..4 {
            if couplings.g[a][b] == 0.0 {
                continue;
            }
            let s: f64 = (0..grid.len()).map(|c| w[c] * dens[a][c] * dens[b][c]).sum();
            overlap[a][b] = s;
            overlap[b][a] = s;
        }
    }
    let unit = |well: Well| -> [f64; 4] {
        let mut u = [0.0; 4];
        let [c0, c1] = well.components();
        u[c0.index()] = 1.0;
        u[c1.index()] = -1.0;
        u
    };
    [Well::A, Well::B].map(|well| {
        let u = unit(well);
        let mut rate = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                if a != b && u[b] != 0.0 {
                    rate -= 0.5 * couplings.g[a][b] * u[b] * overlap[a][b];
                }
            }
        }
        rate
    })
}

/// `Σ_r w |φ̄_α|² e^{-i (d_a G^a_α + d_b G^b_α)}`, the overlap between the
/// modes of configurations differing by the transfer `(d_a, d_b)`.
pub fn displaced_overlap(
    grid: &CylGrid,
    central: &ComponentState,
    grads: &PhaseGradients,
    alpha: Component,
    d_a: i64,
    d_b: i64,
) -> C64 {
    let psi = central.component(alpha);
    let (da, db) = (d_a as f64, d_b as f64);
    let mut acc = C64::new(0.0, 0.0);
    for (c, (p, w)) in psi.iter().zip(grid.weights()).enumerate() {
        let phase = grads.dot(alpha, da, db, c);
        acc += C64::from_polar(w * p.norm_sqr(), -phase);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::meanfield::{FreeSpace, HarmonicTraps, PhysicalParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prepared(grid: &CylGrid, za: f64, zb: f64) -> ComponentState {
        let a = grid.gaussian(za);
        let b = grid.gaussian(zb);
        ComponentState::new(FockVector::new(100, 0, 100, 0), [a.clone(), a, b.clone(), b], 0.0)
    }

    #[test]
    fn nine_configurations() {
        let grid = CylGrid::new(8, 16, 0.5, 0.5, -4.0).unwrap();
        let set = init_trajectories(100, 100, 1, &prepared(&grid, -1.0, 1.0)).unwrap();
        assert_eq!(set.central_fock(), FockVector::new(50, 50, 50, 50));
        assert_eq!(set.configs().len(), 9);
        let mut seen: Vec<_> = set.configs().iter().map(|c| c.fock).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 9);
        for c in set.configs() {
            assert_eq!(c.fock.n_a(), 100);
            assert_eq!(c.fock.n_b(), 100);
        }
        assert_eq!(set.config(1, -1).fock, FockVector::new(51, 49, 49, 51));
        assert!(matches!(
            init_trajectories(100, 100, 40, &prepared(&grid, -1.0, 1.0)),
            Err(FockFlowError::BadDisplacement { .. })
        ));
        assert!(init_trajectories(100, 100, 0, &prepared(&grid, -1.0, 1.0)).is_err());
        let odd = init_trajectories(101, 60, 2, &prepared(&grid, -1.0, 1.0)).unwrap();
        assert_eq!(odd.central_fock(), FockVector::new(51, 50, 30, 30));
        let g = set.phase_gradients();
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(set.theta(2, -1), 0.0);
    }

    fn box_setup(couplings: Couplings) -> (CylGrid, Propagator, TrajectorySet) {
        let grid = CylGrid::with_boundary(8, 10, 0.4, 0.4, -2.0, Boundary::Neumann).unwrap();
        let uniform = vec![C64::new(1.0 / grid.volume().sqrt(), 0.0); grid.len()];
        let state = ComponentState::new(
            FockVector::new(40, 0, 30, 0),
            std::array::from_fn(|_| uniform.clone()),
            0.0,
        );
        let prop = Propagator::new(&grid, couplings, 0.01);
        let set = init_trajectories(40, 30, 1, &state).unwrap();
        (grid, prop, set)
    }

    #[test]
    fn homogeneous_box_closed_forms() {
        let (g00, g11, g01) = (0.31, 0.23, 0.17);
        let (grid, prop, mut set) = box_setup(Couplings::from_internal(g00, g11, g01));
        let vol = grid.volume();
        for _ in 0..300 {
            set.advance(&prop, &FreeSpace).unwrap();
        }
        let t = set.t();
        assert!((t - 3.0).abs() < 1e-12);
        // reduced phase: the two transfer directions see g00 - g11
        let expected = -(g00 - g11) / (2.0 * vol) * t;
        assert!(
            (set.theta(1, 0) - expected).abs() < 1e-12,
            "{} vs {expected}",
            set.theta(1, 0)
        );
        assert!((set.theta(0, 1) - expected).abs() < 1e-12);
        // phase gradients from μ_α linear in the populations
        let grads = set.phase_gradients();
        let want = [
            (Component::A0, -(g00 - g01) * t / vol),
            (Component::A1, -(g01 - g11) * t / vol),
            (Component::B0, -(g00 - g01) * t / vol),
            (Component::B1, -(g01 - g11) * t / vol),
        ];
        for (alpha, w) in want {
            for &v in grads.get(alpha, Well::A) {
                assert!((v - w).abs() < 1e-10, "{alpha:?}: {v} vs {w}");
            }
            for &v in grads.get(alpha, Well::B) {
                assert!((v - w).abs() < 1e-10);
            }
        }
        // uniform gradients: overlap is a pure phase
        let o = displaced_overlap(&grid, set.central(), &grads, Component::A0, 1, 0);
        assert!((o.norm() - 1.0).abs() < 1e-12);
        assert!((o.arg() + want[0].1).abs() < 1e-10);
    }

    #[test]
    fn theta_is_antisymmetric_and_vanishes_at_zero() {
        let grid = CylGrid::new(12, 40, 0.3, 0.3, -6.0).unwrap();
        let params = PhysicalParams::default();
        let prop = Propagator::new(&grid, params.couplings(), 0.01);
        let mut set = init_trajectories(100, 100, 1, &prepared(&grid, -1.5, 1.5)).unwrap();
        let traps = HarmonicTraps {
            centers: [-1.0, -1.5, 1.5, 1.0],
        };
        for _ in 0..50 {
            set.advance(&prop, &traps).unwrap();
            let table = set.theta_table();
            for i in 0..5 {
                for j in 0..5 {
                    assert_eq!(table[i][j], -table[4 - i][4 - j]);
                }
            }
            assert_eq!(table[2][2], 0.0);
        }
        assert!(set.theta(1, 0) != 0.0);
    }

    #[test]
    fn ideal_gas_is_trivial() {
        let grid = CylGrid::new(12, 40, 0.3, 0.3, -6.0).unwrap();
        let prop = Propagator::new(&grid, Couplings::zero(), 0.01);
        let mut set = init_trajectories(100, 100, 1, &prepared(&grid, -1.5, 1.5)).unwrap();
        let traps = HarmonicTraps {
            centers: [-1.0, -1.5, 1.5, 1.0],
        };
        for _ in 0..100 {
            set.advance(&prop, &traps).unwrap();
        }
        let grads = set.phase_gradients();
        assert!(grads.max_abs() < 1e-8);
        assert_eq!(set.theta_units(), [0.0, 0.0]);
        for alpha in Component::ALL {
            let o = displaced_overlap(&grid, set.central(), &grads, alpha, 2, -1);
            assert!((o - 1.0).norm() < 1e-10);
        }
        for c in set.configs() {
            assert_eq!(c.psi, set.central().psi);
        }
        assert_eq!(set.mixed_curvature(&grid), [0.0; 4]);
    }

    #[test]
    fn equal_couplings_keep_gradients_small() {
        let grid = CylGrid::new(16, 60, 0.3, 0.3, -9.0).unwrap();
        let g = PhysicalParams::default().couplings().get(Component::A0, Component::A0);
        let prop = Propagator::new(&grid, Couplings::from_internal(g, g, g), 0.01);
        let mut products = Vec::new();
        for n in [100u64, 400] {
            let mut set = init_trajectories(n, n, 1, &prepared(&grid, -2.0, 2.0)).unwrap();
            let traps = HarmonicTraps {
                centers: [-2.0, -1.0, 2.0, 1.0],
            };
            let mut worst: f64 = 0.0;
            for step in 0..300 {
                set.advance(&prop, &traps).unwrap();
                if step % 50 == 49 {
                    worst = worst.max(set.phase_gradients().max_abs() * n as f64 / 2.0);
                }
            }
            products.push(worst);
        }
        // the product stays of order unity instead of growing with N
        assert!(products.iter().all(|&p| p < 20.0), "{products:?}");
        assert!(products[1] < 2.0 * products[0], "{products:?}");
    }

    #[test]
    fn gradients_are_consistent_across_displacements() {
        let grid = CylGrid::new(16, 60, 0.3, 0.3, -9.0).unwrap();
        let params = PhysicalParams::default();
        let prop = Propagator::new(&grid, params.couplings(), 0.01);
        let traps = HarmonicTraps {
            centers: [-1.0, -2.0, 2.0, 1.0],
        };
        let run = |beta: u64| {
            let mut set = init_trajectories(200, 200, beta, &prepared(&grid, -2.0, 2.0)).unwrap();
            for _ in 0..200 {
                set.advance(&prop, &traps).unwrap();
            }
            (set.phase_gradients(), set.central().clone())
        };
        let (g1, central) = run(1);
        let (g2, _) = run(2);
        let w = grid.weights();
        for alpha in Component::ALL {
            for well in Well::BOTH {
                let (a, b) = (g1.get(alpha, well), g2.get(alpha, well));
                let n = central.component(alpha);
                let num: f64 = (0..grid.len())
                    .map(|c| w[c] * n[c].norm_sqr() * (a[c] - b[c]).powi(2))
                    .sum();
                let den: f64 = (0..grid.len()).map(|c| w[c] * n[c].norm_sqr() * a[c].powi(2)).sum();
                assert!(den > 0.0);
                assert!((num / den).sqrt() < 1e-2, "{alpha:?} {well:?}: {}", (num / den).sqrt());
            }
        }
    }

    #[test]
    fn overlap_bounded_for_random_gradients() {
        let grid = CylGrid::new(10, 20, 0.3, 0.3, -3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = grid.gaussian(0.2);
        let state = ComponentState::new(FockVector::new(5, 5, 5, 5), std::array::from_fn(|_| psi.clone()), 0.0);
        for _ in 0..20 {
            let mut grads = PhaseGradients::zeros(grid.len());
            for comp in grads.g.iter_mut() {
                for f in comp.iter_mut() {
                    f.iter_mut().for_each(|v| *v = rng.gen_range(-3.0..3.0));
                }
            }
            for alpha in Component::ALL {
                let o = displaced_overlap(
                    &grid,
                    &state,
                    &grads,
                    alpha,
                    rng.gen_range(-2..=2),
                    rng.gen_range(-2..=2),
                );
                assert!(o.norm() <= 1.0 + 1e-10);
            }
            assert_eq!(
                displaced_overlap(&grid, &state, &grads, Component::B1, 0, 0).re,
                grid.norm_sqr(&psi)
            );
        }
    }

    #[test]
    fn unwrapping_follows_continuity() {
        assert!((unwrap_near(-3.1, 3.1) - (2.0 * PI - 3.1)).abs() < 1e-12);
        assert_eq!(unwrap_near(0.2, 0.1), 0.2);
        assert!((unwrap_near(0.1, 4.0 * PI) - (4.0 * PI + 0.1)).abs() < 1e-12);
    }
}
