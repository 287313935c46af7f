//! Real-time Strang splitting: half potential/nonlinear kick, kinetic step,
//! half kick at the new time. The radial kinetic factor is Crank–Nicolson;
//! the axial one is Crank–Nicolson or the exact exponential, following the
//! grid's axial scheme. The two factors act on different indices and commute.

use num_complex::Complex64 as C64;

use super::{nonlinear_potential, Component, ComponentState, Couplings, MeanFieldError, Potentials};
use crate::grid::{AxialSpectrum, CylGrid};

/// Maximum tolerated change of a component norm within one step.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Pre-factored tridiagonal system `a_k x_{k-1} + b_k x_k + c_k x_{k+1} = d_k`.
#[derive(Debug, Clone)]
struct Thomas {
    lower: Vec<C64>,
    inv_pivot: Vec<C64>,
    upper_scaled: Vec<C64>,
}

impl Thomas {
    fn new(lower: Vec<C64>, diag: Vec<C64>, upper: Vec<C64>) -> Self {
        let n = diag.len();
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper_scaled = Vec::with_capacity(n);
        let mut prev = C64::new(0.0, 0.0);
        for k in 0..n {
            let inv = (diag[k] - lower[k] * prev).inv();
            inv_pivot.push(inv);
            prev = upper[k] * inv;
            upper_scaled.push(prev);
        }
        Self {
            lower,
            inv_pivot,
            upper_scaled,
        }
    }

    fn solve_line(&self, x: &mut [C64]) {
        let n = self.inv_pivot.len();
        let mut prev = C64::new(0.0, 0.0);
        for k in 0..n {
            prev = (x[k] - self.lower[k] * prev) * self.inv_pivot[k];
            x[k] = prev;
        }
        for k in (0..n - 1).rev() {
            let next = x[k + 1];
            x[k] -= self.upper_scaled[k] * next;
        }
    }

    /// Solves `width` independent systems stored row-major: row `k` holds
    /// unknown `k` of every system.
    fn solve_rows(&self, x: &mut [C64], width: usize) {
        let n = self.inv_pivot.len();
        let inv0 = self.inv_pivot[0];
        x[..width].iter_mut().for_each(|v| *v *= inv0);
        for k in 1..n {
            let (done, rest) = x.split_at_mut(k * width);
            let prev = &done[(k - 1) * width..];
            let (a, inv) = (self.lower[k], self.inv_pivot[k]);
            for (v, p) in rest[..width].iter_mut().zip(prev) {
                *v = (*v - a * p) * inv;
            }
        }
        for k in (0..n - 1).rev() {
            let (head, tail) = x.split_at_mut((k + 1) * width);
            let c = self.upper_scaled[k];
            for (v, q) in head[k * width..].iter_mut().zip(&tail[..width]) {
                *v -= c * q;
            }
        }
    }
}

/// Fixed-step integrator of the coupled Gross-Pitaevskii equations on one
/// grid. Immutable once built, so one instance can drive many trajectories
/// concurrently.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: CylGrid,
    couplings: Couplings,
    dt: f64,
    radial: Thomas,
    axial: Thomas,
    radial_stencil: Vec<(f64, f64, f64)>,
    axial_stencil: Vec<(f64, f64, f64)>,
    /// Spectral axis: transforms and `exp(-i k² dt/2)`.
    spectral: Option<(AxialSpectrum, Vec<C64>)>,
}

impl Propagator {
    pub fn new(grid: &CylGrid, couplings: Couplings, dt: f64) -> Self {
        assert!(dt > 0.0 && dt.is_finite(), "time step must be positive");
        let lambda = C64::new(0.0, 0.25 * dt);
        let one = C64::new(1.0, 0.0);
        let radial_stencil: Vec<_> = (0..grid.n_r()).map(|i| grid.radial_stencil(i)).collect();
        let axial_stencil: Vec<_> = (0..grid.n_z()).map(|j| grid.axial_stencil(j)).collect();
        let build = |st: &[(f64, f64, f64)]| {
            // columns: (towards +1, towards -1, diagonal)
            let lower = st.iter().map(|&(_, dn, _)| -lambda * dn).collect();
            let diag = st.iter().map(|&(_, _, d)| one + lambda * d).collect();
            let upper = st.iter().map(|&(up, _, _)| -lambda * up).collect();
            Thomas::new(lower, diag, upper)
        };
        let spectral = grid.axial_spectrum().map(|spec| {
            let phase = spec.multiplier(|k2| C64::from_polar(1.0, -0.5 * dt * k2));
            (spec, phase)
        });
        Self {
            grid: grid.clone(),
            couplings,
            dt,
            radial: build(&radial_stencil),
            axial: build(&axial_stencil),
            radial_stencil,
            axial_stencil,
            spectral,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &CylGrid {
        &self.grid
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    /// `exp(i dt Δ/2)` applied to one field (Cayley form for the
    /// finite-difference factors).
    pub fn kinetic(&self, psi: &mut [C64], scratch: &mut Vec<C64>) {
        let n_r = self.grid.n_r();
        let n_z = self.grid.n_z();
        let lambda = C64::new(0.0, 0.25 * self.dt);
        scratch.resize(psi.len(), C64::new(0.0, 0.0));

        for (line, out) in psi.chunks_exact_mut(n_r).zip(scratch.chunks_exact_mut(n_r)) {
            for i in 0..n_r {
                let (up, dn, d) = self.radial_stencil[i];
                let mut lap = -d * line[i];
                if i + 1 < n_r {
                    lap += up * line[i + 1];
                }
                if i > 0 {
                    lap += dn * line[i - 1];
                }
                out[i] = line[i] + lambda * lap;
            }
            self.radial.solve_line(out);
        }

        if let Some((spec, phase)) = &self.spectral {
            psi.copy_from_slice(scratch);
            spec.apply(psi, n_r, phase);
            return;
        }
        for j in 0..n_z {
            let (up, dn, d) = self.axial_stencil[j];
            let row = &scratch[j * n_r..(j + 1) * n_r];
            let out = &mut psi[j * n_r..(j + 1) * n_r];
            for i in 0..n_r {
                let mut lap = -d * row[i];
                if j + 1 < n_z {
                    lap += up * scratch[(j + 1) * n_r + i];
                }
                if j > 0 {
                    lap += dn * scratch[(j - 1) * n_r + i];
                }
                out[i] = row[i] + lambda * lap;
            }
        }
        self.axial.solve_rows(psi, n_r);
    }

    fn kick(&self, state: &mut ComponentState, potentials: &[&[f64]; 4], half_dt: f64, nl: &mut [f64]) {
        let dens = state.densities();
        for alpha in Component::ALL {
            nonlinear_potential(&self.couplings, &state.fock, alpha, &dens, nl);
            let v = potentials[alpha.index()];
            for ((p, u), w) in state.psi[alpha.index()].iter_mut().zip(v).zip(nl.iter()) {
                let (s, c) = (-(u + w) * half_dt).sin_cos();
                *p *= C64::new(c, s);
            }
        }
    }

    /// Advances `state` by one step given the potentials sampled at the start
    /// and at the end of the step.
    pub fn step_with(
        &self,
        state: &mut ComponentState,
        v_now: &[&[f64]; 4],
        v_next: &[&[f64]; 4],
    ) -> Result<(), MeanFieldError> {
        let n = self.grid.len();
        let before: [f64; 4] = std::array::from_fn(|k| self.grid.norm_sqr(&state.psi[k]));
        let mut nl = vec![0.0; n];
        let mut scratch = Vec::with_capacity(n);
        let h = 0.5 * self.dt;
        self.kick(state, v_now, h, &mut nl);
        for psi in state.psi.iter_mut() {
            self.kinetic(psi, &mut scratch);
        }
        self.kick(state, v_next, h, &mut nl);
        state.t += self.dt;
        for alpha in Component::ALL {
            let after = self.grid.norm_sqr(&state.psi[alpha.index()]);
            if !after.is_finite() {
                return Err(MeanFieldError::NonFinite(alpha));
            }
            let drift = (after - before[alpha.index()]).abs();
            if drift > NORM_DRIFT_LIMIT {
                return Err(MeanFieldError::NormDrift {
                    component: alpha,
                    drift,
                });
            }
        }
        Ok(())
    }

    /// Advances `state` by one step, sampling `potentials` at `t` and `t + dt`.
    pub fn step<P: Potentials + ?Sized>(
        &self,
        state: &mut ComponentState,
        potentials: &P,
    ) -> Result<(), MeanFieldError> {
        let now: [Vec<f64>; 4] = std::array::from_fn(|k| potentials.sample(&self.grid, Component::ALL[k], state.t));
        let next: [Vec<f64>; 4] =
            std::array::from_fn(|k| potentials.sample(&self.grid, Component::ALL[k], state.t + self.dt));
        let now_ref: [&[f64]; 4] = std::array::from_fn(|k| now[k].as_slice());
        let next_ref: [&[f64]; 4] = std::array::from_fn(|k| next[k].as_slice());
        self.step_with(state, &now_ref, &next_ref)
    }
}

/// One Strang step of length `dt`; convenience wrapper that builds the
/// factorisation on the fly.
pub fn gpe_step<P: Potentials + ?Sized>(
    state: &mut ComponentState,
    grid: &CylGrid,
    potentials: &P,
    couplings: &Couplings,
    dt: f64,
) -> Result<(), MeanFieldError> {
    Propagator::new(grid, *couplings, dt).step(state, potentials)
}

/// Largest step with `max(|V| + Σ g N n) dt < 0.05` over the cells where any
/// component carries a density above `1e-8` of its peak.
pub fn stable_dt<P: Potentials + ?Sized>(
    state: &ComponentState,
    grid: &CylGrid,
    potentials: &P,
    couplings: &Couplings,
) -> f64 {
    let dens = state.densities();
    let mut nl = vec![0.0; grid.len()];
    let mut v = vec![0.0; grid.len()];
    let mut worst: f64 = 0.0;
    for alpha in Component::ALL {
        let peak = dens[alpha.index()].iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            continue;
        }
        potentials.fill(grid, alpha, state.t, &mut v);
        nonlinear_potential(couplings, &state.fock, alpha, &dens, &mut nl);
        for k in 0..grid.len() {
            if dens[alpha.index()][k] > 1e-8 * peak {
                worst = worst.max(v[k].abs() + nl[k]);
            }
        }
    }
    if worst == 0.0 {
        f64::INFINITY
    } else {
        0.05 / worst
    }
}

#[cfg(test)]
mod tests {
    use super::super::{energy, FockVector, FreeSpace, HarmonicTraps, PhysicalParams};
    use super::*;
    use crate::grid::{AxialScheme, Boundary};

    fn copies(psi: &[C64]) -> [Vec<C64>; 4] {
        std::array::from_fn(|_| psi.to_vec())
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let lower: Vec<C64> = (0..6).map(|k| C64::new(0.1 * k as f64, -0.2)).collect();
        let diag: Vec<C64> = (0..6).map(|k| C64::new(3.0 + k as f64, 0.5)).collect();
        let upper: Vec<C64> = (0..6).map(|k| C64::new(-0.3, 0.05 * k as f64)).collect();
        let t = Thomas::new(lower.clone(), diag.clone(), upper.clone());
        let rhs: Vec<C64> = (0..6).map(|k| C64::new(k as f64, 1.0 - k as f64)).collect();
        let mut x = rhs.clone();
        t.solve_line(&mut x);
        for k in 0..6 {
            let mut lhs = diag[k] * x[k];
            if k > 0 {
                lhs += lower[k] * x[k - 1];
            }
            if k < 5 {
                lhs += upper[k] * x[k + 1];
            }
            assert!((lhs - rhs[k]).norm() < 1e-13);
        }
        // interleaved rows agree with line solves
        let width = 3;
        let mut rows = vec![C64::new(0.0, 0.0); 6 * width];
        for k in 0..6 {
            for l in 0..width {
                rows[k * width + l] = rhs[k] * (l as f64 + 1.0);
            }
        }
        t.solve_rows(&mut rows, width);
        for k in 0..6 {
            for l in 0..width {
                assert!((rows[k * width + l] - x[k] * (l as f64 + 1.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn free_ground_state_is_stationary() {
        let grid = CylGrid::new(40, 100, 0.15, 0.15, -7.5).unwrap();
        let phi0 = grid.gaussian(0.0);
        let mut state = ComponentState::new(FockVector::new(1, 1, 1, 1), copies(&phi0), 0.0);
        let prop = Propagator::new(&grid, Couplings::zero(), 0.01);
        let traps = HarmonicTraps::all_at(0.0);
        let period = 2.0 * std::f64::consts::PI;
        let steps = (10.0 * period / 0.01).round() as usize;
        for _ in 0..steps {
            prop.step(&mut state, &traps).unwrap();
        }
        // the discrete ground state differs slightly from the Gaussian; the
        // overlap modulus measures leakage out of it
        let ovl = grid.inner(&phi0, &state.psi[0]).norm();
        assert!((ovl - 1.0).abs() < 1e-4, "overlap {ovl}");
        assert!(state.max_norm_error(&grid) < 1e-11);
    }

    #[test]
    fn exact_eigenvector_stays_put() {
        for axial in [AxialScheme::FiniteDifference, AxialScheme::Spectral] {
            eigenvector_stays_put(CylGrid::new(24, 60, 0.25, 0.25, -7.5).unwrap().with_axial(axial));
        }
    }

    fn eigenvector_stays_put(grid: CylGrid) {
        // lowest eigenvector of the discrete operator via the ground-state solver
        let traps = HarmonicTraps::all_at(0.0);
        let gs = super::super::ground_state(
            FockVector::new(1, 1, 1, 1),
            &grid,
            &traps,
            &Couplings::zero(),
            &Default::default(),
        )
        .unwrap();
        let mut state = gs.state.clone();
        let prop = Propagator::new(&grid, Couplings::zero(), 0.01);
        let steps = (10.0 * 2.0 * std::f64::consts::PI / 0.01).round() as usize;
        for _ in 0..steps {
            prop.step(&mut state, &traps).unwrap();
        }
        let ovl = grid.inner(&gs.state.psi[0], &state.psi[0]).norm();
        assert!((ovl - 1.0).abs() < 1e-8, "overlap {ovl}");
    }

    #[test]
    fn homogeneous_box_phase() {
        let grid = CylGrid::with_boundary(10, 12, 0.3, 0.3, -1.8, Boundary::Neumann).unwrap();
        let vol = grid.volume();
        let uniform = vec![C64::new(1.0 / vol.sqrt(), 0.0); grid.len()];
        let g = 0.37;
        let couplings = Couplings::from_internal(g, g, 0.0);
        let n = 40;
        let mut state = ComponentState::new(FockVector::new(n, 0, 0, 0), copies(&uniform), 0.0);
        let prop = Propagator::new(&grid, couplings, 0.02);
        let steps = 500;
        for _ in 0..steps {
            prop.step(&mut state, &FreeSpace).unwrap();
        }
        let t = steps as f64 * 0.02;
        let mu = g * (n as f64 - 1.0) / vol;
        let expected = C64::from_polar(1.0, -mu * t);
        for v in &state.psi[0] {
            assert!((v * vol.sqrt() - expected).norm() < 1e-10);
        }
        // an empty mode feels no self-interaction
        for v in &state.psi[1] {
            assert!((v * vol.sqrt() - C64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn energy_and_norm_are_conserved() {
        for axial in [AxialScheme::FiniteDifference, AxialScheme::Spectral] {
            conservation(CylGrid::new(30, 80, 0.2, 0.2, -8.0).unwrap().with_axial(axial));
        }
    }

    fn conservation(grid: CylGrid) {
        let params = PhysicalParams::default();
        let couplings = params.couplings();
        let traps = HarmonicTraps {
            centers: [-1.0, -1.0, 1.0, 1.0],
        };
        let psi: [Vec<C64>; 4] = std::array::from_fn(|k| {
            let mut p = grid.gaussian(if k < 2 { -0.5 } else { 1.8 });
            grid.normalize(&mut p);
            p
        });
        let mut state = ComponentState::new(FockVector::new(60, 40, 50, 50), psi, 0.0);
        let e0 = energy(&state, &grid, &traps, &couplings);
        let dt = 0.005;
        let prop = Propagator::new(&grid, couplings, dt);
        let steps = (25.0 / dt).round() as usize;
        let mut worst_norm: f64 = 0.0;
        for _ in 0..steps {
            let before: Vec<f64> = state.psi.iter().map(|p| grid.norm_sqr(p)).collect();
            prop.step(&mut state, &traps).unwrap();
            for (b, p) in before.iter().zip(&state.psi) {
                worst_norm = worst_norm.max((grid.norm_sqr(p) - b).abs());
            }
        }
        let e1 = energy(&state, &grid, &traps, &couplings);
        assert!(worst_norm < 1e-10, "norm drift {worst_norm}");
        assert!(((e1 - e0) / e0).abs() < 1e-6, "energy {e0} -> {e1}");
    }

    #[test]
    fn displaced_packet_returns_after_one_period() {
        // a displaced oscillator ground state is a coherent state: it comes
        // back to itself after 2π up to a global phase
        let revival = |axial: AxialScheme| {
            let grid = CylGrid::new(24, 120, 0.25, 0.2, -12.0).unwrap().with_axial(axial);
            let phi0 = grid.gaussian(4.0);
            let mut state = ComponentState::new(FockVector::new(1, 0, 0, 0), copies(&phi0), 0.0);
            let dt = 2.0 * std::f64::consts::PI / 1000.0;
            let prop = Propagator::new(&grid, Couplings::zero(), dt);
            for _ in 0..1000 {
                prop.step(&mut state, &HarmonicTraps::all_at(0.0)).unwrap();
            }
            1.0 - grid.inner(&phi0, &state.psi[0]).norm()
        };
        let fd = revival(AxialScheme::FiniteDifference);
        let sp = revival(AxialScheme::Spectral);
        assert!(sp < 1e-4, "spectral loss {sp}");
        assert!(sp < fd / 10.0, "spectral {sp} finite difference {fd}");
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = CylGrid::new(10, 10, 0.3, 0.3, -1.5).unwrap();
        let mut psi = grid.gaussian(0.0);
        psi[3] = C64::new(f64::NAN, 0.0);
        let mut state = ComponentState::new(FockVector::new(1, 0, 0, 0), copies(&psi), 0.0);
        let prop = Propagator::new(&grid, Couplings::zero(), 0.01);
        assert!(matches!(
            prop.step(&mut state, &FreeSpace),
            Err(MeanFieldError::NonFinite(_))
        ));
    }

    #[test]
    fn stable_step_rule() {
        let grid = CylGrid::new(20, 40, 0.25, 0.25, -5.0).unwrap();
        let psi = grid.gaussian(0.0);
        let state = ComponentState::new(FockVector::new(1, 0, 0, 0), copies(&psi), 0.0);
        let dt = stable_dt(&state, &grid, &HarmonicTraps::all_at(0.0), &Couplings::zero());
        let vmax = grid
            .sample(|r, z| {
                let n = (-(r * r + z * z)).exp();
                if n > 1e-8 {
                    0.5 * (r * r + z * z)
                } else {
                    0.0
                }
            })
            .into_iter()
            .fold(0.0, f64::max);
        assert!((dt - 0.05 / vmax).abs() < 1e-12);
    }
}
