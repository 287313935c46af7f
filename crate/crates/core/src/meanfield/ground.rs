//! Stationary states by a normalised backward-Euler gradient flow.
//!
//! Each iteration freezes the mean-field potential at the current iterate and
//! takes `φ' = φ - τ P⁻¹ (H - μ) φ` with `P = 1 + τ H_fd`, factored by banded
//! Cholesky in the weight-symmetrised variables, then renormalises. On a
//! finite-difference grid `H_fd = H` and this is the backward-Euler flow. On a
//! spectral axis `H_fd` uses the three-point axial stencil scaled by
//! [`SPECTRAL_PRECONDITIONER_SCALE`], which bounds the spectral-to-stencil
//! ratio of every mode inside the contraction range.

use num_complex::Complex64 as C64;

use super::banded::BandedSpd;
use super::{nonlinear_potential, Component, ComponentState, Couplings, FockVector, MeanFieldError, Potentials};
use crate::grid::{AxialSpectrum, CylGrid};

/// Axial stencil scale of the preconditioner on a spectral axis. The
/// ratio `k² / (4 sin²(k dz/2)/dz²)` lies in `[1, π²/4]`; after scaling
/// it stays within `(0, 2)`.
pub const SPECTRAL_PRECONDITIONER_SCALE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateOptions {
    /// Imaginary-time step of the flow.
    pub tau: f64,
    /// Convergence target for `‖(H - μ) φ‖` of every component.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the mean-field energy after every iteration.
    pub track_energy: bool,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            tau: 4.0,
            tol: 1e-8,
            max_iter: 4000,
            track_energy: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: ComponentState,
    pub mu: [f64; 4],
    pub iterations: usize,
    pub residual: f64,
    pub energy_trace: Vec<f64>,
}

/// The axial transform with its `-k²` multiplier.
type Axial = Option<(AxialSpectrum, Vec<f64>)>;

fn axial_operator(grid: &CylGrid) -> Axial {
    grid.axial_spectrum().map(|spec| {
        let m = spec.multiplier(|k2| -k2);
        (spec, m)
    })
}

/// `H φ` for a real field with effective potential `veff`.
fn apply_h(grid: &CylGrid, axial: &Axial, phi: &[f64], veff: &[f64], out: &mut [f64]) {
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    for j in 0..n_z {
        let (up, dn, zd) = if axial.is_some() {
            (0.0, 0.0, 0.0)
        } else {
            grid.axial_stencil(j)
        };
        for i in 0..n_r {
            let (out_r, in_r, rd) = grid.radial_stencil(i);
            let k = j * n_r + i;
            let mut lap = -(rd + zd) * phi[k];
            if i + 1 < n_r {
                lap += out_r * phi[k + 1];
            }
            if i > 0 {
                lap += in_r * phi[k - 1];
            }
            if j + 1 < n_z {
                lap += up * phi[k + n_r];
            }
            if j > 0 {
                lap += dn * phi[k - n_r];
            }
            out[k] = -0.5 * lap + veff[k] * phi[k];
        }
    }
    if let Some((spec, minus_k2)) = axial {
        let mut d2 = vec![0.0; phi.len()];
        spec.apply_real(phi, &mut d2, n_r, minus_k2);
        out.iter_mut().zip(&d2).for_each(|(o, d)| *o -= 0.5 * d);
    }
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

fn normalize(w: &[f64], phi: &mut [f64]) {
    let n = weighted_dot(w, phi, phi).sqrt();
    phi.iter_mut().for_each(|v| *v /= n);
}

/// Builds and factors `1 + τ H_fd` in the variables `sqrt(w) φ`.
fn factor_flow_matrix(grid: &CylGrid, veff: &[f64], tau: f64, axial_scale: f64) -> Option<BandedSpd> {
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    let r = grid.r();
    let mut m = BandedSpd::zeros(grid.len(), n_r);
    for j in 0..n_z {
        let (_, dn, zd) = grid.axial_stencil(j);
        let (dn, zd) = (axial_scale * dn, axial_scale * zd);
        for i in 0..n_r {
            let (_, in_r, rd) = grid.radial_stencil(i);
            let k = j * n_r + i;
            m.set(k, k, 1.0 + tau * (0.5 * (rd + zd) + veff[k]));
            if i > 0 {
                // symmetric partner of the radial coupling under the r weights
                let sym = in_r * (r[i] / r[i - 1]).sqrt();
                m.set(k, k - 1, -0.5 * tau * sym);
            }
            if j > 0 {
                m.set(k, k - n_r, -0.5 * tau * dn);
            }
        }
    }
    if m.factor() {
        Some(m)
    } else {
        None
    }
}

fn mean_field_energy(
    grid: &CylGrid,
    axial: &Axial,
    fock: &FockVector,
    phi: &[Vec<f64>; 4],
    v: &[Vec<f64>; 4],
    couplings: &Couplings,
) -> f64 {
    let w = grid.weights();
    let mut h = vec![0.0; grid.len()];
    let mut total = 0.0;
    for a in Component::ALL {
        let n = fock.get(a) as f64;
        if n == 0.0 {
            continue;
        }
        apply_h(grid, axial, &phi[a.index()], &v[a.index()], &mut h);
        total += n * weighted_dot(w, &phi[a.index()], &h);
    }
    for a in Component::ALL {
        for b in Component::ALL {
            let (na, nb) = (fock.get(a) as f64, fock.get(b) as f64);
            let pair = if a == b { na * (na - 1.0) } else { na * nb };
            let g = couplings.get(a, b);
            if pair == 0.0 || g == 0.0 {
                continue;
            }
            let s: f64 = (0..grid.len())
                .map(|k| w[k] * (phi[a.index()][k] * phi[b.index()][k]).powi(2))
                .sum();
            total += 0.5 * g * pair * s;
        }
    }
    total
}

/// Ground state of all four components for populations `fock`, with the
/// potentials evaluated at `t = 0`. The initial guess is an oscillator
/// Gaussian centred on each component's potential minimum.
pub fn ground_state<P: Potentials + ?Sized>(
    fock: FockVector,
    grid: &CylGrid,
    potentials: &P,
    couplings: &Couplings,
    options: &GroundStateOptions,
) -> Result<GroundState, MeanFieldError> {
    let initial: [Vec<f64>; 4] = std::array::from_fn(|k| {
        let v = potentials.sample(grid, Component::ALL[k], 0.0);
        let kmin = (0..v.len()).fold(0, |best, k| if v[k] < v[best] { k } else { best });
        let z0 = grid.z()[kmin / grid.n_r()];
        grid.gaussian(z0).iter().map(|c| c.re).collect()
    });
    ground_state_from(fock, initial, grid, potentials, couplings, options)
}

/// Same as [`ground_state`] with an explicit real starting guess per
/// component (used to warm-start nearby configurations).
pub fn ground_state_from<P: Potentials + ?Sized>(
    fock: FockVector,
    mut phi: [Vec<f64>; 4],
    grid: &CylGrid,
    potentials: &P,
    couplings: &Couplings,
    options: &GroundStateOptions,
) -> Result<GroundState, MeanFieldError> {
    let w = grid.weights();
    let n = grid.len();
    let axial = axial_operator(grid);
    let axial_scale = if axial.is_some() {
        SPECTRAL_PRECONDITIONER_SCALE
    } else {
        1.0
    };
    let v: [Vec<f64>; 4] = std::array::from_fn(|k| potentials.sample(grid, Component::ALL[k], 0.0));
    for p in phi.iter_mut() {
        normalize(w, p);
    }
    let mut veff: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut nl = vec![0.0; n];
    let mut h: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut mu = [0.0; 4];
    let mut energy_trace = Vec::new();
    let mut residual = f64::INFINITY;

    for iter in 0..=options.max_iter {
        let dens: [Vec<f64>; 4] = std::array::from_fn(|k| phi[k].iter().map(|x| x * x).collect());
        residual = 0.0;
        for a in Component::ALL {
            let k = a.index();
            nonlinear_potential(couplings, &fock, a, &dens, &mut nl);
            for c in 0..n {
                veff[k][c] = v[k][c] + nl[c];
            }
            apply_h(grid, &axial, &phi[k], &veff[k], &mut h[k]);
            mu[k] = weighted_dot(w, &phi[k], &h[k]);
            let r2: f64 = (0..n).map(|c| w[c] * (h[k][c] - mu[k] * phi[k][c]).powi(2)).sum();
            residual = residual.max(r2.sqrt());
        }
        if options.track_energy {
            energy_trace.push(mean_field_energy(grid, &axial, &fock, &phi, &v, couplings));
        }
        if !residual.is_finite() {
            return Err(MeanFieldError::NoConvergence {
                iterations: iter,
                residual,
            });
        }
        if residual < options.tol {
            let psi = std::array::from_fn(|k| phi[k].iter().map(|&x| C64::new(x, 0.0)).collect());
            return Ok(GroundState {
                state: ComponentState::new(fock, psi, 0.0),
                mu,
                iterations: iter,
                residual,
                energy_trace,
            });
        }
        if iter == options.max_iter {
            break;
        }
        for a in Component::ALL {
            let k = a.index();
            let factor = factor_flow_matrix(grid, &veff[k], options.tau, axial_scale)
                .ok_or(MeanFieldError::NotPositiveDefinite)?;
            let mut x: Vec<f64> = (0..n)
                .map(|c| options.tau * w[c].sqrt() * (h[k][c] - mu[k] * phi[k][c]))
                .collect();
            factor.solve(&mut x);
            for c in 0..n {
                phi[k][c] -= x[c] / w[c].sqrt();
            }
            normalize(w, &mut phi[k]);
        }
    }
    Err(MeanFieldError::NoConvergence {
        iterations: options.max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{chemical_potential, energy, HarmonicTraps, PhysicalParams};
    use super::*;
    use crate::grid::AxialScheme;

    #[test]
    fn ideal_gas_oscillator() {
        let grid = CylGrid::new(40, 80, 0.15, 0.15, -6.0).unwrap();
        let gs = ground_state(
            FockVector::new(1, 0, 0, 0),
            &grid,
            &HarmonicTraps::all_at(0.0),
            &Couplings::zero(),
            &GroundStateOptions::default(),
        )
        .unwrap();
        assert!(gs.residual < 1e-8);
        for m in gs.mu {
            assert!((m - 1.5).abs() < 5e-3, "mu {m}");
        }
        let e = energy(&gs.state, &grid, &HarmonicTraps::all_at(0.0), &Couplings::zero());
        assert!((e - gs.mu[0]).abs() < 1e-12);
    }

    fn rb_ground(n: u64, h: f64) -> (GroundState, CylGrid) {
        let half = 8.0;
        let grid = CylGrid::new(
            (half / h).round() as usize,
            (2.0 * half / h).round() as usize,
            h,
            h,
            -half,
        )
        .unwrap();
        let params = PhysicalParams::default();
        let gs = ground_state(
            FockVector::new(n, 0, 0, 0),
            &grid,
            &HarmonicTraps::all_at(0.0),
            &params.couplings(),
            &GroundStateOptions::default(),
        )
        .unwrap();
        (gs, grid)
    }

    fn thomas_fermi(n: f64) -> f64 {
        let params = PhysicalParams::default();
        let a = params.a00 * super::super::BOHR_RADIUS / params.osc_length();
        0.5 * (15.0 * n * a).powf(0.4)
    }

    #[test]
    fn thomas_fermi_limit() {
        // the Thomas–Fermi profile ignores the kinetic energy; it becomes
        // accurate at a few per cent once μ is several ħω
        let (gs, _) = rb_ground(20_000, 0.25);
        let tf = thomas_fermi(20_000.0);
        assert!(((gs.mu[0] - tf) / tf).abs() < 0.05, "mu {} tf {tf}", gs.mu[0]);
        // at N = 500 the kinetic correction keeps μ above the estimate
        let (gs, _) = rb_ground(500, 0.2);
        let tf = thomas_fermi(500.0);
        assert!(gs.mu[0] > tf && gs.mu[0] < 1.5 * tf, "mu {} tf {tf}", gs.mu[0]);
    }

    #[test]
    fn refinement_changes_mu_little() {
        let (coarse, _) = rb_ground(500, 0.2);
        let (fine, _) = rb_ground(500, 0.1);
        let rel = ((coarse.mu[0] - fine.mu[0]) / fine.mu[0]).abs();
        assert!(rel < 5e-3, "relative change {rel}");
    }

    #[test]
    fn mu_is_energy_derivative() {
        let grid = CylGrid::new(32, 64, 0.25, 0.25, -8.0).unwrap();
        let params = PhysicalParams::default();
        let c = params.couplings();
        let traps = HarmonicTraps::all_at(0.0);
        let opts = GroundStateOptions::default();
        let e = |n: u64| {
            let gs = ground_state(FockVector::new(n, 0, 0, 0), &grid, &traps, &c, &opts).unwrap();
            energy(&gs.state, &grid, &traps, &c)
        };
        let gs = ground_state(FockVector::new(500, 0, 0, 0), &grid, &traps, &c, &opts).unwrap();
        let mu = chemical_potential(&gs.state, &grid, &traps, &c)[0];
        assert!((mu - gs.mu[0]).abs() < 1e-9);
        // E(N) - E(N-1) is μ at N - 1/2
        let de = 0.5 * (e(501) - e(499));
        assert!(((de - mu) / mu).abs() < 0.01, "dE/dN {de} mu {mu}");
    }

    #[test]
    fn energy_decreases_along_the_flow() {
        let grid = CylGrid::new(24, 48, 0.25, 0.25, -6.0).unwrap();
        let params = PhysicalParams::default();
        let opts = GroundStateOptions {
            tau: 0.5,
            track_energy: true,
            ..Default::default()
        };
        let gs = ground_state(
            FockVector::new(300, 200, 0, 0),
            &grid,
            &HarmonicTraps {
                centers: [0.0, 0.5, 0.0, 0.0],
            },
            &params.couplings(),
            &opts,
        )
        .unwrap();
        let trace = &gs.energy_trace;
        assert!(trace.len() > 3);
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs(), "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn mirrored_labels_give_mirrored_states() {
        let grid = CylGrid::new(16, 40, 0.3, 0.3, -6.0).unwrap();
        let c = Couplings::from_internal(0.03, 0.03, 0.02);
        let opts = GroundStateOptions::default();
        let left = ground_state(
            FockVector::new(40, 30, 0, 0),
            &grid,
            &HarmonicTraps {
                centers: [-1.5, 1.5, 0.0, 0.0],
            },
            &c,
            &opts,
        )
        .unwrap();
        let right = ground_state(
            FockVector::new(30, 40, 0, 0),
            &grid,
            &HarmonicTraps {
                centers: [1.5, -1.5, 0.0, 0.0],
            },
            &c,
            &opts,
        )
        .unwrap();
        assert_eq!(left.state.psi[0], right.state.psi[1]);
        assert_eq!(left.state.psi[1], right.state.psi[0]);
    }

    #[test]
    fn spectral_axis_ground_state() {
        let opts = GroundStateOptions::default();
        let traps = HarmonicTraps::all_at(0.0);
        let params = PhysicalParams::default();
        let mu = |axial: AxialScheme, dz: f64, c: &Couplings| {
            let grid = CylGrid::new(80, (16.0 / dz).round() as usize, 0.1, dz, -8.0)
                .unwrap()
                .with_axial(axial);
            let gs = ground_state(FockVector::new(300, 0, 0, 0), &grid, &traps, c, &opts).unwrap();
            assert!(gs.residual < opts.tol);
            gs.mu[0]
        };
        let ideal = mu(AxialScheme::Spectral, 0.4, &Couplings::zero());
        let ideal_fd = mu(AxialScheme::FiniteDifference, 0.4, &Couplings::zero());
        assert!((ideal - 1.5).abs() < (ideal_fd - 1.5).abs() / 5.0, "{ideal} {ideal_fd}");
        // a coarse spectral axis already agrees with a fine one
        let c = params.couplings();
        let coarse = mu(AxialScheme::Spectral, 0.4, &c);
        let fine = mu(AxialScheme::Spectral, 0.2, &c);
        assert!(((coarse - fine) / fine).abs() < 1e-4, "{coarse} {fine}");
    }
}
