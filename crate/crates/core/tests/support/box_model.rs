//! Homogeneous Neumann box with `V = 0`: every mode stays uniform, so the
//! multi-Fock pipeline can be compared with exact phases `e^{-i E(n) t}`.

use eprbec::correlators::{EprResult, DEFAULT_WINDOW_MULT};
use eprbec::fockflow::init_trajectories;
use eprbec::grid::{Boundary, CylGrid};
use eprbec::meanfield::{Component, ComponentState, Couplings, FockVector, FreeSpace, Propagator};
use eprbec::oracle4mode::{oracle_witness, FourModeState};
use eprbec::sequence::{measure, Pulse};
use num_complex::Complex64 as C64;

pub struct BoxModel {
    pub grid: CylGrid,
    pub couplings: Couplings,
}

/// Intra-well couplings `g00 = g11 = 1`, `g01 = 0.9`; across the wells only
/// a0 and b1 interact, with `g = 0.2`.
pub fn box_model() -> BoxModel {
    let grid = CylGrid::with_boundary(8, 8, 0.5, 0.5, -2.0, Boundary::Neumann).unwrap();
    let mut couplings = Couplings::zero();
    for (a, b, g) in [
        (Component::A0, Component::A0, 1.0),
        (Component::A1, Component::A1, 1.0),
        (Component::B0, Component::B0, 1.0),
        (Component::B1, Component::B1, 1.0),
        (Component::A0, Component::A1, 0.9),
        (Component::B0, Component::B1, 0.9),
        (Component::A0, Component::B1, 0.2),
    ] {
        couplings.g[a.index()][b.index()] = g;
        couplings.g[b.index()][a.index()] = g;
    }
    BoxModel { grid, couplings }
}

impl BoxModel {
    /// Many-body energy of a Fock state in the uniform modes.
    pub fn energy(&self, n: &FockVector) -> f64 {
        let v = self.grid.volume();
        let mut e = 0.0;
        for a in Component::ALL {
            for b in Component::ALL {
                let na = n.get(a) as f64;
                let nb = n.get(b) as f64 - if a == b { 1.0 } else { 0.0 };
                e += 0.5 * self.couplings.get(a, b) * na * nb / v;
            }
        }
        e
    }

    pub fn exact(&self, n: u64, t: f64) -> EprResult {
        let start = FourModeState::coherent(n, n, Pulse::default().coefficients());
        oracle_witness(&start.apply_phase(|f| self.energy(f) * t)).unwrap()
    }

    /// Nine-trajectory evolution to each of `times` (increasing).
    pub fn pipeline(&self, n: u64, times: &[f64], dt: f64) -> Vec<EprResult> {
        let uniform = vec![C64::new(1.0 / self.grid.volume().sqrt(), 0.0); self.grid.len()];
        let prepared = ComponentState::new(
            FockVector::new(n, 0, n, 0),
            std::array::from_fn(|_| uniform.clone()),
            0.0,
        );
        let mut set = init_trajectories(n, n, 1, &prepared).unwrap();
        let prop = Propagator::new(&self.grid, self.couplings, dt);
        let mut out = Vec::new();
        for &t in times {
            while set.t() < t - dt / 2.0 {
                set.advance(&prop, &FreeSpace).unwrap();
            }
            out.push(
                measure(&self.grid, &set, Pulse::default().coefficients(), DEFAULT_WINDOW_MULT)
                    .unwrap()
                    .1,
            );
        }
        out
    }

    /// Largest relative errors of the spin length and of `E_EPR` over `times`.
    pub fn compare(&self, n: u64, times: &[f64], dt: f64) -> (f64, f64, Vec<(f64, EprResult, EprResult)>) {
        let sim = self.pipeline(n, times, dt);
        let mut rows = Vec::new();
        let (mut len_err, mut e_err): (f64, f64) = (0.0, 0.0);
        for (&t, s) in times.iter().zip(sim) {
            let x = self.exact(n, t);
            len_err = len_err
                .max((s.spin_len[0] / x.spin_len[0] - 1.0).abs())
                .max((s.spin_len[1] / x.spin_len[1] - 1.0).abs());
            e_err = e_err.max((s.e_epr / x.e_epr - 1.0).abs());
            rows.push((t, s, x));
        }
        (len_err, e_err, rows)
    }
}

/// Times spanning the witness minimum at population `n`.
pub fn box_times(n: u64) -> Vec<f64> {
    let scale = 100.0 / n as f64;
    [5.0, 15.0, 30.0, 45.0].iter().map(|t| t * scale).collect()
}
