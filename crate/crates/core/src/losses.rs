//! Static atom-loss budget of a stationary configuration.
//!
//! Rates are evaluated once on fixed densities and integrated linearly in
//! time. The atom-loss convention is used for two-body processes,
//! `dn_ε/dt = -κ_εε n_ε² - κ_εε' n_ε n_ε'`, so a 0-1 collision removes one
//! atom of each state. Three-body losses remove three atoms per event of
//! rate `κ_000 n_0³`.

use crate::grid::CylGrid;
use crate::meanfield::{Component, ComponentState, PhysicalParams};

/// Loss rates in atoms per second and their integral over `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    pub rate_one_body: f64,
    pub rate_two_body_11: f64,
    pub rate_two_body_01: f64,
    pub rate_three_body: f64,
    /// Seconds.
    pub duration: f64,
    pub n_lost: f64,
    pub lost_fraction: f64,
}

impl LossBudget {
    pub fn total_rate(&self) -> f64 {
        self.rate_one_body + self.rate_two_body_11 + self.rate_two_body_01 + self.rate_three_body
    }

    pub fn two_body_lost(&self) -> f64 {
        (self.rate_two_body_11 + self.rate_two_body_01) * self.duration
    }
}

/// Loss budget of `state` (trap units on `grid`) held for `duration` seconds.
pub fn loss_estimate(grid: &CylGrid, state: &ComponentState, duration: f64, params: &PhysicalParams) -> LossBudget {
    let a0 = params.osc_length();
    let dens = state.densities();
    let n = |c: Component, k: usize| state.fock.get(c) as f64 * dens[c.index()][k];
    let mut i11 = 0.0;
    let mut i01 = 0.0;
    let mut i000 = 0.0;
    for (k, w) in grid.weights().iter().enumerate() {
        let n0 = n(Component::A0, k) + n(Component::B0, k);
        let n1 = n(Component::A1, k) + n(Component::B1, k);
        i11 += w * n1 * n1;
        i01 += w * n0 * n1;
        i000 += w * n0 * n0 * n0;
    }
    // ∫ n_phys^p d³r = a0^{3 - 3p} ∫ n^p d³r̃
    let total = state.fock.0.iter().sum::<u64>() as f64;
    let rate_one_body = if params.tau_1.is_finite() {
        total / params.tau_1
    } else {
        0.0
    };
    let rate_two_body_11 = params.kappa_11 * i11 / a0.powi(3);
    let rate_two_body_01 = 2.0 * params.kappa_01 * i01 / a0.powi(3);
    let rate_three_body = 3.0 * params.kappa_000 * i000 / a0.powi(6);
    let rate = rate_one_body + rate_two_body_11 + rate_two_body_01 + rate_three_body;
    let n_lost = (rate * duration.max(0.0)).min(total);
    LossBudget {
        rate_one_body,
        rate_two_body_11,
        rate_two_body_01,
        rate_three_body,
        duration,
        n_lost,
        lost_fraction: if total > 0.0 { n_lost / total } else { 0.0 },
    }
}
