//! Physical constants and the conversion of laboratory parameters into trap
//! units (`ħ = m = ω = 1`).

use std::f64::consts::PI;

use super::Component;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOHR_RADIUS: f64 = 52.917_721_09e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

/// Laboratory description of the two-state condensate mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Trap angular frequency (rad/s).
    pub omega: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// s-wave scattering lengths in Bohr radii.
    pub a00: f64,
    pub a11: f64,
    pub a01: f64,
    /// Two-body loss constants (m³/s).
    pub kappa_11: f64,
    pub kappa_01: f64,
    /// Three-body loss constant (m⁶/s).
    pub kappa_000: f64,
    /// One-body lifetime (s); `f64::INFINITY` disables one-body losses.
    pub tau_1: f64,
}

impl Default for PhysicalParams {
    /// ⁸⁷Rb in |F=1,m=-1⟩ / |F=2,m=1⟩ in a 20 Hz isotropic trap.
    fn default() -> Self {
        Self {
            omega: 2.0 * PI * 20.0,
            mass: RB87_MASS,
            a00: 100.4,
            a11: 95.0,
            a01: 98.0,
            kappa_11: 81e-21,
            kappa_01: 15e-21,
            kappa_000: 5.4e-42,
            tau_1: f64::INFINITY,
        }
    }
}

impl PhysicalParams {
    /// Oscillator length `a0 = sqrt(ħ / m ω)` in metres.
    pub fn osc_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega)).sqrt()
    }

    /// Seconds per trap time unit `1/ω`.
    pub fn time_unit(&self) -> f64 {
        1.0 / self.omega
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("omega", self.omega), ("mass", self.mass)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite"));
            }
        }
        let non_negative = [
            ("a00", self.a00),
            ("a11", self.a11),
            ("a01", self.a01),
            ("kappa_11", self.kappa_11),
            ("kappa_01", self.kappa_01),
            ("kappa_000", self.kappa_000),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative"));
            }
        }
        if !(self.tau_1 > 0.0) {
            return Err("tau_1 must be positive".into());
        }
        Ok(())
    }

    /// Contact couplings `g = 4πħ²a/m` expressed in `ħω a0³`.
    pub fn couplings(&self) -> Couplings {
        let a0 = self.osc_length();
        let g = |a_bohr: f64| 4.0 * PI * a_bohr * BOHR_RADIUS / a0;
        Couplings::from_internal(g(self.a00), g(self.a11), g(self.a01))
    }
}

/// Symmetric 4×4 coupling matrix between the components a0, a1, b0, b1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub g: [[f64; 4]; 4],
}

impl Couplings {
    pub fn zero() -> Self {
        Self { g: [[0.0; 4]; 4] }
    }

    /// Couplings that depend only on the internal states of the two atoms,
    /// regardless of which well they were loaded in.
    pub fn from_internal(g00: f64, g11: f64, g01: f64) -> Self {
        let mut g = [[0.0; 4]; 4];
        for a in Component::ALL {
            for b in Component::ALL {
                g[a.index()][b.index()] = match (a.internal(), b.internal()) {
                    (0, 0) => g00,
                    (1, 1) => g11,
                    _ => g01,
                };
            }
        }
        Self { g }
    }

    #[inline]
    pub fn get(&self, a: Component, b: Component) -> f64 {
        self.g[a.index()][b.index()]
    }

    pub fn is_zero(&self) -> bool {
        self.g.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.g;
        g.iter_mut().flatten().for_each(|v| *v *= factor);
        Self { g }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rubidium_units() {
        let p = PhysicalParams::default();
        let a0 = p.osc_length();
        assert!((a0 - 2.411e-6).abs() < 0.01e-6, "a0 = {a0}");
        let c = p.couplings();
        let g00 = c.get(Component::A0, Component::B0);
        assert!((g00 - 4.0 * PI * 100.4 * BOHR_RADIUS / a0).abs() < 1e-15);
        assert!((g00 - 0.0277).abs() < 2e-4, "g00 = {g00}");
        for a in Component::ALL {
            for b in Component::ALL {
                assert_eq!(c.get(a, b), c.get(b, a));
            }
        }
        assert_eq!(c.get(Component::A0, Component::B1), c.get(Component::A1, Component::A0));
    }

    #[test]
    fn validation() {
        let mut p = PhysicalParams::default();
        assert!(p.validate().is_ok());
        p.a01 = -1.0;
        assert!(p.validate().is_err());
    }
}
