//! Cylindrically symmetric (r, z) lattice, volume weights and the discrete
//! single-particle operator `h = -½Δ + V`.
//!
//! All quantities are in trap units: lengths in `a0 = sqrt(ħ/mω)`, energies
//! in `ħω`. Radial nodes sit at half-offset positions `r_i = (i + ½) dr`, so
//! the axis is never sampled and the `1/r` term of the Laplacian stays finite.
//! Axial nodes are cell centred, `z_j = z_min + (j + ½) dz`.
//!
//! Fields are stored as flat vectors with the radial index running fastest:
//! `index = j * n_r + i`.
//!
//! The radial part of the Laplacian is always a second-order flux-form
//! difference. Along z either the matching three-point difference or an
//! exact spectral derivative can be chosen.

mod axial;

pub use axial::AxialSpectrum;

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 8 points per axis (got n_r = {n_r}, n_z = {n_z})")]
    TooFewPoints { n_r: usize, n_z: usize },
    #[error("grid steps must be positive and finite (got dr = {dr}, dz = {dz})")]
    BadStep { dr: f64, dz: f64 },
    #[error("axial origin must be finite")]
    BadOrigin,
}

/// Boundary treatment of the discrete Laplacian at `r = n_r dr` and at both
/// axial edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Field vanishes one step outside the lattice.
    #[default]
    Dirichlet,
    /// Zero flux through the outer faces; a constant field is an exact zero
    /// mode. Used for homogeneous test boxes.
    Neumann,
}

/// Discretisation of `∂²_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxialScheme {
    /// Three-point centred difference.
    #[default]
    FiniteDifference,
    /// Sine (Dirichlet) or cosine (Neumann) series on the cell centres.
    Spectral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylGrid {
    n_r: usize,
    n_z: usize,
    dr: f64,
    dz: f64,
    z_min: f64,
    boundary: Boundary,
    axial: AxialScheme,
    r: Vec<f64>,
    z: Vec<f64>,
    weights: Vec<f64>,
}

impl CylGrid {
    pub fn new(n_r: usize, n_z: usize, dr: f64, dz: f64, z_min: f64) -> Result<Self, GridError> {
        Self::with_boundary(n_r, n_z, dr, dz, z_min, Boundary::Dirichlet)
    }

    pub fn with_boundary(
        n_r: usize,
        n_z: usize,
        dr: f64,
        dz: f64,
        z_min: f64,
        boundary: Boundary,
    ) -> Result<Self, GridError> {
        if n_r < 8 || n_z < 8 {
            return Err(GridError::TooFewPoints { n_r, n_z });
        }
        if !(dr > 0.0 && dz > 0.0 && dr.is_finite() && dz.is_finite()) {
            return Err(GridError::BadStep { dr, dz });
        }
        if !z_min.is_finite() {
            return Err(GridError::BadOrigin);
        }
        let r: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect();
        let z: Vec<f64> = (0..n_z).map(|j| z_min + (j as f64 + 0.5) * dz).collect();
        let mut weights = Vec::with_capacity(n_r * n_z);
        for _ in 0..n_z {
            weights.extend(r.iter().map(|&ri| 2.0 * std::f64::consts::PI * ri * dr * dz));
        }
        Ok(Self {
            n_r,
            n_z,
            dr,
            dz,
            z_min,
            boundary,
            axial: AxialScheme::default(),
            r,
            z,
            weights,
        })
    }

    pub fn with_axial(mut self, axial: AxialScheme) -> Self {
        self.axial = axial;
        self
    }

    pub fn axial(&self) -> AxialScheme {
        self.axial
    }

    /// Transform pair for the spectral scheme, `None` for finite differences.
    pub fn axial_spectrum(&self) -> Option<AxialSpectrum> {
        match self.axial {
            AxialScheme::FiniteDifference => None,
            AxialScheme::Spectral => Some(AxialSpectrum::new(self.n_z, self.dz, self.boundary)),
        }
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Volume element `2π r_i dr dz` of every cell, in storage order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_r + i
    }

    /// Exact volume of the discretised cylinder, `π (n_r dr)² n_z dz`.
    pub fn volume(&self) -> f64 {
        let radius = self.n_r as f64 * self.dr;
        std::f64::consts::PI * radius * radius * self.n_z as f64 * self.dz
    }

    /// Samples `f(r, z)` on every cell.
    pub fn sample<T, F: Fn(f64, f64) -> T>(&self, f: F) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for &zj in &self.z {
            for &ri in &self.r {
                out.push(f(ri, zj));
            }
        }
        out
    }

    pub fn integrate(&self, f: &[C64]) -> C64 {
        debug_assert_eq!(f.len(), self.len());
        f.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn integrate_real(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        f.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Weighted inner product `Σ w φ* ψ`.
    pub fn inner(&self, phi: &[C64], psi: &[C64]) -> C64 {
        phi.iter()
            .zip(psi)
            .zip(&self.weights)
            .map(|((a, b), w)| a.conj() * b * w)
            .sum()
    }

    pub fn norm_sqr(&self, psi: &[C64]) -> f64 {
        psi.iter().zip(&self.weights).map(|(v, w)| v.norm_sqr() * w).sum()
    }

    /// Rescales `psi` to unit norm and returns the norm it had.
    pub fn normalize(&self, psi: &mut [C64]) -> f64 {
        let norm = self.norm_sqr(psi).sqrt();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            psi.iter_mut().for_each(|v| *v *= inv);
        }
        norm
    }

    /// Coefficients of the radial second-difference operator at node `i`:
    /// `(L_r ψ)_i = out_i ψ_{i+1} + in_i ψ_{i-1} - diag_i ψ_i`.
    pub(crate) fn radial_stencil(&self, i: usize) -> (f64, f64, f64) {
        let inv = 1.0 / (self.dr * self.dr * self.r[i]);
        let outer = (i as f64 + 1.0) * self.dr * inv;
        let inner = i as f64 * self.dr * inv;
        let diag = if i + 1 == self.n_r && self.boundary == Boundary::Neumann {
            inner
        } else {
            inner + outer
        };
        let outer = if i + 1 == self.n_r { 0.0 } else { outer };
        (outer, inner, diag)
    }

    /// Coefficients of the axial second-difference operator at node `j`,
    /// same layout as [`radial_stencil`](Self::radial_stencil).
    pub(crate) fn axial_stencil(&self, j: usize) -> (f64, f64, f64) {
        let c = 1.0 / (self.dz * self.dz);
        let up = if j + 1 == self.n_z { 0.0 } else { c };
        let down = if j == 0 { 0.0 } else { c };
        let diag = match self.boundary {
            Boundary::Dirichlet => 2.0 * c,
            Boundary::Neumann => up + down,
        };
        (up, down, diag)
    }

    /// Discrete Laplacian in cylindrical coordinates,
    /// `∂²_r + (1/r)∂_r + ∂²_z`, written in flux form so that it is
    /// self-adjoint under the `2π r dr dz` weights.
    pub fn laplacian(&self, psi: &[C64], out: &mut [C64]) {
        let (n_r, n_z) = (self.n_r, self.n_z);
        let spectrum = self.axial_spectrum();
        for j in 0..n_z {
            let (up, down, zdiag) = match spectrum {
                Some(_) => (0.0, 0.0, 0.0),
                None => self.axial_stencil(j),
            };
            for i in 0..n_r {
                let k = j * n_r + i;
                let (outer, inner, rdiag) = self.radial_stencil(i);
                let mut acc = -(rdiag + zdiag) * psi[k];
                if i + 1 < n_r {
                    acc += outer * psi[k + 1];
                }
                if i > 0 {
                    acc += inner * psi[k - 1];
                }
                if j + 1 < n_z {
                    acc += up * psi[k + n_r];
                }
                if j > 0 {
                    acc += down * psi[k - n_r];
                }
                out[k] = acc;
            }
        }
        if let Some(spec) = spectrum {
            let mut d2 = psi.to_vec();
            spec.apply(&mut d2, n_r, &spec.multiplier(|k2| C64::new(-k2, 0.0)));
            out.iter_mut().zip(&d2).for_each(|(o, d)| *o += d);
        }
    }

    /// `h ψ = -½ Δ ψ + V ψ`.
    pub fn apply_kinetic_potential(&self, psi: &[C64], potential: &[f64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        self.laplacian(psi, &mut out);
        for ((o, p), v) in out.iter_mut().zip(psi).zip(potential) {
            *o = -0.5 * *o + v * p;
        }
        out
    }

    /// Normalised isotropic oscillator ground state centred at `z0`.
    pub fn gaussian(&self, z0: f64) -> Vec<C64> {
        let mut psi = self.sample(|r, z| {
            let d2 = r * r + (z - z0) * (z - z0);
            C64::new((-0.5 * d2).exp(), 0.0)
        });
        self.normalize(&mut psi);
        psi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cylinder_volume() {
        let g = CylGrid::new(8, 8, 0.5, 0.5, -2.0).unwrap();
        let total: f64 = g.weights().iter().sum();
        let expected = std::f64::consts::PI * 16.0 * 4.0;
        assert!((total - expected).abs() / expected < 1e-12);
        assert!((total - 201.06).abs() < 0.01);
        let fine = CylGrid::new(16, 16, 0.25, 0.25, -2.0).unwrap();
        let total_fine: f64 = fine.weights().iter().sum();
        assert!((total_fine - total).abs() / total < 1e-12);
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert!(g.r().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            CylGrid::new(8, 8, -0.1, 0.5, 0.0),
            Err(GridError::BadStep { .. })
        ));
        assert!(matches!(
            CylGrid::new(4, 8, 0.1, 0.5, 0.0),
            Err(GridError::TooFewPoints { .. })
        ));
        assert!(CylGrid::new(8, 8, 0.1, 0.0, 0.0).is_err());
        assert!(CylGrid::new(8, 8, 0.1, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn integrate_constant_and_odd() {
        let g = CylGrid::new(12, 16, 0.3, 0.25, -2.0).unwrap();
        let ones = vec![C64::new(1.0, 0.0); g.len()];
        assert!((g.integrate(&ones).re - g.volume()).abs() / g.volume() < 1e-12);
        let odd = g.sample(|r, z| C64::new(z * (-r * r).exp(), z.powi(3)));
        assert!(g.integrate(&odd).norm() < 1e-12);
        let psi = g.gaussian(0.0);
        assert!((g.norm_sqr(&psi) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oscillator_eigenstate() {
        let g = CylGrid::new(60, 120, 0.1, 0.1, -6.0).unwrap();
        let psi = g.gaussian(0.0);
        let v = g.sample(|r, z| 0.5 * (r * r + z * z));
        let hpsi = g.apply_kinetic_potential(&psi, &v);
        let energy = g.inner(&psi, &hpsi).re;
        assert!((energy - 1.5).abs() < 5e-3, "energy {energy}");
        // pointwise eigen-equation away from the edges
        let resid: Vec<C64> = hpsi.iter().zip(&psi).map(|(h, p)| h - 1.5 * p).collect();
        assert!(g.norm_sqr(&resid).sqrt() < 2e-2);
    }

    #[test]
    fn constant_field_is_annihilated_in_the_bulk() {
        let g = CylGrid::new(10, 10, 0.2, 0.2, -1.0).unwrap();
        let ones = vec![C64::new(1.0, 0.0); g.len()];
        let zero = vec![0.0; g.len()];
        let h = g.apply_kinetic_potential(&ones, &zero);
        for j in 1..g.n_z() - 1 {
            for i in 0..g.n_r() - 1 {
                assert!(h[g.index(i, j)].norm() < 1e-12);
            }
        }
        let box_grid = CylGrid::with_boundary(10, 10, 0.2, 0.2, -1.0, Boundary::Neumann).unwrap();
        let h = box_grid.apply_kinetic_potential(&ones, &zero);
        assert!(h.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn hermitian_under_weighted_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (boundary, axial) in [
            (Boundary::Dirichlet, AxialScheme::FiniteDifference),
            (Boundary::Neumann, AxialScheme::FiniteDifference),
            (Boundary::Dirichlet, AxialScheme::Spectral),
            (Boundary::Neumann, AxialScheme::Spectral),
        ] {
            let g = CylGrid::with_boundary(9, 13, 0.17, 0.23, -1.3, boundary)
                .unwrap()
                .with_axial(axial);
            let rand_field = |rng: &mut ChaCha8Rng| -> Vec<C64> {
                (0..g.len())
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            };
            let phi = rand_field(&mut rng);
            let psi = rand_field(&mut rng);
            let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..3.0)).collect();
            let h_psi = g.apply_kinetic_potential(&psi, &v);
            let h_phi = g.apply_kinetic_potential(&phi, &v);
            // direct double sum of ⟨φ|hψ⟩ and ⟨hφ|ψ⟩
            let lhs = g.inner(&phi, &h_psi);
            let rhs = g.inner(&h_phi, &psi);
            assert!((lhs - rhs).norm() / lhs.norm() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn refinement_converges() {
        let error = |h: f64| {
            let n_r = (6.0 / h).round() as usize;
            let n_z = (12.0 / h).round() as usize;
            let g = CylGrid::new(n_r, n_z, h, h, -6.0).unwrap();
            let psi = g.gaussian(0.0);
            let v = g.sample(|r, z| 0.5 * (r * r + z * z));
            let e = g.inner(&psi, &g.apply_kinetic_potential(&psi, &v)).re;
            (e - 1.5).abs()
        };
        let coarse = error(0.4);
        let fine = error(0.2);
        assert!(coarse / fine >= 3.0, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn spectral_axis_removes_the_axial_error() {
        // with a fine radial step the remaining error of the oscillator
        // energy is the axial one
        let energy = |axial: AxialScheme| {
            let g = CylGrid::new(120, 40, 0.05, 0.3, -6.0).unwrap().with_axial(axial);
            let psi = g.gaussian(0.0);
            let v = g.sample(|r, z| 0.5 * (r * r + z * z));
            g.inner(&psi, &g.apply_kinetic_potential(&psi, &v)).re
        };
        let fd = (energy(AxialScheme::FiniteDifference) - 1.5).abs();
        let sp = (energy(AxialScheme::Spectral) - 1.5).abs();
        assert!(sp < fd / 5.0, "spectral {sp} finite difference {fd}");
        let box_grid = CylGrid::with_boundary(10, 10, 0.2, 0.2, -1.0, Boundary::Neumann)
            .unwrap()
            .with_axial(AxialScheme::Spectral);
        let ones = vec![C64::new(1.0, 0.0); box_grid.len()];
        let h = box_grid.apply_kinetic_potential(&ones, &vec![0.0; box_grid.len()]);
        assert!(h.iter().all(|v| v.norm() < 1e-12));
    }
}
