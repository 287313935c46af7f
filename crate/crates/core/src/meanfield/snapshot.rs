//! Binary wavefunction snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `EPRSNAP1` |
//! | 4 | format version (`u32`, currently 1) |
//! | 8 + 8 | `n_r`, `n_z` (`u64`) |
//! | 3 × 8 | `dr`, `dz`, `z_min` (`f64`) |
//! | 1 | boundary (0 Dirichlet, 1 Neumann) |
//! | 4 × 8 | populations `N_a0, N_a1, N_b0, N_b1` (`u64`) |
//! | 8 | time in trap units (`f64`) |
//! | 4 × n × 16 | components a0, a1, b0, b1; each cell as `Re, Im` (`f64`), radial index fastest |

use std::io::{self, Read, Write};

use num_complex::Complex64 as C64;

use super::{ComponentState, FockVector};
use crate::grid::{Boundary, CylGrid};

pub const MAGIC: &[u8; 8] = b"EPRSNAP1";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut out: W, grid: &CylGrid, state: &ComponentState) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.n_r() as u64).to_le_bytes())?;
    out.write_all(&(grid.n_z() as u64).to_le_bytes())?;
    for v in [grid.dr(), grid.dz(), grid.z_min()] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&[match grid.boundary() {
        Boundary::Dirichlet => 0u8,
        Boundary::Neumann => 1u8,
    }])?;
    for n in state.fock.0 {
        out.write_all(&n.to_le_bytes())?;
    }
    out.write_all(&state.t.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * grid.len());
    for psi in &state.psi {
        buf.clear();
        for v in psi {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn read_u64<R: Read>(input: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut input: R) -> io::Result<(CylGrid, ComponentState)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid("not a wavefunction snapshot"));
    }
    let mut ver = [0u8; 4];
    input.read_exact(&mut ver)?;
    if u32::from_le_bytes(ver) != VERSION {
        return Err(invalid("unsupported snapshot version"));
    }
    let n_r = read_u64(&mut input)? as usize;
    let n_z = read_u64(&mut input)? as usize;
    let dr = read_f64(&mut input)?;
    let dz = read_f64(&mut input)?;
    let z_min = read_f64(&mut input)?;
    let mut b = [0u8; 1];
    input.read_exact(&mut b)?;
    let boundary = match b[0] {
        0 => Boundary::Dirichlet,
        1 => Boundary::Neumann,
        _ => return Err(invalid("unknown boundary tag")),
    };
    let grid = CylGrid::with_boundary(n_r, n_z, dr, dz, z_min, boundary).map_err(|e| invalid(&e.to_string()))?;
    let mut fock = [0u64; 4];
    for n in fock.iter_mut() {
        *n = read_u64(&mut input)?;
    }
    let t = read_f64(&mut input)?;
    let mut psi: [Vec<C64>; 4] = Default::default();
    let mut buf = vec![0u8; 16 * grid.len()];
    for p in psi.iter_mut() {
        input.read_exact(&mut buf)?;
        *p = buf
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
    }
    Ok((grid, ComponentState::new(FockVector(fock), psi, t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let grid = CylGrid::new(9, 11, 0.3, 0.2, -1.1).unwrap();
        let psi = std::array::from_fn(|k| grid.sample(|r, z| C64::new(r * k as f64, z - 0.1 * k as f64)));
        let state = ComponentState::new(FockVector::new(3, 4, 5, 6), psi, 1.25);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &grid, &state).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 16 + 24 + 1 + 32 + 8 + 4 * 16 * grid.len());
        let (g2, s2) = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(s2, state);
        bytes[0] = b'X';
        assert!(read_snapshot(bytes.as_slice()).is_err());
    }
}
