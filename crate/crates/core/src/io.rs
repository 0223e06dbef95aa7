//! Binary field dumps and checkpoint manifests.
//!
//! A dump is a 64-byte header followed by little-endian `f64` data, one
//! component after another in `(i, j, k)` row-major order. A JSON sidecar
//! with the same metadata sits next to it (`<file>.json`).
//!
//! Header layout (all little-endian):
//!
//! | bytes  | content              |
//! |--------|----------------------|
//! | 0..8   | magic `HSNSFLD1`     |
//! | 8..16  | `n` (u64)            |
//! | 16..24 | `N_tan` (u64)        |
//! | 24..32 | `N_nor` (u64)        |
//! | 32..40 | `L` (f64)            |
//! | 40..48 | `H` (f64)            |
//! | 48..56 | component count (u64)|
//! | 56..64 | reserved, zero       |

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::HalfSpaceGrid;

const MAGIC: &[u8; 8] = b"HSNSFLD1";
pub const HEADER_LEN: usize = 64;

/// Metadata shared by the header and the sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    pub n_tan: usize,
    pub n_nor: usize,
    pub length: f64,
    pub height: f64,
    pub components: usize,
}

impl FieldHeader {
    pub fn for_components(grid: &HalfSpaceGrid, components: usize) -> Self {
        Self {
            n: grid.dim(),
            n_tan: grid.n_tan(),
            n_nor: grid.n_nor(),
            length: grid.length(),
            height: grid.height(),
            components,
        }
    }

    pub fn grid(&self) -> Result<HalfSpaceGrid> {
        HalfSpaceGrid::new(self.n, self.length, self.n_tan, self.height, self.n_nor)
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..8].copy_from_slice(MAGIC);
        b[8..16].copy_from_slice(&(self.n as u64).to_le_bytes());
        b[16..24].copy_from_slice(&(self.n_tan as u64).to_le_bytes());
        b[24..32].copy_from_slice(&(self.n_nor as u64).to_le_bytes());
        b[32..40].copy_from_slice(&self.length.to_le_bytes());
        b[40..48].copy_from_slice(&self.height.to_le_bytes());
        b[48..56].copy_from_slice(&(self.components as u64).to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN || &b[0..8] != MAGIC {
            return Err(Error::InvalidInput("not a field dump (bad magic)".into()));
        }
        let u = |r: std::ops::Range<usize>| u64::from_le_bytes(b[r].try_into().expect("8 bytes")) as usize;
        let f = |r: std::ops::Range<usize>| f64::from_le_bytes(b[r].try_into().expect("8 bytes"));
        Ok(Self { n: u(8..16), n_tan: u(16..24), n_nor: u(24..32), length: f(32..40), height: f(40..48), components: u(48..56) })
    }
}

/// Sidecar path `<file>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes a set of same-grid arrays with header and sidecar.
pub fn write_arrays(path: &Path, grid: &HalfSpaceGrid, comps: &[Array3<f64>]) -> Result<()> {
    let header = FieldHeader::for_components(grid, comps.len());
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * grid.node_count() * comps.len());
    buf.extend_from_slice(&header.to_bytes());
    for c in comps {
        if c.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!("array {:?} vs grid {:?}", c.dim(), grid.shape())));
        }
        for v in c.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&buf)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// Reads a dump written by [`write_arrays`].
pub fn read_arrays(path: &Path) -> Result<(HalfSpaceGrid, Vec<Array3<f64>>)> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let header = FieldHeader::from_bytes(&buf)?;
    let grid = header.grid()?;
    let count = grid.node_count();
    if buf.len() != HEADER_LEN + 8 * count * header.components {
        return Err(Error::InvalidInput(format!(
            "dump has {} bytes, header implies {}",
            buf.len(),
            HEADER_LEN + 8 * count * header.components
        )));
    }
    let mut values = buf[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let comps = (0..header.components)
        .map(|_| {
            let data: Vec<f64> = values.by_ref().take(count).collect();
            Array3::from_shape_vec(grid.shape(), data).expect("length checked")
        })
        .collect();
    Ok((grid, comps))
}

pub fn write_vector(path: &Path, f: &VectorField) -> Result<()> {
    write_arrays(path, f.grid(), f.comps())
}

pub fn read_vector(path: &Path) -> Result<VectorField> {
    let (grid, comps) = read_arrays(path)?;
    VectorField::from_components(&grid, comps)
}

/// One checkpointed iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub m: usize,
    /// Dump files, one per sample time, relative to the manifest.
    pub files: Vec<String>,
    pub norm_weighted: f64,
    pub norm_besov: f64,
}

/// Iteration-index manifest of a Picard run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub times: Vec<f64>,
    pub entries: Vec<CheckpointEntry>,
}

impl CheckpointManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let g = HalfSpaceGrid::new(2, 1.0, 8, 1.5, 8).unwrap();
        let f = VectorField::from_fn(&g, |x| [x[0].sin() / 3.0, x[2] * 1e-300, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.bin");
        write_vector(&p, &f).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len() as usize, HEADER_LEN + 8 * 2 * g.node_count());
        let back = read_vector(&p).unwrap();
        assert_eq!(back, f);
        let side: FieldHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(side, FieldHeader::for_components(&g, 2));
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let g = HalfSpaceGrid::new(2, 1.0, 8, 1.0, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.bin");
        write_vector(&p, &VectorField::zeros(&g)).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(read_vector(&p).is_err());
        fs::write(&p, b"garbage").unwrap();
        assert!(read_vector(&p).is_err());
    }
}
