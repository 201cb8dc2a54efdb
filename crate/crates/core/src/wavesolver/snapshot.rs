//! Grid dumps of `(|ψ|², arg ψ)`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::WaveField;
use crate::Real;

const MAGIC: &[u8; 4] = b"ABWS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    #[default]
    Csv,
    Binary,
}

impl SnapshotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Binary => "bin",
        }
    }
}

/// CSV: a `nx,ny,dx,dy,time` header and its values, then `i,j,prob,phase` rows.
pub fn write_snapshot_csv<T: Real, W: Write>(state: &WaveField<T>, mut out: W) -> io::Result<()> {
    let g = &state.grid;
    writeln!(out, "nx,ny,dx,dy,time")?;
    writeln!(
        out,
        "{},{},{},{},{}",
        g.nx,
        g.ny,
        g.dx.to_f64_lossy(),
        g.dy.to_f64_lossy(),
        state.time.to_f64_lossy()
    )?;
    writeln!(out, "i,j,prob,phase")?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let z = state.psi[g.index(i, j)];
            writeln!(
                out,
                "{},{},{},{}",
                i,
                j,
                z.norm_sqr().to_f64_lossy(),
                z.arg().to_f64_lossy()
            )?;
        }
    }
    Ok(())
}

/// Little-endian binary: `ABWS`, `u32 nx, ny`, `f64 dx, dy, time`, then
/// `(prob, phase)` f64 pairs in row-major node order.
pub fn write_snapshot_binary<T: Real, W: Write>(
    state: &WaveField<T>,
    mut out: W,
) -> io::Result<()> {
    let g = &state.grid;
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "grid too large"))
    };
    out.write_all(MAGIC)?;
    out.write_all(&dim(g.nx)?.to_le_bytes())?;
    out.write_all(&dim(g.ny)?.to_le_bytes())?;
    for v in [g.dx, g.dy, state.time] {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    for z in &state.psi {
        out.write_all(&z.norm_sqr().to_f64_lossy().to_le_bytes())?;
        out.write_all(&z.arg().to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

/// Decoded binary snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub time: f64,
    pub prob: Vec<f64>,
    pub phase: Vec<f64>,
}

pub fn read_snapshot_binary<R: Read>(mut input: R) -> io::Result<SnapshotData> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "not a snapshot file",
        ));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut u32_ = |r: &mut R| -> io::Result<usize> {
        r.read_exact(&mut b4)?;
        Ok(u32::from_le_bytes(b4) as usize)
    };
    let nx = u32_(&mut input)?;
    let ny = u32_(&mut input)?;
    let mut f64_ = |r: &mut R| -> io::Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let dx = f64_(&mut input)?;
    let dy = f64_(&mut input)?;
    let time = f64_(&mut input)?;
    let mut prob = Vec::with_capacity(nx * ny);
    let mut phase = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        prob.push(f64_(&mut input)?);
        phase.push(f64_(&mut input)?);
    }
    Ok(SnapshotData {
        nx,
        ny,
        dx,
        dy,
        time,
        prob,
        phase,
    })
}
