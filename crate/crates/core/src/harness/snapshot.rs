//! Binary snapshots, little-endian throughout:
//! magic `CSFD`, version `u32`, dim `u32`, one `u32` resolution per axis,
//! `t` as `f64`, then the `f64` values of `n`, `c`, each face component of
//! `u` and `P`, each in grid order.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, SimState, VectorField};

pub const MAGIC: &[u8; 4] = b"CSFD";
pub const VERSION: u32 = 1;

pub fn encode_snapshot(state: &SimState) -> Vec<u8> {
    let grid = state.grid();
    let dim = grid.dim();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for &n in &grid.resolution()[..dim] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&state.t.to_le_bytes());
    let mut put = |v: &[f64]| {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(state.n.values());
    put(state.c.values());
    for comp in state.u.components() {
        put(comp);
    }
    put(state.p.values());
    out
}

pub fn write_snapshot(state: &SimState, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_snapshot(state)).map_err(|e| Error::io(path, e))
}

/// Header fields and raw field arrays, before any grid is attached.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSnapshot {
    pub version: u32,
    pub resolution: Vec<usize>,
    pub t: f64,
    pub n: Vec<f64>,
    pub c: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<f64>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| {
            Error::Snapshot(format!(
                "truncated while reading {what}: need {end} bytes, file has {}",
                self.bytes.len()
            ))
        })?;
        self.pos = end;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }

    fn f64s(&mut self, len: usize, what: &str) -> Result<Vec<f64>> {
        (0..len).map(|_| self.f64(what)).collect()
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<RawSnapshot> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take("magic")?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let dim = r.u32("dim")? as usize;
    if dim != 2 && dim != 3 {
        return Err(Error::Snapshot(format!("dimension {dim} is not 2 or 3")));
    }
    let resolution: Vec<usize> = (0..dim).map(|_| r.u32("resolution").map(|v| v as usize)).collect::<Result<_>>()?;
    if resolution.iter().any(|&n| n == 0) {
        return Err(Error::Snapshot(format!("zero resolution in {resolution:?}")));
    }
    let t = r.f64("t")?;
    let cells: usize = resolution.iter().product();
    let n = r.f64s(cells, "n")?;
    let c = r.f64s(cells, "c")?;
    let mut u = Vec::with_capacity(dim);
    for a in 0..dim {
        let len: usize = (0..dim).map(|b| resolution[b] + usize::from(a == b)).product();
        u.push(r.f64s(len, "u")?);
    }
    let p = r.f64s(cells, "P")?;
    if r.pos != bytes.len() {
        return Err(Error::Snapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(RawSnapshot {
        version,
        resolution,
        t,
        n,
        c,
        u,
        p,
    })
}

pub fn read_snapshot_raw(path: &Path) -> Result<RawSnapshot> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes)
}

impl RawSnapshot {
    /// Attaches the arrays to `grid`, whose resolution must match.
    pub fn into_state(self, grid: &Arc<Grid>) -> Result<SimState> {
        if self.resolution.as_slice() != &grid.resolution()[..grid.dim()] {
            return Err(Error::Snapshot(format!(
                "snapshot resolution {:?} does not match configured {:?}",
                self.resolution,
                &grid.resolution()[..grid.dim()]
            )));
        }
        SimState::new(
            self.t,
            ScalarField::new(grid.clone(), self.n)?,
            ScalarField::new(grid.clone(), self.c)?,
            VectorField::new(grid.clone(), self.u)?,
            ScalarField::new(grid.clone(), self.p)?,
        )
    }
}

pub fn read_snapshot(path: &Path, grid: &Arc<Grid>) -> Result<SimState> {
    read_snapshot_raw(path)?.into_state(grid)
}
