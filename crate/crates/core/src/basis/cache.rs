//! Flat binary cache of the Gram–Schmidt coefficients R(t_i).
//!
//! Layout (little endian): 8-byte magic, u32 version, u32 family code,
//! u64 m, u64 grid intervals, f64 horizon, u64 quadrature order, then
//! (n + 1)·m·m f64 values, row-major per node.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{raw_stream_basis, MovingBasis, RawSamples, StreamFamily, TimeGrid};
use crate::error::{Error, Result};
use crate::geometry::SharedMap;
use crate::quadrature::QuadratureRule;

const MAGIC: &[u8; 8] = b"TDNSRBAS";
const VERSION: u32 = 1;

pub fn save_coefficients(path: &Path, basis: &MovingBasis) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&basis.family.code().to_le_bytes())?;
    w.write_all(&(basis.m() as u64).to_le_bytes())?;
    w.write_all(&(basis.grid.n as u64).to_le_bytes())?;
    w.write_all(&basis.grid.t_end.to_le_bytes())?;
    w.write_all(&(basis.quad.order as u64).to_le_bytes())?;
    for r in &basis.coeffs {
        for i in 0..r.nrows() {
            for j in 0..r.ncols() {
                w.write_all(&r[(i, j)].to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::BadCache(format!("truncated file: {e}")))?;
    Ok(buf)
}

/// Loads a cache written by [`save_coefficients`]; the header must match the
/// requested family, m, grid and quadrature order.
pub fn load_coefficients(
    path: &Path,
    map: SharedMap,
    family: StreamFamily,
    m: usize,
    grid: TimeGrid,
    quad: Arc<QuadratureRule>,
) -> Result<MovingBasis> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_array::<8>(&mut r)? != MAGIC {
        return Err(Error::BadCache("wrong magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::BadCache(format!("version {version}, expected {VERSION}")));
    }
    let code = u32::from_le_bytes(read_array(&mut r)?);
    let cached_family = StreamFamily::from_code(code).ok_or_else(|| Error::BadCache(format!("unknown family {code}")))?;
    let cached_m = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let cached_n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let cached_t = f64::from_le_bytes(read_array(&mut r)?);
    let cached_q = u64::from_le_bytes(read_array(&mut r)?) as usize;
    if cached_family != family || cached_m != m || cached_n != grid.n || cached_t != grid.t_end || cached_q != quad.order {
        return Err(Error::BadCache(format!(
            "header ({}, m={cached_m}, n={cached_n}, T={cached_t}, q={cached_q}) does not match request ({}, m={m}, n={}, T={}, q={})",
            cached_family.name(),
            family.name(),
            grid.n,
            grid.t_end,
            quad.order
        )));
    }
    let mut coeffs = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let mut mat = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                mat[(i, j)] = f64::from_le_bytes(read_array(&mut r)?);
            }
        }
        coeffs.push(mat);
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::BadCache("trailing bytes".into()));
    }
    let raw = Arc::new(RawSamples::new(raw_stream_basis(family, m), &quad));
    MovingBasis::from_coefficients(map, family, grid, quad, raw, coeffs)
}
