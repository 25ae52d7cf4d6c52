//! Optional on-disk cache of global correctors, keyed by a hash of
//! everything the corrector depends on. Only exact matches are reused.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::correctors::GlobalCorrector;
use crate::error::{LodError, Result};
use crate::interpolation::{InterpolantKind, InterpolationNodes};
use crate::problem::{CoarseSpace, FineProblem};
use crate::sparse::{CsrMatrix, C64};

const MAGIC: &[u8; 8] = b"LODQv01\0";

/// Hex digest identifying a corrector.
pub fn corrector_key(
    fine: &FineProblem,
    coarse_level: u32,
    layers: usize,
    kind: InterpolantKind,
    nodes: InterpolationNodes,
) -> String {
    let mut h = Sha256::new();
    h.update(fine.coefficient.to_text().as_bytes());
    h.update(fine.wave_number().to_le_bytes());
    h.update(fine.mesh.level().to_le_bytes());
    h.update(coarse_level.to_le_bytes());
    h.update((layers as u64).to_le_bytes());
    h.update(kind.name().as_bytes());
    h.update([matches!(nodes, InterpolationNodes::Interior) as u8]);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn path_for(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("q-{key}.bin"))
}

pub fn write_matrix(path: &Path, m: &CsrMatrix<C64>) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + m.nnz() * 24 + m.nrows() * 8);
    buf.extend_from_slice(MAGIC);
    for v in [m.nrows(), m.ncols(), m.nnz()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &p in m.row_ptr() {
        buf.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in m.col_indices() {
        buf.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for v in m.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<CsrMatrix<C64>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let corrupt = || LodError::numerical(format!("corrupt corrector cache file {}", path.display()));
    if buf.len() < 32 || &buf[..8] != MAGIC {
        return Err(corrupt());
    }
    let mut pos = 8;
    let mut word = |buf: &[u8]| -> Result<u64> {
        let b = buf.get(pos..pos + 8).ok_or_else(corrupt)?;
        pos += 8;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    };
    let nrows = word(&buf)? as usize;
    let ncols = word(&buf)? as usize;
    let nnz = word(&buf)? as usize;
    let expected = 32 + 8 * (nrows + 1) + 8 * nnz + 16 * nnz;
    if buf.len() != expected {
        return Err(corrupt());
    }
    let ptr: Vec<usize> = (0..=nrows).map(|_| word(&buf).map(|v| v as usize)).collect::<Result<_>>()?;
    let cols: Vec<usize> = (0..nnz).map(|_| word(&buf).map(|v| v as usize)).collect::<Result<_>>()?;
    let mut vals = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let re = f64::from_bits(word(&buf)?);
        let im = f64::from_bits(word(&buf)?);
        vals.push(C64::new(re, im));
    }
    if ptr[0] != 0 || ptr[nrows] != nnz || ptr.windows(2).any(|w| w[0] > w[1]) || cols.iter().any(|&c| c >= ncols) {
        return Err(corrupt());
    }
    let rows = (0..nrows)
        .map(|i| (ptr[i]..ptr[i + 1]).map(|k| (cols[k], vals[k])).collect())
        .collect();
    Ok(CsrMatrix::from_sorted_rows(ncols, rows))
}

/// Returns the cached corrector if present, otherwise computes it with
/// `compute` and stores it.
pub fn cached_corrector(
    dir: &Path,
    fine: &FineProblem,
    coarse: &CoarseSpace,
    layers: usize,
    compute: impl FnOnce() -> Result<GlobalCorrector>,
) -> Result<GlobalCorrector> {
    let key = corrector_key(fine, coarse.mesh.level(), layers, coarse.interp.kind, coarse.interp.nodes);
    let path = path_for(dir, &key);
    if path.exists() {
        let matrix = read_matrix(&path)?;
        if matrix.nrows() == fine.mesh.num_nodes() && matrix.ncols() == coarse.num_nodes() {
            log::info!("reusing cached corrector {}", path.display());
            return Ok(GlobalCorrector {
                matrix,
                layers,
                diagnostics: Vec::new(),
            });
        }
    }
    let q = compute()?;
    fs::create_dir_all(dir)?;
    write_matrix(&path, &q.matrix)?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = CsrMatrix::from_triplets(
            3,
            4,
            &[(0, 1, C64::new(1.5, -2.0)), (2, 3, C64::new(1e-300, 3.0)), (2, 0, C64::new(-0.0, 0.1))],
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_matrix(&p, &m).unwrap();
        let r = read_matrix(&p).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_matrix(&p, &CsrMatrix::<C64>::identity(3)).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(read_matrix(&p).is_err());
    }
}
