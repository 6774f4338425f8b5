//! Binary matrix dumps: magic `CSMO`, version `u32`, dimension `u64`, then
//! row-major `(re, im)` pairs, all little-endian.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{CsmError, Result};
use crate::hermite::BasisSpec;
use crate::operators::{Parity, PotentialKind, TwoParticleAssembler};

pub const MAGIC: &[u8; 4] = b"CSMO";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode(m: &Array2<Complex64>) -> Result<Vec<u8>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(CsmError::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    // iter() walks logical row-major order regardless of memory layout
    for z in m.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Array2<Complex64>> {
    if bytes.len() < HEADER_LEN {
        return Err(CsmError::Dump(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(CsmError::Dump("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(CsmError::Dump(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = (n as u128) * (n as u128) * 16 + HEADER_LEN as u128;
    if expected != bytes.len() as u128 {
        return Err(CsmError::Dump(format!(
            "dimension {n} needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let n = n as usize;
    let f = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let data = (0..n * n)
        .map(|k| {
            let at = HEADER_LEN + 16 * k;
            Complex64::new(f(at), f(at + 8))
        })
        .collect();
    Array2::from_shape_vec((n, n), data).map_err(|e| CsmError::Dump(e.to_string()))
}

pub fn write_matrix(path: &Path, m: &Array2<Complex64>) -> Result<()> {
    let bytes = encode(m)?;
    // write-then-rename so concurrent readers never see a partial file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Array2<Complex64>> {
    decode(&fs::read(path)?)
}

/// Contact matrices depend only on the basis, quadrature and parity block.
pub fn contact_cache_path(dir: &Path, spec: &BasisSpec, parity: Option<Parity>) -> PathBuf {
    let block = match parity {
        Some(Parity::Even) => "even",
        Some(Parity::Odd) => "odd",
        None => "full",
    };
    dir.join(format!("contact-n{}-q{}-{block}.csmo", spec.n_orbitals(), spec.quad_nodes()))
}

/// Assembler whose contact matrix is read from, or written to, `dir`.
/// Unreadable cache entries are rebuilt and overwritten.
pub fn cached_assembler(
    dir: &Path,
    spec: &BasisSpec,
    potential: PotentialKind,
    parity: Option<Parity>,
) -> Result<TwoParticleAssembler> {
    let path = contact_cache_path(dir, spec, parity);
    if let Ok(m) = read_matrix(&path) {
        let real = m.mapv(|z| z.re);
        if let Ok(a) = TwoParticleAssembler::with_contact(spec, potential, parity, real) {
            return Ok(a);
        }
    }
    let a = TwoParticleAssembler::new(spec, potential, parity)?;
    fs::create_dir_all(dir)?;
    write_matrix(&path, &a.contact().mapv(|x| Complex64::new(x, 0.0)))?;
    Ok(a)
}
