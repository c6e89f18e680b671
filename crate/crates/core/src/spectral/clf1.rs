//! The `CLF1` binary field format.
//!
//! An ASCII header line `CLF1 dim N L rank components\n` followed by
//! little-endian `f64` pairs `(re, im)`, component-major. Within a component,
//! modes run over integer wavevectors row-major with axis 0 slowest and each
//! axis ascending from `-N/2` to `N/2 - 1`. `L` is written in shortest
//! round-trip form so reading back is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::field::{Rank, SpectralField};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Mode index order used on disk: flat grid indices visited in ascending-k order.
fn disk_order(grid: &Grid) -> Vec<usize> {
    let n = grid.n();
    let dim = grid.dim();
    let half = (n / 2) as i32;
    let mut out = Vec::with_capacity(grid.len());
    for pos in 0..grid.len() {
        let mut rem = pos;
        let mut k = [0i32; 3];
        for axis in (0..dim).rev() {
            k[axis] = (rem % n) as i32 - half;
            rem /= n;
        }
        out.push(grid.index_of(k).expect("wavevector in range"));
    }
    out
}

pub fn encode(field: &SpectralField) -> Vec<u8> {
    let grid = field.grid();
    let header = format!(
        "CLF1 {} {} {:?} {} {}\n",
        grid.dim(),
        grid.n(),
        grid.box_length(),
        field.rank().order(),
        field.num_components()
    );
    let order = disk_order(grid);
    let mut bytes = Vec::with_capacity(header.len() + 16 * grid.len() * field.num_components());
    bytes.extend_from_slice(header.as_bytes());
    for comp in field.components() {
        for &idx in &order {
            bytes.extend_from_slice(&comp[idx].re.to_le_bytes());
            bytes.extend_from_slice(&comp[idx].im.to_le_bytes());
        }
    }
    bytes
}

pub fn decode(bytes: &[u8]) -> Result<SpectralField> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing CLF1 header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "CLF1" {
        return Err(Error::Format(format!("bad CLF1 header: {header:?}")));
    }
    let bad = |what: &str| Error::Format(format!("bad {what} in CLF1 header: {header:?}"));
    let dim: usize = parts[1].parse().map_err(|_| bad("dim"))?;
    let n: usize = parts[2].parse().map_err(|_| bad("N"))?;
    let box_length: f64 = parts[3].parse().map_err(|_| bad("L"))?;
    let order: u8 = parts[4].parse().map_err(|_| bad("rank"))?;
    let comps: usize = parts[5].parse().map_err(|_| bad("components"))?;
    let grid = Grid::new(dim, n, box_length)?;
    let rank = Rank::from_order(order).ok_or_else(|| bad("rank"))?;
    if rank.components(dim) != comps {
        return Err(bad("components"));
    }
    let body = &bytes[nl + 1..];
    if body.len() != 16 * grid.len() * comps {
        return Err(Error::Format(format!(
            "CLF1 payload has {} bytes, expected {}",
            body.len(),
            16 * grid.len() * comps
        )));
    }
    let order = disk_order(&grid);
    let mut coeffs = vec![vec![Complex64::default(); grid.len()]; comps];
    let mut chunks = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for comp in coeffs.iter_mut() {
        for &idx in &order {
            let re = chunks.next().expect("length checked");
            let im = chunks.next().expect("length checked");
            comp[idx] = Complex64::new(re, im);
        }
    }
    SpectralField::from_coeffs(&grid, rank, coeffs)
}

pub fn write(path: &Path, field: &SpectralField) -> Result<()> {
    write_atomic(path, &encode(field))
}

pub fn read(path: &Path) -> Result<SpectralField> {
    decode(&fs::read(path)?)
}

/// Write to a sibling temporary file and rename over the destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_field;

    #[test]
    fn bit_exact_round_trip() {
        for (dim, rank) in [(2, Rank::Scalar), (3, Rank::Vector), (2, Rank::Matrix)] {
            let g = Grid::new(dim, 8, 0.1 + std::f64::consts::PI).unwrap();
            let f = random_field(&g, rank, 5, 1.3, false);
            let back = decode(&encode(&f)).unwrap();
            assert_eq!(back.grid(), f.grid());
            assert_eq!(back.rank(), f.rank());
            for (a, b) in f.components().iter().zip(back.components()) {
                for (x, y) in a.iter().zip(b) {
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
        }
    }

    #[test]
    fn first_record_is_most_negative_wavevector() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let mut f = SpectralField::zeros(&g, Rank::Scalar);
        f.set_coeff(0, [-4, -4, 0], Complex64::new(7.0, 0.0)).unwrap();
        let bytes = encode(&f);
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(&bytes[..nl], b"CLF1 2 8 1.0 0 1");
        assert_eq!(f64::from_le_bytes(bytes[nl + 1..nl + 9].try_into().unwrap()), 7.0);
    }

    #[test]
    fn rejects_truncated_and_malformed() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let f = SpectralField::zeros(&g, Rank::Vector);
        let bytes = encode(&f);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"CLF2 2 8 1 0 1\n").is_err());
        assert!(decode(b"CLF1 2 8 1 1 1\n").is_err());
        assert!(decode(b"no newline").is_err());
    }
}
