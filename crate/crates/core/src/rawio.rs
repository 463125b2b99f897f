//! Raw little-endian complex arrays with a plain-text shape sidecar.
//!
//! `name.raw` holds interleaved `(re, im)` f64 pairs in row-major order;
//! `name.raw.hdr` holds `rows cols` on one line.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn header_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".hdr");
    PathBuf::from(os)
}

pub fn write_complex(path: impl AsRef<Path>, data: &Array2<Complex64>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = data.dim();
    let mut bytes = Vec::with_capacity(rows * cols * 16);
    for v in data.iter() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let hdr = header_path(path);
    std::fs::write(&hdr, format!("{rows} {cols}\n")).map_err(|e| Error::io(hdr, e))
}

pub fn read_complex(path: impl AsRef<Path>) -> Result<Array2<Complex64>> {
    let path = path.as_ref();
    let hdr = header_path(path);
    let text = std::fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let dims: Vec<usize> = text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format("raw header", &hdr, e.to_string()))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::format("raw header", &hdr, "expected `rows cols`"));
    };
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != rows * cols * 16 {
        return Err(Error::format(
            "raw array",
            path,
            format!("{} bytes for a {rows}x{cols} complex array", bytes.len()),
        ));
    }
    let values: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked above"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.raw");
        let data = Array2::from_shape_fn((3, 5), |(r, c)| {
            Complex64::new(r as f64 * 0.1 + 1e-300, -(c as f64) / 3.0)
        });
        write_complex(&path, &data).unwrap();
        assert_eq!(std::fs::read_to_string(header_path(&path)).unwrap(), "3 5\n");
        let back = read_complex(&path).unwrap();
        for (a, b) in data.iter().zip(back.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.raw");
        write_complex(&path, &Array2::zeros((2, 2))).unwrap();
        std::fs::write(&path, [0u8; 10]).unwrap();
        assert!(matches!(read_complex(&path), Err(Error::Format { .. })));
    }
}
