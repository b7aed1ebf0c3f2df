//! Dense linear-algebra helpers shared by the solvers and certificates.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_CAP: usize = 5000;

/// Spectral norm ‖A‖ by power iteration on AᵀA.
///
/// Stops once the eigen-residual `‖AᵀAv − θv‖` of the Rayleigh quotient θ
/// drops below [`POWER_ITERATION_TOL`]·θ, or after [`POWER_ITERATION_CAP`]
/// sweeps. A small residual bounds the error of θ quadratically, whereas a
/// small change between sweeps can stall well short of the top eigenvalue.
pub fn spectral_norm(a: &Matrix) -> f64 {
    spectral_norm_with(a, POWER_ITERATION_TOL, POWER_ITERATION_CAP)
}

pub fn spectral_norm_with(a: &Matrix, tol: f64, cap: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // deterministic, not orthogonal to any coordinate direction
    let mut v = Vector::from_fn(n, |i, _| 1.0 + 0.1 * ((i % 7) as f64));
    v /= v.norm();
    let mut estimate = 0.0_f64;
    for _ in 0..cap {
        let av = a * &v;
        let w = a.tr_mul(&av);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        // Rayleigh quotient vᵀAᵀAv with ‖v‖ = 1
        estimate = estimate.max(av.norm_squared());
        let residual = (&w - &v * av.norm_squared()).norm();
        v = w / wn;
        if residual <= tol * estimate {
            break;
        }
    }
    estimate.sqrt()
}

/// (M + Mᵀ)/2
pub fn sym_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(sym_part(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn sym_min_eig(m: &Matrix) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn sym_max_eig(m: &Matrix) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// ‖v‖²_M = vᵀMv (M need not be PSD).
pub fn quad_form(v: &Vector, m: &Matrix) -> f64 {
    v.dot(&(m * v))
}

pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn concat(parts: &[Vector]) -> Vector {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(n);
    let mut off = 0;
    for p in parts {
        out.rows_mut(off, p.len()).copy_from(p);
        off += p.len();
    }
    out
}

pub fn split(v: &Vector, sizes: &[usize]) -> Vec<Vector> {
    let mut off = 0;
    sizes
        .iter()
        .map(|&s| {
            let part = v.rows(off, s).into_owned();
            off += s;
            part
        })
        .collect()
}

/// Relative deviation ‖a−b‖ / max(‖a‖, ‖b‖); zero when both vanish.
pub fn relative_deviation(a: &Vector, b: &Vector) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Reads a dense matrix in the plain-text format: a header line `rows cols`
/// followed by `rows*cols` whitespace-separated values in row-major order.
/// Blank lines and lines starting with `#` are ignored.
pub fn read_matrix<R: Read>(reader: R) -> Result<Matrix> {
    let mut tokens: Vec<String> = Vec::new();
    let mut header: Option<(usize, usize)> = None;
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if header.is_none() {
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!(
                    "expected header `rows cols`, found `{trimmed}`"
                )));
            }
            let rows = parts[0]
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad row count: {e}")))?;
            let cols = parts[1]
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad column count: {e}")))?;
            header = Some((rows, cols));
            continue;
        }
        tokens.extend(trimmed.split_whitespace().map(str::to_owned));
    }
    let (rows, cols) = header.ok_or_else(|| Error::Parse("missing header".into()))?;
    if tokens.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} values for a {rows}x{cols} matrix, found {}",
            rows * cols,
            tokens.len()
        )));
    }
    let values = tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad value `{t}`: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix<W: Write>(mut writer: W, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    writer.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a vector stored as an `n 1` (or `1 n`) matrix.
pub fn read_vector<R: Read>(reader: R) -> Result<Vector> {
    let m = read_matrix(reader)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(Error::Parse(format!(
            "expected a vector, found a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_vector<W: Write>(writer: W, v: &Vector) -> Result<()> {
    write_matrix(writer, &Matrix::from_column_slice(v.len(), 1, v.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let a = Matrix::from_row_slice(3, 4, &[
            1.0, 2.0, 0.5, -1.0, //
            0.0, 1.5, 2.0, 3.0, //
            -2.0, 0.1, 0.3, 0.7,
        ]);
        let svd = a.clone().svd(false, false);
        let top = svd.singular_values.max();
        assert!((spectral_norm(&a) - top).abs() < 1e-8 * top);
    }

    #[test]
    fn matrix_text_format_roundtrip() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, -2.5, 3.25, 0.0, 1e-12, 7.0]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 3\n"));
        let back = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn matrix_reader_rejects_wrong_count() {
        let err = read_matrix("2 2\n1 2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn matrix_reader_skips_comments() {
        let m = read_matrix("# weights\n1 2\n\n4 5\n".as_bytes()).unwrap();
        assert_eq!(m, Matrix::from_row_slice(1, 2, &[4.0, 5.0]));
    }

    #[test]
    fn block_diag_layout() {
        let a = Matrix::from_element(1, 1, 2.0);
        let b = Matrix::identity(2, 2);
        let d = block_diag(&[&a, &b]);
        assert_eq!(d.nrows(), 3);
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(1, 1)], 1.0);
        assert_eq!(d[(0, 1)], 0.0);
    }
}
