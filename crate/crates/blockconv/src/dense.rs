//! Explicitly constructed dense model matrix and block-Toeplitz slice matrices.
//!
//! These are brute-force reference implementations. They are deliberately
//! simple, allocate the full matrices, and exist to serve as ground truth for
//! the convolutional operator and the solver equivalence tests; production
//! reconstruction never touches them.

use crate::error::{Error, Result};
use crate::scene::{pulse_value, required_samples, tof, AcquisitionConfig, ReflectivityMap, RoiGrid};
use rayon::prelude::*;

/// Default memory budget for dense construction: 2 GiB.
pub const DEFAULT_DENSE_BUDGET_BYTES: u128 = 2 * 1024 * 1024 * 1024;

/// The dense model matrix `A` with `n_t * n_c * n_c` rows and `n_z * n_x`
/// columns, stored column-major (`a[col * rows + row]`).
///
/// Row ordering follows the column-major vectorization of the measurement
/// volume: time sample fastest, then receiver, then transmitter, so row
/// `n + n_t * (i_r + n_c * i_t)` holds sample `n` of the pair `(i_t, i_r)`.
/// Column `i_x * n_z + i_z` is the vectorized noiseless response of a unit
/// scatterer at pixel `(i_x, i_z)`.
#[derive(Debug, Clone)]
pub struct DenseModel {
    /// Row count, `n_t * n_c * n_c`.
    pub rows: usize,
    /// Column count, `n_z * n_x`.
    pub cols: usize,
    /// Samples per A-scan.
    pub n_t: usize,
    /// Column-major matrix entries.
    pub a: Vec<f64>,
    /// Geometry the matrix was built for.
    pub acq: AcquisitionConfig,
    /// Grid the matrix was built for.
    pub roi: RoiGrid,
}

/// One slice matrix `B_{i_s}`: the rows of `A` for every pair with
/// `i_r - i_t = i_s`, stored column-major with `(n_c - i_s) * n_t` rows and
/// `n_z * n_x` columns.
///
/// The matrix is partitioned into `(n_c - i_s) x n_x` blocks of shape
/// `n_t x n_z`; block `(r, c)` depends only on `r - c`, which is the
/// block-Toeplitz structure everything else in this crate exploits.
#[derive(Debug, Clone)]
pub struct SliceMatrix {
    /// Slice index.
    pub i_s: usize,
    /// Row count, `(n_c - i_s) * n_t`.
    pub rows: usize,
    /// Column count, `n_z * n_x`.
    pub cols: usize,
    /// Samples per A-scan.
    pub n_t: usize,
    /// Number of block rows, `n_c - i_s`.
    pub n_rp: usize,
    /// Column-major matrix entries.
    pub b: Vec<f64>,
}

impl SliceMatrix {
    /// Copies block `(r, c)` out as an `n_t x n_z` column-major matrix.
    pub fn block_copy(&self, r: usize, c: usize, n_z: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_t * n_z];
        for i_z in 0..n_z {
            let col = c * n_z + i_z;
            let src = col * self.rows + r * self.n_t;
            out[i_z * self.n_t..(i_z + 1) * self.n_t]
                .copy_from_slice(&self.b[src..src + self.n_t]);
        }
        out
    }
}

/// Builds one `n_t x n_z` block: entry `(n, i_z)` is the pulse sampled at
/// `n / f_s` for the time of flight of pixel depth `i_z` at lateral offset
/// `delta = i_t - i_x` within slice `i_s`. Stored column-major
/// (`block[i_z * n_t + n]`), so each column is one noiseless unit A-scan.
pub fn build_block(
    delta: isize,
    i_s: usize,
    acq: &AcquisitionConfig,
    roi: &RoiGrid,
) -> Result<Vec<f64>> {
    let n_t = required_samples(acq, roi);
    let mut out = vec![0.0; n_t * roi.n_z];
    for i_z in 0..roi.n_z {
        let tau = tof(delta, i_s, i_z, acq, roi)?;
        let col = &mut out[i_z * n_t..(i_z + 1) * n_t];
        for (n, v) in col.iter_mut().enumerate() {
            *v = pulse_value(n as f64 / acq.f_s, tau, acq);
        }
    }
    Ok(out)
}

fn check_pitch(acq: &AcquisitionConfig, roi: &RoiGrid) -> Result<()> {
    acq.validate()?;
    roi.validate()?;
    if roi.d_x != acq.d_c {
        return Err(Error::Contract(format!(
            "pixel width d_x = {} must equal the array pitch d_c = {}",
            roi.d_x, acq.d_c
        )));
    }
    Ok(())
}

/// Builds the slice matrix `B_{i_s}` by materializing its
/// `n_c - i_s + n_x - 1` unique blocks (one per lateral offset `delta`) and
/// placing each along its block diagonal.
pub fn build_slice_matrix(
    i_s: usize,
    acq: &AcquisitionConfig,
    roi: &RoiGrid,
) -> Result<SliceMatrix> {
    check_pitch(acq, roi)?;
    if i_s >= acq.n_c {
        return Err(Error::Contract(format!("i_s = {i_s} out of range for n_c = {}", acq.n_c)));
    }
    let n_t = required_samples(acq, roi);
    let n_rp = acq.n_c - i_s;
    let (n_x, n_z) = (roi.n_x, roi.n_z);
    let deltas: Vec<isize> = (-(n_x as isize - 1)..=(n_rp as isize - 1)).collect();
    let blocks = deltas
        .par_iter()
        .map(|&d| build_block(d, i_s, acq, roi))
        .collect::<Result<Vec<_>>>()?;
    let rows = n_rp * n_t;
    let cols = n_x * n_z;
    let mut b = vec![0.0; rows * cols];
    for r in 0..n_rp {
        for c in 0..n_x {
            let block = &blocks[(r as isize - c as isize + n_x as isize - 1) as usize];
            for i_z in 0..n_z {
                let dst = (c * n_z + i_z) * rows + r * n_t;
                b[dst..dst + n_t].copy_from_slice(&block[i_z * n_t..(i_z + 1) * n_t]);
            }
        }
    }
    Ok(SliceMatrix { i_s, rows, cols, n_t, n_rp, b })
}

/// Returns true iff every pair of blocks sharing a block diagonal matches
/// elementwise within `tol`.
pub fn verify_block_toeplitz(slice: &SliceMatrix, n_z: usize, tol: f64) -> bool {
    let n_x = slice.cols / n_z;
    for diff in -(n_x as isize - 1)..=(slice.n_rp as isize - 1) {
        let mut reference: Option<Vec<f64>> = None;
        for r in 0..slice.n_rp {
            let c = r as isize - diff;
            if c < 0 || c >= n_x as isize {
                continue;
            }
            let block = slice.block_copy(r, c as usize, n_z);
            match &reference {
                None => reference = Some(block),
                Some(first) => {
                    if first
                        .iter()
                        .zip(&block)
                        .any(|(a, b)| (a - b).abs() > tol)
                    {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Number of bytes the dense matrix needs at f64 storage.
fn dense_required_bytes(acq: &AcquisitionConfig, roi: &RoiGrid) -> u128 {
    let n_t = required_samples(acq, roi) as u128;
    8 * n_t * (acq.n_c as u128) * (acq.n_c as u128) * (roi.n_z as u128) * (roi.n_x as u128)
}

/// Builds the dense model matrix under the default 2 GiB budget.
pub fn build_dense(acq: &AcquisitionConfig, roi: &RoiGrid) -> Result<DenseModel> {
    build_dense_with_budget(acq, roi, DEFAULT_DENSE_BUDGET_BYTES)
}

/// Builds the dense model matrix, refusing (with the required byte count)
/// when it would not fit in `budget_bytes`.
///
/// Assembly scatters each slice matrix's row blocks to their volume rows,
/// mirroring slice `i_s > 0` to both the `(i_t, i_t + i_s)` and the
/// `(i_t + i_s, i_t)` pair positions, so reciprocity holds row-for-row.
pub fn build_dense_with_budget(
    acq: &AcquisitionConfig,
    roi: &RoiGrid,
    budget_bytes: u128,
) -> Result<DenseModel> {
    check_pitch(acq, roi)?;
    let required = dense_required_bytes(acq, roi);
    if required > budget_bytes {
        return Err(Error::MemoryBudget { required, budget: budget_bytes });
    }
    let n_t = required_samples(acq, roi);
    let n_c = acq.n_c;
    let rows = n_t * n_c * n_c;
    let cols = roi.n_pixels();
    let mut a = vec![0.0; rows * cols];
    for i_s in 0..n_c {
        let slice = build_slice_matrix(i_s, acq, roi)?;
        for r in 0..slice.n_rp {
            let (i_t, i_r) = (r, r + i_s);
            for col in 0..cols {
                let src = col * slice.rows + r * n_t;
                let block = &slice.b[src..src + n_t];
                let dst = col * rows + n_t * (i_r + n_c * i_t);
                a[dst..dst + n_t].copy_from_slice(block);
                if i_s > 0 {
                    let dst = col * rows + n_t * (i_t + n_c * i_r);
                    a[dst..dst + n_t].copy_from_slice(block);
                }
            }
        }
    }
    Ok(DenseModel { rows, cols, n_t, a, acq: acq.clone(), roi: roi.clone() })
}

/// Dense forward product `A x` for a column-major vectorized map.
pub fn dense_forward(model: &DenseModel, x: &ReflectivityMap) -> Result<Vec<f64>> {
    if x.data.len() != model.cols || x.n_z != model.roi.n_z || x.n_x != model.roi.n_x {
        return Err(Error::Shape(format!(
            "map is {}x{} but the model expects {}x{}",
            x.n_z, x.n_x, model.roi.n_z, model.roi.n_x
        )));
    }
    let mut y = vec![0.0; model.rows];
    for (col, &xv) in x.data.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let column = &model.a[col * model.rows..(col + 1) * model.rows];
        for (yv, &av) in y.iter_mut().zip(column) {
            *yv += av * xv;
        }
    }
    Ok(y)
}

/// Dense adjoint product `A^T v`.
pub fn dense_adjoint(model: &DenseModel, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != model.rows {
        return Err(Error::Shape(format!(
            "vector length {} does not match the model's {} rows",
            v.len(),
            model.rows
        )));
    }
    Ok((0..model.cols)
        .map(|col| {
            model.a[col * model.rows..(col + 1) * model.rows]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}

/// Product `B_{i_s} x` with a slice matrix, for oracle comparisons.
pub fn slice_forward(slice: &SliceMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != slice.cols {
        return Err(Error::Shape(format!(
            "vector length {} does not match the slice's {} columns",
            x.len(),
            slice.cols
        )));
    }
    let mut y = vec![0.0; slice.rows];
    for (col, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let column = &slice.b[col * slice.rows..(col + 1) * slice.rows];
        for (yv, &bv) in y.iter_mut().zip(column) {
            *yv += bv * xv;
        }
    }
    Ok(y)
}

/// Product `B_{i_s}^T r` with a slice matrix, for oracle comparisons.
pub fn slice_adjoint(slice: &SliceMatrix, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != slice.rows {
        return Err(Error::Shape(format!(
            "vector length {} does not match the slice's {} rows",
            r.len(),
            slice.rows
        )));
    }
    Ok((0..slice.cols)
        .map(|col| {
            slice.b[col * slice.rows..(col + 1) * slice.rows]
                .iter()
                .zip(r)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}
