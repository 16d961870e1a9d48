//! The convolutional reformulation of the block-Toeplitz forward model.
//!
//! Each slice matrix `B_{i_s}` is block-Toeplitz, so its product with a map
//! collapses to a strided 1-D convolution: the `n_c - i_s + n_x - 1` unique
//! `n_t x n_z` blocks are laid out along each time-sample row of an elongated
//! kernel matrix, the vectorized map is zero-padded by `(n_c - i_s - 1) * n_z`
//! on both ends, and the kernel slides with stride `n_z`. The kernel rows are
//! stored pre-flipped along the block axis (offsets in decreasing order, depth
//! order inside each block untouched), which turns the sliding product into a
//! plain dot-product sweep. The padding arithmetic makes every one of the
//! `n_c - i_s` output positions overlap the entire map, so the hot loop is a
//! single contiguous dot product per output sample — no padding is ever
//! materialized. The adjoint runs the same windows as scatter-adds, making it
//! exact (not approximate) by construction.

use crate::dense::build_block;
use crate::error::{Error, Result};
use crate::scene::{required_samples, AcquisitionConfig, RoiGrid};
use num_traits::Float;
use rayon::prelude::*;
use std::ops::AddAssign;

/// Scalar bound for the generic forward/adjoint paths (f64 for oracle-grade
/// work, f32 as the optional single-precision production mode).
pub trait Scalar: Float + AddAssign + Send + Sync + 'static {}
impl<T: Float + AddAssign + Send + Sync + 'static> Scalar for T {}

/// Per-slice bank of pre-flipped convolution kernels plus the geometry it was
/// built for.
///
/// `kernels[i_s]` is an `n_t x ((n_c - i_s + n_x - 1) * n_z)` matrix stored
/// row-major (each kernel row contiguous). Row `n`, block segment `u`, depth
/// `i_z` holds the block for lateral offset `delta = (n_c - i_s - 1) - u` at
/// entry `(n, i_z)` — the decreasing-offset order is the one-time "row flip"
/// that lets the apply loop run as a plain correlation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank<T = f64> {
    /// Channel count.
    pub n_c: usize,
    /// Pixels across.
    pub n_x: usize,
    /// Pixels in depth.
    pub n_z: usize,
    /// Samples per A-scan.
    pub n_t: usize,
    /// Geometry the bank was built for.
    pub acq: AcquisitionConfig,
    /// Grid the bank was built for.
    pub roi: RoiGrid,
    /// Flipped kernel matrices, one per slice.
    pub kernels: Vec<Vec<T>>,
}

impl<T: Scalar> KernelBank<T> {
    /// Number of block segments in the kernel rows for slice `i_s`.
    pub fn width(&self, i_s: usize) -> usize {
        self.n_c - i_s + self.n_x - 1
    }

    /// Length of one kernel row for slice `i_s`.
    pub fn row_len(&self, i_s: usize) -> usize {
        self.width(i_s) * self.n_z
    }

    /// Number of A-scans (output columns) in slice `i_s`.
    pub fn n_cols(&self, i_s: usize) -> usize {
        self.n_c - i_s
    }

    /// Total number of stored kernel coefficients.
    pub fn coefficient_count(&self) -> u128 {
        (0..self.n_c).map(|i_s| (self.n_t * self.row_len(i_s)) as u128).sum()
    }
}

impl KernelBank<f64> {
    /// Casts the bank to single precision for the optional f32 apply path.
    pub fn to_f32(&self) -> KernelBank<f32> {
        KernelBank {
            n_c: self.n_c,
            n_x: self.n_x,
            n_z: self.n_z,
            n_t: self.n_t,
            acq: self.acq.clone(),
            roi: self.roi.clone(),
            kernels: self
                .kernels
                .iter()
                .map(|k| k.iter().map(|&v| v as f32).collect())
                .collect(),
        }
    }
}

/// The `n_c` unique diagonal slices of a measurement set: slice `i_s` is an
/// `n_t x (n_c - i_s)` matrix stored column-major, column `j` being the A-scan
/// of the pair `(i_t, i_r) = (j, j + i_s)`.
///
/// This is the canonical measurement representation; full volumes exist only
/// at I/O boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSet<T = f64> {
    /// Samples per A-scan.
    pub n_t: usize,
    /// Channel count (also the number of slices).
    pub n_c: usize,
    /// Per-slice column-major matrices.
    pub slices: Vec<Vec<T>>,
}

impl<T: Scalar> SliceSet<T> {
    /// All-zero slice set for the given shape.
    pub fn zeros(n_t: usize, n_c: usize) -> Self {
        Self {
            n_t,
            n_c,
            slices: (0..n_c).map(|i_s| vec![T::zero(); n_t * (n_c - i_s)]).collect(),
        }
    }

    /// Checks that `other` has identical shape.
    pub fn shape_matches(&self, other: &Self) -> bool {
        self.n_t == other.n_t
            && self.n_c == other.n_c
            && self.slices.len() == other.slices.len()
            && self.slices.iter().zip(&other.slices).all(|(a, b)| a.len() == b.len())
    }

    /// Elementwise `self -= other`.
    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        if !self.shape_matches(other) {
            return Err(Error::Shape("slice sets differ in shape".into()));
        }
        for (a, b) in self.slices.iter_mut().zip(&other.slices) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x - y;
            }
        }
        Ok(())
    }
}

/// A full `n_t x n_c x n_c` measurement volume, stored column-major:
/// sample fastest, then receiver, then transmitter
/// (`data[n + n_t * (i_r + n_c * i_t)]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FmcVolume<T = f64> {
    /// Samples per A-scan.
    pub n_t: usize,
    /// Channel count.
    pub n_c: usize,
    /// Column-major volume entries, length `n_t * n_c * n_c`.
    pub data: Vec<T>,
}

impl<T: Scalar> FmcVolume<T> {
    /// All-zero volume.
    pub fn zeros(n_t: usize, n_c: usize) -> Self {
        Self { n_t, n_c, data: vec![T::zero(); n_t * n_c * n_c] }
    }

    /// Flat index of sample `n` for the pair `(i_t, i_r)`.
    pub fn idx(&self, n: usize, i_r: usize, i_t: usize) -> usize {
        n + self.n_t * (i_r + self.n_c * i_t)
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.n_t * self.n_c * self.n_c {
            return Err(Error::Shape(format!(
                "volume data has {} entries, expected n_t*n_c^2 = {}",
                self.data.len(),
                self.n_t * self.n_c * self.n_c
            )));
        }
        Ok(())
    }
}

/// Reciprocity multiplicity weights: slice 0 appears once in a volume, every
/// other slice twice. With these weights, slice-domain least squares equals
/// full-volume least squares up to a data-only constant (see `fold_constant`).
#[derive(Debug, Clone, PartialEq)]
pub struct SliceWeights {
    /// Per-slice weights, length `n_c`.
    pub w: Vec<f64>,
}

impl SliceWeights {
    /// The canonical weights (1, 2, 2, ...).
    pub fn reciprocity(n_c: usize) -> Self {
        let mut w = vec![2.0; n_c];
        if n_c > 0 {
            w[0] = 1.0;
        }
        Self { w }
    }
}

/// Builds the kernel bank for a geometry, assembling each slice's unique
/// blocks in increasing offset order and storing every row flipped along the
/// block axis. Fails if the pixel width does not equal the array pitch.
pub fn build_kernel_bank(acq: &AcquisitionConfig, roi: &RoiGrid) -> Result<KernelBank<f64>> {
    acq.validate()?;
    roi.validate()?;
    if roi.d_x != acq.d_c {
        return Err(Error::Contract(format!(
            "pixel width d_x = {} must equal the array pitch d_c = {}",
            roi.d_x, acq.d_c
        )));
    }
    let n_t = required_samples(acq, roi);
    let (n_c, n_x, n_z) = (acq.n_c, roi.n_x, roi.n_z);
    let kernels = (0..n_c)
        .into_par_iter()
        .map(|i_s| {
            let n_rp = n_c - i_s;
            let width = n_rp + n_x - 1;
            let rl = width * n_z;
            let mut k = vec![0.0; n_t * rl];
            for u in 0..width {
                let delta = n_rp as isize - 1 - u as isize;
                let block = build_block(delta, i_s, acq, roi)?;
                for i_z in 0..n_z {
                    for n in 0..n_t {
                        k[n * rl + u * n_z + i_z] = block[i_z * n_t + n];
                    }
                }
            }
            Ok(k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelBank { n_c, n_x, n_z, n_t, acq: acq.clone(), roi: roi.clone(), kernels })
}

/// Core forward sweep: `out[j*n_t + n] = <kernel row n window j, x>`.
///
/// The window for output column `j` starts at block segment `n_rp - 1 - j`
/// and spans the whole `n_x * n_z` map — the full-overlap consequence of the
/// `(n_rp - 1) * n_z` zero padding.
pub(crate) fn sweep_forward<T: Scalar>(
    kernel: &[T],
    n_t: usize,
    row_len: usize,
    n_z: usize,
    n_rp: usize,
    x: &[T],
    out: &mut [T],
) {
    let span = x.len();
    debug_assert_eq!(out.len(), n_t * n_rp);
    for j in 0..n_rp {
        let off = (n_rp - 1 - j) * n_z;
        let col = &mut out[j * n_t..(j + 1) * n_t];
        for (n, o) in col.iter_mut().enumerate() {
            let row = &kernel[n * row_len + off..n * row_len + off + span];
            let mut acc = T::zero();
            for (&k, &v) in row.iter().zip(x) {
                acc += k * v;
            }
            *o = acc;
        }
    }
}

/// Core transpose sweep: scatter-adds `scale * r[j*n_t + n]` times kernel row
/// `n`'s window `j` into the map-shaped accumulator. Exact adjoint of
/// `sweep_forward` by construction (same windows, roles swapped).
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_transpose<T: Scalar>(
    kernel: &[T],
    n_t: usize,
    row_len: usize,
    n_z: usize,
    n_rp: usize,
    r: &[T],
    scale: T,
    acc: &mut [T],
) {
    let span = acc.len();
    debug_assert_eq!(r.len(), n_t * n_rp);
    for j in 0..n_rp {
        let off = (n_rp - 1 - j) * n_z;
        for n in 0..n_t {
            let coeff = scale * r[j * n_t + n];
            if coeff == T::zero() {
                continue;
            }
            let row = &kernel[n * row_len + off..n * row_len + off + span];
            for (a, &k) in acc.iter_mut().zip(row) {
                *a += coeff * k;
            }
        }
    }
}

/// Kernel-gradient sweep used by training: accumulates
/// `scale * r[j*n_t + n] * u` into kernel row `n`'s window `j`. This is the
/// derivative of `<u, transpose(kernel) r>` with respect to the kernel.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_kernel_grad(
    dk: &mut [f64],
    n_t: usize,
    row_len: usize,
    n_z: usize,
    n_rp: usize,
    r: &[f64],
    u: &[f64],
    scale: f64,
) {
    let span = u.len();
    debug_assert_eq!(r.len(), n_t * n_rp);
    for j in 0..n_rp {
        let off = (n_rp - 1 - j) * n_z;
        for n in 0..n_t {
            let coeff = scale * r[j * n_t + n];
            if coeff == 0.0 {
                continue;
            }
            let row = &mut dk[n * row_len + off..n * row_len + off + span];
            for (k, &v) in row.iter_mut().zip(u) {
                *k += coeff * v;
            }
        }
    }
}

fn check_map_len<T: Scalar>(bank: &KernelBank<T>, x: &[T]) -> Result<()> {
    if x.len() != bank.n_x * bank.n_z {
        return Err(Error::Shape(format!(
            "map vector has {} entries, bank expects n_x*n_z = {}",
            x.len(),
            bank.n_x * bank.n_z
        )));
    }
    Ok(())
}

/// Forward model for one slice: returns the `n_t x (n_c - i_s)` slice of the
/// noiseless measurement as a column-major vector.
pub fn conv_forward_slice<T: Scalar>(
    bank: &KernelBank<T>,
    x: &[T],
    i_s: usize,
) -> Result<Vec<T>> {
    check_map_len(bank, x)?;
    if i_s >= bank.n_c {
        return Err(Error::Contract(format!("i_s = {i_s} out of range for n_c = {}", bank.n_c)));
    }
    let n_rp = bank.n_cols(i_s);
    let mut out = vec![T::zero(); bank.n_t * n_rp];
    sweep_forward(&bank.kernels[i_s], bank.n_t, bank.row_len(i_s), bank.n_z, n_rp, x, &mut out);
    Ok(out)
}

/// Full forward model: one strided convolution per slice, slices independent.
/// `x` is the column-major vectorized reflectivity map.
pub fn conv_forward<T: Scalar>(bank: &KernelBank<T>, x: &[T]) -> Result<SliceSet<T>> {
    check_map_len(bank, x)?;
    let slices = (0..bank.n_c)
        .into_par_iter()
        .map(|i_s| conv_forward_slice(bank, x, i_s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SliceSet { n_t: bank.n_t, n_c: bank.n_c, slices })
}

/// Transposed strided convolution for one slice: maps an `n_t x (n_c - i_s)`
/// residual back to map space.
pub fn conv_transpose_slice<T: Scalar>(
    bank: &KernelBank<T>,
    r: &[T],
    i_s: usize,
) -> Result<Vec<T>> {
    if i_s >= bank.n_c {
        return Err(Error::Contract(format!("i_s = {i_s} out of range for n_c = {}", bank.n_c)));
    }
    let n_rp = bank.n_cols(i_s);
    if r.len() != bank.n_t * n_rp {
        return Err(Error::Shape(format!(
            "slice {i_s} residual has {} entries, expected {}",
            r.len(),
            bank.n_t * n_rp
        )));
    }
    let mut acc = vec![T::zero(); bank.n_x * bank.n_z];
    sweep_transpose(
        &bank.kernels[i_s],
        bank.n_t,
        bank.row_len(i_s),
        bank.n_z,
        n_rp,
        r,
        T::one(),
        &mut acc,
    );
    Ok(acc)
}

/// Exact adjoint of the weighted forward model:
/// `sum_{i_s} w[i_s] * B_{i_s}^T r_{i_s}`, implemented as transposed strided
/// convolutions (scatter-adds), never via dense matrices.
///
/// Per-slice contributions are computed in parallel and reduced in slice
/// order, so the result is identical for every thread count.
pub fn conv_adjoint<T: Scalar>(
    bank: &KernelBank<T>,
    r: &SliceSet<T>,
    weights: &SliceWeights,
) -> Result<Vec<T>> {
    if r.n_t != bank.n_t || r.n_c != bank.n_c || r.slices.len() != bank.n_c {
        return Err(Error::Shape(format!(
            "slice set ({} slices, n_t = {}) does not match bank (n_c = {}, n_t = {})",
            r.slices.len(),
            r.n_t,
            bank.n_c,
            bank.n_t
        )));
    }
    if weights.w.len() != bank.n_c {
        return Err(Error::Shape(format!(
            "weights have length {}, expected n_c = {}",
            weights.w.len(),
            bank.n_c
        )));
    }
    let partials = (0..bank.n_c)
        .into_par_iter()
        .map(|i_s| {
            let n_rp = bank.n_cols(i_s);
            if r.slices[i_s].len() != bank.n_t * n_rp {
                return Err(Error::Shape(format!(
                    "slice {i_s} has {} entries, expected {}",
                    r.slices[i_s].len(),
                    bank.n_t * n_rp
                )));
            }
            let w = T::from(weights.w[i_s]).ok_or_else(|| {
                Error::Contract(format!("weight {} not representable", weights.w[i_s]))
            })?;
            let mut acc = vec![T::zero(); bank.n_x * bank.n_z];
            sweep_transpose(
                &bank.kernels[i_s],
                bank.n_t,
                bank.row_len(i_s),
                bank.n_z,
                n_rp,
                &r.slices[i_s],
                w,
                &mut acc,
            );
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![T::zero(); bank.n_x * bank.n_z];
    for p in partials {
        for (o, &v) in out.iter_mut().zip(&p) {
            *o += v;
        }
    }
    Ok(out)
}

/// Places every slice at its two mirrored pair positions, producing a
/// reciprocity-symmetric volume.
pub fn assemble_volume<T: Scalar>(s: &SliceSet<T>) -> FmcVolume<T> {
    let mut v = FmcVolume::zeros(s.n_t, s.n_c);
    for (i_s, slice) in s.slices.iter().enumerate() {
        for j in 0..s.n_c - i_s {
            let col = &slice[j * s.n_t..(j + 1) * s.n_t];
            let a = v.idx(0, j + i_s, j);
            v.data[a..a + s.n_t].copy_from_slice(col);
            if i_s > 0 {
                let b = v.idx(0, j, j + i_s);
                v.data[b..b + s.n_t].copy_from_slice(col);
            }
        }
    }
    v
}

/// Folds a (possibly asymmetric, noisy) volume down to the canonical slice
/// set: mirrored pairs are averaged, the diagonal slice is taken directly.
pub fn extract_slices<T: Scalar>(v: &FmcVolume<T>) -> Result<SliceSet<T>> {
    v.check()?;
    let half = T::from(0.5).expect("0.5 is representable");
    let mut s = SliceSet::zeros(v.n_t, v.n_c);
    for i_s in 0..v.n_c {
        for j in 0..v.n_c - i_s {
            for n in 0..v.n_t {
                let upper = v.data[v.idx(n, j + i_s, j)];
                let val = if i_s == 0 {
                    upper
                } else {
                    (upper + v.data[v.idx(n, j, j + i_s)]) * half
                };
                s.slices[i_s][j * v.n_t + n] = val;
            }
        }
    }
    Ok(s)
}

/// The data-only constant that separates the full-volume and slice-folded
/// least-squares objectives:
/// `||A x - v||^2 = sum_{i_s} w[i_s] ||B_{i_s} x - fold(v)_{i_s}||^2 + C(v)`
/// with `C(v) = sum_{i_s > 0} 1/2 ||v_upper - v_lower||^2` over the mirrored
/// pair entries of `v`.
pub fn fold_constant(v: &FmcVolume<f64>) -> Result<f64> {
    v.check()?;
    let mut c = 0.0;
    for i_s in 1..v.n_c {
        for j in 0..v.n_c - i_s {
            for n in 0..v.n_t {
                let d = v.data[v.idx(n, j + i_s, j)] - v.data[v.idx(n, j, j + i_s)];
                c += 0.5 * d * d;
            }
        }
    }
    Ok(c)
}

/// Which model's storage footprint to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    /// The explicit dense matrix.
    Dense,
    /// The per-slice kernel bank.
    Conv,
}

/// Closed-form storage requirement in bytes, with `bytes_per_param` bytes per
/// stored coefficient (4 for single precision). Pure arithmetic in wide
/// integers; nothing is allocated.
///
/// Dense: `n_t * n_c^2 * n_z * n_x` coefficients. Conv: the kernel bank's
/// `n_t * n_z * (n_c (n_x - 1) + n_c (n_c + 1) / 2)` coefficients.
pub fn storage_bytes(
    kind: StorageKind,
    acq: &AcquisitionConfig,
    roi: &RoiGrid,
    bytes_per_param: u64,
) -> u128 {
    let n_t = required_samples(acq, roi) as u128;
    let n_c = acq.n_c as u128;
    let (n_x, n_z) = (roi.n_x as u128, roi.n_z as u128);
    let params = match kind {
        StorageKind::Dense => n_t * n_c * n_c * n_z * n_x,
        StorageKind::Conv => n_t * n_z * (n_c * (n_x - 1) + n_c * (n_c + 1) / 2),
    };
    params * bytes_per_param as u128
}
