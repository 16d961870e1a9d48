//! Binary PGM (P5, 8-bit) rendering of reconstructed maps: absolute values
//! normalized by the maximum, so the output is invariant to global scaling.
//! An all-zero map renders all black.

use crate::error::CliError;

/// Renders a column-major `n_z x n_x` image (depth index fastest) to P5
/// bytes, one raster row per depth index. `comment` lines are embedded after
/// the magic for provenance.
pub fn render_pgm(
    data: &[f64],
    n_z: usize,
    n_x: usize,
    comment: Option<&str>,
) -> Result<Vec<u8>, CliError> {
    if n_z == 0 || n_x == 0 || data.len() != n_z * n_x {
        return Err(CliError::Validation(format!(
            "image shape {n_z}x{n_x} does not match {} values",
            data.len()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("image contains non-finite values".into()));
    }
    let max = data.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut out = Vec::with_capacity(32 + n_z * n_x);
    out.extend_from_slice(b"P5\n");
    if let Some(c) = comment {
        for line in c.lines() {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    out.extend_from_slice(format!("{n_x} {n_z}\n255\n").as_bytes());
    for i_z in 0..n_z {
        for i_x in 0..n_x {
            let v = data[i_x * n_z + i_z].abs();
            let byte = if max == 0.0 { 0.0 } else { (255.0 * v / max).round() };
            out.push(byte as u8);
        }
    }
    Ok(out)
}
