//! Real spherical harmonics up to degree 3 in the usual splatting layout:
//! coefficient `l² + l + m` per degree `l`, order `m = -l..=l`, and a
//! constant 0.5 added to the result.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const MAX_SH_DEGREE: usize = 3;

const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Coefficients per channel for a given degree.
pub const fn sh_coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Evaluate `coeffs` (one RGB triple per basis function) in direction
/// `dir`, add 0.5 and clamp to `[0, 1]`.
pub fn eval_sh(degree: usize, coeffs: &[[f32; 3]], dir: &Vector3<f64>) -> Result<[f64; 3]> {
    if degree > MAX_SH_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "spherical harmonics degree {degree} exceeds {MAX_SH_DEGREE}"
        )));
    }
    if coeffs.len() < sh_coeff_count(degree) {
        return Err(Error::mismatch(sh_coeff_count(degree), coeffs.len()));
    }
    Ok(eval_unchecked(degree, coeffs, dir))
}

#[inline]
pub(crate) fn eval_unchecked(degree: usize, c: &[[f32; 3]], dir: &Vector3<f64>) -> [f64; 3] {
    let mut basis = [0.0f64; 16];
    basis[0] = C0;
    if degree > 0 {
        let (x, y, z) = (dir.x, dir.y, dir.z);
        basis[1] = -C1 * y;
        basis[2] = C1 * z;
        basis[3] = -C1 * x;
        if degree > 1 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            basis[4] = C2[0] * x * y;
            basis[5] = C2[1] * y * z;
            basis[6] = C2[2] * (2.0 * zz - xx - yy);
            basis[7] = C2[3] * x * z;
            basis[8] = C2[4] * (xx - yy);
            if degree > 2 {
                basis[9] = C3[0] * y * (3.0 * xx - yy);
                basis[10] = C3[1] * x * y * z;
                basis[11] = C3[2] * y * (4.0 * zz - xx - yy);
                basis[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
                basis[13] = C3[4] * x * (4.0 * zz - xx - yy);
                basis[14] = C3[5] * z * (xx - yy);
                basis[15] = C3[6] * x * (xx - 3.0 * yy);
            }
        }
    }
    let mut out = [0.5f64; 3];
    for (b, coeff) in basis.iter().zip(c).take(sh_coeff_count(degree)) {
        for k in 0..3 {
            out[k] += b * coeff[k] as f64;
        }
    }
    out.map(|v| v.clamp(0.0, 1.0))
}
