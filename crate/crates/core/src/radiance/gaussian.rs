use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::sh::{sh_coeff_count, MAX_SH_DEGREE};
use crate::error::{Error, Result};

/// Largest accepted covariance condition number.
const MAX_CONDITION: f64 = 1e12;

/// `Σ = R S Sᵀ Rᵀ` for per-axis standard deviations `scale` and rotation
/// `rotation`.
pub fn covariance_from_rs(
    scale: &Vector3<f64>,
    rotation: &UnitQuaternion<f64>,
) -> Result<Matrix3<f64>> {
    if !scale.iter().all(|s| *s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scales must be positive, got {:?}",
            scale.as_slice()
        )));
    }
    let r = rotation.to_rotation_matrix().into_inner();
    let m = r * Matrix3::from_diagonal(scale);
    let cov = m * m.transpose();
    // exact symmetry regardless of rounding in the product
    Ok((cov + cov.transpose()) * 0.5)
}

/// Anisotropic 3D Gaussians with opacity and SH color.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianScene {
    means: Vec<Vector3<f64>>,
    scales: Vec<Vector3<f64>>,
    rotations: Vec<UnitQuaternion<f64>>,
    opacities: Vec<f64>,
    sh_degree: usize,
    sh: Vec<[f32; 3]>,
    covariances: Vec<Matrix3<f64>>,
    inverses: Vec<Matrix3<f64>>,
}

impl GaussianScene {
    /// Validate and assemble a scene. Quaternions are `[w, x, y, z]` and
    /// must already be unit length; `sh` holds `sh_coeff_count(sh_degree)`
    /// RGB triples per Gaussian.
    pub fn new(
        means: Vec<Vector3<f64>>,
        scales: Vec<Vector3<f64>>,
        rotations: Vec<[f64; 4]>,
        opacities: Vec<f64>,
        sh_degree: usize,
        sh: Vec<[f32; 3]>,
    ) -> Result<Self> {
        let n = means.len();
        if sh_degree > MAX_SH_DEGREE {
            return Err(Error::scene(
                None,
                format!("unsupported SH degree {sh_degree}"),
            ));
        }
        let stride = sh_coeff_count(sh_degree);
        if scales.len() != n
            || rotations.len() != n
            || opacities.len() != n
            || sh.len() != n * stride
        {
            return Err(Error::scene(None, "per-Gaussian arrays differ in length"));
        }
        let mut quats = Vec::with_capacity(n);
        let mut covariances = Vec::with_capacity(n);
        let mut inverses = Vec::with_capacity(n);
        for i in 0..n {
            let bad = |msg: String| Err(Error::scene(Some(i), msg));
            if !means[i].iter().all(|v| v.is_finite()) {
                return bad("non-finite mean".into());
            }
            if !scales[i].iter().all(|s| *s > 0.0 && s.is_finite()) {
                return bad(format!("scale {:?} is not positive", scales[i].as_slice()));
            }
            if !(0.0..=1.0).contains(&opacities[i]) {
                return bad(format!("opacity {} outside [0, 1]", opacities[i]));
            }
            if !sh[i * stride..(i + 1) * stride]
                .iter()
                .flatten()
                .all(|v| v.is_finite())
            {
                return bad("non-finite SH coefficient".into());
            }
            let [w, x, y, z] = rotations[i];
            let q = Quaternion::new(w, x, y, z);
            if !((q.norm() - 1.0).abs() <= 1e-6) {
                return bad(format!("rotation norm {} is not 1", q.norm()));
            }
            let q = UnitQuaternion::new_unchecked(q);
            let smin = scales[i].min();
            let smax = scales[i].max();
            if (smax / smin).powi(2) > MAX_CONDITION {
                return bad("degenerate covariance".into());
            }
            let cov = covariance_from_rs(&scales[i], &q)?;
            // inverse through the factorisation: R S⁻² Rᵀ
            let r = q.to_rotation_matrix().into_inner();
            let inv_s2 = scales[i].map(|s| 1.0 / (s * s));
            let inv = r * Matrix3::from_diagonal(&inv_s2) * r.transpose();
            quats.push(q);
            covariances.push(cov);
            inverses.push((inv + inv.transpose()) * 0.5);
        }
        Ok(Self {
            means,
            scales,
            rotations: quats,
            opacities,
            sh_degree,
            sh,
            covariances,
            inverses,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn sh_degree(&self) -> usize {
        self.sh_degree
    }

    pub fn mean(&self, i: usize) -> &Vector3<f64> {
        &self.means[i]
    }

    pub fn scale(&self, i: usize) -> &Vector3<f64> {
        &self.scales[i]
    }

    pub fn rotation(&self, i: usize) -> &UnitQuaternion<f64> {
        &self.rotations[i]
    }

    pub fn opacity(&self, i: usize) -> f64 {
        self.opacities[i]
    }

    pub fn covariance(&self, i: usize) -> &Matrix3<f64> {
        &self.covariances[i]
    }

    pub fn inverse_covariance(&self, i: usize) -> &Matrix3<f64> {
        &self.inverses[i]
    }

    pub fn sh(&self, i: usize) -> &[[f32; 3]] {
        let stride = sh_coeff_count(self.sh_degree);
        &self.sh[i * stride..(i + 1) * stride]
    }

    /// Same scene shifted by `offset`.
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        let mut s = self.clone();
        for m in &mut s.means {
            *m += offset;
        }
        s
    }
}
