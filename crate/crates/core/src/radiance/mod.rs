//! Radiance fields, volume compositing and the Gaussian scene model.

mod analytic;
mod gaussian;
mod ply;
pub(crate) mod sh;

pub use analytic::{AnalyticField, AnalyticKind, Shape, DEFAULT_SAMPLES};
pub use gaussian::{covariance_from_rs, GaussianScene};
pub use ply::{
    encode_gaussian_scene, load_gaussian_scene, read_gaussian_scene, write_gaussian_scene,
};
pub use sh::{eval_sh, sh_coeff_count, MAX_SH_DEGREE};

use crate::error::{Error, Result};
use crate::rays::Ray;

/// Linear RGB, nominally in `[0, 1]`.
pub type Rgb = [f32; 3];

pub const BLACK: Rgb = [0.0; 3];

/// Anything that can color a single ray.
pub trait RadianceField: Sync {
    /// Front-to-back composite of `ray` over `background`.
    fn composite(&self, ray: &Ray, background: Rgb) -> Composite;

    fn shade(&self, ray: &Ray, background: Rgb) -> Rgb {
        self.composite(ray, background).rgb()
    }
}

/// One point sample along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeSample {
    pub sigma: f64,
    pub color: [f64; 3],
    pub delta: f64,
}

/// Result of front-to-back compositing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Composite {
    pub color: [f64; 3],
    /// Σ αᵢTᵢ over all samples.
    pub weight: f64,
    /// Transmittance left after the last sample.
    pub transmittance: f64,
}

impl Composite {
    pub fn rgb(&self) -> Rgb {
        self.color.map(|c| c as f32)
    }
}

/// Front-to-back alpha compositor shared by every field type.
#[derive(Clone, Copy, Debug)]
pub struct Compositor {
    color: [f64; 3],
    weight: f64,
    transmittance: f64,
}

impl Default for Compositor {
    fn default() -> Self {
        Self::new()
    }
}

impl Compositor {
    pub fn new() -> Self {
        Self {
            color: [0.0; 3],
            weight: 0.0,
            transmittance: 1.0,
        }
    }

    #[inline]
    pub fn transmittance(&self) -> f64 {
        self.transmittance
    }

    /// Blend one sample of opacity `alpha` behind everything added so far.
    #[inline]
    pub fn add(&mut self, alpha: f64, color: [f64; 3]) {
        let w = alpha * self.transmittance;
        for (acc, c) in self.color.iter_mut().zip(color) {
            *acc += w * c;
        }
        self.weight += w;
        self.transmittance *= 1.0 - alpha;
    }

    pub fn finish(self, background: Rgb) -> Composite {
        debug_assert!(
            (self.weight + self.transmittance - 1.0).abs() <= 1e-12,
            "compositing weights sum to {}",
            self.weight + self.transmittance
        );
        let mut color = self.color;
        for (c, b) in color.iter_mut().zip(background) {
            *c += self.transmittance * b as f64;
        }
        Composite {
            color,
            weight: self.weight,
            transmittance: self.transmittance,
        }
    }
}

/// Composite `samples` (near to far) over `background`, with
/// `αᵢ = 1 − exp(−σᵢδᵢ)`.
pub fn volume_render(samples: &[VolumeSample], background: Rgb) -> Result<Composite> {
    let mut acc = Compositor::new();
    for (i, s) in samples.iter().enumerate() {
        if !(s.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample {i} has negative density {}",
                s.sigma
            )));
        }
        if !(s.delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample {i} has non-positive step {}",
                s.delta
            )));
        }
        acc.add(1.0 - (-s.sigma * s.delta).exp(), s.color);
    }
    Ok(acc.finish(background))
}
