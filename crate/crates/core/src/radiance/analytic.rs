//! Closed-form density fields, ray-marched with uniform midpoint samples
//! between the first entry into and the last exit from any shape.

use std::str::FromStr;

use nalgebra::Vector3;

use super::{Composite, Compositor, RadianceField, Rgb};
use crate::error::{Error, Result};
use crate::raycast::Aabb;
use crate::rays::Ray;

/// Samples per ray across the occupied interval.
pub const DEFAULT_SAMPLES: usize = 512;

/// One primitive of constant density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
        sigma: f64,
        color: [f64; 3],
    },
    /// Box whose color runs from black at `min` to white at `max`, one
    /// channel per axis.
    GradientBox {
        min: Vector3<f64>,
        max: Vector3<f64>,
        sigma: f64,
    },
}

impl Shape {
    fn bounds(&self) -> Aabb {
        match *self {
            Shape::Sphere { center, radius, .. } => Aabb::centered(center, Vector3::repeat(radius)),
            Shape::GradientBox { min, max, .. } => Aabb::new(min, max),
        }
    }

    /// Parameter interval, clipped to `t >= 0`, where `ray` is inside the shape.
    fn interval(&self, ray: &Ray) -> Option<(f64, f64)> {
        match *self {
            Shape::Sphere { center, radius, .. } => {
                let oc = ray.origin - center;
                let a = ray.direction.norm_squared();
                let b = oc.dot(&ray.direction);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if !(disc > 0.0) || a == 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                let t1 = (-b + root) / a;
                if t1 <= 0.0 {
                    return None;
                }
                Some((((-b - root) / a).max(0.0), t1))
            }
            Shape::GradientBox { min, max, .. } => Aabb::new(min, max).intersect(ray),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius, sigma, .. } => radius > 0.0 && sigma >= 0.0,
            Shape::GradientBox { min, max, sigma } => {
                (0..3).all(|i| min[i] < max[i]) && sigma >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid shape {self:?}")))
        }
    }

    /// Density and color at `p`, or `None` outside.
    #[inline]
    fn sample(&self, p: &Vector3<f64>) -> Option<(f64, [f64; 3])> {
        match *self {
            Shape::Sphere {
                center,
                radius,
                sigma,
                color,
            } => ((p - center).norm_squared() <= radius * radius).then_some((sigma, color)),
            Shape::GradientBox { min, max, sigma } => {
                if (0..3).all(|i| min[i] <= p[i] && p[i] <= max[i]) {
                    let c = [0, 1, 2].map(|i| (p[i] - min[i]) / (max[i] - min[i]));
                    Some((sigma, c))
                } else {
                    None
                }
            }
        }
    }
}

/// Built-in analytic scenes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyticKind {
    ConstantSphere,
    TwoSpheres,
    GradientBox,
}

impl FromStr for AnalyticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant_sphere" => Ok(Self::ConstantSphere),
            "two_spheres" => Ok(Self::TwoSpheres),
            "gradient_box" => Ok(Self::GradientBox),
            _ => Err(Error::InvalidArgument(format!(
                "unknown analytic field {s:?} (expected constant_sphere, two_spheres or gradient_box)"
            ))),
        }
    }
}

/// Sum of shapes; overlapping shapes add density and mix color by density.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticField {
    shapes: Vec<Shape>,
    bounds: Aabb,
    samples: usize,
}

impl AnalyticField {
    pub fn new(shapes: Vec<Shape>, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument(
                "sample count must be positive".into(),
            ));
        }
        if shapes.is_empty() {
            return Err(Error::InvalidArgument(
                "analytic field needs a shape".into(),
            ));
        }
        let mut bounds = Aabb::empty();
        for s in &shapes {
            s.validate()?;
            bounds.grow(&s.bounds());
        }
        Ok(Self {
            shapes,
            bounds,
            samples,
        })
    }

    /// Scenes sized for cameras a few units from the origin.
    pub fn preset(kind: AnalyticKind) -> Self {
        let shapes = match kind {
            AnalyticKind::ConstantSphere => vec![Shape::Sphere {
                center: Vector3::zeros(),
                radius: 1.0,
                sigma: 2.0,
                color: [0.9, 0.6, 0.3],
            }],
            AnalyticKind::TwoSpheres => vec![
                Shape::Sphere {
                    center: Vector3::new(0.0, -0.4, 0.8),
                    radius: 0.6,
                    sigma: 40.0,
                    color: [0.95, 0.25, 0.2],
                },
                Shape::Sphere {
                    center: Vector3::new(0.3, 0.5, -0.8),
                    radius: 0.9,
                    sigma: 4.0,
                    color: [0.2, 0.4, 0.95],
                },
            ],
            // large enough to enclose the default rig, so every ray hits
            AnalyticKind::GradientBox => vec![Shape::GradientBox {
                min: Vector3::repeat(-20.0),
                max: Vector3::repeat(20.0),
                sigma: 0.05,
            }],
        };
        Self::new(shapes, DEFAULT_SAMPLES).expect("presets are valid")
    }

    pub fn with_samples(mut self, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument(
                "sample count must be positive".into(),
            ));
        }
        self.samples = samples;
        Ok(self)
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn density(&self, p: &Vector3<f64>) -> (f64, [f64; 3]) {
        let mut sigma = 0.0;
        let mut acc = [0.0; 3];
        for s in &self.shapes {
            if let Some((sg, c)) = s.sample(p) {
                sigma += sg;
                for k in 0..3 {
                    acc[k] += sg * c[k];
                }
            }
        }
        if sigma > 0.0 {
            (sigma, acc.map(|v| v / sigma))
        } else {
            (0.0, acc)
        }
    }
}

impl RadianceField for AnalyticField {
    fn composite(&self, ray: &Ray, background: Rgb) -> Composite {
        let mut acc = Compositor::new();
        let span = self
            .shapes
            .iter()
            .filter_map(|s| s.interval(ray))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));
        if let Some((t0, t1)) = span {
            let delta = (t1 - t0) / self.samples as f64;
            if delta > 0.0 {
                for i in 0..self.samples {
                    let p = ray.at(t0 + (i as f64 + 0.5) * delta);
                    let (sigma, color) = self.density(&p);
                    if sigma > 0.0 {
                        acc.add(1.0 - (-sigma * delta).exp(), color);
                    }
                }
            }
        }
        acc.finish(background)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiance::BLACK;

    fn ray(o: [f64; 3], d: [f64; 3]) -> Ray {
        Ray {
            origin: Vector3::from(o),
            direction: Vector3::from(d).normalize(),
        }
    }

    fn sphere(sigma: f64, color: [f64; 3]) -> Shape {
        Shape::Sphere {
            center: Vector3::zeros(),
            radius: 1.0,
            sigma,
            color,
        }
    }

    #[test]
    fn miss_returns_background() {
        let f = AnalyticField::preset(AnalyticKind::ConstantSphere);
        let bg = [0.2, 0.3, 0.4];
        assert_eq!(f.shade(&ray([0.0, 5.0, 5.0], [0.0, 0.0, -1.0]), bg), bg);
    }

    #[test]
    fn centre_ray_matches_beer_lambert() {
        let f = AnalyticField::new(vec![sphere(0.5, [1.0; 3])], DEFAULT_SAMPLES).unwrap();
        let c = f.shade(&ray([0.0, 0.0, 5.0], [0.0, 0.0, -1.0]), BLACK);
        let want = 1.0 - (-1f64).exp();
        for v in c {
            assert!((v as f64 - want).abs() < 1e-3);
        }
    }

    #[test]
    fn grazing_ray_is_exact_for_any_sample_count() {
        // chord 2·sqrt(1 − 0.9²) through density 2
        let want = 1.0 - (-2.0 * 2.0 * 0.19f64.sqrt()).exp();
        for n in [1, 7, 512] {
            let f = AnalyticField::new(vec![sphere(2.0, [1.0; 3])], n).unwrap();
            let c = f.composite(&ray([0.9, 0.0, 5.0], [0.0, 0.0, -1.0]), BLACK);
            assert!((c.color[0] - want).abs() < 1e-12, "{n}: {}", c.color[0]);
        }
    }

    #[test]
    fn camera_inside_sphere_marches_from_origin() {
        let f = AnalyticField::new(vec![sphere(1.0, [1.0; 3])], 16).unwrap();
        let c = f.composite(&ray([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]), BLACK);
        assert!((c.transmittance - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn opaque_front_sphere_hides_back() {
        let front = Shape::Sphere {
            center: Vector3::new(0.0, 0.0, 1.0),
            radius: 0.5,
            sigma: 1e4,
            color: [0.9, 0.1, 0.2],
        };
        let back = Shape::Sphere {
            center: Vector3::new(0.0, 0.0, -1.0),
            radius: 0.5,
            sigma: 3.0,
            color: [0.0, 0.0, 1.0],
        };
        let f = AnalyticField::new(vec![front, back], DEFAULT_SAMPLES).unwrap();
        let c = f.shade(&ray([0.0, 0.0, 5.0], [0.0, 0.0, -1.0]), [1.0; 3]);
        assert_eq!(c, [0.9, 0.1, 0.2]);
    }

    #[test]
    fn gradient_box_hit_from_inside() {
        let f = AnalyticField::preset(AnalyticKind::GradientBox);
        let c = f.shade(&ray([0.0, 0.0, 5.0], [0.2, -0.1, -1.0]), BLACK);
        assert!(c.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(AnalyticField::new(vec![sphere(1.0, [1.0; 3])], 0).is_err());
        assert!(AnalyticField::new(vec![sphere(-1.0, [1.0; 3])], 4).is_err());
        assert!(AnalyticField::new(vec![], 4).is_err());
        assert!("cube".parse::<AnalyticKind>().is_err());
        assert_eq!(
            "two_spheres".parse::<AnalyticKind>().unwrap(),
            AnalyticKind::TwoSpheres
        );
    }
}
