//! Per-ray Gaussian rendering: BVH traversal collects the nearest hits in a
//! bounded max-heap, which are then sorted and alpha-blended.

mod aabb;
mod bvh;

pub use aabb::Aabb;
pub use bvh::{Bvh, Node, NodeKind};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::radiance::{
    sh::eval_unchecked, Composite, Compositor, GaussianScene, RadianceField, Rgb,
};
use crate::rays::Ray;

/// Hits fainter than this are ignored.
pub const ALPHA_FLOOR: f64 = 1.0 / 255.0;

/// Box half-extent in standard deviations. At this distance a Gaussian of
/// full opacity has decayed to exactly [`ALPHA_FLOOR`], so culling by box
/// never drops a hit the floor would keep.
pub fn default_k_sigma() -> f64 {
    (2.0 * 255f64.ln()).sqrt()
}

pub const DEFAULT_CAPACITY: usize = 128;
pub const DEFAULT_BRANCHING: usize = 8;

/// Axis-aligned box of Gaussian `i`: `μ ± k_sigma·sqrt(diag Σ)`.
pub fn gaussian_aabb(scene: &GaussianScene, i: usize, k_sigma: f64) -> Aabb {
    let cov = scene.covariance(i);
    let half = Vector3::new(cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]).map(|v| k_sigma * v.sqrt());
    Aabb::centered(*scene.mean(i), half)
}

/// A candidate sample along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub alpha: f64,
    pub index: u32,
}

impl Eq for Hit {}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Depth of highest density along the ray and the opacity there, or `None`
/// when the peak is behind the origin or below the alpha floor.
#[inline]
pub fn intersect_gaussian(scene: &GaussianScene, i: usize, ray: &Ray) -> Option<Hit> {
    let a = scene.inverse_covariance(i);
    let ad = a * ray.direction;
    let t = (scene.mean(i) - ray.origin).dot(&ad) / ray.direction.dot(&ad);
    if !(t > 0.0) {
        return None;
    }
    let r = ray.at(t) - scene.mean(i);
    let m2 = r.dot(&(a * r)).max(0.0);
    let alpha = scene.opacity(i) * (-0.5 * m2).exp();
    (alpha >= ALPHA_FLOOR).then_some(Hit {
        t,
        alpha,
        index: i as u32,
    })
}

/// Keeps the `capacity` nearest hits; ties in depth go to the lower
/// Gaussian index so the result never depends on visiting order.
#[derive(Clone, Debug)]
pub struct HitHeap {
    capacity: usize,
    heap: BinaryHeap<Hit>,
}

impl HitHeap {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "heap capacity must be positive");
        Self {
            capacity,
            heap: BinaryHeap::with_capacity(capacity.min(4096)),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Farthest retained hit.
    pub fn peek(&self) -> Option<&Hit> {
        self.heap.peek()
    }

    pub fn push(&mut self, hit: Hit) {
        if self.heap.len() < self.capacity {
            self.heap.push(hit);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if hit < *top {
                *top = hit;
            }
        }
    }

    /// Retained hits, nearest first.
    pub fn into_sorted(self) -> Vec<Hit> {
        self.heap.into_sorted_vec()
    }
}

fn composite(scene: &GaussianScene, hits: &[Hit], ray: &Ray, background: Rgb) -> Composite {
    let mut acc = Compositor::new();
    for h in hits {
        let c = eval_unchecked(
            scene.sh_degree(),
            scene.sh(h.index as usize),
            &ray.direction,
        );
        acc.add(h.alpha, c);
    }
    acc.finish(background)
}

/// Reference renderer: every Gaussian, no culling beyond depth and the
/// alpha floor, full sort.
pub fn brute_force_ray(scene: &GaussianScene, ray: &Ray, background: Rgb) -> Rgb {
    let mut hits: Vec<Hit> = (0..scene.len())
        .filter_map(|i| intersect_gaussian(scene, i, ray))
        .collect();
    hits.sort();
    composite(scene, &hits, ray, background).rgb()
}

/// A Gaussian scene with its acceleration structure.
#[derive(Clone, Debug)]
pub struct GaussianRenderer {
    scene: GaussianScene,
    bvh: Bvh,
    capacity: usize,
    k_sigma: f64,
}

impl GaussianRenderer {
    pub fn new(scene: GaussianScene) -> Result<Self> {
        Self::with_options(
            scene,
            DEFAULT_CAPACITY,
            DEFAULT_BRANCHING,
            default_k_sigma(),
        )
    }

    pub fn with_options(
        scene: GaussianScene,
        capacity: usize,
        branching: usize,
        k_sigma: f64,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "heap capacity must be positive".into(),
            ));
        }
        if !(k_sigma > 0.0) {
            return Err(Error::InvalidArgument("k_sigma must be positive".into()));
        }
        if scene.is_empty() {
            return Err(Error::scene(None, "scene has no Gaussians"));
        }
        let boxes = (0..scene.len())
            .map(|i| gaussian_aabb(&scene, i, k_sigma))
            .collect();
        let bvh = Bvh::build(boxes, branching)?;
        Ok(Self {
            scene,
            bvh,
            capacity,
            k_sigma,
        })
    }

    pub fn scene(&self) -> &GaussianScene {
        &self.scene
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn k_sigma(&self) -> f64 {
        self.k_sigma
    }

    /// Same scene and tree with another heap capacity.
    pub fn with_capacity(&self, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "heap capacity must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            ..self.clone()
        })
    }

    /// Hits the heap retains for `ray`, nearest first.
    pub fn collect_hits(&self, ray: &Ray) -> Vec<Hit> {
        let mut heap = HitHeap::new(self.capacity);
        self.bvh.traverse(ray, |i| {
            if let Some(h) = intersect_gaussian(&self.scene, i as usize, ray) {
                heap.push(h);
            }
        });
        heap.into_sorted()
    }

    pub fn trace_ray(&self, ray: &Ray, background: Rgb) -> Rgb {
        self.composite(ray, background).rgb()
    }
}

impl RadianceField for GaussianRenderer {
    fn composite(&self, ray: &Ray, background: Rgb) -> Composite {
        composite(&self.scene, &self.collect_hits(ray), ray, background)
    }
}
