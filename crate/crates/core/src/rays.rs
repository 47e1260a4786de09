//! Ray lists, permutation indices and the camera arc.
//!
//! Every distinct `(view, src_x, src_y)` triple of an index matrix is one
//! ray. [`RaySet`] orders them so that the first `w·h` rays are exactly the
//! red-channel sources in encoded order; green and blue read their rays back
//! through `idx_g` and `idx_b`.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rayon::prelude::*;

use crate::display::{DisplayProfile, EncodedImage};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::repurpose::{EncodedIndexMatrix, TripleTable};

/// One ray key: viewpoint and source pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RayKey {
    pub view: u16,
    pub src_x: u32,
    pub src_y: u32,
}

impl RayKey {
    fn from_tuple((view, src_x, src_y): (u16, u32, u32)) -> Self {
        Self { view, src_x, src_y }
    }
}

/// Ordered unique rays plus the green/blue gather indices.
#[derive(Clone, Debug, PartialEq)]
pub struct RaySet {
    height: usize,
    width: usize,
    rays: Vec<RayKey>,
    idx_g: Vec<u32>,
    idx_b: Vec<u32>,
}

impl RaySet {
    /// Collect the rays of `m`. The first `w·h` follow the red slots in
    /// row-major order; the rest follow in order of first appearance
    /// scanning green then blue of each pixel.
    pub fn build(m: &EncodedIndexMatrix) -> Self {
        let (h, w) = (m.height(), m.width());
        let n = h * w;
        let entries = m.entries();
        let mut table = TripleTable::new(h, w);
        let mut rays = Vec::with_capacity(n);
        for p in 0..n {
            let t = entries[3 * p].ray();
            // red slots never share a ray: each (view, pixel, channel) is shown once
            let fresh = table.insert(t, p as u32);
            debug_assert!(fresh, "two red slots share a source ray");
            rays.push(RayKey::from_tuple(t));
        }
        let mut idx_g = vec![0u32; n];
        let mut idx_b = vec![0u32; n];
        for p in 0..n {
            for (k, idx) in [(1, &mut idx_g), (2, &mut idx_b)] {
                let t = entries[3 * p + k].ray();
                idx[p] = match table.get(t) {
                    Some(i) => i,
                    None => {
                        let i = rays.len() as u32;
                        table.insert(t, i);
                        rays.push(RayKey::from_tuple(t));
                        i
                    }
                };
            }
        }
        Self {
            height: h,
            width: w,
            rays,
            idx_g,
            idx_b,
        }
    }

    /// Reassemble from stored parts, checking every invariant.
    pub fn from_parts(
        height: usize,
        width: usize,
        rays: Vec<RayKey>,
        idx_g: Vec<u32>,
        idx_b: Vec<u32>,
    ) -> Result<Self> {
        let n = height * width;
        if idx_g.len() != n || idx_b.len() != n {
            return Err(Error::mismatch(n, idx_g.len().min(idx_b.len())));
        }
        if rays.len() < n || rays.len() > 3 * n {
            return Err(Error::InvalidArgument(format!(
                "{} rays for a {height}x{width} panel",
                rays.len()
            )));
        }
        let mut table = TripleTable::new(height, width);
        for (i, r) in rays.iter().enumerate() {
            if r.src_x as usize >= height || r.src_y as usize >= width {
                return Err(Error::InvalidArgument(format!(
                    "ray {i} lies outside the panel"
                )));
            }
            if !table.insert((r.view, r.src_x, r.src_y), i as u32) {
                return Err(Error::InvalidArgument(format!("ray {i} is a duplicate")));
            }
        }
        if let Some(&i) = idx_g
            .iter()
            .chain(&idx_b)
            .find(|&&i| i as usize >= rays.len())
        {
            return Err(Error::InvalidArgument(format!(
                "ray index {i} out of range"
            )));
        }
        Ok(Self {
            height,
            width,
            rays,
            idx_g,
            idx_b,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_rays(&self) -> usize {
        self.rays.len()
    }

    pub fn rays(&self) -> &[RayKey] {
        &self.rays
    }

    pub fn idx_g(&self) -> &[u32] {
        &self.idx_g
    }

    pub fn idx_b(&self) -> &[u32] {
        &self.idx_b
    }

    /// Rays per panel pixel.
    pub fn beta(&self) -> f64 {
        self.rays.len() as f64 / (self.height * self.width) as f64
    }

    pub fn max_view(&self) -> Option<u16> {
        self.rays.iter().map(|r| r.view).max()
    }

    /// Gather per-ray colors into the encoded image.
    pub fn reorder_to_encoded(&self, colors: &[[f32; 3]]) -> Result<EncodedImage> {
        if colors.len() != self.rays.len() {
            return Err(Error::mismatch(self.rays.len(), colors.len()));
        }
        let n = self.height * self.width;
        let mut data = vec![0f32; 3 * n];
        data.par_chunks_mut(3).enumerate().for_each(|(p, px)| {
            px[0] = colors[p][0];
            px[1] = colors[self.idx_g[p] as usize][1];
            px[2] = colors[self.idx_b[p] as usize][2];
        });
        Ok(EncodedImage::from_image_unchecked(Image::from_raw(
            self.height,
            self.width,
            data,
        )?))
    }
}

/// A world-space ray with unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }
}

/// Pinhole ray through image position `(x, y)` (row, column) of a
/// `height × width` view with focal length `focal`, posed by `pose`.
/// The camera looks down its local −z axis; local x follows image rows.
#[inline]
pub fn pixel_ray(
    pose: &Matrix4<f64>,
    x: f64,
    y: f64,
    height: usize,
    width: usize,
    focal: f64,
) -> Ray {
    let cam = Vector4::new(
        (x - height as f64 / 2.0) / focal,
        (y - width as f64 / 2.0) / focal,
        -1.0,
        0.0,
    );
    let d = pose * cam;
    Ray {
        origin: pose.fixed_view::<3, 1>(0, 3).into_owned(),
        direction: Vector3::new(d.x, d.y, d.z).normalize(),
    }
}

/// Camera extrinsics of every viewpoint, spread evenly over an arc around
/// the point `radius` in front of the centre camera.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    center_pose: Matrix4<f64>,
    radius: f64,
    view_poses: Vec<Matrix4<f64>>,
}

impl CameraRig {
    /// View `v` sits at angle `-θ_d/2 + v·θ_d/(N_v-1)`, obtained by rotating
    /// the centre pose about its vertical (local x) axis through the arc
    /// centre. A single view sits at the centre pose.
    pub fn new(profile: &DisplayProfile, center_pose: Matrix4<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "arc radius must be positive, got {radius}"
            )));
        }
        check_rigid(&center_pose)?;
        let nv = profile.num_views;
        let view_poses = (0..nv)
            .map(|v| {
                let angle = view_angle(profile.fov, nv, v);
                arc_rotation(&center_pose, radius, angle) * center_pose
            })
            .collect();
        Ok(Self {
            center_pose,
            radius,
            view_poses,
        })
    }

    pub fn center_pose(&self) -> &Matrix4<f64> {
        &self.center_pose
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn view_poses(&self) -> &[Matrix4<f64>] {
        &self.view_poses
    }

    pub fn pose(&self, v: usize) -> &Matrix4<f64> {
        &self.view_poses[v]
    }

    pub fn num_views(&self) -> usize {
        self.view_poses.len()
    }

    /// The point every camera looks at.
    pub fn arc_center(&self) -> Vector3<f64> {
        position(&self.center_pose) + forward(&self.center_pose) * self.radius
    }

    /// World rays for every entry of `rays`, in order.
    pub fn rays(&self, rays: &RaySet, profile: &DisplayProfile) -> Result<Vec<Ray>> {
        if profile.focal_px <= 0.0 {
            return Err(Error::InvalidArgument(
                "focal length must be positive".into(),
            ));
        }
        if let Some(v) = rays.max_view() {
            if v as usize >= self.num_views() {
                return Err(Error::InvalidArgument(format!(
                    "ray set uses view {v} but the rig has {}",
                    self.num_views()
                )));
            }
        }
        Ok(rays
            .rays()
            .par_iter()
            .map(|r| self.panel_ray(profile, *r))
            .collect())
    }

    /// Ray of one key at panel resolution.
    #[inline]
    pub fn panel_ray(&self, profile: &DisplayProfile, key: RayKey) -> Ray {
        pixel_ray(
            &self.view_poses[key.view as usize],
            key.src_x as f64,
            key.src_y as f64,
            profile.height_px,
            profile.width_px,
            profile.focal_px,
        )
    }
}

/// Signed arc angle of view `v`, radians.
pub fn view_angle(span: f64, num_views: usize, v: usize) -> f64 {
    if num_views <= 1 {
        return 0.0;
    }
    -span / 2.0 + v as f64 * span / (num_views - 1) as f64
}

/// Rigid rotation by `angle` about the centre pose's local x axis, pivoting
/// on the arc centre.
fn arc_rotation(center: &Matrix4<f64>, radius: f64, angle: f64) -> Matrix4<f64> {
    if angle == 0.0 {
        return Matrix4::identity();
    }
    let axis = nalgebra::Unit::new_normalize(center.fixed_view::<3, 1>(0, 0).into_owned());
    let rot: Matrix3<f64> = nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner();
    let pivot = position(center) + forward(center) * radius;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    m.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(pivot - rot * pivot));
    m
}

pub(crate) fn position(pose: &Matrix4<f64>) -> Vector3<f64> {
    pose.fixed_view::<3, 1>(0, 3).into_owned()
}

pub(crate) fn forward(pose: &Matrix4<f64>) -> Vector3<f64> {
    -pose.fixed_view::<3, 1>(0, 2).into_owned()
}

/// Reject poses whose rotation block is not orthonormal with determinant +1.
pub fn check_rigid(pose: &Matrix4<f64>) -> Result<()> {
    let r = pose.fixed_view::<3, 3>(0, 0).into_owned();
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    let bottom = pose.fixed_view::<1, 4>(3, 0).into_owned();
    if !pose.iter().all(|v| v.is_finite())
        || err > 1e-6
        || (r.determinant() - 1.0).abs() > 1e-6
        || bottom != nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)
    {
        return Err(Error::Poses("pose is not a rigid transform".into()));
    }
    Ok(())
}
