//! Frame production in both paradigms, plus the file-level commands built
//! on top: precompute, render, compare and bench.

mod cache;
mod poses;

pub use cache::{read_header, CacheHeader, PrecomputeCache, CACHE_VERSION};
pub use poses::{format_pose, load_poses, orbit_pose, parse_poses};

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::Serialize;

use crate::display::{
    viewpoint_matrix, DisplayProfile, EncodedImage, Interlacer, ViewRes, ViewpointMatrix,
};
use crate::error::{Error, Result};
use crate::image::{rmse, Image};
use crate::radiance::{load_gaussian_scene, AnalyticField, AnalyticKind, RadianceField, Rgb};
use crate::raycast::{default_k_sigma, GaussianRenderer, DEFAULT_BRANCHING};
use crate::rays::{pixel_ray, CameraRig, RaySet};
use crate::repurpose::{build_index_matrix, EncodedIndexMatrix};

/// Build the viewpoint matrix, index matrix and ray set for `profile`.
/// `area_width = None` gives the one-to-one mapping.
pub fn precompute(profile: &DisplayProfile, area_width: Option<usize>) -> Result<PrecomputeCache> {
    profile.validate()?;
    let views = viewpoint_matrix(profile);
    let index = match area_width {
        Some(pw) => build_index_matrix(profile, &views, pw)?,
        None => EncodedIndexMatrix::identity(&views),
    };
    Ok(PrecomputeCache::new(
        profile,
        area_width.map(|p| p as u32),
        index,
    ))
}

/// Where a radiance field comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    Analytic(AnalyticKind),
    Scene(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldOptions {
    /// Ray-march samples for analytic fields.
    pub samples: usize,
    /// Heap capacity for Gaussian scenes.
    pub capacity: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            samples: crate::radiance::DEFAULT_SAMPLES,
            capacity: crate::raycast::DEFAULT_CAPACITY,
        }
    }
}

pub fn load_field(source: &FieldSource, opts: FieldOptions) -> Result<Box<dyn RadianceField>> {
    Ok(match source {
        FieldSource::Analytic(kind) => {
            Box::new(AnalyticField::preset(*kind).with_samples(opts.samples)?)
        }
        FieldSource::Scene(path) => Box::new(GaussianRenderer::with_options(
            load_gaussian_scene(path)?,
            opts.capacity,
            DEFAULT_BRANCHING,
            default_k_sigma(),
        )?),
    })
}

/// Arc radius used when none is given: the distance from the centre camera
/// to the world origin, where the built-in scenes sit.
pub fn default_radius(center_pose: &Matrix4<f64>) -> f64 {
    let d = crate::rays::position(center_pose).norm();
    if d > 1e-9 {
        d
    } else {
        1.0
    }
}

/// Wall time of one frame, split by stage.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FrameStats {
    pub stages: Vec<(String, f64)>,
    pub total_secs: f64,
    pub rays: usize,
}

impl FrameStats {
    pub fn rays_per_sec(&self) -> f64 {
        self.rays as f64 / self.total_secs.max(f64::MIN_POSITIVE)
    }
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            last: now,
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.stages
            .push((name.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }

    fn finish(self, rays: usize) -> FrameStats {
        FrameStats {
            stages: self.stages,
            total_secs: (self.last - self.start).as_secs_f64(),
            rays,
        }
    }
}

/// Ray-order frame: shade every ray of `rays` once and gather the encoded image.
pub fn render_directl(
    field: &dyn RadianceField,
    rays: &RaySet,
    rig: &CameraRig,
    profile: &DisplayProfile,
    background: Rgb,
) -> Result<(EncodedImage, FrameStats)> {
    if (rays.height(), rays.width()) != (profile.height_px, profile.width_px) {
        return Err(Error::mismatch(
            format!("{}x{}", profile.height_px, profile.width_px),
            format!("{}x{}", rays.height(), rays.width()),
        ));
    }
    if profile.focal_px <= 0.0 {
        return Err(Error::InvalidArgument(
            "focal length must be positive".into(),
        ));
    }
    if rays
        .max_view()
        .is_some_and(|v| v as usize >= rig.num_views())
    {
        return Err(Error::InvalidArgument(
            "ray set uses more views than the rig has".into(),
        ));
    }
    let mut clock = Stopwatch::new();
    let colors: Vec<Rgb> = rays
        .rays()
        .par_iter()
        .map(|k| field.shade(&rig.panel_ray(profile, *k), background))
        .collect();
    clock.lap("shade");
    let image = rays.reorder_to_encoded(&colors)?;
    clock.lap("reorder");
    Ok((image, clock.finish(rays.n_rays())))
}

/// Full raster of view `v` at `dims`. Pixel centres of a reduced raster map
/// onto the panel-resolution pinhole so every resolution shares one camera.
pub fn render_view(
    field: &dyn RadianceField,
    pose: &Matrix4<f64>,
    profile: &DisplayProfile,
    dims: (usize, usize),
    background: Rgb,
) -> Image {
    let (h, w) = (profile.height_px, profile.width_px);
    let (vh, vw) = dims;
    let sx = h as f64 / vh as f64;
    let sy = w as f64 / vw as f64;
    let mut data = vec![0f32; vh * vw * 3];
    data.par_chunks_mut(vw * 3)
        .enumerate()
        .for_each(|(i, row)| {
            let x = (i as f64 + 0.5) * sx - 0.5;
            for (j, px) in row.chunks_mut(3).enumerate() {
                let y = (j as f64 + 0.5) * sy - 0.5;
                let ray = pixel_ray(pose, x, y, h, w, profile.focal_px);
                px.copy_from_slice(&field.shade(&ray, background));
            }
        });
    Image::from_raw(vh, vw, data).expect("raster size")
}

/// Multi-view frame: render every view raster, then interlace.
pub fn render_standard(
    field: &dyn RadianceField,
    rig: &CameraRig,
    profile: &DisplayProfile,
    views: &ViewpointMatrix,
    res: ViewRes,
    background: Rgb,
) -> Result<(EncodedImage, FrameStats)> {
    if profile.focal_px <= 0.0 {
        return Err(Error::InvalidArgument(
            "focal length must be positive".into(),
        ));
    }
    if rig.num_views() != profile.num_views {
        return Err(Error::mismatch(profile.num_views, rig.num_views()));
    }
    let dims = profile.view_dims(res)?;
    let mut clock = Stopwatch::new();
    let mut interlacer = Interlacer::new(profile, views)?;
    let mut shade_secs = 0.0;
    for v in 0..profile.num_views {
        let t = Instant::now();
        let img = render_view(field, rig.pose(v), profile, dims, background);
        shade_secs += t.elapsed().as_secs_f64();
        interlacer.add_view(v, &img)?;
    }
    let image = interlacer.finish()?;
    clock.lap("render+interlace");
    let mut stats = clock.finish(profile.num_views * dims.0 * dims.1);
    let total = stats.total_secs;
    stats.stages = vec![
        ("shade".into(), shade_secs),
        ("interlace".into(), (total - shade_secs).max(0.0)),
    ];
    Ok((image, stats))
}

/// Rendering paradigm of a job.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    RayOrder,
    Standard(ViewRes),
}

/// A sequence of frames to render and write.
pub struct RenderJob<'a> {
    pub profile: &'a DisplayProfile,
    pub field: &'a dyn RadianceField,
    pub mode: Mode,
    /// Required in ray-order mode.
    pub cache: Option<&'a PrecomputeCache>,
    pub poses: &'a [Matrix4<f64>],
    pub radius: Option<f64>,
    pub background: Rgb,
}

#[derive(Debug, Serialize)]
struct TimingLog<'a> {
    mode: String,
    frames: &'a [FrameStats],
}

impl RenderJob<'_> {
    fn rig(&self, pose: &Matrix4<f64>) -> Result<CameraRig> {
        CameraRig::new(
            self.profile,
            *pose,
            self.radius.unwrap_or_else(|| default_radius(pose)),
        )
    }

    /// Render frame `i` in memory.
    pub fn frame(&self, i: usize) -> Result<(EncodedImage, FrameStats)> {
        let pose = self
            .poses
            .get(i % self.poses.len().max(1))
            .ok_or_else(|| Error::Poses("no poses".into()))?;
        let setup = Instant::now();
        let rig = self.rig(pose)?;
        let (img, mut stats) = match self.mode {
            Mode::RayOrder => {
                let cache = self.cache.ok_or_else(|| {
                    Error::InvalidArgument("ray-order rendering needs a cache".into())
                })?;
                cache.check_profile(self.profile)?;
                render_directl(self.field, &cache.rays, &rig, self.profile, self.background)?
            }
            Mode::Standard(res) => {
                let views = viewpoint_matrix(self.profile);
                render_standard(self.field, &rig, self.profile, &views, res, self.background)?
            }
        };
        let rig_secs = setup.elapsed().as_secs_f64() - stats.total_secs;
        stats.stages.insert(0, ("setup".into(), rig_secs.max(0.0)));
        stats.total_secs += rig_secs.max(0.0);
        Ok((img, stats))
    }

    /// Render every pose into `out_dir` as `frame_NNNN.png`, then write
    /// `timing.json`. Each file appears only once complete.
    pub fn run(&self, out_dir: impl AsRef<Path>) -> Result<Vec<FrameStats>> {
        let out_dir = out_dir.as_ref();
        if self.mode == Mode::RayOrder && self.cache.is_none() {
            return Err(Error::InvalidArgument(
                "ray-order rendering needs a cache".into(),
            ));
        }
        if let Some(c) = self.cache {
            c.check_profile(self.profile)?;
        }
        std::fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
        let mut all = Vec::with_capacity(self.poses.len());
        for i in 0..self.poses.len() {
            let (img, mut stats) = self.frame(i)?;
            let t = Instant::now();
            img.image()
                .write_png(out_dir.join(format!("frame_{i:04}.png")))?;
            let write = t.elapsed().as_secs_f64();
            stats.stages.push(("write".into(), write));
            stats.total_secs += write;
            log::info!(
                "frame {i}: {:.3}s, {:.3e} rays/s",
                stats.total_secs,
                stats.rays_per_sec()
            );
            all.push(stats);
        }
        let log = TimingLog {
            mode: match self.mode {
                Mode::RayOrder => "directl".into(),
                Mode::Standard(r) => format!("standard-{r:?}").to_lowercase(),
            },
            frames: &all,
        };
        let json = serde_json::to_vec_pretty(&log).expect("timing log serialises");
        crate::image::write_atomic(&out_dir.join("timing.json"), &json)?;
        Ok(all)
    }
}

/// Per-frame timings of a benchmark run.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BenchSummary {
    pub frame_secs: Vec<f64>,
    pub rays_per_frame: usize,
}

impl BenchSummary {
    pub fn mean(&self) -> f64 {
        self.frame_secs.iter().sum::<f64>() / self.frame_secs.len() as f64
    }

    pub fn median(&self) -> f64 {
        let mut v = self.frame_secs.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    pub fn rays_per_sec(&self) -> f64 {
        self.rays_per_frame as f64 / self.mean().max(f64::MIN_POSITIVE)
    }
}

/// Render `frames` frames of `job`, cycling through its poses, without
/// writing anything.
pub fn bench(job: &RenderJob, frames: usize) -> Result<BenchSummary> {
    if frames == 0 {
        return Err(Error::InvalidArgument(
            "frame count must be at least 1".into(),
        ));
    }
    if job.poses.is_empty() {
        return Err(Error::Poses("no poses".into()));
    }
    let mut frame_secs = Vec::with_capacity(frames);
    let mut rays = 0;
    for i in 0..frames {
        let (_, stats) = job.frame(i)?;
        frame_secs.push(stats.total_secs);
        rays = stats.rays;
    }
    Ok(BenchSummary {
        frame_secs,
        rays_per_frame: rays,
    })
}

/// RMSE between two image files on the 0–255 scale.
pub fn compare_files(a: impl AsRef<Path>, b: impl AsRef<Path>) -> Result<f64> {
    rmse(&Image::read(a)?, &Image::read(b)?)
}
