//! Lenticular display geometry: which viewpoint every LCD subpixel shows,
//! and the standard interlacer that gathers those subpixels from a stack of
//! per-view renders.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::Image;

/// A bin index closer than this to an integer is snapped onto it. Keeps
/// subpixels that sit exactly on a viewpoint boundary (common with rational
/// tilt and line count) in the bin exact arithmetic puts them in.
const BIN_SNAP: f64 = 1e-7;

/// Calibrated lenticular panel plus the per-view camera intrinsics.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplayProfile {
    pub width_px: usize,
    pub height_px: usize,
    /// Grating unit width, in subpixel widths.
    pub line_count: f64,
    /// Grating tilt in radians, clockwise positive.
    pub tilt_angle: f64,
    /// Horizontal grating-to-panel shift, in subpixel widths.
    pub offset: f64,
    pub num_views: usize,
    /// Angle between the outermost cameras, radians.
    pub fov: f64,
    pub focal_px: f64,
    /// Per-view (height, width) used by the low/medium standard-mode presets.
    pub low_res: Option<(usize, usize)>,
    pub mid_res: Option<(usize, usize)>,
}

/// Per-view resolution preset for the multi-view path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewRes {
    Low,
    Mid,
    /// Panel-native.
    High,
}

/// On-disk profile layout. Angles are stored in degrees.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub width_px: usize,
    pub height_px: usize,
    pub line_count: f64,
    pub tilt_angle_deg: f64,
    pub offset: f64,
    pub num_views: usize,
    pub fov_deg: f64,
    pub focal_px: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_width_px: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_height_px: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mr_width_px: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mr_height_px: Option<usize>,
}

impl DisplayProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProfile(m.to_string()));
        if self.width_px == 0 || self.height_px == 0 {
            return bad("panel dimensions must be positive");
        }
        if self.width_px > u32::MAX as usize || self.height_px > u32::MAX as usize {
            return bad("panel dimensions exceed 32 bits");
        }
        if !(self.line_count.is_finite() && self.line_count > 0.0) {
            return bad("line_count must be positive");
        }
        if !(self.tilt_angle.is_finite() && self.tilt_angle.abs() < FRAC_PI_2) {
            return bad("tilt angle must lie strictly within ±90°");
        }
        if !self.offset.is_finite() {
            return bad("offset must be finite");
        }
        if self.num_views == 0 || self.num_views > u16::MAX as usize {
            return bad("num_views must be in 1..=65535");
        }
        if !(self.fov > 0.0 && self.fov < PI) {
            return bad("fov must lie in (0°, 180°)");
        }
        if !(self.focal_px.is_finite() && self.focal_px > 0.0) {
            return bad("focal_px must be positive");
        }
        for (h, w) in [self.low_res, self.mid_res].into_iter().flatten() {
            if h == 0 || w == 0 {
                return bad("per-view resolutions must be positive");
            }
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width_px * self.height_px
    }

    /// Panel width measured in grating units.
    pub fn width_in_units(&self) -> f64 {
        3.0 * self.width_px as f64 / self.line_count
    }

    /// Per-view (height, width) for a resolution preset.
    pub fn view_dims(&self, res: ViewRes) -> Result<(usize, usize)> {
        match res {
            ViewRes::High => Ok((self.height_px, self.width_px)),
            ViewRes::Low => self
                .low_res
                .ok_or_else(|| Error::InvalidArgument("profile defines no LR preset".into())),
            ViewRes::Mid => self
                .mid_res
                .ok_or_else(|| Error::InvalidArgument("profile defines no MR preset".into())),
        }
    }

    /// SHA-256 over the fields that determine subpixel and ray geometry.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"raylight-profile-v1");
        h.update((self.width_px as u64).to_le_bytes());
        h.update((self.height_px as u64).to_le_bytes());
        for v in [
            self.line_count,
            self.tilt_angle,
            self.offset,
            self.fov,
            self.focal_px,
        ] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.num_views as u64).to_le_bytes());
        h.finalize().into()
    }

    pub fn from_file_repr(f: ProfileFile) -> Result<Self> {
        let pair = |w: Option<usize>, h: Option<usize>, name: &str| match (h, w) {
            (Some(h), Some(w)) => Ok(Some((h, w))),
            (None, None) => Ok(None),
            _ => Err(Error::InvalidProfile(format!(
                "{name} preset needs both width and height"
            ))),
        };
        let p = DisplayProfile {
            width_px: f.width_px,
            height_px: f.height_px,
            line_count: f.line_count,
            tilt_angle: f.tilt_angle_deg.to_radians(),
            offset: f.offset,
            num_views: f.num_views,
            fov: f.fov_deg.to_radians(),
            focal_px: f.focal_px,
            low_res: pair(f.lr_width_px, f.lr_height_px, "LR")?,
            mid_res: pair(f.mr_width_px, f.mr_height_px, "MR")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_file_repr(&self) -> ProfileFile {
        ProfileFile {
            width_px: self.width_px,
            height_px: self.height_px,
            line_count: self.line_count,
            tilt_angle_deg: self.tilt_angle.to_degrees(),
            offset: self.offset,
            num_views: self.num_views,
            fov_deg: self.fov.to_degrees(),
            focal_px: self.focal_px,
            lr_width_px: self.low_res.map(|r| r.1),
            lr_height_px: self.low_res.map(|r| r.0),
            mr_width_px: self.mid_res.map(|r| r.1),
            mr_height_px: self.mid_res.map(|r| r.0),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ProfileFile =
            toml::from_str(text).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        Self::from_file_repr(f)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file_repr()).expect("profile serializes")
    }

    /// Load a profile file, or one of the built-in names
    /// (`7.9-inch`, `15.6-inch`, `65-inch`, `desk`).
    pub fn load(path_or_name: impl AsRef<Path>) -> Result<Self> {
        let path = path_or_name.as_ref();
        if let Some(p) = path.to_str().and_then(Self::builtin) {
            if !path.exists() {
                return Ok(p);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "7.9-inch" | "7.9" => Some(Self::inch_7_9()),
            "15.6-inch" | "15.6" => Some(Self::inch_15_6()),
            "65-inch" | "65" => Some(Self::inch_65()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    /// 7.9-inch 2K panel, 48 views.
    pub fn inch_7_9() -> Self {
        Self {
            width_px: 1536,
            height_px: 2048,
            line_count: 6.2221,
            tilt_angle: 10.8232f64.to_radians(),
            offset: 4.2077,
            num_views: 48,
            fov: 40f64.to_radians(),
            focal_px: 2048.0,
            low_res: Some((560, 420)),
            mid_res: Some((1024, 768)),
        }
    }

    /// 15.6-inch 4K panel, 60 views.
    pub fn inch_15_6() -> Self {
        Self {
            width_px: 3840,
            height_px: 2160,
            line_count: 5.3344,
            tilt_angle: 6.8526f64.to_radians(),
            offset: 1.2547,
            num_views: 60,
            fov: 53f64.to_radians(),
            focal_px: 3840.0,
            low_res: Some((450, 800)),
            mid_res: Some((1080, 1920)),
        }
    }

    /// 65-inch 8K panel, 96 views.
    pub fn inch_65() -> Self {
        Self {
            width_px: 7680,
            height_px: 4320,
            line_count: 9.3597,
            tilt_angle: 8.6517f64.to_radians(),
            offset: 23.6677,
            num_views: 96,
            fov: 80f64.to_radians(),
            focal_px: 7680.0,
            low_res: Some((900, 1600)),
            mid_res: Some((2160, 3840)),
        }
    }

    /// Small synthetic panel for fast end-to-end runs.
    pub fn desk() -> Self {
        Self {
            width_px: 192,
            height_px: 128,
            line_count: 4.6,
            tilt_angle: 9.0f64.to_radians(),
            offset: 1.3,
            num_views: 8,
            fov: 30f64.to_radians(),
            focal_px: 192.0,
            low_res: Some((32, 48)),
            mid_res: Some((64, 96)),
        }
    }

    pub fn check_subpixel(&self, x: usize, y: usize, k: usize) -> Result<()> {
        if x >= self.height_px || y >= self.width_px || k > 2 {
            return Err(Error::InvalidArgument(format!(
                "subpixel ({x}, {y}, {k}) outside {}x{}x3 panel",
                self.height_px, self.width_px
            )));
        }
        Ok(())
    }
}

/// Precomputed per-row geometry so the hot loop stays a handful of flops.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ViewCalc {
    row_shift: f64,
    offset: f64,
    line_count: f64,
    num_views: usize,
}

impl ViewCalc {
    pub(crate) fn new(p: &DisplayProfile) -> Self {
        Self {
            row_shift: 3.0 * p.tilt_angle.tan(),
            offset: p.offset,
            line_count: p.line_count,
            num_views: p.num_views,
        }
    }

    /// Horizontal distance, in subpixel widths, from the subpixel's left
    /// edge to the left edge of the farthest grating unit.
    #[inline]
    pub(crate) fn d_offset(&self, x: usize, y: usize, k: usize) -> f64 {
        (3 * y + k) as f64 - self.offset + x as f64 * self.row_shift
    }

    #[inline]
    fn view(&self, x: usize, y: usize, k: usize) -> usize {
        let x_offset = self.d_offset(x, y, k).rem_euclid(self.line_count);
        let bin = self.num_views as f64 * x_offset / self.line_count;
        let nearest = bin.round();
        let bin = if (bin - nearest).abs() < BIN_SNAP {
            nearest
        } else {
            bin
        };
        let v = bin.floor() as usize;
        // A bin that snaps up to num_views is a distance of exactly one
        // grating unit, which wraps to the start of the next unit.
        if v == self.num_views {
            0
        } else {
            v.min(self.num_views - 1)
        }
    }
}

/// Viewpoint index for subpixel `(x, y, k)`: row `x`, pixel column `y`,
/// channel `k` (0 = R, 1 = G, 2 = B).
pub fn subpixel_view(profile: &DisplayProfile, x: usize, y: usize, k: usize) -> Result<usize> {
    profile.check_subpixel(x, y, k)?;
    Ok(ViewCalc::new(profile).view(x, y, k))
}

/// Viewpoint index of every subpixel, `height × (3·width)`, channels
/// interleaved R, G, B within each pixel column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewpointMatrix {
    height: usize,
    width: usize,
    num_views: usize,
    views: Vec<u16>,
}

impl ViewpointMatrix {
    pub fn height(&self) -> usize {
        self.height
    }

    /// Panel width in pixels; the matrix has three times as many columns.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> usize {
        self.views[x * self.width * 3 + 3 * y + k] as usize
    }

    /// Entry at subpixel column `col = 3y + k`.
    #[inline]
    pub fn at(&self, x: usize, col: usize) -> usize {
        self.views[x * self.width * 3 + col] as usize
    }

    pub fn row(&self, x: usize) -> &[u16] {
        &self.views[x * self.width * 3..(x + 1) * self.width * 3]
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.views
    }

    pub fn matches(&self, profile: &DisplayProfile) -> bool {
        self.height == profile.height_px
            && self.width == profile.width_px
            && self.num_views == profile.num_views
    }
}

pub fn viewpoint_matrix(profile: &DisplayProfile) -> ViewpointMatrix {
    let calc = ViewCalc::new(profile);
    let cols = profile.width_px * 3;
    let mut views = vec![0u16; profile.height_px * cols];
    views.par_chunks_mut(cols).enumerate().for_each(|(x, row)| {
        for (col, v) in row.iter_mut().enumerate() {
            *v = calc.view(x, col / 3, col % 3) as u16;
        }
    });
    ViewpointMatrix {
        height: profile.height_px,
        width: profile.width_px,
        num_views: profile.num_views,
        views,
    }
}

/// One RGB raster per viewpoint, all the same size.
#[derive(Clone, Debug)]
pub struct MultiViewStack {
    views: Vec<Image>,
}

impl MultiViewStack {
    pub fn new(views: Vec<Image>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::InvalidArgument("multi-view stack is empty".into()))?;
        let dims = first.dims();
        if let Some(bad) = views.iter().find(|v| v.dims() != dims) {
            return Err(Error::mismatch(
                format!("{}x{}", dims.0, dims.1),
                format!("{}x{}", bad.height(), bad.width()),
            ));
        }
        Ok(Self { views })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// (height, width) shared by every view.
    pub fn dims(&self) -> (usize, usize) {
        self.views[0].dims()
    }

    pub fn view(&self, v: usize) -> &Image {
        &self.views[v]
    }

    pub fn views(&self) -> &[Image] {
        &self.views
    }

    #[inline]
    pub fn get(&self, v: usize, x: usize, y: usize, k: usize) -> f32 {
        self.views[v].get(x, y, k)
    }
}

/// A panel-sized RGB frame ready for the display.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedImage(Image);

impl EncodedImage {
    pub fn new(profile: &DisplayProfile, image: Image) -> Result<Self> {
        if image.dims() != (profile.height_px, profile.width_px) {
            return Err(Error::mismatch(
                format!("{}x{}", profile.height_px, profile.width_px),
                format!("{}x{}", image.height(), image.width()),
            ));
        }
        Ok(Self(image))
    }

    pub(crate) fn from_image_unchecked(image: Image) -> Self {
        Self(image)
    }

    pub fn image(&self) -> &Image {
        &self.0
    }

    pub fn into_image(self) -> Image {
        self.0
    }
}

/// Streaming form of the standard interlacer: feed views one at a time so
/// the full stack never has to be resident.
pub struct Interlacer<'a> {
    profile: &'a DisplayProfile,
    views: &'a ViewpointMatrix,
    out: Image,
    filled: usize,
}

impl<'a> Interlacer<'a> {
    pub fn new(profile: &'a DisplayProfile, views: &'a ViewpointMatrix) -> Result<Self> {
        if !views.matches(profile) {
            return Err(Error::InvalidArgument(
                "viewpoint matrix does not belong to this profile".into(),
            ));
        }
        Ok(Self {
            profile,
            views,
            out: Image::new(profile.height_px, profile.width_px),
            filled: 0,
        })
    }

    /// Copy every subpixel assigned to viewpoint `v` out of `image`,
    /// resampling it to panel size first when needed.
    pub fn add_view(&mut self, v: usize, image: &Image) -> Result<()> {
        if v >= self.profile.num_views {
            return Err(Error::InvalidArgument(format!(
                "view {v} out of range for {} views",
                self.profile.num_views
            )));
        }
        let (h, w) = (self.profile.height_px, self.profile.width_px);
        let resized;
        let src = if image.dims() == (h, w) {
            image
        } else {
            resized = image.resize_bilinear(h, w);
            &resized
        };
        for x in 0..h {
            let row = self.views.row(x);
            for (col, &sv) in row.iter().enumerate() {
                if sv as usize == v {
                    let (y, k) = (col / 3, col % 3);
                    self.out.set(x, y, k, src.get(x, y, k));
                    self.filled += 1;
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<EncodedImage> {
        EncodedImage::new(self.profile, self.out)
    }
}

/// Standard interlacing: resample each view to panel size, then take every
/// encoded subpixel from the same position in its assigned view.
pub fn interlace(
    profile: &DisplayProfile,
    stack: &MultiViewStack,
    views: &ViewpointMatrix,
) -> Result<EncodedImage> {
    if stack.len() != profile.num_views {
        return Err(Error::mismatch(
            format!("{} views", profile.num_views),
            format!("{} views", stack.len()),
        ));
    }
    if !views.matches(profile) {
        return Err(Error::InvalidArgument(
            "viewpoint matrix does not belong to this profile".into(),
        ));
    }
    let (h, w) = (profile.height_px, profile.width_px);
    if stack.dims() == (h, w) {
        let mut out = Image::new(h, w);
        for x in 0..h {
            for (col, &v) in views.row(x).iter().enumerate() {
                let (y, k) = (col / 3, col % 3);
                out.set(x, y, k, stack.get(v as usize, x, y, k));
            }
        }
        return EncodedImage::new(profile, out);
    }
    let mut il = Interlacer::new(profile, views)?;
    for (v, img) in stack.views().iter().enumerate() {
        il.add_view(v, img)?;
    }
    il.finish()
}
