//! RGB rasters, resampling, 8-bit quantization and lossless file IO.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major RGB raster with unit-interval channels.
///
/// Row `x` runs top to bottom, column `y` left to right, matching the
/// `(x, y, k)` subpixel convention used throughout the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, [0.0; 3])
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::mismatch(height * width * 3, data.len()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f32 {
        self.data[(x * self.width + y) * 3 + k]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, k: usize, value: f32) {
        self.data[(x * self.width + y) * 3 + k] = value;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (x * self.width + y) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (x * self.width + y) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Bilinear resample to `height` × `width` using pixel-centre alignment
    /// and edge clamping. Equal dimensions return an exact copy.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Image {
        if (height, width) == self.dims() {
            return self.clone();
        }
        let mut out = Image::new(height, width);
        let rows: Vec<(usize, usize, f32)> = (0..height)
            .map(|x| sample_axis(x, height, self.height))
            .collect();
        let cols: Vec<(usize, usize, f32)> = (0..width)
            .map(|y| sample_axis(y, width, self.width))
            .collect();
        for (x, &(x0, x1, fx)) in rows.iter().enumerate() {
            for (y, &(y0, y1, fy)) in cols.iter().enumerate() {
                for k in 0..3 {
                    let top = lerp(self.get(x0, y0, k), self.get(x0, y1, k), fy);
                    let bottom = lerp(self.get(x1, y0, k), self.get(x1, y1, k), fy);
                    out.set(x, y, k, lerp(top, bottom, fx));
                }
            }
        }
        out
    }

    /// 8-bit quantization: clamp to `[0, 1]`, scale by 255, round half away from zero.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(Error::mismatch(height * width * 3, bytes.len()));
        }
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Write an 8-bit PNG. The file appears atomically: it is staged next to
    /// the destination and renamed into place only once fully written.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buffer =
            ::image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
                .expect("buffer length matches dimensions");
        let mut encoded = Vec::new();
        buffer.write_to(
            &mut std::io::Cursor::new(&mut encoded),
            ::image::ImageFormat::Png,
        )?;
        write_atomic(path, &encoded)
    }

    /// Read an 8-bit RGB image (any format the `image` crate decodes losslessly).
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = ::image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_rgb8(h as usize, w as usize, img.as_raw())
    }
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Root-mean-square difference over all subpixels on the 0–255 scale,
/// computed on the 8-bit quantized values.
pub fn rmse(a: &Image, b: &Image) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::mismatch(
            format!("{}x{}", a.height(), a.width()),
            format!("{}x{}", b.height(), b.width()),
        ));
    }
    Ok(rmse_u8(&a.to_rgb8(), &b.to_rgb8()))
}

pub fn rmse_u8(a: &[u8], b: &[u8]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&p, &q)| {
            let d = p as f64 - q as f64;
            d * d
        })
        .sum();
    (sum / a.len() as f64).sqrt()
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::file(path, e))?;
    tmp.flush().map_err(|e| Error::file(path, e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}

fn sample_axis(dst: usize, dst_len: usize, src_len: usize) -> (usize, usize, f32) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (pos.floor() as usize).min(src_len - 1);
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, (pos - i0 as f64) as f32)
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}
