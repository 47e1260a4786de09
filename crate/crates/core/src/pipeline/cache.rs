//! On-disk precompute cache: the index matrix and ray set for one profile.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "RLCACHE\0" | version u32 | profile hash [32]
//! height u32 | width u32 | area width u32 (0 = no repurposing)
//! n_rays u64 | beta f64
//! h·w·3 × (view u16, src_x u32, src_y u32, channel u8)
//! n_rays × (view u16, src_x u32, src_y u32)
//! h·w × idx_g u32 | h·w × idx_b u32
//! ```

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::display::DisplayProfile;
use crate::error::{Error, Result};
use crate::rays::{RayKey, RaySet};
use crate::repurpose::{EncodedIndexMatrix, SourceIndex};

const MAGIC: &[u8; 8] = b"RLCACHE\0";
pub const CACHE_VERSION: u32 = 1;

/// Everything a frame render needs that depends only on the panel.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecomputeCache {
    pub profile_hash: [u8; 32],
    /// Repurposing area width in grating units; `None` for the one-to-one mapping.
    pub area_width: Option<u32>,
    pub index: EncodedIndexMatrix,
    pub rays: RaySet,
}

/// Fixed-size header fields, readable without the payload.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheHeader {
    pub version: u32,
    pub profile_hash: [u8; 32],
    pub height: u32,
    pub width: u32,
    pub area_width: Option<u32>,
    pub n_rays: u64,
    pub beta: f64,
}

impl PrecomputeCache {
    pub fn new(
        profile: &DisplayProfile,
        area_width: Option<u32>,
        index: EncodedIndexMatrix,
    ) -> Self {
        let rays = RaySet::build(&index);
        Self {
            profile_hash: profile.content_hash(),
            area_width,
            index,
            rays,
        }
    }

    pub fn beta(&self) -> f64 {
        self.index.beta()
    }

    pub fn header(&self) -> CacheHeader {
        CacheHeader {
            version: CACHE_VERSION,
            profile_hash: self.profile_hash,
            height: self.index.height() as u32,
            width: self.index.width() as u32,
            area_width: self.area_width,
            n_rays: self.rays.n_rays() as u64,
            beta: self.beta(),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let h = self.header();
        w.write_all(MAGIC)?;
        w.write_all(&h.version.to_le_bytes())?;
        w.write_all(&h.profile_hash)?;
        w.write_all(&h.height.to_le_bytes())?;
        w.write_all(&h.width.to_le_bytes())?;
        w.write_all(&h.area_width.unwrap_or(0).to_le_bytes())?;
        w.write_all(&h.n_rays.to_le_bytes())?;
        w.write_all(&h.beta.to_le_bytes())?;
        for e in self.index.entries() {
            w.write_all(&e.view.to_le_bytes())?;
            w.write_all(&e.src_x.to_le_bytes())?;
            w.write_all(&e.src_y.to_le_bytes())?;
            w.write_all(&[e.channel])?;
        }
        for r in self.rays.rays() {
            w.write_all(&r.view.to_le_bytes())?;
            w.write_all(&r.src_x.to_le_bytes())?;
            w.write_all(&r.src_y.to_le_bytes())?;
        }
        for idx in [self.rays.idx_g(), self.rays.idx_b()] {
            for i in idx {
                w.write_all(&i.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Write atomically: the file only appears once complete.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(tmp);
        self.write_to(&mut w).map_err(|e| Error::file(path, e))?;
        let tmp = w
            .into_inner()
            .map_err(|e| Error::file(path, e.into_error()))?;
        tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let h = read_header(r)?;
        let n = h.height as usize * h.width as usize;
        let mut entries = Vec::with_capacity(3 * n);
        let mut rec = [0u8; 11];
        for _ in 0..3 * n {
            fill(r, &mut rec)?;
            entries.push(SourceIndex {
                view: u16::from_le_bytes([rec[0], rec[1]]),
                src_x: u32::from_le_bytes(rec[2..6].try_into().unwrap()),
                src_y: u32::from_le_bytes(rec[6..10].try_into().unwrap()),
                channel: rec[10],
            });
        }
        let index = EncodedIndexMatrix::from_entries(h.height as usize, h.width as usize, entries)
            .map_err(|e| Error::Cache(format!("index matrix: {e}")))?;

        if h.n_rays > 3 * n as u64 {
            return Err(Error::Cache(format!("implausible ray count {}", h.n_rays)));
        }
        let mut rays = Vec::with_capacity(h.n_rays as usize);
        let mut rec = [0u8; 10];
        for _ in 0..h.n_rays {
            fill(r, &mut rec)?;
            rays.push(RayKey {
                view: u16::from_le_bytes([rec[0], rec[1]]),
                src_x: u32::from_le_bytes(rec[2..6].try_into().unwrap()),
                src_y: u32::from_le_bytes(rec[6..10].try_into().unwrap()),
            });
        }
        let mut read_idx = || -> Result<Vec<u32>> {
            let mut out = Vec::with_capacity(n);
            let mut b = [0u8; 4];
            for _ in 0..n {
                fill(r, &mut b)?;
                out.push(u32::from_le_bytes(b));
            }
            Ok(out)
        };
        let idx_g = read_idx()?;
        let idx_b = read_idx()?;
        let mut probe = [0u8; 1];
        if r.read(&mut probe)
            .map_err(|e| Error::Cache(e.to_string()))?
            != 0
        {
            return Err(Error::Cache("trailing bytes after payload".into()));
        }
        let rays = RaySet::from_parts(h.height as usize, h.width as usize, rays, idx_g, idx_b)
            .map_err(|e| Error::Cache(format!("ray set: {e}")))?;
        if rays != RaySet::build(&index) {
            return Err(Error::Cache(
                "ray set does not match the index matrix".into(),
            ));
        }
        if h.beta.to_bits() != index.beta().to_bits() {
            return Err(Error::Cache(
                "stored beta does not match the payload".into(),
            ));
        }
        Ok(Self {
            profile_hash: h.profile_hash,
            area_width: h.area_width,
            index,
            rays,
        })
    }

    /// Read a cache and check it was built for `profile`.
    pub fn load(path: impl AsRef<Path>, profile: &DisplayProfile) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        let cache = Self::read_from(&mut BufReader::new(file))?;
        cache.check_profile(profile)?;
        Ok(cache)
    }

    pub fn check_profile(&self, profile: &DisplayProfile) -> Result<()> {
        if self.profile_hash != profile.content_hash() {
            return Err(Error::Cache(
                "cache was built for a different display profile".into(),
            ));
        }
        Ok(())
    }
}

fn fill(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Cache("truncated cache file".into()),
        _ => Error::Cache(e.to_string()),
    })
}

pub fn read_header(r: &mut impl Read) -> Result<CacheHeader> {
    let mut magic = [0u8; 8];
    fill(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Cache("not a precompute cache".into()));
    }
    let mut b4 = [0u8; 4];
    let mut u32_le = |r: &mut dyn Read| -> Result<u32> {
        r.read_exact(&mut b4)
            .map_err(|_| Error::Cache("truncated cache header".into()))?;
        Ok(u32::from_le_bytes(b4))
    };
    let version = u32_le(r)?;
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported cache version {version}")));
    }
    let mut profile_hash = [0u8; 32];
    fill(r, &mut profile_hash)?;
    let height = u32_le(r)?;
    let width = u32_le(r)?;
    let area = u32_le(r)?;
    let mut b8 = [0u8; 8];
    fill(r, &mut b8)?;
    let n_rays = u64::from_le_bytes(b8);
    fill(r, &mut b8)?;
    let beta = f64::from_le_bytes(b8);
    Ok(CacheHeader {
        version,
        profile_hash,
        height,
        width,
        area_width: (area != 0).then_some(area),
        n_rays,
        beta,
    })
}
