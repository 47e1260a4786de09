//! Subpixel repurposing: deciding, for every encoded subpixel, which pixel
//! of which viewpoint image feeds it.
//!
//! The standard mapping feeds slot `(x, y, k)` from pixel `(x, y)` of view
//! `V[x, 3y+k]`, so every encoded subpixel costs a distinct rendered pixel
//! (β = 3). Repurposing walks chains of same-view subpixels that run roughly
//! parallel to the grating; whenever a chain renders a pixel, the two
//! channels it does not display are parked in a per-view buffer and handed
//! to the next slots along the chain that need exactly those channels.

use std::collections::HashMap;

use crate::display::{DisplayProfile, ViewpointMatrix};
use crate::error::{Error, Result};

/// Source of one encoded subpixel: channel `channel` of pixel
/// `(src_x, src_y)` in the image of viewpoint `view`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SourceIndex {
    pub src_x: u32,
    pub src_y: u32,
    pub view: u16,
    pub channel: u8,
}

impl SourceIndex {
    pub fn new(view: usize, src_x: usize, src_y: usize, channel: usize) -> Self {
        Self {
            src_x: src_x as u32,
            src_y: src_y as u32,
            view: view as u16,
            channel: channel as u8,
        }
    }

    /// The ray this subpixel samples.
    pub fn ray(&self) -> (u16, u32, u32) {
        (self.view, self.src_x, self.src_y)
    }
}

/// Encoded-image index matrix: one [`SourceIndex`] per panel subpixel,
/// row-major `(x, y, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedIndexMatrix {
    height: usize,
    width: usize,
    entries: Vec<SourceIndex>,
    beta: f64,
}

impl EncodedIndexMatrix {
    /// Wrap caller-built entries. Checks shape, source bounds and that
    /// every slot is fed by its own channel; β is recomputed.
    pub fn from_entries(height: usize, width: usize, entries: Vec<SourceIndex>) -> Result<Self> {
        if entries.len() != height * width * 3 {
            return Err(Error::mismatch(height * width * 3, entries.len()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.channel as usize != i % 3 {
                return Err(Error::InvalidArgument(format!(
                    "slot {i} is fed by channel {} instead of {}",
                    e.channel,
                    i % 3
                )));
            }
            if e.src_x as usize >= height || e.src_y as usize >= width {
                return Err(Error::InvalidArgument(format!(
                    "slot {i} sources pixel ({}, {}) outside the panel",
                    e.src_x, e.src_y
                )));
            }
        }
        let mut m = Self {
            height,
            width,
            entries,
            beta: 0.0,
        };
        m.beta = compute_beta(&m);
        Ok(m)
    }

    /// The standard one-to-one mapping, `(V[x, 3y+k], x, y, k)`.
    pub fn identity(views: &ViewpointMatrix) -> Self {
        let (h, w) = (views.height(), views.width());
        let entries = (0..h * w * 3)
            .map(|i| {
                let (x, col) = (i / (3 * w), i % (3 * w));
                SourceIndex::new(views.at(x, col), x, col / 3, col % 3)
            })
            .collect();
        let mut m = Self {
            height: h,
            width: w,
            entries,
            beta: 0.0,
        };
        m.beta = compute_beta(&m);
        m
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn entries(&self) -> &[SourceIndex] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> SourceIndex {
        self.entries[(x * self.width + y) * 3 + k]
    }

    /// Check that every slot keeps the viewpoint the display assigns to it.
    pub fn check_views(&self, views: &ViewpointMatrix) -> Result<()> {
        if (views.height(), views.width()) != (self.height, self.width) {
            return Err(Error::mismatch(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", views.height(), views.width()),
            ));
        }
        for (i, e) in self.entries.iter().enumerate() {
            let (x, col) = (i / (3 * self.width), i % (3 * self.width));
            if e.view as usize != views.at(x, col) {
                return Err(Error::InvalidArgument(format!(
                    "slot {i} shows view {} but the display assigns {}",
                    e.view,
                    views.at(x, col)
                )));
            }
        }
        Ok(())
    }
}

/// Idle subpixels waiting to be reused, at most one pixel per
/// `(view, channel)` slot.
#[derive(Clone, Debug)]
pub struct ChannelBuffer {
    slots: Vec<Option<(u32, u32)>>,
}

impl ChannelBuffer {
    pub fn new(num_views: usize) -> Self {
        Self {
            slots: vec![None; num_views * 3],
        }
    }

    /// Park pixel `(x, y)` for `(view, channel)` unless the slot is taken.
    /// Returns whether the pixel was stored.
    pub fn store(&mut self, view: usize, channel: usize, x: u32, y: u32) -> bool {
        let slot = &mut self.slots[view * 3 + channel];
        if slot.is_some() {
            return false;
        }
        *slot = Some((x, y));
        true
    }

    /// Remove and return the parked pixel for `(view, channel)`.
    pub fn take(&mut self, view: usize, channel: usize) -> Option<(u32, u32)> {
        self.slots[view * 3 + channel].take()
    }

    pub fn peek(&self, view: usize, channel: usize) -> Option<(u32, u32)> {
        self.slots[view * 3 + channel]
    }

    pub fn clear_view(&mut self, view: usize) {
        self.slots[view * 3..view * 3 + 3].fill(None);
    }
}

/// Repurposing areas: vertical bands of `ceil(area_width · L_x)` subpixel
/// columns starting at the left panel edge.
#[derive(Clone, Copy, Debug)]
pub struct AreaMap {
    columns: usize,
}

impl AreaMap {
    pub fn new(profile: &DisplayProfile, area_width: usize) -> Self {
        Self {
            columns: area_columns(profile, area_width),
        }
    }

    /// Width of one area in subpixel columns.
    pub fn columns(&self) -> usize {
        self.columns
    }

    #[inline]
    pub fn area(&self, _x: usize, col: usize) -> usize {
        col / self.columns
    }
}

/// Width, in subpixel columns, of an area `area_width` grating units wide.
pub fn area_columns(profile: &DisplayProfile, area_width: usize) -> usize {
    (area_width as f64 * profile.line_count).ceil() as usize
}

/// Candidate window for the next chain position after `(x, y)`; bounds are
/// inclusive `(x_low, x_high, y_low, y_high)` in rows and pixel columns.
///
/// Evaluated in real arithmetic and floored to indices. Note the lower row
/// bound is `min(x + 2, h - 1)`.
pub fn search_window(
    x: usize,
    y: usize,
    height: usize,
    num_views: usize,
    line_count: f64,
) -> (usize, usize, usize, usize) {
    let nv = num_views as f64;
    let last = (height - 1) as f64;
    let x_low = (x as f64 + 2.0).min(last);
    let y_low = (y as f64 - nv / (3.0 * line_count)).max(0.0);
    let x_high = (x as f64 + 2.0 * (nv / line_count) + nv / (2.0 * line_count)).min(last);
    let y_high = (y as f64).max(y_low);
    (
        x_low.floor() as usize,
        x_high.floor() as usize,
        y_low.floor() as usize,
        y_high.floor() as usize,
    )
}

/// Build the index matrix with repurposing inside areas `area_width`
/// grating units wide.
///
/// Subpixels are visited row-major; each unassigned one starts a chain that
/// follows its viewpoint through successive search windows until none
/// remains, after which that viewpoint's buffer is dropped. Chains never
/// leave their area and buffers never outlive a chain, so one global pass
/// gives the same result as building the areas one at a time.
pub fn build_index_matrix(
    profile: &DisplayProfile,
    views: &ViewpointMatrix,
    area_width: usize,
) -> Result<EncodedIndexMatrix> {
    if !views.matches(profile) {
        return Err(Error::InvalidArgument(
            "viewpoint matrix does not belong to this profile".into(),
        ));
    }
    if area_width == 0 {
        return Err(Error::InvalidArgument(
            "area width must be at least 1".into(),
        ));
    }
    if area_width as f64 > profile.width_in_units() {
        return Err(Error::InvalidArgument(format!(
            "area width {area_width} exceeds the panel's {:.3} grating units",
            profile.width_in_units()
        )));
    }

    let (h, w) = (profile.height_px, profile.width_px);
    let cols = 3 * w;
    let areas = AreaMap::new(profile, area_width);
    let mut entries = vec![SourceIndex::default(); h * cols];
    let mut assigned = vec![false; h * cols];
    let mut buffer = ChannelBuffer::new(profile.num_views);

    for x0 in 0..h {
        for start in 0..cols {
            if assigned[x0 * cols + start] {
                continue;
            }
            let view = views.at(x0, start);
            let area = areas.area(x0, start);
            let (mut x, mut col) = (x0, start);
            loop {
                let (y, k) = (col / 3, col % 3);
                let entry = match buffer.take(view, k) {
                    Some((bx, by)) => SourceIndex::new(view, bx as usize, by as usize, k),
                    None => {
                        // Lend the idle channels unless another slot of this
                        // pixel shows them for the same view, or already lent them.
                        let base = x * cols + 3 * y;
                        let row = views.row(x);
                        let lent = (0..3).any(|j| {
                            j != k
                                && row[3 * y + j] as usize == view
                                && assigned[base + j]
                                && entries[base + j].ray() == (view as u16, x as u32, y as u32)
                        });
                        if !lent {
                            for other in [(k + 1) % 3, (k + 2) % 3] {
                                if row[3 * y + other] as usize != view {
                                    buffer.store(view, other, x as u32, y as u32);
                                }
                            }
                        }
                        SourceIndex::new(view, x, y, k)
                    }
                };
                entries[x * cols + col] = entry;
                assigned[x * cols + col] = true;

                match next_in_chain(profile, views, &areas, &assigned, x, y, view, area) {
                    Some(next) => (x, col) = next,
                    None => break,
                }
            }
            buffer.clear_view(view);
        }
    }

    let mut m = EncodedIndexMatrix {
        height: h,
        width: w,
        entries,
        beta: 0.0,
    };
    m.beta = compute_beta(&m);
    Ok(m)
}

/// First unassigned subpixel of `view` inside `area` and the search window,
/// scanning rows, then columns, then channels in ascending order.
#[allow(clippy::too_many_arguments)]
fn next_in_chain(
    profile: &DisplayProfile,
    views: &ViewpointMatrix,
    areas: &AreaMap,
    assigned: &[bool],
    x: usize,
    y: usize,
    view: usize,
    area: usize,
) -> Option<(usize, usize)> {
    let cols = 3 * profile.width_px;
    let (x_low, x_high, y_low, y_high) = search_window(
        x,
        y,
        profile.height_px,
        profile.num_views,
        profile.line_count,
    );
    let col_lo = 3 * y_low;
    let col_hi = (3 * y_high + 3).min(cols);
    for r in x_low..=x_high {
        let row = views.row(r);
        for col in col_lo..col_hi {
            if row[col] as usize == view && !assigned[r * cols + col] && areas.area(r, col) == area
            {
                return Some((r, col));
            }
        }
    }
    None
}

/// Per-pixel set of ray views, used to count and index unique
/// `(view, src_x, src_y)` triples without hashing every entry.
///
/// A pixel is the source of at most three views under any index matrix
/// this crate builds; anything beyond that spills into a hash map.
pub(crate) struct TripleTable {
    width: usize,
    slots: Vec<[(u16, u32); 3]>,
    used: Vec<u8>,
    overflow: HashMap<(u16, u32, u32), u32>,
}

impl TripleTable {
    pub(crate) fn new(height: usize, width: usize) -> Self {
        Self {
            width,
            slots: vec![[(0, 0); 3]; height * width],
            used: vec![0; height * width],
            overflow: HashMap::new(),
        }
    }

    pub(crate) fn get(&self, (view, x, y): (u16, u32, u32)) -> Option<u32> {
        let p = x as usize * self.width + y as usize;
        let n = self.used[p] as usize;
        self.slots[p][..n]
            .iter()
            .find(|s| s.0 == view)
            .map(|s| s.1)
            .or_else(|| self.overflow.get(&(view, x, y)).copied())
    }

    /// Insert `triple → value` if absent; returns true when inserted.
    pub(crate) fn insert(&mut self, triple: (u16, u32, u32), value: u32) -> bool {
        if self.get(triple).is_some() {
            return false;
        }
        let (view, x, y) = triple;
        let p = x as usize * self.width + y as usize;
        let n = self.used[p] as usize;
        if n < 3 {
            self.slots[p][n] = (view, value);
            self.used[p] += 1;
        } else {
            self.overflow.insert(triple, value);
        }
        true
    }
}

/// Rendered-pixel ratio: distinct `(view, src_x, src_y)` rays over `w·h`.
pub fn compute_beta(m: &EncodedIndexMatrix) -> f64 {
    let mut table = TripleTable::new(m.height, m.width);
    let mut n = 0usize;
    for e in &m.entries {
        if table.insert(e.ray(), 0) {
            n += 1;
        }
    }
    n as f64 / (m.height * m.width) as f64
}

/// Gather an encoded image from a panel-resolution stack through `M_i`.
pub fn assemble_encoded(
    m: &EncodedIndexMatrix,
    stack: &crate::display::MultiViewStack,
) -> Result<crate::image::Image> {
    if stack.dims() != (m.height, m.width) {
        return Err(Error::mismatch(
            format!("{}x{}", m.height, m.width),
            format!("{}x{}", stack.dims().0, stack.dims().1),
        ));
    }
    if let Some(e) = m.entries.iter().find(|e| e.view as usize >= stack.len()) {
        return Err(Error::InvalidArgument(format!(
            "index matrix references view {} but the stack has {}",
            e.view,
            stack.len()
        )));
    }
    let data = m
        .entries
        .iter()
        .map(|e| {
            stack.get(
                e.view as usize,
                e.src_x as usize,
                e.src_y as usize,
                e.channel as usize,
            )
        })
        .collect();
    crate::image::Image::from_raw(m.height, m.width, data)
}
