//! Binned-SAH bounding volume hierarchy, built binary and then collapsed to a
//! wider branching factor.

use super::aabb::Aabb;
use crate::error::{Error, Result};
use crate::rays::Ray;

const BINS: usize = 16;
const MAX_LEAF: usize = 8;
const C_NODE: f64 = 1.0;
const C_PRIM: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Interior {
        children: Vec<u32>,
    },
    /// Range into [`Bvh::prim_order`].
    Leaf {
        start: u32,
        count: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bvh {
    nodes: Vec<Node>,
    prim_order: Vec<u32>,
    prim_bounds: Vec<Aabb>,
    branching: usize,
}

/// Binary build node before collapsing.
enum Binary {
    Leaf {
        bounds: Aabb,
        start: usize,
        count: usize,
    },
    Split {
        bounds: Aabb,
        left: Box<Binary>,
        right: Box<Binary>,
    },
}

impl Binary {
    fn bounds(&self) -> &Aabb {
        match self {
            Binary::Leaf { bounds, .. } | Binary::Split { bounds, .. } => bounds,
        }
    }
}

impl Bvh {
    /// Build over `boxes` (one per primitive). Deterministic: equal inputs
    /// give equal trees.
    pub fn build(boxes: Vec<Aabb>, branching: usize) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot build a BVH over no primitives".into(),
            ));
        }
        if branching < 2 {
            return Err(Error::InvalidArgument(format!(
                "branching factor must be at least 2, got {branching}"
            )));
        }
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let centers: Vec<_> = boxes.iter().map(|b| b.center()).collect();
        let root = split(&boxes, &centers, &mut order, 0, boxes.len());
        let mut bvh = Self {
            nodes: Vec::new(),
            prim_order: order,
            prim_bounds: boxes,
            branching,
        };
        bvh.collapse(&root);
        Ok(bvh)
    }

    fn collapse(&mut self, node: &Binary) -> u32 {
        let id = self.nodes.len() as u32;
        match node {
            Binary::Leaf {
                bounds,
                start,
                count,
            } => self.nodes.push(Node {
                bounds: *bounds,
                kind: NodeKind::Leaf {
                    start: *start as u32,
                    count: *count as u32,
                },
            }),
            Binary::Split {
                bounds,
                left,
                right,
            } => {
                self.nodes.push(Node {
                    bounds: *bounds,
                    kind: NodeKind::Interior {
                        children: Vec::new(),
                    },
                });
                // open the largest interior child until the node is full
                let mut kids: Vec<&Binary> = vec![left, right];
                while kids.len() < self.branching {
                    let pick = kids
                        .iter()
                        .enumerate()
                        .filter(|(_, k)| matches!(k, Binary::Split { .. }))
                        .max_by(|a, b| {
                            a.1.bounds()
                                .surface_area()
                                .total_cmp(&b.1.bounds().surface_area())
                        })
                        .map(|(i, _)| i);
                    let Some(i) = pick else { break };
                    let Binary::Split { left, right, .. } = kids[i] else {
                        unreachable!()
                    };
                    kids.splice(i..=i, [&**left, &**right]);
                }
                let children = kids.into_iter().map(|k| self.collapse(k)).collect();
                self.nodes[id as usize].kind = NodeKind::Interior { children };
            }
        }
        id
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn prim_order(&self) -> &[u32] {
        &self.prim_order
    }

    pub fn prim_bounds(&self) -> &[Aabb] {
        &self.prim_bounds
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    /// `Σ_interior A_n·c_node + Σ_leaf A_n·P_n·c_prim`, areas relative to the root.
    pub fn sah_cost(&self) -> f64 {
        let root = self.root().bounds.surface_area();
        let rel = |b: &Aabb| {
            if root > 0.0 {
                b.surface_area() / root
            } else {
                1.0
            }
        };
        self.nodes
            .iter()
            .map(|n| match n.kind {
                NodeKind::Interior { .. } => rel(&n.bounds) * C_NODE,
                NodeKind::Leaf { count, .. } => rel(&n.bounds) * count as f64 * C_PRIM,
            })
            .sum()
    }

    /// Call `visit` for every primitive whose box the ray enters.
    #[inline]
    pub fn traverse(&self, ray: &Ray, mut visit: impl FnMut(u32)) {
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.intersect(ray).is_none() {
                continue;
            }
            match &node.kind {
                NodeKind::Interior { children } => stack.extend(children.iter().rev()),
                NodeKind::Leaf { start, count } => {
                    for &p in &self.prim_order[*start as usize..(*start + *count) as usize] {
                        if self.prim_bounds[p as usize].intersect(ray).is_some() {
                            visit(p);
                        }
                    }
                }
            }
        }
    }
}

fn bounds_of(boxes: &[Aabb], order: &[u32]) -> Aabb {
    let mut b = Aabb::empty();
    for &i in order {
        b.grow(&boxes[i as usize]);
    }
    b
}

fn split(
    boxes: &[Aabb],
    centers: &[nalgebra::Vector3<f64>],
    order: &mut [u32],
    start: usize,
    count: usize,
) -> Binary {
    let slice = &mut order[start..start + count];
    let bounds = bounds_of(boxes, slice);
    let leaf = Binary::Leaf {
        bounds,
        start,
        count,
    };
    if count == 1 {
        return leaf;
    }

    let mut cb = Aabb::empty();
    for &i in slice.iter() {
        cb.grow_point(&centers[i as usize]);
    }
    let area = bounds.surface_area();
    let leaf_cost = count as f64 * C_PRIM;

    // best binned split over all axes
    let mut best: Option<(f64, usize, usize)> = None;
    for axis in 0..3 {
        let (lo, hi) = (cb.min[axis], cb.max[axis]);
        if !(hi > lo) {
            continue;
        }
        let scale = BINS as f64 / (hi - lo);
        let bin_of = |c: f64| (((c - lo) * scale) as usize).min(BINS - 1);
        let mut bin_box = [Aabb::empty(); BINS];
        let mut bin_n = [0usize; BINS];
        for &i in slice.iter() {
            let b = bin_of(centers[i as usize][axis]);
            bin_box[b].grow(&boxes[i as usize]);
            bin_n[b] += 1;
        }
        let mut right_area = [0.0; BINS];
        let mut right_n = [0usize; BINS];
        let (mut acc, mut n) = (Aabb::empty(), 0);
        for b in (1..BINS).rev() {
            acc.grow(&bin_box[b]);
            n += bin_n[b];
            right_area[b] = acc.surface_area();
            right_n[b] = n;
        }
        let (mut acc, mut n) = (Aabb::empty(), 0);
        for b in 1..BINS {
            acc.grow(&bin_box[b - 1]);
            n += bin_n[b - 1];
            if n == 0 || right_n[b] == 0 {
                continue;
            }
            let cost = C_NODE
                + (acc.surface_area() * n as f64 + right_area[b] * right_n[b] as f64) * C_PRIM
                    / area.max(f64::MIN_POSITIVE);
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, b));
            }
        }
    }

    let mid = match best {
        Some((cost, axis, b)) if cost < leaf_cost || count > MAX_LEAF => {
            let (lo, hi) = (cb.min[axis], cb.max[axis]);
            let scale = BINS as f64 / (hi - lo);
            let bin_of = |c: f64| (((c - lo) * scale) as usize).min(BINS - 1);
            partition(slice, |i| bin_of(centers[i as usize][axis]) < b)
        }
        Some(_) => return leaf,
        None if count > MAX_LEAF => {
            // coincident centroids: split the list in half
            count / 2
        }
        None => return leaf,
    };
    let left = split(boxes, centers, order, start, mid);
    let right = split(boxes, centers, order, start + mid, count - mid);
    Binary::Split {
        bounds,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Stable partition; returns the size of the `true` half.
fn partition(slice: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let (yes, no): (Vec<u32>, Vec<u32>) = slice.iter().partition(|&&i| pred(i));
    let n = yes.len();
    slice[..n].copy_from_slice(&yes);
    slice[n..].copy_from_slice(&no);
    n
}
