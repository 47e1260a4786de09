//! Ray-order rendering of radiance fields for lenticular light-field displays.
//!
//! The crate is organised around the life of one encoded frame:
//!
//! * [`display`] maps every LCD subpixel to the viewpoint it shows and
//!   implements the classic render-every-view-then-interlace path.
//! * [`repurpose`] builds the encoded-image index matrix, reusing idle
//!   subpixels of already rendered pixels to cut the number of rays.
//! * [`rays`] turns that index matrix into an ordered ray list plus the
//!   green/blue permutations, and places the cameras on the viewing arc.
//! * [`radiance`] holds the field abstraction, volume compositing, spherical
//!   harmonics and the Gaussian scene model.
//! * [`raycast`] renders Gaussian scenes one ray at a time through a SAH BVH.
//! * [`pipeline`] ties the pieces together: the precompute cache, render
//!   jobs in both modes, RMSE comparison and throughput benchmarks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod display;
pub mod error;
pub mod image;
pub mod pipeline;
pub mod radiance;
pub mod raycast;
pub mod rays;
pub mod repurpose;

pub use display::{DisplayProfile, EncodedImage, MultiViewStack, ViewpointMatrix};
pub use error::{Error, Result};
pub use image::Image;
pub use radiance::{GaussianScene, RadianceField, Rgb};
pub use raycast::{Bvh, GaussianRenderer};
pub use rays::{CameraRig, Ray, RaySet};
pub use repurpose::{EncodedIndexMatrix, SourceIndex};
