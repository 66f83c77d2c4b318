//! Component-manifold engine for freehand face sketches.
//!
//! A sketch is split into five component crops ([`sketch`]), each crop is
//! embedded into a latent space ([`embed`]), projected onto the manifold
//! spanned by the corpus latents of that component ([`manifold`]), and the
//! projected components are mapped back into a shared feature canvas
//! ([`fusion`]). [`shadow`] renders the retrieved neighbours as a drawing
//! guide and [`applications`] builds morphs and recombinations on top.

pub mod error;
pub mod raster;
pub mod sketch;
pub mod corpus;
pub mod embed;
pub mod manifold;

pub use error::{Error, Result};
pub use raster::{SketchRaster, Stroke};
pub mod fusion;
pub mod shadow;
pub mod applications;
pub mod report;
