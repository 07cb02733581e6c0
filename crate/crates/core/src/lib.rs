//! Pseudo-pair synthesis for chest radiograph lesion detection.
//!
//! An abnormal image is aligned to a reference, its annotated regions are
//! replaced by the nearest normal image's content and Poisson-blended, so
//! the pair differs only inside the boxes. The reverse direction transfers
//! pathology from abnormal donors onto normal images. The residual between
//! an image and its counterpart becomes a spatial attention map for a
//! detector.
//!
//! Modules, roughly in pipeline order:
//!
//! * [`image`]: images, boxes, affine warps, area resizing
//! * [`registration`]: pyramid loss and affine alignment
//! * [`retrieval`]: thumbnail nearest-neighbour index
//! * [`blend`]: region replacement and Poisson blending
//! * [`synthesis`]: pseudo-normal / pseudo-abnormal pairs and manifests
//! * [`attention`]: residual maps and feature modulation
//! * [`losses`]: GAN objective evaluators
//! * [`eval`]: challenge mAP and submission files
//! * [`schedule`]: detector/generator alternation
//! * [`dataset`]: annotation CSVs, PGM/PNG I/O, seeded phantoms
//! * [`config`], [`cli`]: the `cxrpair` command line tool
//!
//! The `examples/` directory has one runnable program per stage.

pub mod attention;
pub mod blend;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod image;
pub mod losses;
pub mod registration;
pub mod retrieval;
pub mod schedule;
pub mod synthesis;

pub use error::{Error, Result};
pub use image::{Affine2D, BBox, Image};
