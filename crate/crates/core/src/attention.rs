//! Residual images and feature-grid spatial attention.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::image::{resize_area, Image};
use crate::synthesis::PseudoPair;

/// Maps with a maximum at or below this are left unnormalized.
pub const ATTENTION_EPS: f64 = 1e-6;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Maps an image to its normal-looking counterpart of the same size.
pub trait Generator: Sync {
    fn generate(&self, x: &Image) -> Result<Image>;
}

impl<F> Generator for F
where
    F: Fn(&Image) -> Image + Sync,
{
    fn generate(&self, x: &Image) -> Result<Image> {
        Ok(self(x))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityGenerator;

impl Generator for IdentityGenerator {
    fn generate(&self, x: &Image) -> Result<Image> {
        Ok(x.clone())
    }
}

/// Returns the synthesized counterpart for each known aligned input and
/// the input itself for anything else.
#[derive(Debug, Clone, Default)]
pub struct PairGenerator {
    pairs: HashMap<Vec<u64>, Image>,
}

impl PairGenerator {
    pub fn new<'a>(pairs: impl IntoIterator<Item = &'a PseudoPair>) -> Self {
        let pairs = pairs
            .into_iter()
            .map(|p| (key(&p.input_aligned), p.counterpart.clone()))
            .collect();
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn key(img: &Image) -> Vec<u64> {
    let mut k = vec![img.width() as u64, img.height() as u64];
    k.extend(img.data().iter().map(|v| v.to_bits()));
    k
}

impl Generator for PairGenerator {
    fn generate(&self, x: &Image) -> Result<Image> {
        Ok(self.pairs.get(&key(x)).cloned().unwrap_or_else(|| x.clone()))
    }
}

/// `|x - g(x)|` per pixel.
pub fn residual_map(x: &Image, g: &dyn Generator) -> Result<Image> {
    let gx = g.generate(x)?;
    x.ensure_same_dims(&gx, "generator output")?;
    let data = x.data().iter().zip(gx.data()).map(|(a, b)| (a - b).abs()).collect();
    Image::new(x.width(), x.height(), data)
}

/// Feature-grid weights in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub width: usize,
    pub height: usize,
    pub weights: Vec<f64>,
}

impl AttentionMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.width + x]
    }

    /// First cell holding the maximum weight, as `(x, y)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn to_image(&self) -> Result<Image> {
        Image::new(self.width, self.height, self.weights.clone())
    }
}

/// Area-downsamples `residual` to the feature grid and normalizes by its
/// maximum.
pub fn to_attention(residual: &Image, feat_w: usize, feat_h: usize) -> Result<AttentionMap> {
    if feat_w == 0 || feat_h == 0 {
        return Err(Error::InvalidDimensions(format!("feature grid {feat_w}x{feat_h}")));
    }
    if feat_w > residual.width() || feat_h > residual.height() {
        return Err(Error::InvalidDimensions(format!(
            "feature grid {feat_w}x{feat_h} exceeds residual {}x{}",
            residual.width(),
            residual.height()
        )));
    }
    let mut weights = resize_area(residual, feat_w, feat_h)?.into_data();
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max > ATTENTION_EPS {
        for w in &mut weights {
            *w = (*w / max).min(1.0);
        }
    } else {
        weights.iter_mut().for_each(|w| *w = 0.0);
    }
    Ok(AttentionMap {
        width: feat_w,
        height: feat_h,
        weights,
    })
}

/// Detector features, channel-major: `data[c * w * h + y * w + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRaster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureRaster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::InvalidDimensions(format!(
                "{} values for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// `f[c, i] * (1 + alpha * a[i])`.
pub fn apply_attention(f: &FeatureRaster, a: &AttentionMap, alpha: f64) -> Result<FeatureRaster> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if (f.width, f.height) != (a.width, a.height) {
        return Err(Error::DimensionMismatch(format!(
            "features {}x{} vs attention {}x{}",
            f.width, f.height, a.width, a.height
        )));
    }
    let cells = f.width * f.height;
    let data = f
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| v * (1.0 + alpha * a.weights[i % cells]))
        .collect();
    FeatureRaster::new(f.width, f.height, f.channels, data)
}
