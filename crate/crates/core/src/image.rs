//! Single-channel intensity images and the geometric primitives shared by
//! every stage of the pipeline: boxes, affine transforms, area resampling
//! and inverse warping.
//!
//! Intensities are `f64` in `[0, 1]`. Affine transforms use normalized
//! coordinates: the image center is `(0, 0)` and the edges sit at `±1`.
//! Pixel `(x, y)` has its center at `u = 2 (x + 0.5) / width - 1`.

use crate::error::{Error, Result};

/// Largest supported side length, in pixels.
pub const MAX_SIDE: usize = 1024;

/// Smallest `|det|` accepted for an [`Affine2D`].
pub const MIN_DET: f64 = 1e-6;

/// Row-major single-channel image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(Error::InvalidDimensions(format!(
            "{width}x{height} (each side must be in 1..={MAX_SIDE})"
        )));
    }
    Ok(())
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} image needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::IntensityOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        check_dims(width, height)?;
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from `f(x, y)`; values must already lie in `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(width, height)?;
        Self::new(width, height, sample_grid(width, height, f))
    }

    /// Like [`Image::from_fn`] but clamps every sample into `[0, 1]`.
    /// NaN samples become 0.
    pub fn from_fn_clamped(
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let data = sample_grid(width, height, f).into_iter().map(clamp01).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Clamps arbitrary real samples into `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} image needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data: data.into_iter().map(clamp01).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn ensure_same_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Wraps data the caller has already validated.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            data,
        }
    }
}

fn sample_grid(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            data.push(f(x, y));
        }
    }
    data
}

#[inline]
pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Axis-aligned box in pixel units; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!("{self:?} has non-finite fields")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "width and height must be positive, got {}x{}",
                self.w, self.h
            )));
        }
        if self.x < 0.0 || self.y < 0.0 {
            return Err(Error::InvalidBox(format!(
                "origin ({}, {}) is negative",
                self.x, self.y
            )));
        }
        Ok(())
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.right() <= width as f64 && self.bottom() <= height as f64
    }

    /// Smallest whole-pixel rectangle covering the box.
    pub fn pixel_rect(&self) -> PixelRect {
        let x0 = self.x.floor().max(0.0) as usize;
        let y0 = self.y.floor().max(0.0) as usize;
        let x1 = self.right().ceil() as usize;
        let y1 = self.bottom().ceil() as usize;
        PixelRect {
            x: x0,
            y: y0,
            w: x1.saturating_sub(x0).max(1),
            h: y1.saturating_sub(y0).max(1),
        }
    }

    /// Center of the box in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }
}

/// Whole-pixel rectangle: columns `x..x + w`, rows `y..y + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl PixelRect {
    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// True when `(x, y)` lies strictly inside, off the one-pixel ring.
    pub fn interior_contains(&self, x: usize, y: usize) -> bool {
        x > self.x && x + 1 < self.right() && y > self.y && y + 1 < self.bottom()
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    pub fn to_bbox(&self) -> BBox {
        BBox {
            x: self.x as f64,
            y: self.y as f64,
            w: self.w as f64,
            h: self.h as f64,
        }
    }
}

/// Intersection over union of two boxes; 0 when they are disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Mean absolute difference over all pixels.
pub fn l1_mean(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b, "l1_mean")?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(p, q)| (p - q).abs()).sum();
    Ok(sum / a.data.len() as f64)
}

/// Root-mean-square difference over all pixels.
pub fn rms_diff(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b, "rms_diff")?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(p, q)| (p - q) * (p - q))
        .sum();
    Ok((sum / a.data.len() as f64).sqrt())
}

/// Per-axis overlap weights mapping `n_in` samples onto `n_out` bins.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            (first..last)
                .filter_map(|i| {
                    let overlap = (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Area-averaging resize: each output pixel is the area-weighted mean of the
/// input region it covers.
pub fn resize_area(img: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidDimensions(format!(
            "resize target {out_w}x{out_h} has a zero side"
        )));
    }
    check_dims(out_w, out_h)?;
    if (out_w, out_h) == img.dims() {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let wx = area_weights(w, out_w);
    let wy = area_weights(h, out_h);

    let mut rows = vec![0.0; h * out_w];
    for y in 0..h {
        let src = &img.data[y * w..(y + 1) * w];
        for (ox, taps) in wx.iter().enumerate() {
            rows[y * out_w + ox] = taps.iter().map(|&(i, wt)| wt * src[i]).sum();
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for (oy, taps) in wy.iter().enumerate() {
        for ox in 0..out_w {
            out[oy * out_w + ox] = taps.iter().map(|&(i, wt)| wt * rows[i * out_w + ox]).sum();
        }
    }
    Ok(Image::from_raw(
        out_w,
        out_h,
        out.into_iter().map(clamp01).collect(),
    ))
}

/// Affine map in normalized coordinates: `p' = A p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2D {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for Affine2D {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Affine2D {
    pub const IDENTITY: Affine2D = Affine2D {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64, tx: f64, ty: f64) -> Result<Self> {
        let t = Self {
            a11,
            a12,
            a21,
            a22,
            tx,
            ty,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            tx,
            ty,
            ..Self::IDENTITY
        }
    }

    /// Rotation by `angle` radians and isotropic `scale` about the center,
    /// followed by a translation.
    pub fn similarity(angle: f64, scale: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            a11: scale * c,
            a12: -scale * s,
            a21: scale * s,
            a22: scale * c,
            tx,
            ty,
        }
    }

    /// Parameters in the order `[a11, a12, a21, a22, tx, ty]`.
    pub fn params(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
    }

    pub fn from_params(p: [f64; 6]) -> Self {
        Self {
            a11: p[0],
            a12: p[1],
            a21: p[2],
            a22: p[3],
            tx: p[4],
            ty: p[5],
        }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn validate(&self) -> Result<()> {
        let det = self.det();
        if !det.is_finite() || det.abs() < MIN_DET || !self.tx.is_finite() || !self.ty.is_finite()
        {
            return Err(Error::NonInvertible(det));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn inverse(&self) -> Result<Self> {
        self.validate()?;
        let d = self.det();
        let (i11, i12, i21, i22) = (self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d);
        Ok(Self {
            a11: i11,
            a12: i12,
            a21: i21,
            a22: i22,
            tx: -(i11 * self.tx + i12 * self.ty),
            ty: -(i21 * self.tx + i22 * self.ty),
        })
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Affine2D) -> Self {
        Self {
            a11: self.a11 * other.a11 + self.a12 * other.a21,
            a12: self.a11 * other.a12 + self.a12 * other.a22,
            a21: self.a21 * other.a11 + self.a22 * other.a21,
            a22: self.a21 * other.a12 + self.a22 * other.a22,
            tx: self.a11 * other.tx + self.a12 * other.ty + self.tx,
            ty: self.a21 * other.tx + self.a22 * other.ty + self.ty,
        }
    }

    #[inline]
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        (
            self.a11 * u + self.a12 * v + self.tx,
            self.a21 * u + self.a22 * v + self.ty,
        )
    }

    /// Maps a pixel-space point of a `width`×`height` image through the
    /// transform, returning pixel-space coordinates in the same frame.
    pub fn apply_pixel(&self, x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
        let (w, h) = (width as f64, height as f64);
        let (u, v) = (2.0 * x / w - 1.0, 2.0 * y / h - 1.0);
        let (u2, v2) = self.apply(u, v);
        ((u2 + 1.0) * 0.5 * w, (v2 + 1.0) * 0.5 * h)
    }

    /// Bounding box of the four mapped corners of `b`, in pixel units.
    pub fn map_box(&self, b: &BBox, width: usize, height: usize) -> (f64, f64, f64, f64) {
        let corners = [
            (b.x, b.y),
            (b.right(), b.y),
            (b.x, b.bottom()),
            (b.right(), b.bottom()),
        ];
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in corners {
            let (px, py) = self.apply_pixel(x, y, width, height);
            lo = (lo.0.min(px), lo.1.min(py));
            hi = (hi.0.max(px), hi.1.max(py));
        }
        (lo.0, lo.1, hi.0, hi.1)
    }
}

/// Warps `img` by `t` with inverse mapping and bilinear interpolation.
///
/// Every output pixel samples the input at `t⁻¹(p)`. Bilinear taps that fall
/// outside the input contribute 0.0.
pub fn apply_affine(img: &Image, t: &Affine2D, out_w: usize, out_h: usize) -> Result<Image> {
    t.validate()?;
    check_dims(out_w, out_h)?;
    if t.is_identity() && (out_w, out_h) == img.dims() {
        return Ok(img.clone());
    }
    let inv = t.inverse()?;
    let (in_w, in_h) = img.dims();
    let (fw, fh) = (in_w as f64, in_h as f64);
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let v = 2.0 * (oy as f64 + 0.5) / out_h as f64 - 1.0;
        for ox in 0..out_w {
            let u = 2.0 * (ox as f64 + 0.5) / out_w as f64 - 1.0;
            let (su, sv) = inv.apply(u, v);
            let sx = (su + 1.0) * 0.5 * fw - 0.5;
            let sy = (sv + 1.0) * 0.5 * fh - 0.5;
            out.push(clamp01(bilinear_zero(img, sx, sy)));
        }
    }
    Ok(Image::from_raw(out_w, out_h, out))
}

/// Bilinear sample at pixel-center coordinates `(x, y)` with zero padding.
fn bilinear_zero(img: &Image, x: f64, y: f64) -> f64 {
    let (w, h) = (img.width as isize, img.height as isize);
    if !(x > -1.0 && y > -1.0 && x < w as f64 && y < h as f64) {
        return 0.0;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let tap = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            0.0
        } else {
            img.data[yi as usize * img.width + xi as usize]
        }
    };
    let top = tap(x0, y0) * (1.0 - fx) + tap(x0 + 1, y0) * fx;
    let bottom = tap(x0, y0 + 1) * (1.0 - fx) + tap(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap()
    }

    fn bbox(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn image_rejects_bad_inputs() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
        assert!(Image::new(1025, 1, vec![0.0; 1025]).is_err());
        assert!(matches!(
            Image::new(2, 1, vec![0.5, 1.5]),
            Err(Error::IntensityOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn resize_constant_large() {
        let img = Image::filled(1024, 1024, 0.5).unwrap();
        let out = resize_area(&img, 32, 32).unwrap();
        assert_eq!(out.dims(), (32, 32));
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn resize_half_split() {
        let img = Image::from_fn(4, 4, |x, _| if x < 2 { 0.0 } else { 1.0 }).unwrap();
        let out = resize_area(&img, 2, 2).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn resize_identity_and_zero_target() {
        let img = random_image(7, 5, 1);
        assert_eq!(resize_area(&img, 7, 5).unwrap(), img);
        assert!(resize_area(&img, 0, 3).is_err());
    }

    #[test]
    fn resize_non_integer_ratio_preserves_mean() {
        let img = random_image(10, 7, 2);
        let out = resize_area(&img, 3, 4).unwrap();
        // area-weighted average over the whole frame is invariant
        assert!((out.mean() - img.mean()).abs() < 1e-12);
    }

    #[test]
    fn affine_identity_is_bitwise() {
        let img = random_image(9, 6, 3);
        assert_eq!(apply_affine(&img, &Affine2D::IDENTITY, 9, 6).unwrap(), img);
    }

    #[test]
    fn affine_translation_composes() {
        let img = random_image(16, 16, 4);
        let w = 16.0;
        let once = apply_affine(&img, &Affine2D::translation(4.0 / w, 0.0), 16, 16).unwrap();
        let step = Affine2D::translation(2.0 / w, 0.0);
        let twice = apply_affine(&apply_affine(&img, &step, 16, 16).unwrap(), &step, 16, 16).unwrap();
        for y in 0..16 {
            for x in 2..14 {
                assert!((once.get(x, y) - twice.get(x, y)).abs() < 1e-12, "({x},{y})");
            }
            for x in 4..16 {
                // pure pixel shift
                assert!((once.get(x, y) - img.get(x - 2, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_rotation_180_flips_both_axes() {
        let img = Image::from_fn(7, 5, |x, y| ((x * 5 + y * 3) % 11) as f64 / 10.0).unwrap();
        let rot = Affine2D::new(-1.0, 0.0, 0.0, -1.0, 0.0, 0.0).unwrap();
        let out = apply_affine(&img, &rot, 7, 5).unwrap();
        for y in 0..5 {
            for x in 0..7 {
                assert!((out.get(x, y) - img.get(6 - x, 4 - y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_rejects_singular() {
        let img = random_image(4, 4, 5);
        let bad = Affine2D::from_params([1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(apply_affine(&img, &bad, 4, 4), Err(Error::NonInvertible(_))));
        assert!(Affine2D::new(1e-4, 0.0, 0.0, 1e-3, 0.0, 0.0).is_err());
    }

    #[test]
    fn affine_inverse_and_compose() {
        let t = Affine2D::similarity(0.3, 1.1, 0.05, -0.02);
        let id = t.compose(&t.inverse().unwrap());
        for (a, b) in id.params().iter().zip(Affine2D::IDENTITY.params()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn iou_examples() {
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bbox(20.0, 20.0, 5.0, 5.0)), 0.0);
        let b = bbox(5.0, 5.0, 10.0, 10.0);
        assert!((iou(&a, &b) - 25.0 / 175.0).abs() < 1e-15);
    }

    /// Counts unit cells covered by integer boxes.
    fn raster_iou(a: &BBox, b: &BBox) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for y in 0..64 {
            for x in 0..64 {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                let ina = cx > a.x && cx < a.right() && cy > a.y && cy < a.bottom();
                let inb = cx > b.x && cx < b.right() && cy > b.y && cy < b.bottom();
                inter += (ina && inb) as usize;
                union += (ina || inb) as usize;
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_matches_raster_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut r = || {
                bbox(
                    rng.random_range(0..30) as f64,
                    rng.random_range(0..30) as f64,
                    rng.random_range(1..30) as f64,
                    rng.random_range(1..30) as f64,
                )
            };
            let (a, b) = (r(), r());
            assert!((iou(&a, &b) - raster_iou(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_examples() {
        let a = random_image(8, 8, 6);
        assert_eq!(l1_mean(&a, &a).unwrap(), 0.0);
        let ones = Image::filled(8, 8, 1.0).unwrap();
        let zeros = Image::filled(8, 8, 0.0).unwrap();
        assert_eq!(l1_mean(&ones, &zeros).unwrap(), 1.0);
        let b = random_image(8, 8, 7);
        let mut sum = 0.0;
        for i in 0..64 {
            sum += (a.data()[i] - b.data()[i]).abs();
        }
        assert!((l1_mean(&a, &b).unwrap() - sum / 64.0).abs() < 1e-15);
        assert!(l1_mean(&a, &random_image(4, 8, 1)).is_err());
    }

    #[test]
    fn bbox_validation() {
        assert!(BBox::new(0.0, 0.0, 0.0, 3.0).is_err());
        assert!(BBox::new(-1.0, 0.0, 2.0, 3.0).is_err());
        let r = bbox(1.5, 2.0, 3.0, 2.2).pixel_rect();
        assert_eq!(r, PixelRect { x: 1, y: 2, w: 4, h: 3 });
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..50.0f64, 0.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64)
            .prop_map(|(x, y, w, h)| BBox { x, y, w, h })
    }

    proptest! {
        #[test]
        fn iou_symmetric_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            if a != b {
                prop_assert!(ab < 1.0);
            }
        }

        #[test]
        fn resize_even_divisor_keeps_mean(seed in 0u64..1000, f in 1usize..5, g in 1usize..5) {
            let img = random_image(8 * f, 4 * g, seed);
            let out = resize_area(&img, 8, 4).unwrap();
            prop_assert!((out.mean() - img.mean()).abs() < 1e-6);
        }

        #[test]
        fn l1_triangle(s1 in 0u64..500, s2 in 500u64..1000, s3 in 1000u64..1500) {
            let (a, b, c) = (random_image(6, 5, s1), random_image(6, 5, s2), random_image(6, 5, s3));
            let lhs = l1_mean(&a, &c).unwrap();
            let rhs = l1_mean(&a, &b).unwrap() + l1_mean(&b, &c).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
