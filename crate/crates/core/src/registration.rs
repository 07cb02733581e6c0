//! Affine alignment of a radiograph to a reference image.
//!
//! The objective is a structural term plus a pixel term:
//! `L(θ) = Σ_{l=1}^{L-1} rms(P_l(T_θ I) - P_l(R)) + rms(T_θ I - R)`
//! where `P_l` is level `l` of a Gaussian pyramid. The six affine
//! parameters are fitted directly by finite-difference gradient descent.

use crate::error::{Error, Result};
use crate::image::{apply_affine, rms_diff, Affine2D, Image};

/// Multi-scale feature stack; level 0 is the input itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidFeatures {
    pub levels: Vec<Image>,
}

impl PyramidFeatures {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// 3×3 binomial blur (separable `[1, 2, 1] / 4`) with replicated borders.
pub fn binomial_blur(img: &Image) -> Image {
    let (w, h) = img.dims();
    let src = img.data();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let l = row[x.saturating_sub(1)];
            let r = row[(x + 1).min(w - 1)];
            tmp[y * w + x] = 0.25 * l + 0.5 * row[x] + 0.25 * r;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let up = y.saturating_sub(1) * w;
        let down = (y + 1).min(h - 1) * w;
        let mid = y * w;
        for x in 0..w {
            out[mid + x] = (0.25 * tmp[up + x] + 0.5 * tmp[mid + x] + 0.25 * tmp[down + x]).clamp(0.0, 1.0);
        }
    }
    Image::from_raw(w, h, out)
}

/// 2× box downsample to `ceil(w/2) × ceil(h/2)`; edge cells on odd sides
/// average only the pixels that exist.
pub fn downsample2(img: &Image) -> Image {
    let (w, h) = img.dims();
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let src = img.data();
    let mut out = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        let rows = 2 * oy..(2 * oy + 2).min(h);
        for ox in 0..ow {
            let cols = 2 * ox..(2 * ox + 2).min(w);
            let n = (rows.len() * cols.len()) as f64;
            let sum: f64 = rows
                .clone()
                .flat_map(|y| cols.clone().map(move |x| src[y * w + x]))
                .sum();
            out.push((sum / n).clamp(0.0, 1.0));
        }
    }
    Image::from_raw(ow, oh, out)
}

pub fn pyramid_features(img: &Image, levels: usize) -> Result<PyramidFeatures> {
    if levels == 0 {
        return Err(Error::InvalidArgument("pyramid needs at least one level".into()));
    }
    let need = 1usize << (levels - 1).min(usize::BITS as usize - 1);
    if img.width() < need || img.height() < need {
        return Err(Error::InvalidArgument(format!(
            "{} pyramid levels need at least {need} pixels per side, image is {}x{}",
            levels,
            img.width(),
            img.height()
        )));
    }
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for _ in 1..levels {
        let prev = out.last().expect("non-empty");
        out.push(downsample2(&binomial_blur(prev)));
    }
    Ok(PyramidFeatures { levels: out })
}

/// Reusable objective with the reference pyramid precomputed.
#[derive(Debug, Clone)]
pub struct AlignmentObjective {
    reference: PyramidFeatures,
}

impl AlignmentObjective {
    pub fn new(reference: &Image, levels: usize) -> Result<Self> {
        Ok(Self {
            reference: pyramid_features(reference, levels)?,
        })
    }

    pub fn levels(&self) -> usize {
        self.reference.len()
    }

    pub fn reference(&self) -> &Image {
        &self.reference.levels[0]
    }

    pub fn loss(&self, img: &Image, t: &Affine2D) -> Result<f64> {
        let reference = self.reference();
        img.ensure_same_dims(reference, "alignment input vs reference")?;
        let warped = apply_affine(img, t, reference.width(), reference.height())?;
        self.loss_of_warped(&warped)
    }

    fn loss_of_warped(&self, warped: &Image) -> Result<f64> {
        let pixel_term = rms_diff(warped, &self.reference.levels[0])?;
        let mut feature_term = 0.0;
        let mut level = warped.clone();
        for target in &self.reference.levels[1..] {
            level = downsample2(&binomial_blur(&level));
            feature_term += rms_diff(&level, target)?;
        }
        Ok(feature_term + pixel_term)
    }

    /// Central finite-difference gradient over the six affine parameters.
    pub fn gradient(&self, img: &Image, t: &Affine2D, h: f64) -> Result<[f64; 6]> {
        let base = t.params();
        let mut grad = [0.0; 6];
        for (i, g) in grad.iter_mut().enumerate() {
            let mut plus = base;
            let mut minus = base;
            plus[i] += h;
            minus[i] -= h;
            let lp = self.loss(img, &Affine2D::from_params(plus))?;
            let lm = self.loss(img, &Affine2D::from_params(minus))?;
            *g = (lp - lm) / (2.0 * h);
        }
        Ok(grad)
    }
}

/// Structural plus pixel divergence between `T_t(img)` and `reference`.
pub fn alignment_loss(img: &Image, reference: &Image, t: &Affine2D, levels: usize) -> Result<f64> {
    img.ensure_same_dims(reference, "alignment input vs reference")?;
    AlignmentObjective::new(reference, levels)?.loss(img, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub levels: usize,
    pub max_iters: usize,
    /// Descent step applied to the gradient before halving.
    pub step: f64,
    /// Convergence threshold on per-iteration loss decrease.
    pub tol: f64,
    /// Finite-difference half-width for the gradient.
    pub fd_step: f64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            levels: 4,
            max_iters: 200,
            step: 0.01,
            tol: 1e-7,
            fd_step: 1e-3,
        }
    }
}

/// Halvings tried per iteration before a step is abandoned.
pub const MAX_HALVINGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub transform: Affine2D,
    pub final_loss: f64,
    /// Loss at the identity transform, the starting point.
    pub initial_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn align(img: &Image, reference: &Image, opts: &AlignOptions) -> Result<AlignmentResult> {
    img.ensure_same_dims(reference, "alignment input vs reference")?;
    let objective = AlignmentObjective::new(reference, opts.levels)?;
    align_with(&objective, img, opts)
}

/// Runs the descent against a prepared objective.
pub fn align_with(objective: &AlignmentObjective, img: &Image, opts: &AlignOptions) -> Result<AlignmentResult> {
    if opts.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    if !(opts.step > 0.0 && opts.fd_step > 0.0 && opts.tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step, fd_step must be positive and tol non-negative: {opts:?}"
        )));
    }
    let mut t = Affine2D::IDENTITY;
    let initial_loss = objective.loss(img, &t)?;
    let mut loss = initial_loss;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;
        let grad = objective.gradient(img, &t, opts.fd_step)?;
        let mut step = opts.step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let p = t.params();
            let cand = Affine2D::from_params(std::array::from_fn(|i| p[i] - step * grad[i]));
            if cand.validate().is_ok() {
                let l = objective.loss(img, &cand)?;
                if l < loss {
                    accepted = Some((cand, l));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, l)) => {
                let decrease = loss - l;
                t = cand;
                loss = l;
                if decrease < opts.tol {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    Ok(AlignmentResult {
        transform: t,
        final_loss: loss,
        initial_loss,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_phantom, PhantomClass, PhantomSpec};

    fn phantom(seed: u64, size: usize) -> Image {
        synth_phantom(&PhantomSpec::normal(seed, size)).unwrap().0
    }

    /// Smooth blob that decays to ~0 before the border.
    fn smooth_phantom(size: usize) -> Image {
        let s = size as f64;
        Image::from_fn(size, size, |x, y| {
            let u = (x as f64 + 0.5) / s - 0.45;
            let v = (y as f64 + 0.5) / s - 0.52;
            0.8 * (-(u * u / 0.02 + v * v / 0.035)).exp()
        })
        .unwrap()
    }

    #[test]
    fn pyramid_constant_levels() {
        let img = Image::filled(16, 16, 0.3).unwrap();
        let p = pyramid_features(&img, 3).unwrap();
        assert_eq!(p.len(), 3);
        for l in &p.levels {
            assert!(l.data().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        }
    }

    #[test]
    fn pyramid_sizes() {
        let img = Image::filled(8, 8, 0.1).unwrap();
        let p = pyramid_features(&img, 4).unwrap();
        let dims: Vec<_> = p.levels.iter().map(|l| l.width()).collect();
        assert_eq!(dims, vec![8, 4, 2, 1]);
        assert!(pyramid_features(&img, 5).is_err());
        assert!(pyramid_features(&img, 0).is_err());
        let odd = Image::filled(9, 5, 0.1).unwrap();
        let p = pyramid_features(&odd, 3).unwrap();
        assert_eq!(p.levels[1].dims(), (5, 3));
        assert_eq!(p.levels[2].dims(), (3, 2));
    }

    #[test]
    fn pyramid_impulse_mass() {
        let mut data = vec![0.0; 64];
        data[3 * 8 + 4] = 1.0;
        let img = Image::new(8, 8, data).unwrap();
        let p = pyramid_features(&img, 2).unwrap();
        // binomial weights sum to one; the 2x2 mean divides mass by four
        let sum: f64 = p.levels[1].data().iter().sum();
        assert!((sum - 0.25).abs() < 1e-6);
    }

    #[test]
    fn loss_zero_at_identity() {
        let img = phantom(1, 64);
        assert_eq!(alignment_loss(&img, &img, &Affine2D::IDENTITY, 4).unwrap(), 0.0);
    }

    #[test]
    fn loss_hand_evaluated() {
        let ones = Image::filled(16, 16, 1.0).unwrap();
        let zeros = Image::filled(16, 16, 0.0).unwrap();
        let l = alignment_loss(&ones, &zeros, &Affine2D::IDENTITY, 3).unwrap();
        assert!((l - 3.0).abs() < 1e-12);
    }

    #[test]
    fn loss_small_at_inverse_transform() {
        let reference = smooth_phantom(64);
        let t = Affine2D::similarity(0.03, 1.02, 0.04, -0.03);
        let moved = apply_affine(&reference, &t, 64, 64).unwrap();
        let l = alignment_loss(&moved, &reference, &t.inverse().unwrap(), 4).unwrap();
        assert!(l <= 0.02, "loss {l}");
    }

    #[test]
    fn loss_errors() {
        let a = Image::filled(16, 16, 0.5).unwrap();
        let b = Image::filled(8, 16, 0.5).unwrap();
        assert!(matches!(
            alignment_loss(&a, &b, &Affine2D::IDENTITY, 2),
            Err(Error::DimensionMismatch(_))
        ));
        let singular = Affine2D::from_params([0.0; 6]);
        assert!(matches!(
            alignment_loss(&a, &a, &singular, 2),
            Err(Error::NonInvertible(_))
        ));
    }

    #[test]
    fn align_self_is_identity() {
        let img = phantom(2, 64);
        let r = align(&img, &img, &AlignOptions::default()).unwrap();
        for (a, b) in r.transform.params().iter().zip(Affine2D::IDENTITY.params()) {
            assert!((a - b).abs() < 1e-3);
        }
        assert!(r.final_loss <= 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn align_recovers_translation() {
        let reference = phantom(3, 96);
        let t = Affine2D::translation(0.05, 0.0);
        let moved = apply_affine(&reference, &t, 96, 96).unwrap();
        let r = align(&moved, &reference, &AlignOptions::default()).unwrap();
        let want = t.inverse().unwrap().params();
        let got = r.transform.params();
        assert!((got[4] - want[4]).abs() <= 0.01, "{got:?}");
        assert!((got[5] - want[5]).abs() <= 0.01, "{got:?}");
        for i in 0..4 {
            assert!((got[i] - want[i]).abs() <= 0.02, "{got:?}");
        }
        let recomputed = alignment_loss(&moved, &reference, &r.transform, 4).unwrap();
        assert!((recomputed - r.final_loss).abs() < 1e-9);
    }

    #[test]
    fn align_iteration_limits() {
        let reference = phantom(4, 64);
        let moved = apply_affine(&reference, &Affine2D::translation(0.03, 0.01), 64, 64).unwrap();
        let opts = AlignOptions {
            max_iters: 0,
            ..Default::default()
        };
        assert!(align(&moved, &reference, &opts).is_err());
        let opts = AlignOptions {
            max_iters: 1,
            ..Default::default()
        };
        let r = align(&moved, &reference, &opts).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.final_loss <= r.initial_loss);
    }

    #[test]
    fn fd_gradient_stable_under_refinement() {
        let reference = smooth_phantom(64);
        let moved = apply_affine(&reference, &Affine2D::similarity(0.02, 1.01, 0.05, 0.02), 64, 64).unwrap();
        let objective = AlignmentObjective::new(&reference, 4).unwrap();
        let t = Affine2D::IDENTITY;
        let h = AlignOptions::default().fd_step;
        let coarse = objective.gradient(&moved, &t, h).unwrap();
        let fine = objective.gradient(&moved, &t, h / 10.0).unwrap();
        let diff: f64 = coarse.iter().zip(&fine).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fine.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / norm < 0.05, "relative error {}", diff / norm);
    }

    #[test]
    fn phantom_class_is_used() {
        // keeps the abnormal variant usable as an alignment input
        let (img, boxes) = synth_phantom(&PhantomSpec {
            seed: 5,
            size: 64,
            class: PhantomClass::Abnormal,
            opacity_count: 1,
        })
        .unwrap();
        assert_eq!(boxes.len(), 1);
        let r = align(&img, &phantom(5, 64), &AlignOptions { max_iters: 5, ..Default::default() }).unwrap();
        assert!(r.final_loss <= r.initial_loss);
    }
}
