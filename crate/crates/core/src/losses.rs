//! Scalar evaluators for the radio-realistic and abnormal-to-normal GAN
//! objectives. Callers supply discriminator probabilities and images; no
//! training happens here.

use crate::error::{Error, Result};
use crate::image::{l1_mean, Image};

/// Scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]` before taking logs.
pub const SCORE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorScores {
    pub real: Vec<f64>,
    pub fake: Vec<f64>,
}

impl DiscriminatorScores {
    pub fn new(real: Vec<f64>, fake: Vec<f64>) -> Result<Self> {
        let s = Self { real, fake };
        s.validate()?;
        Ok(s)
    }

    /// Every real score 1, every fake score 0.
    pub fn perfect(n: usize) -> Self {
        Self {
            real: vec![1.0; n],
            fake: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, real: f64, fake: f64) -> Self {
        Self {
            real: vec![real; n],
            fake: vec![fake; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.real.is_empty() || self.fake.is_empty() {
            return Err(Error::EmptyInput("discriminator score lists must be non-empty".into()));
        }
        for (index, &value) in self.real.iter().chain(&self.fake).enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::IntensityOutOfRange { index, value });
            }
        }
        Ok(())
    }
}

fn mean_log(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.map(|p| p.clamp(SCORE_EPS, 1.0 - SCORE_EPS).ln()).sum::<f64>() / n as f64
}

/// `mean(ln D(y)) + mean(ln(1 - D(G(.))))` with clamped scores.
pub fn adversarial_term(s: &DiscriminatorScores) -> Result<f64> {
    s.validate()?;
    Ok(mean_log(s.real.iter().copied(), s.real.len()) + mean_log(s.fake.iter().map(|f| 1.0 - f), s.fake.len()))
}

/// Adversarial term plus `|I_b - G(I_b)|_1` (pixel mean).
pub fn realistic_loss(s: &DiscriminatorScores, i_b: &Image, g_ib: &Image) -> Result<f64> {
    let l1 = l1_mean(i_b, g_ib)?;
    Ok(adversarial_term(s)? + l1)
}

/// Adversarial term plus `|G_realistic(I_b) - G(x)|_1` (pixel mean).
pub fn abn2nor_loss(s: &DiscriminatorScores, g_realistic_ib: &Image, g_x: &Image) -> Result<f64> {
    let l1 = l1_mean(g_realistic_ib, g_x)?;
    Ok(adversarial_term(s)? + l1)
}
