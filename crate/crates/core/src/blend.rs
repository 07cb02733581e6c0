//! Region replacement and gradient-domain (Poisson) blending.
//!
//! For a rectangular region, the one-pixel ring of the rectangle keeps the
//! target's values and acts as the Dirichlet boundary. The strict interior
//! is solved so its 5-point Laplacian matches the source's:
//!
//! ```text
//! 4 f_p - Σ_{q ∈ N(p) ∩ Ω} f_q = Δs_p + Σ_{q ∈ N(p) ∩ ∂Ω} t_q
//! ```
//!
//! The system is symmetric positive definite; conjugate gradient is the
//! default solver and Gauss-Seidel is kept as a reference.

use crate::error::{Error, Result};
use crate::image::{clamp01, BBox, Image, PixelRect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlendMode {
    Paste,
    Poisson,
}

impl std::str::FromStr for BlendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paste" => Ok(BlendMode::Paste),
            "poisson" => Ok(BlendMode::Poisson),
            _ => Err(Error::InvalidArgument(format!("unknown blend mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for BlendMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlendMode::Paste => "paste",
            BlendMode::Poisson => "poisson",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    ConjugateGradient,
    GaussSeidel,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cg" => Ok(Solver::ConjugateGradient),
            "gauss_seidel" | "gs" => Ok(Solver::GaussSeidel),
            _ => Err(Error::InvalidArgument(format!("unknown solver `{s}`"))),
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Solver::ConjugateGradient => "cg",
            Solver::GaussSeidel => "gauss_seidel",
        })
    }
}

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct BlendRequest<'a> {
    pub target: &'a Image,
    pub source: &'a Image,
    pub region: BBox,
    pub mode: BlendMode,
    pub solver: Solver,
    pub tol: f64,
    /// `None` means 10 × the number of unknowns.
    pub max_iters: Option<usize>,
}

impl<'a> BlendRequest<'a> {
    pub fn new(target: &'a Image, source: &'a Image, region: BBox) -> Self {
        Self {
            target,
            source,
            region,
            mode: BlendMode::Poisson,
            solver: Solver::ConjugateGradient,
            tol: DEFAULT_TOL,
            max_iters: None,
        }
    }

    pub fn mode(mut self, mode: BlendMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }

    fn validate(&self) -> Result<PixelRect> {
        self.target.ensure_same_dims(self.source, "blend target vs source")?;
        let rect = check_region(self.target, &self.region)?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(rect)
    }
}

fn check_region(img: &Image, region: &BBox) -> Result<PixelRect> {
    region.validate()?;
    let rect = region.pixel_rect();
    if !region.fits(img.width(), img.height()) || !rect.fits(img.width(), img.height()) {
        return Err(Error::InvalidBox(format!(
            "{region:?} does not fit inside {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(rect)
}

/// Copies `source` pixels into `target` inside `region`.
pub fn replace_region(target: &Image, source: &Image, region: &BBox) -> Result<Image> {
    target.ensure_same_dims(source, "replace target vs source")?;
    let rect = check_region(target, region)?;
    let w = target.width();
    let mut out = target.data().to_vec();
    for y in rect.y..rect.bottom() {
        let row = y * w;
        out[row + rect.x..row + rect.right()].copy_from_slice(&source.data()[row + rect.x..row + rect.right()]);
    }
    Ok(Image::from_raw(w, target.height(), out))
}

/// Real-valued raster; used for Laplacians and unclamped solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// 5-point Laplacian `4p - (up + down + left + right)`; zero on the border.
pub fn laplacian(img: &Image) -> Result<ScalarField> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::InvalidDimensions(format!("laplacian needs at least 3x3, got {w}x{h}")));
    }
    let p = img.data();
    let mut out = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            out[i] = 4.0 * p[i] - (p[i - w] + p[i + w] + p[i - 1] + p[i + 1]);
        }
    }
    Ok(ScalarField {
        width: w,
        height: h,
        data: out,
    })
}

/// Outcome of a Poisson solve before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    /// Full-frame values: target outside the interior, raw solution inside.
    pub values: ScalarField,
    pub iterations: usize,
    /// Final residual ∞-norm of the interior system.
    pub residual: f64,
    pub unknowns: usize,
}

/// Interior system of a single rectangular region.
struct System {
    iw: usize,
    ih: usize,
    rhs: Vec<f64>,
    initial: Vec<f64>,
}

impl System {
    fn assemble(target: &Image, source: &Image, rect: PixelRect) -> Self {
        let w = target.width();
        let (x0, y0) = (rect.x + 1, rect.y + 1);
        let (iw, ih) = (rect.w.saturating_sub(2), rect.h.saturating_sub(2));
        let t = target.data();
        let s = source.data();
        let mut rhs = Vec::with_capacity(iw * ih);
        let mut initial = Vec::with_capacity(iw * ih);
        for j in 0..ih {
            for i in 0..iw {
                let g = (y0 + j) * w + (x0 + i);
                let mut b = 4.0 * s[g] - (s[g - 1] + s[g + 1] + s[g - w] + s[g + w]);
                if i == 0 {
                    b += t[g - 1];
                }
                if i + 1 == iw {
                    b += t[g + 1];
                }
                if j == 0 {
                    b += t[g - w];
                }
                if j + 1 == ih {
                    b += t[g + w];
                }
                rhs.push(b);
                initial.push(t[g]);
            }
        }
        Self { iw, ih, rhs, initial }
    }

    fn len(&self) -> usize {
        self.iw * self.ih
    }

    /// Upper bound on `‖A⁻¹‖∞`.
    ///
    /// `A⁻¹ ≥ 0` entrywise and `A ψ ≥ 1` for the 1-D profile
    /// `ψ_i = (i + 1)(m - i) / 2` along either axis, so `max ψ` bounds the
    /// row sums of `A⁻¹`.
    fn inverse_norm_bound(&self) -> f64 {
        let profile_max = |m: usize| {
            let m = m as f64;
            let i = ((m - 1.0) / 2.0).floor();
            (i + 1.0) * (m - i) / 2.0
        };
        profile_max(self.iw).min(profile_max(self.ih))
    }

    /// Residual threshold that guarantees both `‖r‖∞ ≤ tol` and a solution
    /// error of at most `tol` per pixel.
    fn stopping_threshold(&self, tol: f64) -> f64 {
        tol / self.inverse_norm_bound().max(1.0)
    }

    /// `out = A x` for the interior Dirichlet Laplacian.
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (iw, ih) = (self.iw, self.ih);
        for j in 0..ih {
            for i in 0..iw {
                let k = j * iw + i;
                let mut v = 4.0 * x[k];
                if i > 0 {
                    v -= x[k - 1];
                }
                if i + 1 < iw {
                    v -= x[k + 1];
                }
                if j > 0 {
                    v -= x[k - iw];
                }
                if j + 1 < ih {
                    v -= x[k + iw];
                }
                out[k] = v;
            }
        }
    }

    fn residual(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.apply(x, scratch);
        self.rhs
            .iter()
            .zip(scratch.iter())
            .map(|(b, ax)| (b - ax).abs())
            .fold(0.0, f64::max)
    }

    fn solve_cg(&self, tol: f64, max_iters: usize) -> Result<(Vec<f64>, usize, f64)> {
        let n = self.len();
        let mut x = self.initial.clone();
        let mut ap = vec![0.0; n];
        self.apply(&x, &mut ap);
        let mut r: Vec<f64> = self.rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
        let mut p = r.clone();
        let mut rs: f64 = dot(&r, &r);
        let mut iters = 0;
        loop {
            let rinf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rinf <= tol {
                // the recurrence drifts; confirm against the true residual
                let true_res = self.residual(&x, &mut ap);
                if true_res <= tol {
                    return Ok((x, iters, true_res));
                }
                self.apply(&x, &mut ap);
                for k in 0..n {
                    r[k] = self.rhs[k] - ap[k];
                }
                p.copy_from_slice(&r);
                rs = dot(&r, &r);
            }
            if iters >= max_iters {
                let residual = self.residual(&x, &mut ap);
                return Err(Error::NonConvergence {
                    iterations: iters,
                    residual,
                });
            }
            iters += 1;
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                let residual = self.residual(&x, &mut ap);
                if residual <= tol {
                    return Ok((x, iters, residual));
                }
                return Err(Error::NonConvergence {
                    iterations: iters,
                    residual,
                });
            }
            let alpha = rs / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            rs = rs_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
    }

    fn solve_gauss_seidel(&self, tol: f64, max_iters: usize) -> Result<(Vec<f64>, usize, f64)> {
        let (iw, ih) = (self.iw, self.ih);
        let mut x = self.initial.clone();
        let mut scratch = vec![0.0; self.len()];
        let mut res = self.residual(&x, &mut scratch);
        let mut iters = 0;
        while res > tol {
            if iters >= max_iters {
                return Err(Error::NonConvergence {
                    iterations: iters,
                    residual: res,
                });
            }
            iters += 1;
            for j in 0..ih {
                for i in 0..iw {
                    let k = j * iw + i;
                    let mut v = self.rhs[k];
                    if i > 0 {
                        v += x[k - 1];
                    }
                    if i + 1 < iw {
                        v += x[k + 1];
                    }
                    if j > 0 {
                        v += x[k - iw];
                    }
                    if j + 1 < ih {
                        v += x[k + iw];
                    }
                    x[k] = 0.25 * v;
                }
            }
            res = self.residual(&x, &mut scratch);
        }
        Ok((x, iters, res))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the interior Poisson system and returns the unclamped field.
pub fn solve_poisson(req: &BlendRequest<'_>) -> Result<PoissonSolution> {
    let rect = req.validate()?;
    let (w, h) = req.target.dims();
    if rect.x == 0 || rect.y == 0 || rect.right() >= w || rect.bottom() >= h {
        return Err(Error::InvalidBox(format!(
            "{:?} touches the image border; poisson mode needs a one-pixel margin",
            req.region
        )));
    }
    let system = System::assemble(req.target, req.source, rect);
    let n = system.len();
    let mut values = req.target.data().to_vec();
    if n == 0 {
        return Ok(PoissonSolution {
            values: ScalarField { width: w, height: h, data: values },
            iterations: 0,
            residual: 0.0,
            unknowns: 0,
        });
    }
    let max_iters = req.max_iters.unwrap_or(10 * n);
    let threshold = system.stopping_threshold(req.tol);
    let (x, iterations, residual) = match req.solver {
        Solver::ConjugateGradient => system.solve_cg(threshold, max_iters)?,
        Solver::GaussSeidel => system.solve_gauss_seidel(threshold, max_iters)?,
    };
    for j in 0..system.ih {
        let row = (rect.y + 1 + j) * w + rect.x + 1;
        values[row..row + system.iw].copy_from_slice(&x[j * system.iw..(j + 1) * system.iw]);
    }
    Ok(PoissonSolution {
        values: ScalarField { width: w, height: h, data: values },
        iterations,
        residual,
        unknowns: n,
    })
}

/// Paste or Poisson-blend `source` into `target` over `region`.
pub fn poisson_blend(req: &BlendRequest<'_>) -> Result<Image> {
    match req.mode {
        BlendMode::Paste => {
            req.validate()?;
            replace_region(req.target, req.source, &req.region)
        }
        BlendMode::Poisson => {
            let sol = solve_poisson(req)?;
            let (w, h) = req.target.dims();
            let rect = req.region.pixel_rect();
            let mut out = req.target.data().to_vec();
            for y in rect.y + 1..rect.bottom().saturating_sub(1) {
                for x in rect.x + 1..rect.right().saturating_sub(1) {
                    out[y * w + x] = clamp01(sol.values.data[y * w + x]);
                }
            }
            Ok(Image::from_raw(w, h, out))
        }
    }
}
