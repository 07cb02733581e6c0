//! `key = value` configuration files for the command line tool.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::blend::{BlendMode, Solver};
use crate::error::{Error, Result};
use crate::eval::ThresholdSet;

pub const KEYS: [&str; 17] = [
    "reference",
    "scale",
    "blend",
    "solver",
    "blend_tol",
    "blend_max_iters",
    "align_levels",
    "align_max_iters",
    "align_step",
    "align_tol",
    "align_fd_step",
    "alpha",
    "thresholds",
    "no_fn",
    "seed",
    "k",
    "jobs",
];

/// Every field is optional; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    pub reference: Option<PathBuf>,
    pub scale: Option<f64>,
    pub blend: Option<BlendMode>,
    pub solver: Option<Solver>,
    pub blend_tol: Option<f64>,
    pub blend_max_iters: Option<usize>,
    pub align_levels: Option<usize>,
    pub align_max_iters: Option<usize>,
    pub align_step: Option<f64>,
    pub align_tol: Option<f64>,
    pub align_fd_step: Option<f64>,
    pub alpha: Option<f64>,
    pub thresholds: Option<ThresholdSet>,
    pub no_fn: Option<bool>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub jobs: Option<usize>,
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map(Some)
        .map_err(|e| Error::parse(line, format!("bad value for `{key}`: {e}")))
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, val) = body
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected `key = value`, found `{body}`")))?;
            let (key, val) = (key.trim(), val.trim());
            if val.is_empty() {
                return Err(Error::parse(line, format!("empty value for `{key}`")));
            }
            match key {
                "reference" => c.reference = Some(PathBuf::from(val)),
                "scale" => c.scale = value(line, key, val)?,
                "blend" => c.blend = value(line, key, val)?,
                "solver" => c.solver = value(line, key, val)?,
                "blend_tol" => c.blend_tol = value(line, key, val)?,
                "blend_max_iters" => c.blend_max_iters = value(line, key, val)?,
                "align_levels" => c.align_levels = value(line, key, val)?,
                "align_max_iters" => c.align_max_iters = value(line, key, val)?,
                "align_step" => c.align_step = value(line, key, val)?,
                "align_tol" => c.align_tol = value(line, key, val)?,
                "align_fd_step" => c.align_fd_step = value(line, key, val)?,
                "alpha" => c.alpha = value(line, key, val)?,
                "thresholds" => c.thresholds = value(line, key, val)?,
                "no_fn" => c.no_fn = value(line, key, val)?,
                "seed" => c.seed = value(line, key, val)?,
                "k" => c.k = value(line, key, val)?,
                "jobs" => c.jobs = value(line, key, val)?,
                other => {
                    return Err(Error::parse(
                        line,
                        format!("unknown key `{other}` (known: {})", KEYS.join(", ")),
                    ))
                }
            }
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let c = CliConfig::parse(
            "# pipeline defaults\nblend = paste\nsolver=gauss_seidel\n\nthresholds = 0.4:0.1:0.6  # second setting\nk = 2\nno_fn = true\nreference = /data/ref.pgm\n",
        )
        .unwrap();
        assert_eq!(c.blend, Some(BlendMode::Paste));
        assert_eq!(c.solver, Some(Solver::GaussSeidel));
        assert_eq!(c.thresholds.unwrap().values(), [0.4, 0.5, 0.6]);
        assert_eq!(c.k, Some(2));
        assert_eq!(c.no_fn, Some(true));
        assert_eq!(c.reference, Some(PathBuf::from("/data/ref.pgm")));
        assert_eq!(c.seed, None);
    }

    #[test]
    fn rejects_bad_lines() {
        let line = |t: &str| match CliConfig::parse(t) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line("k = 1\ncolour = blue\n"), 2);
        assert_eq!(line("k = one\n"), 1);
        assert_eq!(line("\n\njust words\n"), 3);
        assert_eq!(line("blend = smudge\n"), 1);
        assert_eq!(line("alpha =\n"), 1);
    }
}
