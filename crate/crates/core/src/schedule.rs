//! Detector/generator alternation schedules.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleSpec {
    Joint,
    /// `n` detector epochs, then `m` generator epochs, repeating.
    Alternate { detector_epochs: usize, generator_epochs: usize },
}

impl ScheduleSpec {
    pub fn alternate(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!("alternation {n}:{m} needs both counts >= 1")));
        }
        Ok(Self::Alternate {
            detector_epochs: n,
            generator_epochs: m,
        })
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Joint => f.write_str("joint"),
            Self::Alternate {
                detector_epochs,
                generator_epochs,
            } => write!(f, "{detector_epochs}:{generator_epochs}"),
        }
    }
}

impl FromStr for ScheduleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_schedule(s)
    }
}

/// `"joint"` or `"N:M"` with positive integers.
pub fn parse_schedule(text: &str) -> Result<ScheduleSpec> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("joint") {
        return Ok(ScheduleSpec::Joint);
    }
    let bad = || Error::InvalidArgument(format!("schedule `{text}` is neither `joint` nor `N:M`"));
    let (n, m) = t.split_once(':').ok_or_else(bad)?;
    let count = |p: &str| {
        if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        p.parse::<usize>().map_err(|_| bad())
    };
    ScheduleSpec::alternate(count(n)?, count(m)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Detector,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Active {
    Detector,
    Generator,
    Both,
}

impl Active {
    pub fn code(&self) -> &'static str {
        match self {
            Active::Detector => "D",
            Active::Generator => "G",
            Active::Both => "DG",
        }
    }

    pub fn includes(&self, c: Component) -> bool {
        matches!(
            (self, c),
            (Active::Both, _) | (Active::Detector, Component::Detector) | (Active::Generator, Component::Generator)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub epoch: usize,
    pub active: Active,
    /// `None` when nothing is frozen.
    pub frozen: Option<Component>,
}

/// Detector phases come first in every period.
pub fn phase_for_epoch(spec: &ScheduleSpec, epoch: usize) -> Phase {
    match *spec {
        ScheduleSpec::Joint => Phase {
            epoch,
            active: Active::Both,
            frozen: None,
        },
        ScheduleSpec::Alternate {
            detector_epochs: n,
            generator_epochs: m,
        } => {
            if epoch % (n + m) < n {
                Phase {
                    epoch,
                    active: Active::Detector,
                    frozen: Some(Component::Generator),
                }
            } else {
                Phase {
                    epoch,
                    active: Active::Generator,
                    frozen: Some(Component::Detector),
                }
            }
        }
    }
}

pub fn phases(spec: &ScheduleSpec, total_epochs: usize) -> Vec<Phase> {
    (0..total_epochs).map(|e| phase_for_epoch(spec, e)).collect()
}

/// Comma-separated phase codes, e.g. `D,D,G,G`.
pub fn sequence_line(trace: &[Phase]) -> String {
    trace.iter().map(|p| p.active.code()).collect::<Vec<_>>().join(",")
}

pub fn phase_table(trace: &[Phase]) -> String {
    let mut s = String::from("epoch  active     frozen\n");
    for p in trace {
        let active = match p.active {
            Active::Detector => "detector",
            Active::Generator => "generator",
            Active::Both => "both",
        };
        let frozen = match p.frozen {
            Some(Component::Detector) => "detector",
            Some(Component::Generator) => "generator",
            None => "none",
        };
        s.push_str(&format!("{:>5}  {active:<9}  {frozen}\n", p.epoch));
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleTrace {
    pub phases: Vec<Phase>,
    pub detector_calls: usize,
    pub generator_calls: usize,
}

impl ScheduleTrace {
    pub fn sequence(&self) -> String {
        sequence_line(&self.phases)
    }
}

#[derive(Debug)]
pub enum ScheduleError<E> {
    /// `total_epochs` was 0.
    NoEpochs,
    /// A callback failed; `partial` holds every epoch completed before it.
    Step {
        epoch: usize,
        component: Component,
        source: E,
        partial: ScheduleTrace,
    },
}

impl<E: fmt::Display> fmt::Display for ScheduleError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoEpochs => f.write_str("total_epochs must be at least 1"),
            Self::Step {
                epoch,
                component,
                source,
                partial,
            } => write!(
                f,
                "{component:?} step failed at epoch {epoch} after {} complete epochs: {source}",
                partial.phases.len()
            ),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for ScheduleError<E> {}

/// Drives the callbacks epoch by epoch. In joint mode the detector runs
/// before the generator within each epoch.
pub fn run_schedule<E, D, G>(
    spec: &ScheduleSpec,
    total_epochs: usize,
    mut detector_step: D,
    mut generator_step: G,
) -> std::result::Result<ScheduleTrace, ScheduleError<E>>
where
    D: FnMut(usize) -> std::result::Result<(), E>,
    G: FnMut(usize) -> std::result::Result<(), E>,
{
    if total_epochs == 0 {
        return Err(ScheduleError::NoEpochs);
    }
    let mut trace = ScheduleTrace::default();
    for epoch in 0..total_epochs {
        let phase = phase_for_epoch(spec, epoch);
        for component in [Component::Detector, Component::Generator] {
            if !phase.active.includes(component) {
                continue;
            }
            let res = match component {
                Component::Detector => detector_step(epoch),
                Component::Generator => generator_step(epoch),
            };
            if let Err(source) = res {
                return Err(ScheduleError::Step {
                    epoch,
                    component,
                    source,
                    partial: trace,
                });
            }
            match component {
                Component::Detector => trace.detector_calls += 1,
                Component::Generator => trace.generator_calls += 1,
            }
        }
        trace.phases.push(phase);
    }
    Ok(trace)
}
