use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Step,
    Linear,
    Cosine,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(ScheduleKind::Step),
            "linear" => Ok(ScheduleKind::Linear),
            "cosine" => Ok(ScheduleKind::Cosine),
            _ => Err(Error::config(format!("unknown schedule kind '{s}'"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleKind::Step => "step",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub r_start: f64,
    pub r_end: f64,
    pub total_epochs: usize,
    /// Plateau count for the step schedule.
    pub steps: usize,
}

impl ScheduleSpec {
    pub fn new(kind: ScheduleKind, total_epochs: usize) -> Self {
        ScheduleSpec {
            kind,
            r_start: 1.0,
            r_end: 0.2,
            total_epochs,
            steps: 5,
        }
    }

    /// r ≡ 1: every sample keeps its ground-truth label.
    pub fn constant(total_epochs: usize, r: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Step,
            r_start: r,
            r_end: r,
            total_epochs,
            steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.r_start) || !unit.contains(&self.r_end) {
            return Err(Error::config("schedule endpoints must lie in [0, 1]"));
        }
        if self.r_end > self.r_start {
            return Err(Error::config("schedule must be non-increasing (r_end <= r_start)"));
        }
        if self.total_epochs == 0 {
            return Err(Error::config("schedule needs at least one epoch"));
        }
        if self.kind == ScheduleKind::Step && self.steps == 0 {
            return Err(Error::config("step schedule needs at least one plateau"));
        }
        Ok(())
    }
}

/// `a·w + b·(1 − w)`, exact at both ends.
fn blend(a: f64, b: f64, w: f64) -> f64 {
    a * w + b * (1.0 - w)
}

pub fn schedule_r(spec: &ScheduleSpec, epoch: usize) -> Result<f64> {
    spec.validate()?;
    let t = spec.total_epochs;
    if epoch >= t {
        return Err(Error::Range(format!("epoch {epoch} outside [0, {t})")));
    }
    if t == 1 {
        return Ok(spec.r_start);
    }
    let (a, b) = (spec.r_start, spec.r_end);
    let r = match spec.kind {
        ScheduleKind::Step => {
            if spec.steps == 1 {
                a
            } else {
                let last = spec.steps - 1;
                // With fewer epochs than plateaus the final epoch still lands on r_end.
                let k = if epoch == t - 1 {
                    last
                } else {
                    (epoch * spec.steps / t).min(last)
                };
                blend(a, b, (last - k) as f64 / last as f64)
            }
        }
        ScheduleKind::Linear => blend(a, b, 1.0 - epoch as f64 / (t - 1) as f64),
        ScheduleKind::Cosine => {
            let w = (1.0 + (PI * epoch as f64 / (t - 1) as f64).cos()) / 2.0;
            blend(a, b, w)
        }
    };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step_1000() -> ScheduleSpec {
        ScheduleSpec::new(ScheduleKind::Step, 1000)
    }

    #[test]
    fn step_endpoints_and_plateaus() {
        let s = step_1000();
        assert_eq!(schedule_r(&s, 0).unwrap(), 1.0);
        assert_eq!(schedule_r(&s, 999).unwrap(), 0.2);
        assert_eq!(schedule_r(&s, 500).unwrap(), 0.6);
        let expect = [1.0, 0.8, 0.6, 0.4, 0.2];
        for (k, &v) in expect.iter().enumerate() {
            for e in [k * 200, k * 200 + 199] {
                assert_eq!(schedule_r(&s, e).unwrap(), v, "epoch {e}");
            }
        }
    }

    #[test]
    fn linear_midpoint() {
        let s = ScheduleSpec::new(ScheduleKind::Linear, 5);
        assert!((schedule_r(&s, 2).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(schedule_r(&s, 0).unwrap(), 1.0);
        assert_eq!(schedule_r(&s, 4).unwrap(), 0.2);
    }

    #[test]
    fn cosine_endpoints() {
        let s = ScheduleSpec::new(ScheduleKind::Cosine, 1000);
        assert_eq!(schedule_r(&s, 0).unwrap(), 1.0);
        assert_eq!(schedule_r(&s, 999).unwrap(), 0.2);
    }

    #[test]
    fn out_of_range_epoch() {
        assert!(matches!(schedule_r(&step_1000(), 1000), Err(Error::Range(_))));
    }

    #[test]
    fn constant_schedule() {
        let s = ScheduleSpec::constant(10, 1.0);
        assert!((0..10).all(|e| schedule_r(&s, e).unwrap() == 1.0));
    }

    proptest! {
        #[test]
        fn monotone_non_increasing(
            t in 2usize..400,
            a in 0.5f64..=1.0,
            b in 0.0f64..0.5,
            steps in 1usize..8,
            kind in prop_oneof![Just(ScheduleKind::Step), Just(ScheduleKind::Linear), Just(ScheduleKind::Cosine)],
        ) {
            let s = ScheduleSpec { kind, r_start: a, r_end: b, total_epochs: t, steps };
            let rs: Vec<f64> = (0..t).map(|e| schedule_r(&s, e).unwrap()).collect();
            prop_assert_eq!(rs[0], a);
            if kind != ScheduleKind::Step || steps > 1 {
                prop_assert_eq!(rs[t - 1], b);
            }
            for w in rs.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(rs.iter().all(|&r| r >= b && r <= a));
        }
    }
}
