use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::grid::NormKind;
use super::system::Model;
use crate::error::{Error, Result};

/// Closed-form `u(x, t)`.
#[derive(Clone)]
pub struct ClosureSignal(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for ClosureSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosureSignal(..)")
    }
}

/// One input channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSignal {
    Zero,
    Constant { value: f64 },
    /// `amp · sin(mode·π x/d)`
    Sine { amp: f64, mode: usize },
    /// `amp · cos(mode·π x/d)`
    Cosine { amp: f64, mode: usize },
    /// Fixed nodal profile, constant in time.
    Profile { values: Vec<f64> },
    /// Spatially constant, piecewise constant and right-continuous in time:
    /// `values[k]` on `[times[k], times[k+1])`, zero before `times[0]`.
    Steps { times: Vec<f64>, values: Vec<f64> },
    #[serde(skip)]
    Closure(ClosureSignal),
}

impl ChannelSignal {
    pub fn closure(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ChannelSignal::Closure(ClosureSignal(Arc::new(f)))
    }

    pub fn is_time_invariant(&self) -> bool {
        !matches!(self, ChannelSignal::Steps { .. } | ChannelSignal::Closure(_))
    }

    pub fn sample(&self, xs: &[f64], d: f64, t: f64) -> Result<Vec<f64>> {
        Ok(match self {
            ChannelSignal::Zero => vec![0.0; xs.len()],
            ChannelSignal::Constant { value } => vec![*value; xs.len()],
            ChannelSignal::Sine { amp, mode } => {
                xs.iter().map(|x| amp * (*mode as f64 * PI * x / d).sin()).collect()
            }
            ChannelSignal::Cosine { amp, mode } => {
                xs.iter().map(|x| amp * (*mode as f64 * PI * x / d).cos()).collect()
            }
            ChannelSignal::Profile { values } => {
                if values.len() != xs.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "input profile has {} values for {} nodes",
                        values.len(),
                        xs.len()
                    )));
                }
                values.clone()
            }
            ChannelSignal::Steps { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                let v = if k == 0 { 0.0 } else { values[k - 1] };
                vec![v; xs.len()]
            }
            ChannelSignal::Closure(f) => xs.iter().map(|&x| (f.0)(x, t)).collect(),
        })
    }
}

/// Input `u(x, t)` for every channel of a model.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InputSignal {
    pub channels: Vec<ChannelSignal>,
}

impl InputSignal {
    pub fn zero() -> Self {
        InputSignal { channels: Vec::new() }
    }

    pub fn new(channels: Vec<ChannelSignal>) -> Self {
        InputSignal { channels }
    }

    pub fn constant_profile(profile: Vec<f64>) -> Self {
        InputSignal { channels: vec![ChannelSignal::Profile { values: profile }] }
    }

    pub fn is_time_invariant(&self) -> bool {
        self.channels.iter().all(ChannelSignal::is_time_invariant)
    }

    /// Values of every model channel at time `t`; missing channels read as zero.
    pub fn sample(&self, model: &Model, t: f64) -> Result<Vec<Vec<f64>>> {
        (0..model.spec.channels())
            .map(|ch| {
                let xs = model.grid.nodes(model.channel_bc(ch));
                match self.channels.get(ch) {
                    Some(sig) => sig.sample(&xs, model.grid.d, t),
                    None => Ok(vec![0.0; xs.len()]),
                }
            })
            .collect()
    }

    /// `max_t ‖u(·, t)‖` over the channels, sampled at `times`.
    pub fn magnitude(&self, model: &Model, which: NormKind, times: &[f64]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for &t in times {
            for (ch, vals) in self.sample(model, t)?.iter().enumerate() {
                worst = worst.max(super::grid::norm(&model.grid, model.channel_bc(ch), vals, which));
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_right_continuous() {
        let s = ChannelSignal::Steps { times: vec![0.0, 1.0, 2.0], values: vec![1.0, 5.0, -1.0] };
        let xs = [0.5];
        assert_eq!(s.sample(&xs, 1.0, 0.99).unwrap(), vec![1.0]);
        assert_eq!(s.sample(&xs, 1.0, 1.0).unwrap(), vec![5.0]);
        assert_eq!(s.sample(&xs, 1.0, 7.0).unwrap(), vec![-1.0]);
        assert_eq!(s.sample(&xs, 1.0, -1.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn closed_forms() {
        let xs = [0.25, 0.5];
        let s = ChannelSignal::Sine { amp: 2.0, mode: 1 };
        let v = s.sample(&xs, 1.0, 0.0).unwrap();
        assert!((v[1] - 2.0).abs() < 1e-15);
        let c = ChannelSignal::closure(|x, t| x + t);
        assert_eq!(c.sample(&xs, 1.0, 1.0).unwrap(), vec![1.25, 1.5]);
        let json = serde_json::to_string(&InputSignal::new(vec![s])).unwrap();
        assert_eq!(json, r#"{"channels":[{"kind":"sine","amp":2.0,"mode":1}]}"#);
    }
}
