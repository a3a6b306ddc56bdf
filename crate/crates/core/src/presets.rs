//! Analytic coefficient and data profiles: the named presets the experiment
//! configs refer to.  All profiles are separable products of a spatial shape
//! and a time shape, evaluated in `f64` and sampled onto placements on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryFn, GridFn};
use crate::mesh::{Mesh, Placement};
use crate::scalar::{num, Scalar};
use crate::solver::{TimeGrid, TimeSeries};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceProfile {
    Const { value: f64 },
    /// `amp * prod_d sin(freq_d pi x_d)`.
    SineProd { freqs: Vec<u32>, amp: f64 },
    /// `amp * exp(-|x - center|^2 / width^2)`.
    Bump {
        center: Vec<f64>,
        width: f64,
        amp: f64,
    },
    /// `offset + sum_d slope_d x_d`.
    Affine { offset: f64, slopes: Vec<f64> },
    /// `offset + amp * prod_d sin(freq_d pi x_d)`; with `offset > amp >= 0`
    /// the profile stays positive.
    OffsetSine {
        offset: f64,
        freqs: Vec<u32>,
        amp: f64,
    },
    /// `amp * prod_d x_d (1 - x_d)`: vanishes on the boundary.
    Polynomial { amp: f64 },
}

impl SpaceProfile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SpaceProfile::Const { value } => *value,
            SpaceProfile::SineProd { freqs, amp } => {
                let mut v = *amp;
                for (d, &f) in freqs.iter().enumerate() {
                    v *= (f as f64 * std::f64::consts::PI * x[d]).sin();
                }
                v
            }
            SpaceProfile::Bump { center, width, amp } => {
                let d2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(&xi, &ci)| (xi - ci) * (xi - ci))
                    .sum();
                amp * (-d2 / (width * width)).exp()
            }
            SpaceProfile::Affine { offset, slopes } => {
                offset + x.iter().zip(slopes).map(|(&xi, &s)| xi * s).sum::<f64>()
            }
            SpaceProfile::OffsetSine { offset, freqs, amp } => {
                let mut v = *amp;
                for (d, &f) in freqs.iter().enumerate() {
                    v *= (f as f64 * std::f64::consts::PI * x[d]).sin();
                }
                offset + v
            }
            SpaceProfile::Polynomial { amp } => {
                amp * x.iter().map(|&xi| xi * (1.0 - xi)).product::<f64>()
            }
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let dim_of = |len: usize, what: &str| {
            if len != n {
                Err(Error::InvalidParam(format!(
                    "profile {what} has {len} entries, mesh has n={n}"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            SpaceProfile::SineProd { freqs, .. } => dim_of(freqs.len(), "freqs"),
            SpaceProfile::Bump { center, width, .. } => {
                if *width <= 0.0 {
                    return Err(Error::InvalidParam("bump width must be positive".into()));
                }
                dim_of(center.len(), "center")
            }
            SpaceProfile::Affine { slopes, .. } => dim_of(slopes.len(), "slopes"),
            SpaceProfile::OffsetSine { freqs, .. } => dim_of(freqs.len(), "freqs"),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeProfile {
    One,
    /// `t / T`.
    Ramp,
    /// `sin(freq pi t / T)`.
    SineT { freq: f64 },
    /// `exp(-rate t)`.
    ExpDecay { rate: f64 },
    /// `(t/T)^2 (3 - 2 t/T)`: smooth ramp with zero initial value and slope.
    SmoothRamp,
}

impl TimeProfile {
    pub fn eval(&self, t: f64, t_final: f64) -> f64 {
        match self {
            TimeProfile::One => 1.0,
            TimeProfile::Ramp => t / t_final,
            TimeProfile::SineT { freq } => (freq * std::f64::consts::PI * t / t_final).sin(),
            TimeProfile::ExpDecay { rate } => (-rate * t).exp(),
            TimeProfile::SmoothRamp => {
                let s = t / t_final;
                s * s * (3.0 - 2.0 * s)
            }
        }
    }

    /// Whether the profile vanishes at `t = 0` (the compatibility condition
    /// of boundary data).
    pub fn vanishes_at_zero(&self) -> bool {
        matches!(
            self,
            TimeProfile::Ramp | TimeProfile::SmoothRamp | TimeProfile::SineT { .. }
        )
    }
}

/// Separable space-time profile.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeFn {
    pub space: SpaceProfile,
    #[serde(default = "default_time_profile")]
    pub time: TimeProfile,
}

fn default_time_profile() -> TimeProfile {
    TimeProfile::One
}

impl SpaceTimeFn {
    pub fn constant_in_time(space: SpaceProfile) -> Self {
        SpaceTimeFn {
            space,
            time: TimeProfile::One,
        }
    }

    pub fn eval(&self, x: &[f64], t: f64, t_final: f64) -> f64 {
        self.space.eval(x) * self.time.eval(t, t_final)
    }

    /// Sample onto the primal mesh as a time series; constant-in-time shapes
    /// collapse to a single slice.
    pub fn sample_series<S: Scalar>(&self, mesh: Mesh, time: &TimeGrid) -> TimeSeries<S> {
        let space = self.space.clone();
        if matches!(self.time, TimeProfile::One) {
            return TimeSeries::Constant(GridFn::sample(mesh, Placement::Primal, |x: &[S]| {
                let xf: Vec<f64> = x.iter().map(|v| v.to_f64c()).collect();
                num::<S>(space.eval(&xf))
            }));
        }
        let slices = (0..time.steps)
            .map(|m| {
                let t = time.time(m);
                let tv = self.time.eval(t, time.t_final);
                GridFn::sample(mesh, Placement::Primal, |x: &[S]| {
                    let xf: Vec<f64> = x.iter().map(|v| v.to_f64c()).collect();
                    num::<S>(space.eval(&xf) * tv)
                })
            })
            .collect();
        TimeSeries::Steps(slices)
    }

    /// Sample the boundary faces per time node, `m = 0..=M`.
    pub fn sample_boundary_series<S: Scalar>(
        &self,
        mesh: Mesh,
        time: &TimeGrid,
    ) -> Vec<BoundaryFn<S>> {
        (0..=time.steps)
            .map(|m| {
                let t = time.time(m);
                BoundaryFn::sample(mesh, |x: &[S]| {
                    let xf: Vec<f64> = x.iter().map(|v| v.to_f64c()).collect();
                    num::<S>(self.eval(&xf, t, time.t_final))
                })
            })
            .collect()
    }
}

/// How the time step follows the mesh in a sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum DtRule {
    /// `dt = h^2/4`, the regime where the spatial error dominates.
    QuarterHSquared,
    /// Fixed number of steps.
    FixedSteps(usize),
}

impl DtRule {
    pub fn time_grid(&self, t_final: f64, mesh: Mesh) -> Result<TimeGrid> {
        match self {
            DtRule::QuarterHSquared => {
                let h = mesh.h::<f64>();
                let steps = (t_final / (h * h / 4.0)).round().max(2.0) as usize;
                TimeGrid::new(t_final, steps)
            }
            DtRule::FixedSteps(m) => TimeGrid::new(t_final, *m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_evaluate() {
        let b = SpaceProfile::Bump {
            center: vec![0.5],
            width: 0.2,
            amp: 2.0,
        };
        assert!((b.eval(&[0.5]) - 2.0).abs() < 1e-15);
        assert!(b.eval(&[0.9]) < 2.0);
        let s = SpaceProfile::SineProd {
            freqs: vec![1, 2],
            amp: 1.0,
        };
        assert!(s.eval(&[0.5, 0.25]).abs() - 1.0 < 1e-12);
        assert!(TimeProfile::SmoothRamp.vanishes_at_zero());
        assert_eq!(TimeProfile::SmoothRamp.eval(0.0, 1.0), 0.0);
        assert_eq!(TimeProfile::SmoothRamp.eval(1.0, 1.0), 1.0);
    }

    #[test]
    fn validation_catches_dimension_mismatch() {
        let b = SpaceProfile::Bump {
            center: vec![0.5, 0.5],
            width: 0.2,
            amp: 1.0,
        };
        assert!(b.validate(1).is_err());
        assert!(b.validate(2).is_ok());
    }

    #[test]
    fn dt_rule_quarter_h_squared() {
        let mesh = Mesh::new(1, 7).unwrap();
        let grid = DtRule::QuarterHSquared.time_grid(0.5, mesh).unwrap();
        // h = 1/8, dt = 1/256, M = 128
        assert_eq!(grid.steps, 128);
    }
}
