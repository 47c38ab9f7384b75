//! Row-major result grids with per-point error codes.

use nanosqueeze_core::squeeze::{AmplitudeMode, Component};
use serde::{Deserialize, Serialize};

use crate::config::Pipeline;
use crate::error::PointError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, unit: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }

    /// CSV column header, `name_unit` or bare `name` when dimensionless.
    pub fn header(&self) -> String {
        header(&self.name, &self.unit)
    }
}

fn header(name: &str, unit: &str) -> String {
    if unit.is_empty() || unit == "1" {
        name.to_string()
    } else {
        format!("{name}_{unit}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub unit: String,
    pub values: Vec<Option<f64>>,
}

impl Channel {
    pub fn new(name: &str, unit: &str, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }

    pub fn header(&self) -> String {
        header(&self.name, &self.unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Colour map over the last two axes, one panel per leading-axis value.
    Heatmap,
    /// One curve per leading-axis value against the last axis.
    Lines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub pipeline: Pipeline,
    pub config_hash: String,
    pub version: String,
    pub mode: AmplitudeMode,
    pub component: Component,
    /// Meaning and normalisation of the value column.
    pub convention: String,
    pub plot: PlotKind,
    pub value_min: Option<f64>,
    pub value_max: Option<f64>,
    pub failed_points: usize,
    pub masked_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSummary {
    pub max: f64,
    /// `(λ_E, R)` of the maximum.
    pub max_at: [f64; 2],
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub radius_nm: f64,
    pub lambda_nm: f64,
    /// Local maxima over the closed angular sweep.
    pub lobes: usize,
    pub max: f64,
    /// Smallest `|g_θ|/|g_θ,0|` over samples where free space radiates.
    pub min_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePanel {
    pub radius_nm: f64,
    pub purcell: f64,
    pub rabi_enhancement: f64,
    pub shift_over_gamma0: f64,
    pub x: f64,
    /// `|g_i/g_i,0|²` at the detector.
    pub amplitude_ratio: f64,
    pub grid_min: f64,
    pub grid_min_at: [f64; 2],
    /// Minimum refined off-grid, taken on the resonant row `δ = 0` when it lies in the window.
    pub min: f64,
    pub min_at: [f64; 2],
    /// Width in `δ₀` of the region below half the minimum, along the drive row of the minimum, not clipped to the window.
    pub extent_delta0: f64,
    /// Largest squeezing `z₀` per `δ₀` sample; `None` where squeezing is impossible.
    pub boundary: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurve {
    pub radius_nm: f64,
    pub omega_over_gamma0: f64,
    /// Largest distance with squeezing, interpolated to the zero crossing.
    pub onset_s: Option<f64>,
    pub min: f64,
    pub min_at_s: f64,
    pub non_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialSummary {
    pub radius_nm: f64,
    pub atomic_variance: f64,
    pub min: f64,
    pub min_at: [f64; 2],
    pub negative_points: usize,
    /// Interior local maxima of `|value|` with `|z| < R/2` and `x ≠ 0`.
    pub lateral_maxima: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    AmplitudeMap(AmplitudeSummary),
    FarfieldPattern { patterns: Vec<PatternSummary> },
    VarianceMap { panels: Vec<VariancePanel> },
    DistanceScan { curves: Vec<DistanceCurve> },
    SpatialMap(SpatialSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultGrid {
    pub metadata: Metadata,
    pub axes: Vec<Axis>,
    pub value: Channel,
    pub extras: Vec<Channel>,
    pub errors: Vec<Option<PointError>>,
    pub summary: Summary,
}

impl ResultGrid {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    /// Flat row-major index of a multi-index.
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.shape())
            .fold(0, |acc, (i, n)| acc * n + i)
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut out = vec![0; shape.len()];
        for (k, n) in shape.iter().enumerate().rev() {
            out[k] = flat % n;
            flat /= n;
        }
        out
    }

    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .zip(&self.axes)
            .map(|(i, a)| a.values[*i])
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> Option<f64> {
        self.value.values[self.index(idx)]
    }

    pub fn extra(&self, name: &str) -> Option<&Channel> {
        self.extras.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, PointError)> + '_ {
        self.errors
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.filter(|e| e.is_failure()).map(|e| (i, e)))
    }

    /// Checks the shape and NaN-flagging contract.
    pub fn check(&self) -> Result<(), String> {
        let n = self.len();
        if self.value.values.len() != n || self.errors.len() != n {
            return Err(format!(
                "value or error column length differs from the {n} grid points"
            ));
        }
        for c in &self.extras {
            if c.values.len() != n {
                return Err(format!(
                    "extra column {} has {} entries, expected {n}",
                    c.name,
                    c.values.len()
                ));
            }
        }
        for (i, (v, e)) in self.value.values.iter().zip(&self.errors).enumerate() {
            match (v, e) {
                (Some(x), None) if x.is_finite() => {}
                (None, Some(_)) => {}
                _ => {
                    return Err(format!(
                        "point {i}: value {v:?} inconsistent with error code {e:?}"
                    ))
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(shape: &[usize]) -> ResultGrid {
        let axes: Vec<Axis> = shape
            .iter()
            .enumerate()
            .map(|(k, n)| Axis::new(&format!("a{k}"), "", (0..*n).map(|i| i as f64).collect()))
            .collect();
        let n = shape.iter().product();
        ResultGrid {
            metadata: Metadata {
                name: "t".into(),
                pipeline: Pipeline::AmplitudeMap,
                config_hash: String::new(),
                version: String::new(),
                mode: AmplitudeMode::FarField,
                component: Component::Theta,
                convention: String::new(),
                plot: PlotKind::Heatmap,
                value_min: None,
                value_max: None,
                failed_points: 0,
                masked_points: 0,
            },
            axes,
            value: Channel::new("v", "", (0..n).map(|i| Some(i as f64)).collect()),
            extras: vec![],
            errors: vec![None; n],
            summary: Summary::AmplitudeMap(AmplitudeSummary {
                max: 0.0,
                max_at: [0.0; 2],
                min: 0.0,
            }),
        }
    }

    #[test]
    fn index_round_trip() {
        let g = grid(&[2, 3, 4]);
        for flat in 0..g.len() {
            assert_eq!(g.index(&g.unravel(flat)), flat);
        }
        assert_eq!(g.index(&[1, 2, 3]), 23);
        assert_eq!(g.coordinates(23), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn nan_without_code_is_rejected() {
        let mut g = grid(&[2, 2]);
        assert!(g.check().is_ok());
        g.value.values[1] = None;
        assert!(g.check().is_err());
        g.errors[1] = Some(PointError::Convergence);
        assert!(g.check().is_ok());
        g.value.values[2] = Some(f64::NAN);
        assert!(g.check().is_err());
    }
}
