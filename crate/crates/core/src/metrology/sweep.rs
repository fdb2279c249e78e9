use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named, uniformly spaced control-parameter range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// `points` values from `lo` to `hi` inclusive (`lo` alone when `points == 1`).
    pub fn uniform(name: impl Into<String>, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("axis needs finite bounds and points ≥ 1, got [{lo}, {hi}] × {points}")));
        }
        let values = if points == 1 {
            vec![lo]
        } else {
            let h = (hi - lo) / (points - 1) as f64;
            (0..points).map(|k| if k + 1 == points { hi } else { lo + k as f64 * h }).collect()
        };
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    pub fn from_values(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("axis needs at least one value".into()));
        }
        Ok(Self {
            name: name.into(),
            values,
        })
    }
}

/// A grid cell together with the coordinates that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell<T> {
    pub point: Vec<f64>,
    pub value: T,
}

/// Results over the Cartesian product of one or two axes, the last axis
/// varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid<T> {
    pub axes: Vec<Axis>,
    pub cells: Vec<SweepCell<T>>,
}

impl<T> SweepGrid<T> {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }
}

/// Evaluate `f` on every grid point in parallel. Output order does not
/// depend on scheduling.
pub fn sweep<T, F>(axes: Vec<Axis>, f: F) -> Result<SweepGrid<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T> + Sync,
{
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::Domain(format!("sweeps take one or two axes, got {}", axes.len())));
    }
    let points: Vec<Vec<f64>> = match axes.as_slice() {
        [a] => a.values.iter().map(|&x| vec![x]).collect(),
        [a, b] => a
            .values
            .iter()
            .flat_map(|&x| b.values.iter().map(move |&y| vec![x, y]))
            .collect(),
        _ => unreachable!(),
    };
    let cells = points
        .into_par_iter()
        .map(|point| {
            let value = f(&point)?;
            Ok(SweepCell { point, value })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid { axes, cells })
}
