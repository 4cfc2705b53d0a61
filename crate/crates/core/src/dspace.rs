//! Deterministic design space: a point is inside when every thresholded
//! predicted response meets its lower bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{fmt_sig, MaterialAttributes, ProcessParams, N_PARAMS};
use crate::rsm::{predict, RegressionModel};

pub const DEFAULT_RESOLUTION: usize = 41;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignSpaceError {
    #[error("at least one threshold must be set")]
    NoThreshold,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Lower bounds on Y1..Y4; `None` leaves a response unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    bounds: [Option<f64>; 4],
}

impl ThresholdSpec {
    pub fn new(bounds: [Option<f64>; 4]) -> Result<Self, DesignSpaceError> {
        if bounds.iter().all(Option::is_none) {
            return Err(DesignSpaceError::NoThreshold);
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> [Option<f64>; 4] {
        self.bounds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub inside: bool,
    pub predicted: [f64; 4],
    /// `(predicted − θ)/|θ|` per thresholded response.
    pub margins: [Option<f64>; 4],
}

impl Membership {
    /// Most violated (smallest) normalized margin.
    pub fn worst_margin(&self) -> f64 {
        self.margins
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn normalized_margin(predicted: f64, bound: f64) -> f64 {
    let scale = if bound == 0.0 { 1.0 } else { bound.abs() };
    (predicted - bound) / scale
}

/// Classifies one point; `models` are in Y1..Y4 order.
pub fn membership(
    models: &[RegressionModel; 4],
    params: &ProcessParams,
    attrs: &MaterialAttributes,
    thresholds: &ThresholdSpec,
) -> Membership {
    let predicted: [f64; 4] = std::array::from_fn(|r| predict(&models[r], params, attrs));
    let margins: [Option<f64>; 4] =
        std::array::from_fn(|r| thresholds.bounds[r].map(|b| normalized_margin(predicted[r], b)));
    let inside = (0..4).all(|r| thresholds.bounds[r].is_none_or(|b| predicted[r] >= b));
    Membership {
        inside,
        predicted,
        margins,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    /// 0-based factor index (0 = X1).
    pub factor: usize,
    pub low: f64,
    pub high: f64,
    pub resolution: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.high - self.low) / (self.resolution - 1) as f64;
        (0..self.resolution)
            .map(|i| {
                if i + 1 == self.resolution {
                    self.high
                } else {
                    self.low + step * i as f64
                }
            })
            .collect()
    }
}

/// A 2-D slice: two swept factors, the others held at `fixed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_axis: GridAxis,
    pub y_axis: GridAxis,
    /// Values of the non-swept factors (entries of swept factors are ignored).
    pub fixed: ProcessParams,
    pub attrs: MaterialAttributes,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), DesignSpaceError> {
        let bad = |m: String| Err(DesignSpaceError::InvalidGrid(m));
        if self.x_axis.factor == self.y_axis.factor {
            return bad("swept factors must differ".into());
        }
        for axis in [&self.x_axis, &self.y_axis] {
            if axis.factor >= N_PARAMS {
                return bad(format!("factor index {} out of range", axis.factor));
            }
            if axis.resolution < 2 {
                return bad("resolution must be at least 2".into());
            }
            if !(axis.low < axis.high) {
                return bad(format!("axis X{} needs low < high", axis.factor + 1));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSpaceGrid {
    pub x_factor: usize,
    pub y_factor: usize,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Row-major: node `(iy, ix)` at `iy * x_values.len() + ix`.
    pub nodes: Vec<Membership>,
}

impl DesignSpaceGrid {
    pub fn node(&self, iy: usize, ix: usize) -> &Membership {
        &self.nodes[iy * self.x_values.len() + ix]
    }

    pub fn inside(&self, iy: usize, ix: usize) -> bool {
        self.node(iy, ix).inside
    }

    /// Index `(iy, ix)` of the node closest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let closest = |vals: &[f64], v: f64| {
            vals.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .expect("non-empty axis")
        };
        (closest(&self.y_values, y), closest(&self.x_values, x))
    }

    pub fn inside_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.inside).count()
    }

    /// `x_axis,y_axis,inside,margin_Y1,…,margin_Y4`, row-major; unset margins are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_axis,y_axis,inside,margin_Y1,margin_Y2,margin_Y3,margin_Y4\n");
        for (iy, y) in self.y_values.iter().enumerate() {
            for (ix, x) in self.x_values.iter().enumerate() {
                let n = self.node(iy, ix);
                let margins: Vec<String> = n
                    .margins
                    .iter()
                    .map(|m| m.map(|v| fmt_sig(v, 6)).unwrap_or_default())
                    .collect();
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_sig(*x, 6),
                    fmt_sig(*y, 6),
                    u8::from(n.inside),
                    margins.join(",")
                ));
            }
        }
        out
    }
}

pub fn grid_scan(
    models: &[RegressionModel; 4],
    grid: &GridSpec,
    thresholds: &ThresholdSpec,
) -> Result<DesignSpaceGrid, DesignSpaceError> {
    grid.validate()?;
    let x_values = grid.x_axis.values();
    let y_values = grid.y_axis.values();
    let mut nodes = Vec::with_capacity(x_values.len() * y_values.len());
    for &y in &y_values {
        for &x in &x_values {
            let p = grid.fixed.with(grid.x_axis.factor, x).with(grid.y_axis.factor, y);
            nodes.push(membership(models, &p, &grid.attrs, thresholds));
        }
    }
    Ok(DesignSpaceGrid {
        x_factor: grid.x_axis.factor,
        y_factor: grid.y_axis.factor,
        x_values,
        y_values,
        nodes,
    })
}

/// Nodes with at least one 4-neighbour of the opposite class, as `(iy, ix)`.
pub fn boundary_cells(grid: &DesignSpaceGrid) -> Vec<(usize, usize)> {
    let (ny, nx) = (grid.y_values.len(), grid.x_values.len());
    let mut out = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let here = grid.inside(iy, ix);
            let neighbours = [
                (iy > 0).then(|| (iy - 1, ix)),
                (iy + 1 < ny).then_some((iy + 1, ix)),
                (ix > 0).then(|| (iy, ix - 1)),
                (ix + 1 < nx).then_some((iy, ix + 1)),
            ];
            if neighbours
                .into_iter()
                .flatten()
                .any(|(y, x)| grid.inside(y, x) != here)
            {
                out.push((iy, ix));
            }
        }
    }
    out
}
