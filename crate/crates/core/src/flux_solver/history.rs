//! Solved boundary flux on a boundary-by-time grid.

use super::Nodes;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, BoundaryPoint, Dim, Wall};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Boundary flux `j(y_i, t_j)` with `t_j = j dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxHistory {
    pub dim: Dim,
    /// Number of boundary nodes (2 walls, or equally spaced angles `2 pi i / n`).
    pub nodes: usize,
    pub dt: f64,
    /// Values indexed `[node][level]`.
    pub values: Vec<Vec<f64>>,
    /// Maximum renewal residual, if it was checked.
    pub residual: Option<f64>,
}

/// Descriptive header written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryHeader {
    pub dim: u8,
    pub nodes: usize,
    pub dt: f64,
    pub levels: usize,
    pub residual: Option<f64>,
    pub config: serde_json::Value,
}

impl FluxHistory {
    pub(crate) fn node_layout(&self) -> Nodes {
        match self.dim {
            Dim::One => Nodes::Walls,
            Dim::Two => Nodes::Angles(self.nodes),
        }
    }

    /// Index of the last time level.
    pub fn steps(&self) -> usize {
        self.values.first().map_or(0, |v| v.len().saturating_sub(1))
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|j| self.time(j)).collect()
    }

    /// Boundary point of node `i`.
    pub fn node_point(&self, i: usize) -> BoundaryPoint<f64> {
        self.node_layout().point(i)
    }

    fn node_time(&self, node: usize, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(t >= 0.0) || t > horizon * (1.0 + 1e-12) {
            return Err(Error::HistoryExhausted { t, horizon });
        }
        let x = (t / self.dt).min(self.steps() as f64);
        let j = (x.floor() as usize).min(self.steps().saturating_sub(1));
        let frac = x - j as f64;
        let row = &self.values[node];
        if self.steps() == 0 {
            return Ok(row[0]);
        }
        Ok(row[j] * (1.0 - frac) + row[j + 1] * frac)
    }

    /// Flux at a wall, linear in time.
    pub fn at_wall(&self, wall: Wall, t: f64) -> Result<f64> {
        self.node_time(wall.index(), t)
    }

    /// Flux at polar angle `theta`, periodic-linear in angle and linear in time.
    pub fn at_angle(&self, theta: f64, t: f64) -> Result<f64> {
        let n = self.nodes;
        let h = std::f64::consts::TAU / n as f64;
        let x = wrap_angle(theta) / h;
        let p = (x.floor() as usize).min(n - 1);
        let frac = x - p as f64;
        Ok(self.node_time(p, t)? * (1.0 - frac) + self.node_time((p + 1) % n, t)? * frac)
    }

    pub fn at(&self, y: BoundaryPoint<f64>, t: f64) -> Result<f64> {
        match y {
            BoundaryPoint::Wall(w) => self.at_wall(w, t),
            BoundaryPoint::Circle(theta) => self.at_angle(theta, t),
        }
    }

    /// Flux at a Cartesian boundary position.
    pub fn at_position(&self, y: [f64; 2], t: f64) -> Result<f64> {
        self.at(BoundaryPoint::from_position(self.dim, y), t)
    }

    /// Largest absolute value over the grid.
    pub fn sup(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest absolute value at each time level.
    pub fn sup_over_nodes(&self) -> Vec<f64> {
        (0..=self.steps()).map(|j| self.values.iter().fold(0.0f64, |a, row| a.max(row[j].abs()))).collect()
    }

    /// `j - rho_* / C_S`, the deviation from the steady flux.
    pub fn deviation(&self, rho_star: f64, c_s: f64) -> FluxHistory {
        let offset = rho_star / c_s;
        FluxHistory {
            values: self.values.iter().map(|r| r.iter().map(|v| v - offset).collect()).collect(),
            residual: None,
            ..self.clone()
        }
    }

    /// Writes `t,index,coordinate,value` rows with 17 significant digits.
    /// The coordinate is the wall position (slab) or polar angle (disk).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,index,coordinate,value")?;
        for j in 0..=self.steps() {
            for i in 0..self.nodes {
                let coord = match self.node_point(i) {
                    BoundaryPoint::Wall(w) => w.position::<f64>(),
                    BoundaryPoint::Circle(theta) => theta,
                };
                writeln!(out, "{},{},{},{}", fmt17(self.time(j)), i, fmt17(coord), fmt17(self.values[i][j]))?;
            }
        }
        Ok(())
    }

    /// Reads a CSV written by [`FluxHistory::write_csv`].
    pub fn read_csv<R: BufRead>(input: R, dim: Dim, nodes: usize, dt: f64) -> Result<Self> {
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); nodes];
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 4 {
                return Err(Error::Parse(format!("line {}: expected 4 columns", n + 1)));
            }
            let i: usize = cols[1].parse().map_err(|_| Error::Parse(format!("line {}: bad index", n + 1)))?;
            let v: f64 = cols[3].parse().map_err(|_| Error::Parse(format!("line {}: bad value", n + 1)))?;
            if i >= nodes {
                return Err(Error::Parse(format!("line {}: node {i} out of range", n + 1)));
            }
            values[i].push(v);
        }
        let len = values[0].len();
        if len == 0 || values.iter().any(|r| r.len() != len) {
            return Err(Error::Parse("ragged or empty flux table".into()));
        }
        Ok(FluxHistory { dim, nodes, dt, values, residual: None })
    }

    pub fn header(&self, config: serde_json::Value) -> HistoryHeader {
        HistoryHeader {
            dim: self.dim.value() as u8,
            nodes: self.nodes,
            dt: self.dt,
            levels: self.steps() + 1,
            residual: self.residual,
            config,
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
