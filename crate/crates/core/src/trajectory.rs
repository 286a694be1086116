use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Main-qubit Bloch components sampled on a time grid (μs).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    purity: f64,
}

impl BlochTrajectory {
    pub fn new(times: Vec<f64>, points: Vec<[f64; 3]>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::GridMismatch(format!("{} times for {} points", times.len(), points.len())));
        }
        Ok(Self { times, points })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component(&self, axis: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[axis]).collect()
    }

    pub fn purity(&self) -> Vec<f64> {
        self.points.iter().map(|&p| purity_of(p)).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest absolute component-wise deviation from another trajectory.
    pub fn max_deviation(&self, other: &BlochTrajectory) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!("{} vs {} samples", self.len(), other.len())));
        }
        Ok(self
            .points
            .iter()
            .zip(&other.points)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (&t, &v) in self.times.iter().zip(&self.points) {
            wtr.serialize(Row { t, vx: v[0], vy: v[1], vz: v[2], purity: purity_of(v) })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Self::default();
        for row in rdr.deserialize() {
            let row: Row = row?;
            out.times.push(row.t);
            out.points.push([row.vx, row.vy, row.vz]);
        }
        Ok(out)
    }
}

/// Tr ρ² of a qubit with Bloch vector v.
pub fn purity_of(v: [f64; 3]) -> f64 {
    0.5 * (1.0 + v.iter().map(|x| x * x).sum::<f64>())
}

/// Uniform grid t_n = n·dt, n = 0..points.
pub fn uniform_times(points: usize, dt: f64) -> Vec<f64> {
    (0..points).map(|n| n as f64 * dt).collect()
}
