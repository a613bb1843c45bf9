use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::ProjectivePoint;
use crate::measure::GeneratorMeasure;

/// A cell of the projective grid together with a point of `A`.
///
/// In dimension 2, `i` indexes angle bins of `[0, π)` and `j = 0`. In
/// dimension 3 points are folded into the upper hemisphere, `i` indexes
/// polar rings and `j` the azimuth bins of the ring (rings near the pole
/// have fewer bins so that cells have comparable size).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub a: usize,
    pub i: i64,
    pub j: i64,
}

#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    bins: BTreeMap<CellKey, f64>,
    resolution: f64,
    sample_count: usize,
    dim: usize,
    a_size: usize,
}

fn ring_count(resolution: f64) -> i64 {
    ((PI / 2.0) / resolution).ceil().max(1.0) as i64
}

fn azimuth_count(resolution: f64, ring: i64) -> i64 {
    let nr = ring_count(resolution);
    let theta = (ring as f64 + 0.5) * (PI / 2.0) / nr as f64;
    ((2.0 * PI * theta.sin()) / resolution).ceil().max(1.0) as i64
}

pub(crate) fn cell_of(x: &[f64], a: usize, resolution: f64) -> CellKey {
    match x.len() {
        2 => {
            let mut t = x[1].atan2(x[0]);
            if t < 0.0 {
                t += PI;
            }
            if t >= PI {
                t -= PI;
            }
            let n = (PI / resolution).ceil().max(1.0) as i64;
            let i = ((t / PI * n as f64).floor() as i64).clamp(0, n - 1);
            CellKey { a, i, j: 0 }
        }
        3 => {
            let s = if x[2] < 0.0 { -1.0 } else { 1.0 };
            let (px, py, pz) = (s * x[0], s * x[1], s * x[2]);
            let norm = (px * px + py * py + pz * pz).sqrt();
            let theta = (pz / norm).clamp(-1.0, 1.0).acos();
            let nr = ring_count(resolution);
            let i = ((theta / (PI / 2.0) * nr as f64).floor() as i64).clamp(0, nr - 1);
            let na = azimuth_count(resolution, i);
            let mut phi = py.atan2(px);
            if phi < 0.0 {
                phi += 2.0 * PI;
            }
            let j = ((phi / (2.0 * PI) * na as f64).floor() as i64).clamp(0, na - 1);
            CellKey { a, i, j }
        }
        _ => unreachable!("empirical measures are binned only in dimensions 2 and 3"),
    }
}

pub(crate) fn cell_center(dim: usize, key: &CellKey, resolution: f64) -> Vec<f64> {
    match dim {
        2 => {
            let n = (PI / resolution).ceil().max(1.0) as i64;
            let t = (key.i as f64 + 0.5) * PI / n as f64;
            vec![t.cos(), t.sin()]
        }
        _ => {
            let nr = ring_count(resolution);
            let theta = (key.i as f64 + 0.5) * (PI / 2.0) / nr as f64;
            let na = azimuth_count(resolution, key.i);
            let phi = (key.j as f64 + 0.5) * 2.0 * PI / na as f64;
            vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
        }
    }
}

impl EmpiricalMeasure {
    /// Equal-mass samples.
    pub fn from_points(dim: usize, a_size: usize, resolution: f64, points: &[(Vec<f64>, usize)]) -> Self {
        let w = 1.0 / points.len() as f64;
        let mut bins = BTreeMap::new();
        for (x, a) in points {
            *bins.entry(cell_of(x, *a, resolution)).or_insert(0.0) += w;
        }
        EmpiricalMeasure { bins, resolution, sample_count: points.len(), dim, a_size }
    }

    /// Weighted points; weights are normalized to total mass one.
    pub fn from_weighted(dim: usize, a_size: usize, resolution: f64, points: &[(Vec<f64>, usize, f64)]) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Dimension(format!("empirical measures support d = 2, 3, got {dim}")));
        }
        let total: f64 = points.iter().map(|p| p.2).sum();
        if !(total > 0.0) {
            return Err(Error::Measure("weighted points have no mass".into()));
        }
        let mut bins = BTreeMap::new();
        for (x, a, w) in points {
            if *w > 0.0 {
                *bins.entry(cell_of(x, *a, resolution)).or_insert(0.0) += w / total;
            }
        }
        Ok(EmpiricalMeasure { bins, resolution, sample_count: points.len(), dim, a_size })
    }

    pub fn bins(&self) -> &BTreeMap<CellKey, f64> {
        &self.bins
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_size(&self) -> usize {
        self.a_size
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.values().sum()
    }

    pub fn center(&self, key: &CellKey) -> Vec<f64> {
        cell_center(self.dim, key, self.resolution)
    }

    /// Mass of cells whose centers lie within projective distance `r` of
    /// `x` (all points of `A`).
    pub fn mass_in_ball(&self, x: &ProjectivePoint, r: f64) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::Dimension("ball center has wrong dimension".into()));
        }
        if r <= self.resolution {
            return Err(Error::Resolution(format!("radius {r:e} not above resolution {:e}", self.resolution)));
        }
        let c = x.rep().as_slice();
        let r2 = r * r;
        let mut m = 0.0;
        for (k, w) in &self.bins {
            let y = self.center(k);
            let dot: f64 = c.iter().zip(&y).map(|(a, b)| a * b).sum();
            if (1.0 - dot * dot).max(0.0) <= r2 {
                m += w;
            }
        }
        Ok(m)
    }

    /// One step of the walk applied to the cell centers.
    pub fn pushforward(&self, rho: &GeneratorMeasure) -> EmpiricalMeasure {
        let mut bins = BTreeMap::new();
        let mut y = vec![0.0; self.dim];
        for (k, w) in &self.bins {
            let x = self.center(k);
            for atom in rho.atoms() {
                atom.g.apply_slice(&x, &mut y);
                *bins.entry(cell_of(&y, atom.perm[k.a], self.resolution)).or_insert(0.0) += w * atom.weight;
            }
        }
        EmpiricalMeasure { bins, resolution: self.resolution, sample_count: self.sample_count, dim: self.dim, a_size: self.a_size }
    }

    /// Masses re-binned at the coarser resolution `π / nbins`.
    pub fn coarse(&self, nbins: usize) -> BTreeMap<CellKey, f64> {
        let res = PI / nbins as f64;
        let mut out = BTreeMap::new();
        for (k, w) in &self.bins {
            *out.entry(cell_of(&self.center(k), k.a, res)).or_insert(0.0) += w;
        }
        out
    }

    /// Total variation distance between the coarse histograms.
    pub fn total_variation(&self, other: &EmpiricalMeasure, nbins: usize) -> f64 {
        let p = self.coarse(nbins);
        let q = other.coarse(nbins);
        let mut s = 0.0;
        for (k, v) in &p {
            s += (v - q.get(k).copied().unwrap_or(0.0)).abs();
        }
        for (k, v) in &q {
            if !p.contains_key(k) {
                s += v.abs();
            }
        }
        0.5 * s
    }

    /// Total variation between this measure and its one-step pushforward.
    pub fn stationarity_defect(&self, rho: &GeneratorMeasure, nbins: usize) -> f64 {
        self.total_variation(&self.pushforward(rho), nbins)
    }
}
