use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Barycentric weights below this are dropped before renormalizing.
const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Kind {
    /// `θ_j = 2πj/n`.
    Circle { n: usize },
    /// Subdivided icosahedron; `inv[f]` maps a vector to the (unnormalized)
    /// barycentric coordinates of face `f`.
    Icosphere { faces: Vec<[usize; 3]>, inv: Vec<Matrix3<f64>> },
}

/// Points of `S^{d-1} × A`. State `(i, a)` has index `a * m + i` where `m`
/// is the number of sphere points.
#[derive(Clone, Debug)]
pub struct StateGrid {
    kind: Kind,
    dim: usize,
    a_size: usize,
    sphere: Vec<Vec<f64>>,
    antipode: Vec<usize>,
    cell_radius: f64,
}

impl StateGrid {
    /// Uniform circle grid with `n ≡ 2 (mod 4)` points, so that `±e_1` are
    /// grid points while `±e_2` are not.
    pub fn circle(n: usize, a_size: usize) -> Result<Self> {
        if n < 6 || n % 4 != 2 || a_size == 0 {
            return Err(Error::Grid(format!("circle grid needs n ≡ 2 mod 4 and n >= 6, got {n}")));
        }
        let h = 2.0 * PI / n as f64;
        let sphere = (0..n).map(|j| vec![(h * j as f64).cos(), (h * j as f64).sin()]).collect();
        let antipode = (0..n).map(|j| (j + n / 2) % n).collect();
        Ok(StateGrid { kind: Kind::Circle { n }, dim: 2, a_size, sphere, antipode, cell_radius: 2.0 * (h / 4.0).sin() })
    }

    /// Icosphere refined `level` times (`10·4^level + 2` points).
    pub fn icosphere(level: usize, a_size: usize) -> Result<Self> {
        if level > 5 || a_size == 0 {
            return Err(Error::Grid(format!("icosphere level {level} unsupported")));
        }
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vector3<f64>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid = std::collections::HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
                let key = (a.min(b), a.max(b));
                *mid.entry(key).or_insert_with(|| {
                    verts.push((verts[a] + verts[b]).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for f in &faces {
                let ab = midpoint(f[0], f[1], &mut verts);
                let bc = midpoint(f[1], f[2], &mut verts);
                let ca = midpoint(f[2], f[0], &mut verts);
                next.push([f[0], ab, ca]);
                next.push([f[1], bc, ab]);
                next.push([f[2], ca, bc]);
                next.push([ab, bc, ca]);
            }
            faces = next;
        }
        let inv = faces
            .iter()
            .map(|f| Matrix3::from_columns(&[verts[f[0]], verts[f[1]], verts[f[2]]]).try_inverse().expect("nondegenerate face"))
            .collect();
        let mut antipode = vec![usize::MAX; verts.len()];
        for (i, v) in verts.iter().enumerate() {
            let (j, d) = verts.iter().enumerate().map(|(j, w)| (j, (v + w).norm())).min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty");
            if d > 1e-9 {
                return Err(Error::Grid("icosphere is not antipodally closed".into()));
            }
            antipode[i] = j;
        }
        let mut cell_radius: f64 = 0.0;
        for f in &faces {
            let c = (verts[f[0]] + verts[f[1]] + verts[f[2]]).normalize();
            for &k in f {
                cell_radius = cell_radius.max((c - verts[k]).norm());
            }
        }
        let sphere = verts.iter().map(|v| vec![v[0], v[1], v[2]]).collect();
        Ok(StateGrid { kind: Kind::Icosphere { faces, inv }, dim: 3, a_size, sphere, antipode, cell_radius })
    }

    /// Default grid: circle with `n` points for `d = 2`, an icosphere of
    /// comparable spacing for `d = 3`.
    pub fn for_dim(dim: usize, n: usize, a_size: usize) -> Result<Self> {
        match dim {
            2 => Self::circle(n, a_size),
            3 => {
                let mut level = 0;
                while 10 * 4usize.pow(level as u32) + 2 < n && level < 5 {
                    level += 1;
                }
                Self::icosphere(level, a_size)
            }
            _ => Err(Error::Grid(format!("no grid for dimension {dim}"))),
        }
    }

    /// The same kind of grid with about twice the linear resolution.
    pub fn refined(&self) -> Result<Self> {
        match &self.kind {
            Kind::Circle { n } => Self::circle(2 * n + 2, self.a_size),
            Kind::Icosphere { .. } => {
                let level = (((self.sphere.len() - 2) / 10) as f64).log(4.0).round() as usize;
                Self::icosphere(level + 1, self.a_size)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_size(&self) -> usize {
        self.a_size
    }

    /// Number of sphere points.
    pub fn sphere_len(&self) -> usize {
        self.sphere.len()
    }

    /// Number of states `|sphere| · |A|`.
    pub fn len(&self) -> usize {
        self.sphere.len() * self.a_size
    }

    pub fn is_empty(&self) -> bool {
        self.sphere.is_empty()
    }

    pub fn sphere_point(&self, i: usize) -> &[f64] {
        &self.sphere[i]
    }

    /// Sphere point and `A` coordinate of a state.
    pub fn state(&self, s: usize) -> (&[f64], usize) {
        let m = self.sphere.len();
        (&self.sphere[s % m], s / m)
    }

    pub fn index(&self, i: usize, a: usize) -> usize {
        a * self.sphere.len() + i
    }

    /// `ϑ(x, a) = (-x, a)`.
    pub fn antipode(&self, s: usize) -> usize {
        let m = self.sphere.len();
        (s / m) * m + self.antipode[s % m]
    }

    /// Every unit vector lies within this chordal distance of a grid point.
    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    /// Interpolation weights of a (not necessarily unit) nonzero vector
    /// among sphere points; weights are nonnegative and sum to one.
    pub fn locate(&self, y: &[f64]) -> Result<Vec<(usize, f64)>> {
        let mut out = match &self.kind {
            Kind::Circle { n } => {
                let h = 2.0 * PI / *n as f64;
                let mut th = y[1].atan2(y[0]);
                if th < 0.0 {
                    th += 2.0 * PI;
                }
                let u = th / h;
                if !u.is_finite() {
                    return Err(Error::Grid("image point is not finite".into()));
                }
                let j = (u.floor() as usize) % n;
                let frac = u - u.floor();
                vec![(j, 1.0 - frac), ((j + 1) % n, frac)]
            }
            Kind::Icosphere { faces, inv } => {
                let v = Vector3::new(y[0], y[1], y[2]);
                let mut found = None;
                let mut best = (f64::NEG_INFINITY, 0usize);
                for (k, m) in inv.iter().enumerate() {
                    let b = m * v;
                    let lo = b.min();
                    if lo >= -1e-12 * b.abs().max() {
                        found = Some((k, b));
                        break;
                    }
                    if lo > best.0 {
                        best = (lo, k);
                    }
                }
                let (k, b) = match found {
                    Some(x) => x,
                    // Points on a shared edge can miss every face by rounding.
                    None if best.0 > -1e-9 => (best.1, inv[best.1] * v),
                    None => return Err(Error::Grid("point not covered by any face".into())),
                };
                let b = b.map(|x| x.max(0.0));
                let s = b.sum();
                faces[k].iter().zip(b.iter()).map(|(&i, &w)| (i, w / s)).collect()
            }
        };
        out.retain(|&(_, w)| w >= WEIGHT_FLOOR);
        let s: f64 = out.iter().map(|p| p.1).sum();
        if out.is_empty() || !(s > 0.0) {
            return Err(Error::Grid("interpolation weights vanished".into()));
        }
        for p in &mut out {
            p.1 /= s;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_antipodes_and_cover() {
        let g = StateGrid::circle(254, 2).unwrap();
        assert_eq!(g.len(), 508);
        for s in 0..g.len() {
            let t = g.antipode(s);
            assert_ne!(s, t);
            assert_eq!(g.antipode(t), s);
            let (x, a) = g.state(s);
            let (y, b) = g.state(t);
            assert_eq!(a, b);
            assert!((x[0] + y[0]).abs() < 1e-12 && (x[1] + y[1]).abs() < 1e-12);
        }
        assert!(StateGrid::circle(256, 1).is_err());
    }

    #[test]
    fn grid_points_locate_to_themselves() {
        let g = StateGrid::circle(30, 1).unwrap();
        for i in 0..30 {
            assert_eq!(g.locate(g.sphere_point(i)).unwrap(), vec![(i, 1.0)]);
        }
        let ico = StateGrid::icosphere(2, 1).unwrap();
        for i in 0..ico.sphere_len() {
            let w = ico.locate(ico.sphere_point(i)).unwrap();
            assert_eq!(w, vec![(i, 1.0)]);
        }
    }

    #[test]
    fn icosphere_interpolates_linear_functions_nearly() {
        let g = StateGrid::icosphere(3, 1).unwrap();
        assert_eq!(g.sphere_len(), 642);
        let y = [0.3, -0.5, 0.81];
        let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) as f64;
        let w = g.locate(&y).unwrap();
        let z: f64 = w.iter().map(|&(i, c)| c * g.sphere_point(i)[2]).sum();
        assert!((z - y[2] / n.sqrt()).abs() < 2.0 * g.cell_radius().powi(2));
        for s in 0..g.len() {
            assert_eq!(g.antipode(g.antipode(s)), s);
        }
    }
}
