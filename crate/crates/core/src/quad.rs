//! Adaptive one-dimensional quadrature on top of the double exponential rule.

use crate::error::{Error, Result};

/// Integral with an estimate of its absolute error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Quad {
    type Output = Quad;
    fn add(self, o: Quad) -> Quad {
        Quad { value: self.value + o.value, error: self.error + o.error }
    }
}

/// Cap on the number of subintervals kept by [`integrate`].
const MAX_PIECES: usize = 4096;

/// Relative accuracy below which error estimates are rounding noise.
const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

struct Piece {
    a: f64,
    b: f64,
    q: Quad,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.q.error.total_cmp(&o.q.error).is_eq()
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.q.error.total_cmp(&o.q.error)
    }
}

/// `∫_a^b f`, refining the piece with the largest error estimate until the
/// summed estimate meets `tol` or the rounding floor. The integrand should be smooth inside
/// `(a, b)`; pass kinks as `breaks`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<Quad> {
    if a == b {
        return Ok(Quad::default());
    }
    if a > b {
        let q = integrate(f, b, a, breaks, tol)?;
        return Ok(Quad { value: -q.value, error: q.error });
    }
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(b);
    let rule = |a: f64, b: f64| {
        let share = tol / 8.0;
        let out = quadrature::integrate(f, a, b, share);
        Piece { a, b, q: Quad { value: out.integral, error: out.error_estimate } }
    };
    let mut heap: std::collections::BinaryHeap<Piece> = pts.windows(2).map(|w| rule(w[0], w[1])).collect();
    loop {
        let error: f64 = heap.iter().map(|p| p.q.error).sum();
        let floor = ROUNDOFF * heap.iter().map(|p| p.q.value.abs()).sum::<f64>();
        if error <= tol.max(floor) {
            let value = heap.iter().map(|p| p.q.value).sum();
            return Ok(Quad { value, error });
        }
        let worst = heap.pop().expect("at least one piece");
        let m = 0.5 * (worst.a + worst.b);
        if heap.len() + 2 > MAX_PIECES || m <= worst.a || m >= worst.b {
            return Err(Error::Quadrature(format!("no convergence on [{a}, {b}]: error {error:e} > {tol:e} near [{}, {}]", worst.a, worst.b)));
        }
        heap.push(rule(worst.a, m));
        heap.push(rule(m, worst.b));
    }
}

/// `∫_a^∞ f` over consecutive windows of length `window`, stopping once
/// `quiet` windows in a row contribute less than `tol / 16` in absolute
/// value. The remaining tail is not estimated beyond that; `max_windows`
/// bounds the work.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, window: f64, breaks: &[f64], tol: f64, max_windows: usize) -> Result<Quad> {
    let quiet = 3;
    let mut total = Quad::default();
    let mut calm = 0;
    for k in 0..max_windows {
        let lo = a + k as f64 * window;
        let piece = integrate(f, lo, lo + window, breaks, tol / 16.0)?;
        total = total + piece;
        if piece.value.abs() + piece.error < tol / 16.0 {
            calm += 1;
            if calm >= quiet {
                return Ok(total);
            }
        } else {
            calm = 0;
        }
    }
    Err(Error::Quadrature(format!("integrand has not decayed after {max_windows} windows of length {window}")))
}

/// `∫_{-∞}^∞ f`, split at `center`.
pub fn integrate_line<F: Fn(f64) -> f64>(f: &F, center: f64, window: f64, breaks: &[f64], tol: f64, max_windows: usize) -> Result<Quad> {
    let right = integrate_to_infinity(f, center, window, breaks, tol / 2.0, max_windows)?;
    let mirrored: Vec<f64> = breaks.iter().map(|b| 2.0 * center - b).collect();
    let left = integrate_to_infinity(&|u: f64| f(2.0 * center - u), center, window, &mirrored, tol / 2.0, max_windows)?;
    Ok(right + left)
}
