//! Finitely supported probability measures on SL_d(R), optionally acting on
//! a finite set `A` by permutations.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::GroupElement;
use crate::proximality::auto_certify;

#[derive(Clone, Debug)]
pub struct Atom {
    pub g: GroupElement,
    pub weight: f64,
    /// Image of each element of `A`; the identity when `A` is trivial.
    pub perm: Vec<usize>,
}

/// Properties asserted by the user about the generated semigroup. They are
/// only spot-checked, see [`GeneratorMeasure::spot_check`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Claims {
    pub strongly_irreducible: bool,
    pub proximal: bool,
}

#[derive(Clone, Debug)]
pub struct GeneratorMeasure {
    atoms: Vec<Atom>,
    a_size: usize,
    dim: usize,
    pub claims: Claims,
    sampler: WeightedIndex<f64>,
}

impl GeneratorMeasure {
    pub fn new(atoms: Vec<(GroupElement, f64)>) -> Result<Self> {
        let n = atoms.len();
        Self::with_action(atoms, vec![vec![0]; n])
    }

    /// `perms[i]` is the permutation of `A = {0, .., m-1}` attached to atom `i`.
    pub fn with_action(atoms: Vec<(GroupElement, f64)>, perms: Vec<Vec<usize>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Measure("no atoms".into()));
        }
        if perms.len() != atoms.len() {
            return Err(Error::Measure("one permutation per atom is required".into()));
        }
        let dim = atoms[0].0.dim();
        if atoms.iter().any(|(g, _)| g.dim() != dim) {
            return Err(Error::Dimension("atoms of different dimensions".into()));
        }
        if atoms.iter().any(|(_, w)| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Measure("weights must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Measure(format!("weights sum to {total}, not 1")));
        }
        let a_size = perms[0].len();
        if a_size == 0 {
            return Err(Error::Measure("A must be nonempty".into()));
        }
        for p in &perms {
            let mut seen = vec![false; a_size];
            if p.len() != a_size {
                return Err(Error::Measure("permutations of different sizes".into()));
            }
            for &i in p {
                if i >= a_size || seen[i] {
                    return Err(Error::Measure(format!("{p:?} is not a permutation")));
                }
                seen[i] = true;
            }
        }
        if a_size > 1 {
            check_chain(&perms, a_size)?;
        }
        let sampler = WeightedIndex::new(atoms.iter().map(|(_, w)| *w)).map_err(|e| Error::Measure(e.to_string()))?;
        let atoms = atoms.into_iter().zip(perms).map(|((g, weight), perm)| Atom { g, weight, perm }).collect();
        Ok(GeneratorMeasure { atoms, a_size, dim, claims: Claims::default(), sampler })
    }

    pub fn dirac(g: GroupElement) -> Self {
        Self::new(vec![(g, 1.0)]).expect("a single atom is a valid measure")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_size(&self) -> usize {
        self.a_size
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.atoms.len() == 1 {
            0
        } else {
            self.sampler.sample(rng)
        }
    }

    /// Transition matrix of the induced chain on `A`.
    pub fn chain_on_a(&self) -> Vec<Vec<f64>> {
        let m = self.a_size;
        let mut p = vec![vec![0.0; m]; m];
        for atom in &self.atoms {
            for a in 0..m {
                p[a][atom.perm[a]] += atom.weight;
            }
        }
        p
    }

    /// Heuristic checks of the claimed properties. Returns warnings.
    pub fn spot_check(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.claims.proximal && !self.has_proximal_word(6) {
            warnings.push("no word of length <= 6 certifies as proximal".to_string());
        }
        if self.claims.strongly_irreducible && self.dim == 2 && self.common_eigenline() {
            warnings.push("all atoms share a real eigenline".to_string());
        }
        warnings
    }

    fn has_proximal_word(&self, max_len: usize) -> bool {
        let mut words = vec![GroupElement::identity(self.dim)];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &words {
                for a in &self.atoms {
                    let p = a.g.mul(w);
                    if auto_certify(&p).is_some() {
                        return true;
                    }
                    next.push(p);
                }
            }
            if next.len() > 4096 {
                next.truncate(4096);
            }
            words = next;
        }
        false
    }

    fn common_eigenline(&self) -> bool {
        let lines: Vec<Vec<[f64; 2]>> = self.atoms.iter().map(|a| real_eigenlines_2d(&a.g)).collect();
        lines[0].iter().any(|l| lines[1..].iter().all(|other| other.iter().any(|m| (l[0] * m[1] - l[1] * m[0]).abs() < 1e-9)))
    }
}

fn real_eigenlines_2d(g: &GroupElement) -> Vec<[f64; 2]> {
    let (a, b, c, d) = (g.entry(0, 0), g.entry(0, 1), g.entry(1, 0), g.entry(1, 1));
    let tr = a + d;
    let disc = tr * tr - 4.0;
    if disc < 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for mu in [(tr + disc.sqrt()) / 2.0, (tr - disc.sqrt()) / 2.0] {
        // (g - mu) v = 0
        let v = if b.abs() > 1e-14 || (a - mu).abs() > 1e-14 { [-b, a - mu] } else { [d - mu, -c] };
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if n > 1e-14 {
            out.push([v[0] / n, v[1] / n]);
        } else {
            // g = mu I: every line is an eigenline
            out.push([1.0, 0.0]);
            out.push([0.0, 1.0]);
        }
    }
    out
}

/// Irreducibility by reachability and aperiodicity by the gcd of cycle
/// lengths (computed from BFS levels).
fn check_chain(perms: &[Vec<usize>], m: usize) -> Result<()> {
    let adj = |u: usize| perms.iter().map(move |p| p[u]);
    let reach_from = |s: usize| {
        let mut level = vec![usize::MAX; m];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in adj(u) {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let level = reach_from(0);
    if level.iter().any(|&l| l == usize::MAX) {
        return Err(Error::Measure("chain on A is not irreducible".into()));
    }
    // Permutation chains are doubly stochastic, so reachability from one
    // state gives strong connectivity.
    let mut g = 0usize;
    for u in 0..m {
        for v in adj(u) {
            let diff = (level[u] + 1).abs_diff(level[v]);
            g = gcd(g, diff);
        }
    }
    if g != 1 {
        return Err(Error::Measure(format!("chain on A has period {g}")));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `½ δ_e + ½ ρ`. The identity atom comes first and keeps the identity
/// permutation on `A`.
pub fn lazy_measure(rho: &GeneratorMeasure) -> GeneratorMeasure {
    let mut atoms = vec![(GroupElement::identity(rho.dim), 0.5)];
    let mut perms = vec![(0..rho.a_size).collect::<Vec<_>>()];
    for a in &rho.atoms {
        atoms.push((a.g.clone(), a.weight / 2.0));
        perms.push(a.perm.clone());
    }
    let mut out = GeneratorMeasure::with_action(atoms, perms).expect("lazy version of a valid measure is valid");
    out.claims = rho.claims;
    out
}

/// The two positive matrices `[[2,1],[1,1]]` and `[[1,1],[1,2]]` with equal
/// weights. They preserve the positive quadrant.
pub fn cone2() -> GeneratorMeasure {
    let a = GroupElement::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).expect("unimodular");
    let b = GroupElement::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]).expect("unimodular");
    let mut m = GeneratorMeasure::new(vec![(a, 0.5), (b, 0.5)]).expect("valid");
    m.claims = Claims { strongly_irreducible: true, proximal: true };
    m
}

/// Same as [`cone2`] with the second generator negated, so the positive
/// cone is sent to its opposite half the time.
pub fn hyperbolic_rotate() -> GeneratorMeasure {
    let a = GroupElement::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).expect("unimodular");
    let b = GroupElement::from_rows(&[vec![-1.0, -1.0], vec![-1.0, -2.0]]).expect("unimodular");
    let mut m = GeneratorMeasure::new(vec![(a, 0.5), (b, 0.5)]).expect("valid");
    m.claims = Claims { strongly_irreducible: true, proximal: true };
    m
}

/// `δ_{diag(e, 1/e)}`: every product has `lambda_1 = n` exactly.
pub fn diag_lattice() -> GeneratorMeasure {
    let e = std::f64::consts::E;
    GeneratorMeasure::dirac(GroupElement::diag(&[e, 1.0 / e]).expect("unimodular"))
}

pub fn builtin(name: &str) -> Option<GeneratorMeasure> {
    match name {
        "cone2" => Some(cone2()),
        "hyperbolic-rotate" => Some(hyperbolic_rotate()),
        "diag-lattice" => Some(diag_lattice()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["cone2", "hyperbolic-rotate", "diag-lattice"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lazy_weights() {
        let g = GroupElement::diag(&[2.0, 0.5]).unwrap();
        let l = lazy_measure(&GeneratorMeasure::dirac(g));
        assert_eq!(l.atoms().len(), 2);
        assert_eq!(l.atoms()[0].weight, 0.5);
        let ll = lazy_measure(&l);
        let id_weight: f64 = ll.atoms().iter().filter(|a| a.g == GroupElement::identity(2)).map(|a| a.weight).sum();
        assert_eq!(id_weight, 0.75);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let g = GroupElement::identity(2);
        assert!(GeneratorMeasure::new(vec![(g.clone(), 0.5), (g, 0.4)]).is_err());
    }

    #[test]
    fn chain_checks() {
        let g = GroupElement::identity(2);
        let swap_only = GeneratorMeasure::with_action(vec![(g.clone(), 1.0)], vec![vec![1, 0]]);
        assert!(matches!(swap_only, Err(Error::Measure(m)) if m.contains("period")));
        let fixed = GeneratorMeasure::with_action(vec![(g.clone(), 1.0)], vec![vec![0, 1]]);
        assert!(matches!(fixed, Err(Error::Measure(m)) if m.contains("irreducible")));
        let ok = GeneratorMeasure::with_action(vec![(g.clone(), 0.3), (g.clone(), 0.7)], vec![vec![1, 0], vec![0, 1]]);
        assert!(ok.is_ok());
        assert!(GeneratorMeasure::with_action(vec![(g, 1.0)], vec![vec![0, 0]]).is_err());
    }

    #[test]
    fn builtin_spot_checks_pass() {
        for name in BUILTIN_NAMES {
            let m = builtin(name).unwrap();
            assert!(m.spot_check().is_empty(), "{name}");
        }
        let mut d = diag_lattice();
        d.claims.strongly_irreducible = true;
        d.claims.proximal = true;
        d = GeneratorMeasure { claims: d.claims, ..d };
        let two = GeneratorMeasure::new(vec![(d.atoms()[0].g.clone(), 0.5), (GroupElement::diag(&[3.0, 1.0 / 3.0]).unwrap(), 0.5)]).unwrap();
        let two = GeneratorMeasure { claims: Claims { strongly_irreducible: true, proximal: true }, ..two };
        assert_eq!(two.spot_check().len(), 1);
    }
}
