//! Outcomes and per-atom finite-support random measures.

use super::levy::{levy_distance, VPlusPath};
use super::order::stochastic_order_leq;
use super::prokhorov::levy_prokhorov;
use crate::error::{invalid, Error, Result};
use crate::prob_tree::{PathRecord, ScenarioTree};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Per-atom normalisation tolerance.
pub const NORM_TOL: f64 = 1e-12;

/// An element of the outcome space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Path(VPlusPath),
    Vector(Vec<f64>),
    Composite { path: VPlusPath, vector: Vec<f64> },
}

impl Outcome {
    /// Coordinates used for ordering, equality and `≤_p` projections.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Outcome::Path(p) => p.values().to_vec(),
            Outcome::Vector(v) => v.clone(),
            Outcome::Composite { path, vector } => path.values().iter().chain(vector).copied().collect(),
        }
    }

    /// Apply a nondecreasing map to every coordinate.
    pub fn map_coords(&self, g: impl Fn(f64) -> f64) -> Result<Outcome> {
        let path = |p: &VPlusPath| VPlusPath::new(p.times().to_vec(), p.values().iter().map(|&v| g(v)).collect());
        Ok(match self {
            Outcome::Path(p) => Outcome::Path(path(p)?),
            Outcome::Vector(v) => Outcome::Vector(v.iter().map(|&x| g(x)).collect()),
            Outcome::Composite { path: p, vector } => {
                Outcome::Composite { path: path(p)?, vector: vector.iter().map(|&x| g(x)).collect() }
            }
        })
    }

    fn kind(&self) -> u8 {
        match self {
            Outcome::Path(_) => 0,
            Outcome::Vector(_) => 1,
            Outcome::Composite { .. } => 2,
        }
    }

    /// Lévy distance for paths, sup-norm for vectors, the larger of both for composites.
    pub fn distance(&self, other: &Outcome) -> Result<f64> {
        fn sup(a: &[f64], b: &[f64]) -> Result<f64> {
            if a.len() != b.len() {
                return Err(Error::Mismatch("vector outcomes of different length".into()));
            }
            Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        }
        match (self, other) {
            (Outcome::Path(a), Outcome::Path(b)) => levy_distance(a, b, a.horizon()),
            (Outcome::Vector(a), Outcome::Vector(b)) => sup(a, b),
            (Outcome::Composite { path: p1, vector: v1 }, Outcome::Composite { path: p2, vector: v2 }) => {
                Ok(levy_distance(p1, p2, p1.horizon())?.max(sup(v1, v2)?))
            }
            _ => Err(Error::Mismatch("outcomes of different kinds".into())),
        }
    }

    fn cmp_key(&self, other: &Outcome) -> Ordering {
        self.kind().cmp(&other.kind()).then_with(|| {
            let (a, b) = (self.coords(), other.coords());
            for (x, y) in a.iter().zip(&b) {
                match x.total_cmp(y) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            a.len().cmp(&b.len())
        })
    }
}

/// Weighted support point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub w: f64,
    pub outcome: Outcome,
}

/// Law of the outcome on one common-noise atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomLaw {
    pub atom: usize,
    /// Probability of the atom itself.
    pub weight_total: f64,
    pub support: Vec<Weighted>,
}

/// `G`-measurable random measure over a finite partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMeasure {
    pub atoms: Vec<AtomLaw>,
}

impl AtomLaw {
    fn points(&self) -> Vec<(f64, Vec<f64>)> {
        self.support.iter().map(|s| (s.w, s.outcome.coords())).collect()
    }

    /// Sort by coordinates and merge exactly equal outcomes.
    fn canonicalize(&mut self) {
        self.support.sort_by(|a, b| a.outcome.cmp_key(&b.outcome));
        let mut merged: Vec<Weighted> = Vec::with_capacity(self.support.len());
        for s in self.support.drain(..) {
            match merged.last_mut() {
                Some(last) if last.outcome == s.outcome => last.w += s.w,
                _ => merged.push(s),
            }
        }
        self.support = merged;
    }
}

impl RandomMeasure {
    /// Same outcome with weight 1 on every atom.
    pub fn dirac(atoms: &[(usize, f64)], outcome: Outcome) -> Self {
        RandomMeasure {
            atoms: atoms
                .iter()
                .map(|&(atom, weight_total)| AtomLaw {
                    atom,
                    weight_total,
                    support: vec![Weighted { w: 1.0, outcome: outcome.clone() }],
                })
                .collect(),
        }
    }

    /// Non-negative weights, each atom normalised to 1 within [`NORM_TOL`].
    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return invalid("measure has no atoms");
        }
        for a in &self.atoms {
            if a.support.is_empty() {
                return invalid(format!("atom {} has empty support", a.atom));
            }
            if a.support.iter().any(|s| !(s.w.is_finite() && s.w >= 0.0)) {
                return invalid(format!("atom {} has a negative or non-finite weight", a.atom));
            }
            let total: f64 = a.support.iter().map(|s| s.w).sum();
            if (total - 1.0).abs() > NORM_TOL {
                return invalid(format!("atom {} weights sum to {total}", a.atom));
            }
        }
        Ok(())
    }

    /// Sorted supports with exactly equal outcomes merged.
    pub fn canonicalize(&mut self) {
        self.atoms.sort_by_key(|a| a.atom);
        for a in &mut self.atoms {
            a.canonicalize();
        }
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Merge outcomes closer than `merge_tol`, drop weights below `drop_tol`, renormalise.
    pub fn prune(&mut self, merge_tol: f64, drop_tol: f64) -> Result<()> {
        self.canonicalize();
        for a in &mut self.atoms {
            let mut kept: Vec<Weighted> = Vec::new();
            'next: for s in a.support.drain(..) {
                for k in kept.iter_mut() {
                    if k.outcome.distance(&s.outcome)? < merge_tol {
                        k.w += s.w;
                        continue 'next;
                    }
                }
                kept.push(s);
            }
            kept.retain(|s| s.w >= drop_tol);
            let total: f64 = kept.iter().map(|s| s.w).sum();
            if kept.is_empty() || total <= 0.0 {
                return invalid(format!("atom {} lost all its mass while pruning", a.atom));
            }
            for s in &mut kept {
                s.w /= total;
            }
            a.support = kept;
        }
        Ok(())
    }

    fn check_atoms(&self, other: &RandomMeasure) -> Result<()> {
        if self.atoms.len() != other.atoms.len() || self.atoms.iter().zip(&other.atoms).any(|(a, b)| a.atom != b.atom) {
            return Err(Error::Mismatch("measures live on different atoms".into()));
        }
        Ok(())
    }

    /// `(1 − θ)·self + θ·other` atom by atom.
    pub fn mix(&self, other: &RandomMeasure, theta: f64) -> Result<RandomMeasure> {
        let a = self.clone().canonical();
        let b = other.clone().canonical();
        a.check_atoms(&b)?;
        let atoms = a
            .atoms
            .iter()
            .zip(&b.atoms)
            .map(|(x, y)| {
                let mut support: Vec<Weighted> = x
                    .support
                    .iter()
                    .map(|s| Weighted { w: (1.0 - theta) * s.w, outcome: s.outcome.clone() })
                    .collect();
                support.extend(y.support.iter().map(|s| Weighted { w: theta * s.w, outcome: s.outcome.clone() }));
                support.retain(|s| s.w > 0.0);
                let mut law = AtomLaw { atom: x.atom, weight_total: x.weight_total, support };
                law.canonicalize();
                law
            })
            .collect();
        Ok(RandomMeasure { atoms })
    }

    /// `max` over atoms of the Lévy–Prokhorov distance of the per-atom laws.
    pub fn distance(&self, other: &RandomMeasure) -> Result<f64> {
        let a = self.clone().canonical();
        let b = other.clone().canonical();
        a.check_atoms(&b)?;
        let mut worst: f64 = 0.0;
        for (x, y) in a.atoms.iter().zip(&b.atoms) {
            let dist: Vec<Vec<f64>> = x
                .support
                .par_iter()
                .map(|s| y.support.iter().map(|t| s.outcome.distance(&t.outcome)).collect::<Result<Vec<f64>>>())
                .collect::<Result<_>>()?;
            let mu: Vec<f64> = x.support.iter().map(|s| s.w).collect();
            let nu: Vec<f64> = y.support.iter().map(|s| s.w).collect();
            worst = worst.max(levy_prokhorov(&mu, &nu, &dist)?);
        }
        Ok(worst)
    }

    /// `self ≤_p other` on every atom, on coordinate projections.
    pub fn leq(&self, other: &RandomMeasure) -> Result<bool> {
        let a = self.clone().canonical();
        let b = other.clone().canonical();
        a.check_atoms(&b)?;
        for (x, y) in a.atoms.iter().zip(&b.atoms) {
            if !stochastic_order_leq(&x.points(), &y.points())? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Exact equality of canonical forms.
    pub fn same_as(&self, other: &RandomMeasure) -> bool {
        self.clone().canonical() == other.clone().canonical()
    }

    /// Atom labels and masses.
    pub fn atom_masses(&self) -> Vec<(usize, f64)> {
        self.atoms.iter().map(|a| (a.atom, a.weight_total)).collect()
    }

    /// Law on a given atom.
    pub fn atom(&self, atom: usize) -> Option<&AtomLaw> {
        self.atoms.iter().find(|a| a.atom == atom)
    }

    /// Largest support size over atoms.
    pub fn max_support(&self) -> usize {
        self.atoms.iter().map(|a| a.support.len()).max().unwrap_or(0)
    }
}

/// Per-atom law of `functional(path)`: path probability over atom probability.
pub fn conditional_law(tree: &ScenarioTree, functional: impl Fn(&PathRecord) -> Result<Outcome>) -> Result<RandomMeasure> {
    let mut atoms = Vec::new();
    for label in tree.atoms() {
        let mass = tree.atom_mass(label);
        if mass <= 0.0 {
            return invalid(format!("atom {label} has zero probability"));
        }
        let mut support = Vec::new();
        for p in tree.paths().iter().filter(|p| p.atom == label) {
            support.push(Weighted { w: p.prob / mass, outcome: functional(p)? });
        }
        let mut law = AtomLaw { atom: label, weight_total: mass, support };
        law.canonicalize();
        atoms.push(law);
    }
    Ok(RandomMeasure { atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_tree::TimeGrid;
    use std::collections::BTreeMap;

    #[test]
    fn single_atom_leaf_law() {
        let tree = ScenarioTree::with_branch_probs(TimeGrid::new(1.0, 1).unwrap(), &[0.25, 0.75]).unwrap();
        let m = conditional_law(&tree, |p| Ok(Outcome::Vector(vec![p.leaf() as f64]))).unwrap();
        let w: Vec<f64> = m.atoms[0].support.iter().map(|s| s.w).collect();
        assert_eq!(w, vec![0.25, 0.75]);
        m.validate().unwrap();
    }

    #[test]
    fn two_atoms_renormalise() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let base = ScenarioTree::with_branch_probs(grid, &[0.2, 0.3, 0.5]).unwrap();
        let atoms: BTreeMap<usize, usize> = [(1, 0), (2, 0), (3, 1)].into_iter().collect();
        let tree = ScenarioTree::new(grid, base.nodes().to_vec(), atoms).unwrap();
        let m = conditional_law(&tree, |p| Ok(Outcome::Vector(vec![p.leaf() as f64]))).unwrap();
        assert_eq!(m.atoms.len(), 2);
        assert!((m.atoms[0].support[0].w - 0.4).abs() < 1e-15);
        assert!((m.atoms[0].support[1].w - 0.6).abs() < 1e-15);
        assert_eq!(m.atoms[1].support[0].w, 1.0);
        assert!((m.atoms[0].weight_total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixing_and_distance() {
        let a = RandomMeasure::dirac(&[(0, 1.0)], Outcome::Vector(vec![0.0]));
        let b = RandomMeasure::dirac(&[(0, 1.0)], Outcome::Vector(vec![0.3]));
        assert!((a.distance(&b).unwrap() - 0.3).abs() < 1e-15);
        let m = a.mix(&b, 0.5).unwrap();
        m.validate().unwrap();
        assert_eq!(m.atoms[0].support.len(), 2);
        assert!(a.leq(&m).unwrap() && m.leq(&b).unwrap());
        assert!(!b.leq(&a).unwrap());
    }

    #[test]
    fn prune_merges_close_outcomes() {
        let a = RandomMeasure::dirac(&[(0, 1.0)], Outcome::Vector(vec![0.0]));
        let b = RandomMeasure::dirac(&[(0, 1.0)], Outcome::Vector(vec![1e-12]));
        let mut m = a.mix(&b, 0.5).unwrap();
        m.prune(1e-9, 1e-12).unwrap();
        assert_eq!(m.atoms[0].support.len(), 1);
        assert_eq!(m.atoms[0].support[0].w, 1.0);
    }

    #[test]
    fn json_shape() {
        let p = VPlusPath::new(vec![0.0, 0.5, 1.0], vec![-1.0, 0.0]).unwrap();
        let m = RandomMeasure::dirac(&[(0, 1.0)], Outcome::Path(p));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"v0\":\"-inf\""));
        assert!(s.contains("\"weight_total\""));
        let back: RandomMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
