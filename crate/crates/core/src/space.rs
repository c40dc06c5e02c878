//! Finite probability spaces and the σ-algebras living on them.
//!
//! A probability space is a list of strictly positive atom weights. Every
//! σ-algebra is atomized and represented as a [`Partition`] of the atoms, so
//! conditional expectation is a weighted block average.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Finite probability space: atom `i` carries probability `weights[i] > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpace {
    weights: Vec<f64>,
}

impl AtomSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("atom space needs at least one atom"));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!(
                "atom {i} has non-positive weight {}",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(AtomSpace { weights })
    }

    /// `n` atoms of weight `1/n` each.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("atom space needs at least one atom"));
        }
        Ok(AtomSpace {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn atom_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.atom_count() {
            return Err(Error::invalid(format!(
                "{what} has {len} atoms but the space has {}",
                self.atom_count()
            )));
        }
        Ok(())
    }
}

/// An `L^p` exponent. `p` may lie in `(0, 1)` (quasi-norm) or be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl From<f64> for Exponent {
    fn from(p: f64) -> Self {
        if p == f64::INFINITY {
            Exponent::Infinity
        } else {
            Exponent::Finite(p)
        }
    }
}

/// A σ-algebra on the atoms: atom `i` lies in block `block_of[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    block_of: Vec<usize>,
    block_count: usize,
}

impl Partition {
    /// Validates that block labels are exactly `0..block_count` with no empty
    /// block.
    pub fn new(block_of: Vec<usize>) -> Result<Self> {
        if block_of.is_empty() {
            return Err(Error::invalid("partition of an empty atom set"));
        }
        let block_count = block_of.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; block_count];
        for &b in &block_of {
            seen[b] = true;
        }
        if let Some(b) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("block {b} is empty")));
        }
        Ok(Partition {
            block_of,
            block_count,
        })
    }

    /// Builds a partition from explicit blocks of atom indices.
    pub fn from_blocks(atom_count: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut block_of = vec![usize::MAX; atom_count];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid(format!("block {b} is empty")));
            }
            for &atom in block {
                if atom >= atom_count {
                    return Err(Error::invalid(format!("atom {atom} out of range")));
                }
                if block_of[atom] != usize::MAX {
                    return Err(Error::invalid(format!("atom {atom} listed twice")));
                }
                block_of[atom] = b;
            }
        }
        if let Some(atom) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::invalid(format!("atom {atom} is in no block")));
        }
        Partition::new(block_of)
    }

    /// Relabels arbitrary block keys into a partition numbered by first
    /// appearance.
    pub fn from_labels<K: Eq + std::hash::Hash>(
        labels: impl IntoIterator<Item = K>,
    ) -> Result<Self> {
        let mut ids = std::collections::HashMap::new();
        let block_of: Vec<usize> = labels
            .into_iter()
            .map(|k| {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            })
            .collect();
        Partition::new(block_of)
    }

    /// Every atom in its own block.
    pub fn discrete(atom_count: usize) -> Self {
        Partition {
            block_of: (0..atom_count).collect(),
            block_count: atom_count,
        }
    }

    /// A single block.
    pub fn trivial(atom_count: usize) -> Self {
        Partition {
            block_of: vec![0; atom_count],
            block_count: 1,
        }
    }

    pub fn atom_count(&self) -> usize {
        self.block_of.len()
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    pub fn block(&self, atom: usize) -> usize {
        self.block_of[atom]
    }

    pub fn is_discrete(&self) -> bool {
        self.block_count == self.atom_count()
    }

    /// Atom lists of every block, in block order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.block_count];
        for (atom, &b) in self.block_of.iter().enumerate() {
            blocks[b].push(atom);
        }
        blocks
    }

    /// Same σ-algebra, regardless of block labels.
    pub fn same_sigma_algebra(&self, other: &Partition) -> bool {
        self.atom_count() == other.atom_count()
            && self.block_count == other.block_count
            && coarsens(self, other)
    }
}

/// True iff every block of `fine` lies inside one block of `coarse`.
pub fn is_coarsening(coarse: &Partition, fine: &Partition) -> Result<bool> {
    if coarse.atom_count() != fine.atom_count() {
        return Err(Error::invalid(format!(
            "partitions over {} and {} atoms",
            coarse.atom_count(),
            fine.atom_count()
        )));
    }
    Ok(coarsens(coarse, fine))
}

fn coarsens(coarse: &Partition, fine: &Partition) -> bool {
    let mut image = vec![usize::MAX; fine.block_count];
    for (atom, &fb) in fine.block_of.iter().enumerate() {
        let cb = coarse.block_of[atom];
        if image[fb] == usize::MAX {
            image[fb] = cb;
        } else if image[fb] != cb {
            return false;
        }
    }
    true
}

/// Decreasing chain `G_0 ⊇ G_1 ⊇ …` with `G_0` the discrete σ-algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardFiltration {
    levels: Vec<Partition>,
}

impl BackwardFiltration {
    pub fn new(levels: Vec<Partition>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::invalid("filtration needs at least one level"))?;
        if !first.is_discrete() {
            return Err(Error::invalid(
                "level 0 of a backward filtration must be discrete",
            ));
        }
        for (n, pair) in levels.windows(2).enumerate() {
            if !is_coarsening(&pair[1], &pair[0])? {
                return Err(Error::invalid(format!(
                    "level {} does not coarsen level {n}",
                    n + 1
                )));
            }
        }
        Ok(BackwardFiltration { levels })
    }

    pub fn atom_count(&self) -> usize {
        self.levels[0].atom_count()
    }

    /// Index of the last level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &Partition {
        &self.levels[n]
    }

    /// Smallest `D` such that every level `n ≥ D` equals level `D`.
    pub fn stabilization_depth(&self) -> usize {
        let last = self.levels.last().expect("nonempty");
        let mut d = self.depth();
        while d > 0 && self.levels[d - 1].block_count() == last.block_count() {
            // levels coarsen monotonically, so equal block counts mean equal σ-algebras
            d -= 1;
        }
        d
    }
}

/// Increasing chain of partitions `U_0 ⊆ U_1 ⊆ …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardFiltration {
    levels: Vec<Partition>,
    binary_splitting: bool,
}

impl ForwardFiltration {
    /// With `binary_splitting` set, every block must split into at most two
    /// blocks at the next level.
    pub fn new(levels: Vec<Partition>, binary_splitting: bool) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("filtration needs at least one level"));
        }
        for (i, pair) in levels.windows(2).enumerate() {
            if !is_coarsening(&pair[0], &pair[1])? {
                return Err(Error::invalid(format!(
                    "level {} does not refine level {i}",
                    i + 1
                )));
            }
            if binary_splitting && max_split(&pair[0], &pair[1]) > 2 {
                return Err(Error::invalid(format!(
                    "level {i} has a block split into more than two blocks"
                )));
            }
        }
        Ok(ForwardFiltration {
            levels,
            binary_splitting,
        })
    }

    /// Standard dyadic filtration on `2^m` uniform atoms: level `j` has the
    /// `2^j` intervals of length `2^(m-j)`.
    pub fn dyadic(m: u32) -> Result<Self> {
        if m >= usize::BITS - 1 {
            return Err(Error::range(format!("2^{m} atoms")));
        }
        let n = 1usize << m;
        let levels = (0..=m)
            .map(|j| Partition {
                block_of: (0..n).map(|i| i >> (m - j)).collect(),
                block_count: 1 << j,
            })
            .collect();
        Ok(ForwardFiltration {
            levels,
            binary_splitting: true,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.levels[0].atom_count()
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &Partition {
        &self.levels[i]
    }

    pub fn binary_splitting(&self) -> bool {
        self.binary_splitting
    }
}

/// Largest number of `fine` blocks inside a single `coarse` block.
/// Assumes `fine` refines `coarse`.
pub(crate) fn max_split(coarse: &Partition, fine: &Partition) -> usize {
    let mut counted = vec![false; fine.block_count];
    let mut children = vec![0usize; coarse.block_count];
    for (atom, &fb) in fine.block_of.iter().enumerate() {
        if !counted[fb] {
            counted[fb] = true;
            children[coarse.block_of[atom]] += 1;
        }
    }
    children.into_iter().max().unwrap_or(0)
}

/// A real-valued function on the atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    values: Vec<f64>,
}

impl Observable {
    pub fn new(values: Vec<f64>) -> Self {
        Observable { values }
    }

    pub fn zeros(n: usize) -> Self {
        Observable::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Observable { values: vec![c; n] }
    }

    /// Indicator of a single atom.
    pub fn indicator(n: usize, atom: usize) -> Self {
        let mut values = vec![0.0; n];
        values[atom] = 1.0;
        Observable { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, atom: usize) -> f64 {
        self.values[atom]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Observable {
        Observable::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination; panics on length mismatch.
    pub fn zip_with(&self, other: &Observable, f: impl Fn(f64, f64) -> f64) -> Observable {
        assert_eq!(self.len(), other.len(), "observable length mismatch");
        Observable::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Observable {
        self.map(|v| c * v)
    }

    /// `self += c·other` in place.
    pub fn add_scaled(&mut self, c: f64, other: &Observable) {
        assert_eq!(self.len(), other.len(), "observable length mismatch");
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Largest pointwise `|self − other|`.
    pub fn max_abs_diff(&self, other: &Observable) -> f64 {
        assert_eq!(self.len(), other.len(), "observable length mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `Σ_i w_i·values[i]`.
    pub fn integral(&self, space: &AtomSpace) -> Result<f64> {
        space.check_len(self.len(), "observable")?;
        Ok(self
            .values
            .iter()
            .zip(space.weights())
            .map(|(v, w)| v * w)
            .sum())
    }
}

impl Add for &Observable {
    type Output = Observable;
    fn add(self, rhs: &Observable) -> Observable {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Observable {
    type Output = Observable;
    fn sub(self, rhs: &Observable) -> Observable {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Observable {
    type Output = Observable;
    fn mul(self, rhs: &Observable) -> Observable {
        self.zip_with(rhs, |a, b| a * b)
    }
}

fn check_exponent(p: Exponent) -> Result<()> {
    match p {
        Exponent::Finite(p) if !(p > 0.0 && p.is_finite()) => {
            Err(Error::invalid(format!("exponent p = {p} must be positive")))
        }
        _ => Ok(()),
    }
}

/// `Σ_i w_i |values[i]|^p` for finite `p`.
pub fn lp_norm_pow(obs: &Observable, p: f64, space: &AtomSpace) -> Result<f64> {
    check_exponent(Exponent::Finite(p))?;
    space.check_len(obs.len(), "observable")?;
    Ok(weighted_power_sum(obs.values(), space.weights(), p))
}

pub(crate) fn weighted_power_sum(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let pow = |v: f64| {
        let a = v.abs();
        if p == 1.0 {
            a
        } else if p == 2.0 {
            a * a
        } else {
            a.powf(p)
        }
    };
    values.iter().zip(weights).map(|(&v, &w)| w * pow(v)).sum()
}

/// Weighted `L^p` norm (quasi-norm for `p < 1`, max-norm for infinity).
pub fn lp_norm(obs: &Observable, p: impl Into<Exponent>, space: &AtomSpace) -> Result<f64> {
    let p = p.into();
    check_exponent(p)?;
    space.check_len(obs.len(), "observable")?;
    Ok(match p {
        Exponent::Infinity => obs.max_abs(),
        Exponent::Finite(p) => {
            let s = weighted_power_sum(obs.values(), space.weights(), p);
            if p == 1.0 {
                s
            } else if p == 2.0 {
                s.sqrt()
            } else {
                s.powf(1.0 / p)
            }
        }
    })
}

/// `E(obs | part)`: the weighted average over each block.
///
/// A block on which `obs` is already constant keeps that value bit-for-bit,
/// so conditioning a block-constant function is exact.
pub fn conditional_expectation(
    obs: &Observable,
    part: &Partition,
    space: &AtomSpace,
) -> Result<Observable> {
    space.check_len(obs.len(), "observable")?;
    space.check_len(part.atom_count(), "partition")?;
    Ok(block_average(obs.values(), part, space.weights()))
}

pub(crate) fn block_average(values: &[f64], part: &Partition, weights: &[f64]) -> Observable {
    let nb = part.block_count();
    let mut mass = vec![0.0; nb];
    let mut weight = vec![0.0; nb];
    let mut first = vec![f64::NAN; nb];
    let mut constant = vec![true; nb];
    for ((&v, &w), &b) in values.iter().zip(weights).zip(part.block_of()) {
        mass[b] += w * v;
        weight[b] += w;
        if first[b].is_nan() {
            first[b] = v;
        } else if constant[b] && first[b] != v {
            constant[b] = false;
        }
    }
    let block_value: Vec<f64> = (0..nb)
        .map(|b| {
            if constant[b] {
                first[b]
            } else {
                mass[b] / weight[b]
            }
        })
        .collect();
    Observable::new(part.block_of().iter().map(|&b| block_value[b]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z4() -> AtomSpace {
        AtomSpace::uniform(4).unwrap()
    }

    fn ramp() -> Observable {
        Observable::new(vec![1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(AtomSpace::new(vec![0.5, 0.5, 0.0]).is_err());
        assert!(AtomSpace::new(vec![0.5, 0.6]).is_err());
        assert!(AtomSpace::new(vec![]).is_err());
        assert!(AtomSpace::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn partition_labels_must_be_contiguous() {
        assert!(Partition::new(vec![0, 2, 2]).is_err());
        assert!(Partition::from_blocks(3, &[vec![0, 1]]).is_err());
        assert!(Partition::from_blocks(3, &[vec![0, 1], vec![1, 2]]).is_err());
        let p = Partition::from_labels(["x", "y", "x"]).unwrap();
        assert_eq!(p.block_of(), &[0, 1, 0]);
    }

    #[test]
    fn lp_norm_of_ramp() {
        let n = lp_norm(&ramp(), 2.0, &z4()).unwrap();
        assert!((n - 7.5f64.sqrt()).abs() < 1e-12);
        assert!((n - 2.738612788).abs() < 1e-9);
        assert_eq!(lp_norm(&ramp(), Exponent::Infinity, &z4()).unwrap(), 4.0);
    }

    #[test]
    fn lp_norm_degenerate_cases() {
        let space = AtomSpace::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for p in [0.5, 1.0, 4.0 / 3.0, 2.0, 4.0] {
            assert_eq!(lp_norm(&Observable::zeros(4), p, &space).unwrap(), 0.0);
            let c = lp_norm(&Observable::constant(4, -1.5), p, &space).unwrap();
            assert!((c - 1.5).abs() < 1e-12, "p={p}: {c}");
        }
    }

    #[test]
    fn lp_norm_errors() {
        assert!(matches!(
            lp_norm(&ramp(), 0.0, &z4()),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            lp_norm(&ramp(), -1.0, &z4()),
            Err(Error::InvalidInput(_))
        ));
        let short = Observable::new(vec![1.0, 2.0]);
        assert!(matches!(
            lp_norm(&short, 2.0, &z4()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn conditional_expectation_on_residue_classes() {
        let part = Partition::from_blocks(4, &[vec![0, 2], vec![1, 3]]).unwrap();
        let e = conditional_expectation(&ramp(), &part, &z4()).unwrap();
        assert_eq!(e.values(), &[2.0, 3.0, 2.0, 3.0]);
    }

    #[test]
    fn conditional_expectation_trivial_cases() {
        let space = AtomSpace::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = Observable::new(vec![0.3, -1.7, 2.9, 1e-3]);
        let same = conditional_expectation(&g, &Partition::discrete(4), &space).unwrap();
        assert_eq!(same, g);
        let c = Observable::constant(4, 0.1);
        let part = Partition::from_blocks(4, &[vec![0, 3], vec![1, 2]]).unwrap();
        assert_eq!(conditional_expectation(&c, &part, &space).unwrap(), c);
        assert_eq!(
            conditional_expectation(&c, &Partition::trivial(4), &space).unwrap(),
            c
        );
    }

    #[test]
    fn conditional_expectation_dimension_mismatch() {
        let part = Partition::trivial(3);
        assert!(conditional_expectation(&ramp(), &part, &z4()).is_err());
    }

    #[test]
    fn coarsening_examples() {
        let trivial = Partition::trivial(4);
        let parity = Partition::from_blocks(4, &[vec![0, 2], vec![1, 3]]).unwrap();
        let halves = Partition::from_blocks(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert!(is_coarsening(&trivial, &parity).unwrap());
        assert!(!is_coarsening(&parity, &halves).unwrap());
        assert!(is_coarsening(&halves, &halves).unwrap());
        assert!(is_coarsening(&trivial, &Partition::trivial(5)).is_err());
    }

    #[test]
    fn backward_filtration_validation() {
        let parity = Partition::from_blocks(4, &[vec![0, 2], vec![1, 3]]).unwrap();
        let halves = Partition::from_blocks(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert!(BackwardFiltration::new(vec![parity.clone()]).is_err());
        assert!(BackwardFiltration::new(vec![
            Partition::discrete(4),
            parity.clone(),
            halves.clone()
        ])
        .is_err());
        let f = BackwardFiltration::new(vec![
            Partition::discrete(4),
            parity,
            Partition::trivial(4),
            Partition::trivial(4),
        ])
        .unwrap();
        assert_eq!(f.depth(), 3);
        assert_eq!(f.stabilization_depth(), 2);
    }

    #[test]
    fn forward_filtration_binary_flag() {
        let levels = vec![Partition::trivial(4), Partition::discrete(4)];
        assert!(ForwardFiltration::new(levels.clone(), false).is_ok());
        assert!(ForwardFiltration::new(levels, true).is_err());
        let d = ForwardFiltration::dyadic(3).unwrap();
        assert_eq!(d.depth(), 3);
        assert_eq!(d.level(1).block_of(), &[0, 0, 0, 0, 1, 1, 1, 1]);
        assert!(d.binary_splitting());
    }
}
