//! Backward martingales `E_n g = E(g | G_n)`, their differences and square
//! functions, plus binary refinement of forward filtrations.

use serde::{Deserialize, Serialize};

use crate::dynamics::{OrbitDecomposition, Transformation};
use crate::error::{Error, Result};
use crate::space::{
    block_average, AtomSpace, BackwardFiltration, ForwardFiltration, Observable, Partition,
};

/// Levels `E_0 g = g, E_1 g, …, E_depth g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSequence {
    levels: Vec<Observable>,
}

impl MartingaleSequence {
    pub fn levels(&self) -> &[Observable] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &Observable {
        &self.levels[n]
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// `E_{k+1} g − E_k g`.
    pub fn difference(&self, k: usize) -> Observable {
        &self.levels[k + 1] - &self.levels[k]
    }
}

/// Each level is conditioned from the previous one, which by the tower
/// property equals conditioning `g` directly.
pub fn backward_martingale(
    g: &Observable,
    filt: &BackwardFiltration,
    space: &AtomSpace,
) -> Result<MartingaleSequence> {
    space.check_len(g.len(), "observable")?;
    space.check_len(filt.atom_count(), "filtration")?;
    Ok(martingale_levels(g, filt, space, filt.depth()))
}

pub(crate) fn martingale_levels(
    g: &Observable,
    filt: &BackwardFiltration,
    space: &AtomSpace,
    through: usize,
) -> MartingaleSequence {
    let mut levels = Vec::with_capacity(through + 1);
    levels.push(g.clone());
    for n in 1..=through {
        let next = if filt.level(n).same_sigma_algebra(filt.level(n - 1)) {
            levels[n - 1].clone()
        } else {
            block_average(levels[n - 1].values(), filt.level(n), space.weights())
        };
        levels.push(next);
    }
    MartingaleSequence { levels }
}

/// `d_k = E_{k+1} g − E_k g` for `k < depth`.
pub fn martingale_differences(mart: &MartingaleSequence) -> Vec<Observable> {
    (0..mart.depth()).map(|k| mart.difference(k)).collect()
}

/// Pointwise `(Σ_k d_k²)^{1/2}`.
pub fn square_function(mart: &MartingaleSequence) -> Observable {
    let n = mart.level(0).len();
    let mut acc = vec![0.0; n];
    for k in 0..mart.depth() {
        for ((a, hi), lo) in acc
            .iter_mut()
            .zip(mart.level(k + 1).values())
            .zip(mart.level(k).values())
        {
            let d = hi - lo;
            *a += d * d;
        }
    }
    Observable::new(acc.into_iter().map(f64::sqrt).collect())
}

/// Pointwise `(Σ_i |A_{N_{i+1}} f − A_{N_i} f|²)^{1/2}` over consecutive times.
pub fn ergodic_square_function(
    f: &Observable,
    map: &Transformation,
    times: &[u64],
) -> Result<Observable> {
    if times.len() < 2 {
        return Err(Error::invalid("need at least two averaging times"));
    }
    if times[0] == 0 {
        return Err(Error::invalid("averaging times must be positive"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "averaging times must be strictly increasing",
        ));
    }
    if f.len() != map.atom_count() {
        return Err(Error::invalid("observable and transformation sizes differ"));
    }
    let orbits = OrbitDecomposition::new(map);
    let sums = orbits.sums(f);
    let mut acc = vec![0.0; f.len()];
    let mut prev = sums.average(times[0]);
    for &n in &times[1..] {
        let next = sums.average(n);
        for ((a, x), y) in acc.iter_mut().zip(next.values()).zip(prev.values()) {
            let d = x - y;
            *a += d * d;
        }
        prev = next;
    }
    Ok(Observable::new(acc.into_iter().map(f64::sqrt).collect()))
}

/// Inserts intermediate levels so that every block splits into at most two
/// blocks per step.
///
/// A block with `s` children is split along a balanced binary tree: its
/// children (in order of first atom) are halved into groups of `⌈s/2⌉` and
/// `⌊s/2⌋`, recursively. Between two original levels the number of inserted
/// levels is `⌈log₂ s_max⌉ − 1`.
pub fn binarize_filtration(filt: &ForwardFiltration) -> ForwardFiltration {
    let mut out = vec![filt.level(0).clone()];
    for pair in filt.levels().windows(2) {
        out.extend(intermediate_levels(&pair[0], &pair[1]));
        out.push(pair[1].clone());
    }
    ForwardFiltration::new(out, true).expect("balanced splitting yields a binary refinement chain")
}

/// Levels strictly between `coarse` and `fine`.
fn intermediate_levels(coarse: &Partition, fine: &Partition) -> Vec<Partition> {
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); coarse.block_count()];
    let mut seen = vec![false; fine.block_count()];
    for (atom, &fb) in fine.block_of().iter().enumerate() {
        if !seen[fb] {
            seen[fb] = true;
            children[coarse.block(atom)].push(fb);
        }
    }
    // path[fb]: left/right choices from the root of its coarse block's tree
    let mut path: Vec<Vec<bool>> = vec![Vec::new(); fine.block_count()];
    let mut tree_depth = 0;
    for kids in &children {
        tree_depth = tree_depth.max(assign_paths(kids, &mut Vec::new(), &mut path));
    }
    (1..tree_depth)
        .map(|t| {
            Partition::from_labels(fine.block_of().iter().enumerate().map(|(atom, &fb)| {
                let p = &path[fb];
                (coarse.block(atom), p[..t.min(p.len())].to_vec())
            }))
            .expect("labels cover every atom")
        })
        .collect()
}

fn assign_paths(kids: &[usize], prefix: &mut Vec<bool>, path: &mut [Vec<bool>]) -> usize {
    if kids.len() <= 1 {
        for &k in kids {
            path[k] = prefix.clone();
        }
        return prefix.len();
    }
    let (left, right) = kids.split_at(kids.len().div_ceil(2));
    prefix.push(false);
    let dl = assign_paths(left, prefix, path);
    prefix.pop();
    prefix.push(true);
    let dr = assign_paths(right, prefix, path);
    prefix.pop();
    dl.max(dr)
}
