//! Measure-preserving dynamics on atom spaces.
//!
//! Ergodic averages are computed from per-orbit prefix sums: once a function
//! has been summed along every cycle of the map, any `A_N f` costs one pass
//! over the atoms regardless of `N`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{AtomSpace, BackwardFiltration, Observable, Partition};
use crate::ABS_TOL;

/// Largest integer below which every `f64` integer is exact.
pub const EXACT_INT_BOUND: u64 = 1 << 53;

/// A measure-preserving map of the atoms: atom `i` is sent to `image_of[i]`.
///
/// On a finite space with strictly positive weights a measure-preserving map
/// is automatically a bijection, so every transformation here is a
/// permutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transformation {
    image_of: Vec<usize>,
}

impl Transformation {
    pub fn new(image_of: Vec<usize>, space: &AtomSpace) -> Result<Self> {
        let t = Transformation { image_of };
        t.check_measure_preserving(space)?;
        Ok(t)
    }

    pub fn identity(atom_count: usize) -> Self {
        Transformation {
            image_of: (0..atom_count).collect(),
        }
    }

    pub(crate) fn from_images_unchecked(image_of: Vec<usize>) -> Self {
        Transformation { image_of }
    }

    /// `ℙ(T⁻¹{j}) = ℙ({j})` for every atom `j`.
    pub fn check_measure_preserving(&self, space: &AtomSpace) -> Result<()> {
        space.check_len(self.image_of.len(), "transformation")?;
        let n = space.atom_count();
        let mut preimage_weight = vec![0.0; n];
        for (i, &j) in self.image_of.iter().enumerate() {
            if j >= n {
                return Err(Error::invalid(format!(
                    "atom {i} is mapped to {j}, out of range"
                )));
            }
            preimage_weight[j] += space.weight(i);
        }
        for (j, (&pw, &w)) in preimage_weight.iter().zip(space.weights()).enumerate() {
            if (pw - w).abs() > ABS_TOL {
                return Err(Error::invalid(format!(
                    "not measure-preserving at atom {j}: preimage weight {pw} vs {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn atom_count(&self) -> usize {
        self.image_of.len()
    }

    pub fn image_of(&self) -> &[usize] {
        &self.image_of
    }

    pub fn image(&self, atom: usize) -> usize {
        self.image_of[atom]
    }

    pub fn is_identity(&self) -> bool {
        self.image_of.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self ∘ inner`, i.e. apply `inner` first.
    pub fn compose(&self, inner: &Transformation) -> Transformation {
        assert_eq!(
            self.atom_count(),
            inner.atom_count(),
            "transformation size mismatch"
        );
        Transformation {
            image_of: inner.image_of.iter().map(|&j| self.image_of[j]).collect(),
        }
    }

    pub fn inverse(&self) -> Transformation {
        let mut inv = vec![0; self.atom_count()];
        for (i, &j) in self.image_of.iter().enumerate() {
            inv[j] = i;
        }
        Transformation { image_of: inv }
    }

    /// Koopman operator: `f ↦ f∘T`.
    pub fn pull_back(&self, f: &Observable) -> Observable {
        assert_eq!(f.len(), self.atom_count(), "observable size mismatch");
        Observable::new(self.image_of.iter().map(|&j| f.get(j)).collect())
    }
}

/// `T^k` by repeated squaring; `T^0` is the identity.
pub fn iterate(map: &Transformation, k: u64) -> Transformation {
    let mut result = Transformation::identity(map.atom_count());
    let mut base = map.clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            result = base.compose(&result);
        }
        base = base.compose(&base);
        k >>= 1;
    }
    result
}

/// Cycle decomposition of a permutation, listing each cycle in orbit order.
#[derive(Debug, Clone)]
pub struct OrbitDecomposition {
    /// Atoms cycle by cycle: `order[start[c] + j] = T^j(order[start[c]])`.
    order: Vec<usize>,
    start: Vec<usize>,
    cycle_of: Vec<usize>,
    position: Vec<usize>,
}

impl OrbitDecomposition {
    pub fn new(map: &Transformation) -> Self {
        let n = map.atom_count();
        let mut order = Vec::with_capacity(n);
        let mut start = Vec::new();
        let mut cycle_of = vec![usize::MAX; n];
        let mut position = vec![0; n];
        for seed in 0..n {
            if cycle_of[seed] != usize::MAX {
                continue;
            }
            let c = start.len();
            start.push(order.len());
            let mut atom = seed;
            let mut j = 0;
            while cycle_of[atom] == usize::MAX {
                cycle_of[atom] = c;
                position[atom] = j;
                order.push(atom);
                atom = map.image(atom);
                j += 1;
            }
        }
        start.push(n);
        OrbitDecomposition {
            order,
            start,
            cycle_of,
            position,
        }
    }

    pub fn atom_count(&self) -> usize {
        self.order.len()
    }

    pub fn cycle_count(&self) -> usize {
        self.start.len() - 1
    }

    /// Length of the orbit through `atom`.
    pub fn orbit_length(&self, atom: usize) -> usize {
        let c = self.cycle_of[atom];
        self.start[c + 1] - self.start[c]
    }

    /// Atoms of cycle `c` in orbit order.
    pub fn cycle(&self, c: usize) -> &[usize] {
        &self.order[self.start[c]..self.start[c + 1]]
    }

    /// Mean of `f` over the orbit of each atom: the limit of `A_N f`.
    ///
    /// Weights are constant along orbits of a measure-preserving map, so the
    /// plain mean is the conditional expectation onto invariant sets.
    pub fn orbit_mean(&self, f: &Observable) -> Observable {
        assert_eq!(f.len(), self.atom_count(), "observable size mismatch");
        let mut out = vec![0.0; self.atom_count()];
        for c in 0..self.cycle_count() {
            let cycle = self.cycle(c);
            let mean = cycle.iter().map(|&a| f.get(a)).sum::<f64>() / cycle.len() as f64;
            for &a in cycle {
                out[a] = mean;
            }
        }
        Observable::new(out)
    }

    /// Prefix sums of `f` along every orbit.
    pub fn sums(&self, f: &Observable) -> OrbitSums<'_> {
        assert_eq!(f.len(), self.atom_count(), "observable size mismatch");
        let mut prefix = Vec::with_capacity(self.atom_count() + self.cycle_count());
        for c in 0..self.cycle_count() {
            let mut acc = 0.0;
            prefix.push(acc);
            for &atom in self.cycle(c) {
                acc += f.get(atom);
                prefix.push(acc);
            }
        }
        OrbitSums {
            orbits: self,
            prefix,
        }
    }
}

/// Per-orbit prefix sums of one observable.
#[derive(Debug, Clone)]
pub struct OrbitSums<'a> {
    orbits: &'a OrbitDecomposition,
    /// Cycle `c` occupies `prefix[start[c] + c ..= start[c + 1] + c]`.
    prefix: Vec<f64>,
}

impl OrbitSums<'_> {
    /// `Σ_{k<count} f(T^k atom)`.
    pub fn orbit_sum(&self, atom: usize, count: u64) -> f64 {
        let o = self.orbits;
        let c = o.cycle_of[atom];
        let base = o.start[c] + c;
        let len = o.start[c + 1] - o.start[c];
        let p = &self.prefix[base..=base + len];
        let total = p[len];
        let full = count / len as u64;
        let rest = (count % len as u64) as usize;
        let j = o.position[atom];
        let partial = if j + rest <= len {
            p[j + rest] - p[j]
        } else {
            (total - p[j]) + p[j + rest - len]
        };
        if full == 0 {
            partial
        } else {
            full as f64 * total + partial
        }
    }

    /// `A_N f`.
    pub fn average(&self, n: u64) -> Observable {
        assert!(n >= 1, "ergodic average over zero terms");
        let inv = n as f64;
        Observable::new(
            (0..self.orbits.atom_count())
                .map(|atom| self.orbit_sum(atom, n) / inv)
                .collect(),
        )
    }
}

/// `A_N f = (1/N) Σ_{k<N} f∘T^k`.
pub fn ergodic_average(f: &Observable, map: &Transformation, n: u64) -> Result<Observable> {
    if n == 0 {
        return Err(Error::invalid("ergodic average needs N ≥ 1"));
    }
    if f.len() != map.atom_count() {
        return Err(Error::invalid(format!(
            "observable has {} atoms, transformation {}",
            f.len(),
            map.atom_count()
        )));
    }
    Ok(OrbitDecomposition::new(map).sums(f).average(n))
}

fn check_base(a: f64) -> Result<()> {
    if !(a.is_finite() && a > 1.0) {
        return Err(Error::invalid(format!(
            "base a = {a} must be a finite number > 1"
        )));
    }
    Ok(())
}

/// `⌊a^k⌋`, exact whenever `a^k < 2^53`.
///
/// The power is accumulated by repeated multiplication; when the float result
/// is too close to an integer to decide the floor, it is settled with exact
/// big-integer arithmetic on the binary expansion of `a`.
pub fn floor_pow(a: f64, k: u32) -> Result<u64> {
    check_base(a)?;
    let bound = EXACT_INT_BOUND as f64;
    let mut x = 1.0f64;
    for _ in 0..k {
        x *= a;
        if x > 2.0 * bound {
            return Err(Error::range(format!("{a}^{k} exceeds 2^53")));
        }
    }
    let slack = x * (k as f64 + 2.0) * f64::EPSILON;
    let c = x.floor();
    if x - c > slack && c + 1.0 - x > slack && x + slack < bound {
        return Ok(c as u64);
    }
    exact_floor_pow(a, k)
}

fn exact_floor_pow(a: f64, k: u32) -> Result<u64> {
    let bits = a.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let tz = mantissa.trailing_zeros();
    let odd = mantissa >> tz;
    let exp = raw_exp - 1075 + tz as i64;
    let mut v = BigUint::from(odd).pow(k);
    let shift = exp * k as i64;
    if shift >= 0 {
        v <<= shift as u64;
    } else {
        v >>= (-shift) as u64;
    }
    match u64::try_from(&v) {
        Ok(r) if r < EXACT_INT_BOUND => Ok(r),
        _ => Err(Error::range(format!("{a}^{k} exceeds 2^53"))),
    }
}

/// Smallest `k ≥ 0` with `⌊a^k⌋ ≥ 2^l`.
pub fn k_index(a: f64, l: u32) -> Result<u32> {
    check_base(a)?;
    if l >= 53 {
        return Err(Error::range(format!("2^{l} exceeds 2^53")));
    }
    let target = 1u64 << l;
    let mut k = 0;
    while floor_pow(a, k)? < target {
        k += 1;
    }
    Ok(k)
}

/// Failure location of the commutativity condition: `E(1_{atom}∘T | G_level)`
/// differs from `E(1_{atom} | G_level)∘T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutativityWitness {
    pub level: usize,
    pub atom: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutativityOutcome {
    pub passed: bool,
    pub witness: Option<CommutativityWitness>,
}

/// A space, a measure-preserving map and a backward filtration, together with
/// the cached orbit structure of the map.
#[derive(Debug, Clone)]
pub struct DynamicalSystem {
    space: AtomSpace,
    map: Transformation,
    filtration: BackwardFiltration,
    commutativity_checked: bool,
    orbits: OrbitDecomposition,
}

impl DynamicalSystem {
    /// Validates shapes and measure preservation; commutativity is not checked.
    pub fn new(
        space: AtomSpace,
        map: Transformation,
        filtration: BackwardFiltration,
    ) -> Result<Self> {
        map.check_measure_preserving(&space)?;
        space.check_len(filtration.atom_count(), "filtration")?;
        let orbits = OrbitDecomposition::new(&map);
        Ok(DynamicalSystem {
            space,
            map,
            filtration,
            commutativity_checked: false,
            orbits,
        })
    }

    /// Like [`DynamicalSystem::new`], then requires the commutativity check to pass.
    pub fn checked(
        space: AtomSpace,
        map: Transformation,
        filtration: BackwardFiltration,
    ) -> Result<Self> {
        let mut system = DynamicalSystem::new(space, map, filtration)?;
        let outcome = commutativity_check(&system);
        if let Some(w) = outcome.witness {
            return Err(Error::invalid(format!(
                "commutativity condition fails at level {} for atom {}",
                w.level, w.atom
            )));
        }
        system.commutativity_checked = true;
        Ok(system)
    }

    pub fn space(&self) -> &AtomSpace {
        &self.space
    }

    pub fn map(&self) -> &Transformation {
        &self.map
    }

    pub fn filtration(&self) -> &BackwardFiltration {
        &self.filtration
    }

    pub fn commutativity_checked(&self) -> bool {
        self.commutativity_checked
    }

    pub fn orbits(&self) -> &OrbitDecomposition {
        &self.orbits
    }

    pub fn atom_count(&self) -> usize {
        self.space.atom_count()
    }

    pub fn depth(&self) -> usize {
        self.filtration.depth()
    }

    pub(crate) fn check_observable(&self, f: &Observable, what: &str) -> Result<()> {
        self.space.check_len(f.len(), what)
    }

    pub fn ergodic_average(&self, f: &Observable, n: u64) -> Result<Observable> {
        if n == 0 {
            return Err(Error::invalid("ergodic average needs N ≥ 1"));
        }
        self.check_observable(f, "observable")?;
        Ok(self.orbits.sums(f).average(n))
    }
}

/// Checks `E(f∘T | G_n) = E(f | G_n)∘T` for every level and every atom
/// indicator `f`, entrywise to [`ABS_TOL`].
///
/// Both sides are linear in `f`; as matrices, row `i` of the left side is the
/// push-forward under `T` of the normalized weight on the block of `i`, and
/// row `i` of the right side is the normalized weight on the block of `T(i)`.
/// The witness is the lowest failing level and, within it, the smallest atom
/// whose indicator exposes the failure.
pub fn commutativity_check(system: &DynamicalSystem) -> CommutativityOutcome {
    let weights = system.space.weights();
    let map = &system.map;
    let inverse = map.inverse();
    for (level, part) in system.filtration.levels().iter().enumerate() {
        if let Some(atom) = first_failing_indicator(part, map, &inverse, weights) {
            return CommutativityOutcome {
                passed: false,
                witness: Some(CommutativityWitness { level, atom }),
            };
        }
    }
    CommutativityOutcome {
        passed: true,
        witness: None,
    }
}

fn first_failing_indicator(
    part: &Partition,
    map: &Transformation,
    inverse: &Transformation,
    weights: &[f64],
) -> Option<usize> {
    let (offsets, members) = block_members(part);
    let mut block_weight = vec![0.0; part.block_count()];
    for (&b, &w) in part.block_of().iter().zip(weights) {
        block_weight[b] += w;
    }
    let mut worst: Option<usize> = None;
    let mut flag = |j: usize| worst = Some(worst.map_or(j, |w| w.min(j)));
    let mut targets = Vec::new();
    for b in 0..part.block_count() {
        let block = &members[offsets[b]..offsets[b + 1]];
        targets.clear();
        for &i in block {
            let t = part.block(map.image(i));
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &target in &targets {
            for &i in block {
                let j = map.image(i);
                let pushed = weights[i] / block_weight[b];
                let local = if part.block(j) == target {
                    weights[j] / block_weight[target]
                } else {
                    0.0
                };
                if (pushed - local).abs() > ABS_TOL {
                    flag(j);
                }
            }
            for &j in &members[offsets[target]..offsets[target + 1]] {
                if part.block(inverse.image(j)) != b {
                    flag(j);
                }
            }
        }
    }
    worst
}

/// Atoms grouped by block: block `b` is `members[offsets[b]..offsets[b + 1]]`.
pub(crate) fn block_members(part: &Partition) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; part.block_count() + 1];
    for &b in part.block_of() {
        offsets[b + 1] += 1;
    }
    for b in 0..part.block_count() {
        offsets[b + 1] += offsets[b];
    }
    let mut fill = offsets.clone();
    let mut members = vec![0; part.atom_count()];
    for (atom, &b) in part.block_of().iter().enumerate() {
        members[fill[b]] = atom;
        fill[b] += 1;
    }
    (offsets, members)
}

/// Group-translation systems that satisfy the commutativity condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemKind {
    /// `ℤ_{2^m}` with `T = +1` and `G_n` the residue classes mod `2^(m-n)`.
    CyclicRotation { m: u32 },
    /// A product of cyclic groups translated by a fixed element; `G_n` are the
    /// cosets of the `n`-th subgroup of an increasing chain starting at `{0}`.
    /// Each subgroup is listed by its elements.
    GroupTranslation {
        moduli: Vec<u64>,
        translation: Vec<u64>,
        chain: Vec<Vec<Vec<u64>>>,
    },
    /// `ℤ_{2^m1} × ℤ_{2^m2}` with two commuting translations; the system map
    /// is `shift_s`.
    ProductTorus {
        m1: u32,
        m2: u32,
        shift_s: [u64; 2],
        shift_t: [u64; 2],
    },
}

/// A catalog entry together with the filtration depth to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    #[serde(flatten)]
    pub kind: SystemKind,
    pub depth: usize,
}

impl SystemSpec {
    pub fn build(&self) -> Result<DynamicalSystem> {
        catalog_system(&self.kind, self.depth)
    }
}

impl FromStr for SystemSpec {
    type Err = Error;

    /// `cyclic:M[:DEPTH]` or `torus:M1,M2[:DEPTH]`; depth defaults to the
    /// largest allowed.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unrecognized system `{s}`"));
        let parse_u32 = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
        let mut parts = s.split(':');
        let head = parts.next().ok_or_else(bad)?;
        let params = parts.next().ok_or_else(bad)?;
        let depth = parts
            .next()
            .map(|d| d.trim().parse::<usize>().map_err(|_| bad()))
            .transpose()?;
        if parts.next().is_some() {
            return Err(bad());
        }
        match head {
            "cyclic" => {
                let m = parse_u32(params)?;
                Ok(SystemSpec {
                    kind: SystemKind::CyclicRotation { m },
                    depth: depth.unwrap_or(m as usize),
                })
            }
            "torus" => {
                let (a, b) = params.split_once(',').ok_or_else(bad)?;
                let (m1, m2) = (parse_u32(a)?, parse_u32(b)?);
                Ok(SystemSpec {
                    kind: SystemKind::ProductTorus {
                        m1,
                        m2,
                        shift_s: [1, 0],
                        shift_t: [0, 1],
                    },
                    depth: depth.unwrap_or(m1.min(m2) as usize),
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SystemKind::CyclicRotation { m } => write!(f, "cyclic:{m}:{}", self.depth),
            SystemKind::ProductTorus { m1, m2, .. } => write!(f, "torus:{m1},{m2}:{}", self.depth),
            SystemKind::GroupTranslation { moduli, .. } => {
                let g: Vec<String> = moduli.iter().map(|m| format!("Z{m}")).collect();
                write!(f, "group:{}:{}", g.join("x"), self.depth)
            }
        }
    }
}

/// Builds a catalog system and verifies the commutativity condition.
pub fn catalog_system(kind: &SystemKind, depth: usize) -> Result<DynamicalSystem> {
    match kind {
        SystemKind::CyclicRotation { m } => cyclic_rotation(*m, depth),
        SystemKind::GroupTranslation {
            moduli,
            translation,
            chain,
        } => group_translation(moduli, translation, chain, depth),
        SystemKind::ProductTorus {
            m1,
            m2,
            shift_s,
            shift_t,
        } => Ok(product_torus(*m1, *m2, *shift_s, *shift_t, depth)?.system),
    }
}

const MAX_LOG_ATOMS: u32 = 30;

pub fn cyclic_rotation(m: u32, depth: usize) -> Result<DynamicalSystem> {
    if m > MAX_LOG_ATOMS {
        return Err(Error::range(format!("2^{m} atoms is too many")));
    }
    if depth > m as usize {
        return Err(Error::invalid(format!("depth {depth} exceeds m = {m}")));
    }
    let n = 1usize << m;
    let space = AtomSpace::uniform(n)?;
    let map = Transformation::from_images_unchecked((0..n).map(|i| (i + 1) % n).collect());
    let levels = (0..=depth)
        .map(|level| {
            let mask = (1usize << (m as usize - level)) - 1;
            Partition::new((0..n).map(|i| i & mask).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    DynamicalSystem::checked(space, map, BackwardFiltration::new(levels)?)
}

/// Mixed-radix indexing of a finite abelian group `ℤ_{m_0} × … × ℤ_{m_d}`,
/// last coordinate fastest.
#[derive(Debug, Clone)]
struct CyclicProduct {
    moduli: Vec<u64>,
    size: usize,
}

impl CyclicProduct {
    fn new(moduli: &[u64]) -> Result<Self> {
        if moduli.is_empty() || moduli.contains(&0) {
            return Err(Error::invalid("group needs at least one positive modulus"));
        }
        let size = moduli
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m as usize))
            .filter(|&s| s <= 1 << MAX_LOG_ATOMS)
            .ok_or_else(|| Error::range("group too large"))?;
        Ok(CyclicProduct {
            moduli: moduli.to_vec(),
            size,
        })
    }

    fn check_element(&self, x: &[u64]) -> Result<()> {
        if x.len() != self.moduli.len() || x.iter().zip(&self.moduli).any(|(v, m)| v >= m) {
            return Err(Error::invalid(format!(
                "{x:?} is not an element of the group"
            )));
        }
        Ok(())
    }

    fn index(&self, x: &[u64]) -> usize {
        x.iter()
            .zip(&self.moduli)
            .fold(0usize, |acc, (&v, &m)| acc * m as usize + v as usize)
    }

    fn element(&self, mut idx: usize) -> Vec<u64> {
        let mut x = vec![0; self.moduli.len()];
        for (slot, &m) in x.iter_mut().zip(&self.moduli).rev() {
            *slot = (idx % m as usize) as u64;
            idx /= m as usize;
        }
        x
    }

    fn add(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        x.iter()
            .zip(y)
            .zip(&self.moduli)
            .map(|((a, b), m)| (a + b) % m)
            .collect()
    }

    fn translation(&self, t: &[u64]) -> Result<Transformation> {
        self.check_element(t)?;
        Ok(Transformation::from_images_unchecked(
            (0..self.size)
                .map(|i| self.index(&self.add(&self.element(i), t)))
                .collect(),
        ))
    }

    /// Validates a subgroup given by its elements and returns its indices.
    fn subgroup(&self, elements: &[Vec<u64>]) -> Result<Vec<usize>> {
        let mut member = vec![false; self.size];
        for x in elements {
            self.check_element(x)?;
            member[self.index(x)] = true;
        }
        if !member[0] {
            return Err(Error::invalid("subgroup must contain the identity"));
        }
        let idx: Vec<usize> = (0..self.size).filter(|&i| member[i]).collect();
        for &i in &idx {
            for &j in &idx {
                let s = self.index(&self.add(&self.element(i), &self.element(j)));
                if !member[s] {
                    return Err(Error::invalid(format!(
                        "{:?} is not closed under addition",
                        elements
                    )));
                }
            }
        }
        Ok(idx)
    }

    fn cosets(&self, subgroup: &[usize]) -> Result<Partition> {
        let offsets: Vec<Vec<u64>> = subgroup.iter().map(|&h| self.element(h)).collect();
        let mut block_of = vec![usize::MAX; self.size];
        let mut next = 0;
        for i in 0..self.size {
            if block_of[i] != usize::MAX {
                continue;
            }
            let x = self.element(i);
            for h in &offsets {
                block_of[self.index(&self.add(&x, h))] = next;
            }
            next += 1;
        }
        Partition::new(block_of)
    }
}

/// Subgroup generated by `generators`, listed by its elements.
pub fn generated_subgroup(moduli: &[u64], generators: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    let g = CyclicProduct::new(moduli)?;
    for x in generators {
        g.check_element(x)?;
    }
    let mut member = vec![false; g.size];
    member[0] = true;
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        let x = g.element(i);
        for gen in generators {
            let j = g.index(&g.add(&x, gen));
            if !member[j] {
                member[j] = true;
                frontier.push(j);
            }
        }
    }
    Ok((0..g.size)
        .filter(|&i| member[i])
        .map(|i| g.element(i))
        .collect())
}

pub fn group_translation(
    moduli: &[u64],
    translation: &[u64],
    chain: &[Vec<Vec<u64>>],
    depth: usize,
) -> Result<DynamicalSystem> {
    let g = CyclicProduct::new(moduli)?;
    if chain.len() < depth + 1 {
        return Err(Error::invalid(format!(
            "subgroup chain has {} entries, depth {depth} needs {}",
            chain.len(),
            depth + 1
        )));
    }
    let subgroups = chain[..=depth]
        .iter()
        .map(|h| g.subgroup(h))
        .collect::<Result<Vec<_>>>()?;
    if subgroups[0] != [0] {
        return Err(Error::invalid(
            "the chain must start at the trivial subgroup",
        ));
    }
    for (n, pair) in subgroups.windows(2).enumerate() {
        if !pair[0].iter().all(|h| pair[1].binary_search(h).is_ok()) {
            return Err(Error::invalid(format!(
                "subgroup {n} is not contained in subgroup {}",
                n + 1
            )));
        }
    }
    let levels = subgroups
        .iter()
        .map(|h| g.cosets(h))
        .collect::<Result<Vec<_>>>()?;
    let space = AtomSpace::uniform(g.size)?;
    let map = g.translation(translation)?;
    DynamicalSystem::checked(space, map, BackwardFiltration::new(levels)?)
}

/// Two commuting translations on a shared torus system.
#[derive(Debug, Clone)]
pub struct CommutingPair {
    /// Carries `S` as its map.
    pub system: DynamicalSystem,
    pub second: Transformation,
}

impl CommutingPair {
    pub fn first(&self) -> &Transformation {
        self.system.map()
    }
}

/// `ℤ_{2^m1} × ℤ_{2^m2}`, atom `(x, y)` at index `x·2^m2 + y`, with
/// `G_n` the cosets of `2^(m1-n)ℤ × 2^(m2-n)ℤ`.
pub fn product_torus(
    m1: u32,
    m2: u32,
    shift_s: [u64; 2],
    shift_t: [u64; 2],
    depth: usize,
) -> Result<CommutingPair> {
    if m1 + m2 > MAX_LOG_ATOMS {
        return Err(Error::range("torus too large"));
    }
    if depth > m1.min(m2) as usize {
        return Err(Error::invalid(format!(
            "depth {depth} exceeds min(m1, m2) = {}",
            m1.min(m2)
        )));
    }
    let moduli = [1u64 << m1, 1u64 << m2];
    let g = CyclicProduct::new(&moduli)?;
    let levels = (0..=depth)
        .map(|n| {
            let (r1, r2) = (moduli[0] >> n, moduli[1] >> n);
            Partition::new(
                (0..g.size)
                    .map(|i| {
                        let x = g.element(i);
                        ((x[0] % r1) * r2 + x[1] % r2) as usize
                    })
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let filtration = BackwardFiltration::new(levels)?;
    let map_s = g.translation(&[shift_s[0] % moduli[0], shift_s[1] % moduli[1]])?;
    let map_t = g.translation(&[shift_t[0] % moduli[0], shift_t[1] % moduli[1]])?;
    let space = AtomSpace::uniform(g.size)?;
    DynamicalSystem::checked(space.clone(), map_t.clone(), filtration.clone())?;
    let system = DynamicalSystem::checked(space, map_s, filtration)?;
    Ok(CommutingPair {
        system,
        second: map_t,
    })
}
