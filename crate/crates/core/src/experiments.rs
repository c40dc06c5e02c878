//! Experiment harness: transference to `ℤ×Ω`, empirical constants for the
//! paraproduct estimate, Cauchy profiles, pointwise oscillation probes and
//! randomized identity suites.
//!
//! Every randomized routine takes a master seed. Trial `t` draws from a
//! ChaCha8 generator seeded with the master seed on stream `t`, so results
//! are bit-identical across runs and independent of scheduling and of how
//! many trials are requested.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    commutativity_check, cyclic_rotation, floor_pow, product_torus, DynamicalSystem, SystemSpec,
    Transformation,
};
use crate::error::{Error, Result};
use crate::martingale::{backward_martingale, martingale_differences};
use crate::paraproduct::{
    double_average_sequence, pi_em_partial_sums, summation_by_parts_residual,
};
use crate::space::{
    conditional_expectation, lp_norm, lp_norm_pow, weighted_power_sum, AtomSpace,
    BackwardFiltration, Observable, Partition,
};
use crate::{ABS_TOL, REL_TOL};

/// Increments below this count as zero when locating stabilization.
pub const STABILIZATION_TOL: f64 = 1e-14;

/// Largest `track_length × atom_count` an [`IntegerModel`] may hold.
pub const MAX_MODEL_ENTRIES: usize = 1 << 26;

/// Distribution of random atom values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDistribution {
    #[default]
    Normal,
    /// Student-t with 3 degrees of freedom.
    StudentT3,
}

/// Generator for trial `stream` under `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_observable<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dist: ValueDistribution,
) -> Observable {
    match dist {
        ValueDistribution::Normal => {
            Observable::new((0..n).map(|_| rng.sample(StandardNormal)).collect())
        }
        ValueDistribution::StudentT3 => {
            let t = StudentT::new(3.0).expect("valid degrees of freedom");
            Observable::new((0..n).map(|_| t.sample(rng)).collect())
        }
    }
}

/// A random nested filtration over `atoms` atoms with exactly `depth` levels
/// after the discrete one; each step merges blocks at random.
pub fn random_backward_filtration<R: Rng + ?Sized>(
    rng: &mut R,
    atoms: usize,
    depth: usize,
) -> BackwardFiltration {
    let mut levels = vec![Partition::discrete(atoms)];
    for _ in 0..depth {
        let prev = levels.last().expect("nonempty");
        let target = prev.block_count().div_ceil(2).max(1);
        let relabel: Vec<usize> = (0..prev.block_count())
            .map(|_| rng.random_range(0..target))
            .collect();
        let next = Partition::from_labels(prev.block_of().iter().map(|&b| relabel[b]))
            .expect("labels cover every atom");
        levels.push(next);
    }
    BackwardFiltration::new(levels).expect("merging blocks coarsens")
}

/// A random system that need not satisfy the commutativity condition: a
/// random permutation, weights constant along its cycles and a random nested
/// filtration.
pub fn random_system<R: Rng + ?Sized>(
    rng: &mut R,
    atoms: usize,
    depth: usize,
    uniform: bool,
) -> Result<DynamicalSystem> {
    let mut perm: Vec<usize> = (0..atoms).collect();
    perm.shuffle(rng);
    let map = Transformation::from_images_unchecked(perm);
    let space = if uniform {
        AtomSpace::uniform(atoms)?
    } else {
        let orbits = crate::dynamics::OrbitDecomposition::new(&map);
        let mut raw = vec![0.0; atoms];
        for c in 0..orbits.cycle_count() {
            let w = rng.random_range(0.5..2.0);
            for &a in orbits.cycle(c) {
                raw[a] = w;
            }
        }
        let total: f64 = raw.iter().sum();
        AtomSpace::new(raw.into_iter().map(|w| w / total).collect())?
    };
    let filtration = random_backward_filtration(rng, atoms, depth);
    DynamicalSystem::new(space, map, filtration)
}

/// `1/r = 1/p + 1/q` to within this tolerance.
const HOLDER_TOL: f64 = 1e-12;

/// Parameters of an empirical constant estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub horizon_n: usize,
    pub seed: u64,
    pub trials: usize,
    pub system: SystemSpec,
    #[serde(default)]
    pub distribution: ValueDistribution,
}

impl ExperimentConfig {
    /// Errors on invalid parameters; returns warnings for exponents outside
    /// `p, q ∈ [4/3, 4]`, `r ∈ [1, 4/3]`.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(Error::invalid(format!("a = {} must be > 1", self.a)));
        }
        for (name, v) in [("p", self.p), ("q", self.q), ("r", self.r)] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::invalid(format!("{name} = {v} must lie in [1, ∞)")));
            }
        }
        let gap = 1.0 / self.r - 1.0 / self.p - 1.0 / self.q;
        if gap.abs() > HOLDER_TOL {
            return Err(Error::invalid(format!(
                "exponents ({}, {}, {}) violate 1/r = 1/p + 1/q by {gap:e}",
                self.p, self.q, self.r
            )));
        }
        if self.horizon_n == 0 {
            return Err(Error::invalid("horizon_n must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        let mut warnings = Vec::new();
        let in_pq = |v: f64| (4.0 / 3.0 - HOLDER_TOL..=4.0 + HOLDER_TOL).contains(&v);
        let in_r = (1.0..=4.0 / 3.0 + HOLDER_TOL).contains(&self.r);
        if !(in_pq(self.p) && in_pq(self.q) && in_r) {
            warnings.push(format!(
                "(p, q, r) = ({}, {}, {}) lies outside the range p, q ∈ [4/3, 4], r ∈ [1, 4/3] where convergence is known",
                self.p, self.q, self.r
            ));
        }
        Ok(warnings)
    }
}

/// `‖f‖_p^p = 2^{-(n+1)} ‖F̃‖_p^p` witness: `F̃(m, ω) = f(T^m ω)` for
/// `0 ≤ m < 2^{n+1}` and zero elsewhere on `ℤ × Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerModel {
    track_length: usize,
    atom_count: usize,
    /// Row `m` holds `f∘T^m`.
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl IntegerModel {
    pub fn track_length(&self) -> usize {
        self.track_length
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    /// `F̃(m, ω)`; zero off the window.
    pub fn value(&self, m: i64, atom: usize) -> f64 {
        if m < 0 || m as usize >= self.track_length {
            0.0
        } else {
            self.values[m as usize * self.atom_count + atom]
        }
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.atom_count..(m + 1) * self.atom_count]
    }

    /// `‖F̃‖_p^p` under counting measure ⊗ atom weights.
    pub fn lp_norm_pow(&self, p: f64) -> Result<f64> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::invalid(format!("exponent p = {p} must be positive")));
        }
        Ok((0..self.track_length)
            .map(|m| weighted_power_sum(self.row(m), &self.weights, p))
            .sum())
    }
}

pub fn transfer_to_integer_model(
    f: &Observable,
    system: &DynamicalSystem,
    n: usize,
) -> Result<IntegerModel> {
    system.check_observable(f, "observable")?;
    let atoms = system.atom_count();
    let track_length = u32::try_from(n + 1)
        .ok()
        .and_then(|e| 1usize.checked_shl(e))
        .filter(|&t| t.checked_mul(atoms).is_some_and(|s| s <= MAX_MODEL_ENTRIES))
        .ok_or_else(|| Error::range(format!("2^{} × {atoms} model entries", n + 1)))?;
    let mut values = Vec::with_capacity(track_length * atoms);
    values.extend_from_slice(f.values());
    for m in 1..track_length {
        let prev = (m - 1) * atoms;
        for atom in 0..atoms {
            let v = values[prev + system.map().image(atom)];
            values.push(v);
        }
    }
    Ok(IntegerModel {
        track_length,
        atom_count: atoms,
        values,
        weights: system.space().weights().to_vec(),
    })
}

/// Relative gap `|‖f‖_p^p − 2^{-(n+1)} ‖F̃‖_p^p| / ‖f‖_p^p` (absolute when
/// `f = 0`).
pub fn transference_residual(
    f: &Observable,
    system: &DynamicalSystem,
    n: usize,
    p: f64,
) -> Result<f64> {
    let model = transfer_to_integer_model(f, system, n)?;
    let lhs = lp_norm_pow(f, p, system.space())?;
    let rhs = model.lp_norm_pow(p)? / model.track_length() as f64;
    let gap = (lhs - rhs).abs();
    Ok(if lhs > 0.0 { gap / lhs } else { gap })
}

/// One row of a profile: `n` (or `N`), `‖·‖`, and the increment from the
/// previous row when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: u64,
    pub norm: f64,
    pub increment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Draws of `f` or `g` rejected for having zero norm.
    pub resamples: usize,
    /// Ratio at `n = 1..=horizon`.
    pub ratios: Vec<f64>,
    /// Largest entry of `ratios`.
    pub ratio: f64,
}

/// Empirical lower envelope for the constant of the paraproduct estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEnvelope {
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub horizon: usize,
    pub max_ratio: f64,
    /// Maximum over trials `0..=t`, indexed by `t`.
    pub running_max: Vec<f64>,
    /// Maximum over trials at each `n = 1..=horizon`.
    pub per_level_max: Vec<f64>,
    pub resampled: usize,
    pub warnings: Vec<String>,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationStats {
    pub n0: u64,
    pub horizon: u64,
    pub epsilon: f64,
    /// `max − min` of the sequence at each atom over the probed range.
    pub per_atom: Vec<f64>,
    pub max_oscillation: f64,
    /// Total weight of atoms with oscillation `> epsilon`.
    pub exceptional_weight: f64,
}

/// Outputs of the profiling experiments; sections not produced by a given
/// experiment are `None` or empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelRecord>,
    pub stabilization_index: Option<usize>,
    pub envelope: Option<RatioEnvelope>,
    pub oscillation: Option<OscillationStats>,
}

/// `‖Π_n^em(f, g)‖_r / (‖f‖_p ‖g‖_q)` for `n = 1..=horizon`.
#[allow(clippy::too_many_arguments)]
pub fn ratio_profile(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    p: f64,
    q: f64,
    r: f64,
    horizon: usize,
) -> Result<Vec<f64>> {
    let denom = lp_norm(f, p, system.space())? * lp_norm(g, q, system.space())?;
    if denom == 0.0 {
        return Err(Error::invalid("ratio undefined for a zero-norm input"));
    }
    let sums = pi_em_partial_sums(f, g, system, a, horizon)?;
    sums[1..]
        .iter()
        .map(|pi| Ok(lp_norm(pi, r, system.space())? / denom))
        .collect()
}

fn nonzero_draw(
    rng: &mut ChaCha8Rng,
    system: &DynamicalSystem,
    p: f64,
    dist: ValueDistribution,
) -> Result<(Observable, usize)> {
    let mut resamples = 0;
    loop {
        let f = random_observable(rng, system.atom_count(), dist);
        if lp_norm(&f, p, system.space())? > 0.0 {
            return Ok((f, resamples));
        }
        resamples += 1;
    }
}

/// Runs `config.trials` seeded trials and records the ratio envelope.
pub fn estimate_constant(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let warnings = config.validate()?;
    let system = config.system.build()?;
    estimate_constant_on(config, &system, warnings)
}

fn estimate_constant_on(
    config: &ExperimentConfig,
    system: &DynamicalSystem,
    warnings: Vec<String>,
) -> Result<ConvergenceReport> {
    if config.horizon_n > system.depth() {
        return Err(Error::invalid(format!(
            "horizon {} exceeds the filtration depth {}",
            config.horizon_n,
            system.depth()
        )));
    }
    let trials: Vec<TrialRecord> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, t as u64);
            let (f, rf) = nonzero_draw(&mut rng, system, config.p, config.distribution)?;
            let (g, rg) = nonzero_draw(&mut rng, system, config.q, config.distribution)?;
            let ratios = ratio_profile(
                &f,
                &g,
                system,
                config.a,
                config.p,
                config.q,
                config.r,
                config.horizon_n,
            )?;
            let ratio = ratios.iter().copied().fold(0.0, f64::max);
            Ok(TrialRecord {
                trial: t,
                resamples: rf + rg,
                ratios,
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    let mut running_max = Vec::with_capacity(trials.len());
    let mut best = 0.0f64;
    for t in &trials {
        best = best.max(t.ratio);
        running_max.push(best);
    }
    let per_level_max = (0..config.horizon_n)
        .map(|i| trials.iter().map(|t| t.ratios[i]).fold(0.0, f64::max))
        .collect();
    Ok(ConvergenceReport {
        envelope: Some(RatioEnvelope {
            a: config.a,
            p: config.p,
            q: config.q,
            r: config.r,
            horizon: config.horizon_n,
            max_ratio: best,
            running_max,
            per_level_max,
            resampled: trials.iter().map(|t| t.resamples).sum(),
            warnings,
            trials,
        }),
        ..ConvergenceReport::default()
    })
}

/// Index of the last non-negligible increment (`0` when all are negligible).
fn stabilization_index(increments: &[f64]) -> usize {
    increments
        .iter()
        .rposition(|&d| d >= STABILIZATION_TOL)
        .map_or(0, |i| i + 1)
}

/// `‖Π_n^em‖_r` and `‖Π_n^em − Π_{n−1}^em‖_r` for `n = 1..=horizon`.
pub fn cauchy_profile(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    r: f64,
    horizon: usize,
) -> Result<ConvergenceReport> {
    let sums = pi_em_partial_sums(f, g, system, a, horizon)?;
    let space = system.space();
    let mut levels = Vec::with_capacity(horizon);
    let mut increments = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let inc = lp_norm(&(&sums[n] - &sums[n - 1]), r, space)?;
        increments.push(inc);
        levels.push(LevelRecord {
            n: n as u64,
            norm: lp_norm(&sums[n], r, space)?,
            increment: Some(inc),
        });
    }
    Ok(ConvergenceReport {
        levels,
        stabilization_index: Some(stabilization_index(&increments)),
        ..ConvergenceReport::default()
    })
}

fn oscillation_stats(
    seq: &[Observable],
    space: &AtomSpace,
    epsilon: f64,
    n0: u64,
    horizon: u64,
) -> OscillationStats {
    let atoms = space.atom_count();
    let per_atom: Vec<f64> = (0..atoms)
        .map(|i| {
            let (lo, hi) = seq
                .iter()
                .map(|o| o.get(i))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        })
        .collect();
    let exceptional_weight = per_atom
        .iter()
        .zip(space.weights())
        .filter(|(&o, _)| o > epsilon)
        .map(|(_, &w)| w)
        .sum();
    OscillationStats {
        n0,
        horizon,
        epsilon,
        max_oscillation: per_atom.iter().copied().fold(0.0, f64::max),
        per_atom,
        exceptional_weight,
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::invalid(format!(
            "epsilon = {epsilon} must be nonnegative"
        )));
    }
    Ok(())
}

/// Pointwise `max_{n0 ≤ m1 < m2 ≤ horizon} |Π_{m1}(ω) − Π_{m2}(ω)|` and the
/// weight of atoms where it exceeds `epsilon`.
#[allow(clippy::too_many_arguments)]
pub fn oscillation_probe(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    n0: usize,
    horizon: usize,
    epsilon: f64,
) -> Result<OscillationStats> {
    check_epsilon(epsilon)?;
    if n0 >= horizon {
        return Err(Error::invalid(format!(
            "need n0 < horizon, got {n0} ≥ {horizon}"
        )));
    }
    let sums = pi_em_partial_sums(f, g, system, a, horizon)?;
    Ok(oscillation_stats(
        &sums[n0..],
        system.space(),
        epsilon,
        n0 as u64,
        horizon as u64,
    ))
}

/// `‖B_N‖₂` and `‖B_{N_{i+1}} − B_{N_i}‖₂` along `times`, with oscillation of
/// `B_N(ω)` over all of `times`.
pub fn double_average_profile(
    f: &Observable,
    g: &Observable,
    map_s: &Transformation,
    map_t: &Transformation,
    space: &AtomSpace,
    times: &[u64],
    epsilon: f64,
) -> Result<ConvergenceReport> {
    check_epsilon(epsilon)?;
    space.check_len(map_s.atom_count(), "transformation")?;
    let seq = double_average_sequence(f, g, map_s, map_t, times)?;
    let mut levels = Vec::with_capacity(times.len());
    for (i, b) in seq.iter().enumerate() {
        let increment = if i == 0 {
            None
        } else {
            Some(lp_norm(&(b - &seq[i - 1]), 2.0, space)?)
        };
        levels.push(LevelRecord {
            n: times[i],
            norm: lp_norm(b, 2.0, space)?,
            increment,
        });
    }
    let first = times[0];
    let last = *times.last().expect("nonempty");
    Ok(ConvergenceReport {
        levels,
        stabilization_index: None,
        envelope: None,
        oscillation: Some(oscillation_stats(&seq, space, epsilon, first, last)),
    })
}

/// Envelope and oscillation summary for one rotation size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: u32,
    pub max_ratio: f64,
    pub mean_exceptional_weight: f64,
}

/// Ratio envelopes and oscillation on `cyclic_rotation(m, m)` for each `m`,
/// with horizon `m` and oscillation measured over `n ≥ m/2`.
pub fn cyclic_sweep(ms: &[u32], base: &ExperimentConfig, epsilon: f64) -> Result<Vec<SweepRow>> {
    check_epsilon(epsilon)?;
    ms.iter()
        .map(|&m| {
            if m == 0 {
                return Err(Error::invalid("sweep needs m ≥ 1"));
            }
            let system = cyclic_rotation(m, m as usize)?;
            let mut config = base.clone();
            config.horizon_n = m as usize;
            let warnings = config.validate()?;
            let report = estimate_constant_on(&config, &system, warnings)?;
            let env = report.envelope.expect("envelope present");
            let n0 = (m / 2) as usize;
            let weights = (0..config.trials)
                .map(|t| {
                    let mut rng = trial_rng(config.seed, t as u64);
                    let (f, _) = nonzero_draw(&mut rng, &system, config.p, config.distribution)?;
                    let (g, _) = nonzero_draw(&mut rng, &system, config.q, config.distribution)?;
                    Ok(
                        oscillation_probe(&f, &g, &system, config.a, n0, m as usize, epsilon)?
                            .exceptional_weight,
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepRow {
                m,
                max_ratio: env.max_ratio,
                mean_exceptional_weight: weights.iter().sum::<f64>() / weights.len() as f64,
            })
        })
        .collect()
}

/// Result of one identity family over randomized cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl IdentityCheck {
    fn from_residuals(name: &str, tolerance: f64, residuals: &[f64]) -> Self {
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        IdentityCheck {
            name: name.to_string(),
            cases: residuals.len(),
            max_residual,
            tolerance,
            passed: residuals.iter().all(|r| *r <= tolerance),
            detail: None,
        }
    }
}

const BASES: [f64; 3] = [1.5, 2.0, 3.0];
const NORM_EXPONENTS: [f64; 4] = [1.0, 4.0 / 3.0, 2.0, 4.0];

/// Identity families on one system: commutativity, measure preservation,
/// `E_n A_N = A_N E_n`, summation by parts, Pythagoras and the transference
/// norm identity. `draws` random cases per randomized family.
pub fn identity_suite(
    system: &DynamicalSystem,
    seed: u64,
    draws: usize,
) -> Result<Vec<IdentityCheck>> {
    let atoms = system.atom_count();
    let space = system.space();
    let depth = system.depth();
    let normal = ValueDistribution::Normal;
    let mut checks = Vec::new();

    let outcome = commutativity_check(system);
    checks.push(IdentityCheck {
        name: "commutativity".into(),
        cases: depth + 1,
        max_residual: if outcome.passed { 0.0 } else { 1.0 },
        tolerance: ABS_TOL,
        passed: outcome.passed,
        detail: outcome.witness.map(|w| {
            format!(
                "fails at level {} for the indicator of atom {}",
                w.level, w.atom
            )
        }),
    });

    let mut rng = trial_rng(seed, 1);
    let mut residuals = Vec::new();
    for _ in 0..draws {
        let f = random_observable(&mut rng, atoms, normal);
        let ft = system.map().pull_back(&f);
        for p in NORM_EXPONENTS {
            let (a, b) = (lp_norm(&f, p, space)?, lp_norm(&ft, p, space)?);
            residuals.push((a - b).abs() / a.max(1.0));
        }
    }
    checks.push(IdentityCheck::from_residuals(
        "measure_preservation",
        ABS_TOL,
        &residuals,
    ));

    let mut rng = trial_rng(seed, 2);
    let mut residuals = Vec::new();
    for _ in 0..draws {
        let f = random_observable(&mut rng, atoms, normal);
        let n_avg = rng.random_range(1..=2 * atoms as u64);
        let level = rng.random_range(0..=depth);
        let part = system.filtration().level(level);
        let lhs = conditional_expectation(&system.ergodic_average(&f, n_avg)?, part, space)?;
        let rhs = system.ergodic_average(&conditional_expectation(&f, part, space)?, n_avg)?;
        residuals.push(lhs.max_abs_diff(&rhs));
    }
    checks.push(IdentityCheck::from_residuals(
        "average_commutes_with_conditioning",
        ABS_TOL,
        &residuals,
    ));

    let mut rng = trial_rng(seed, 3);
    let mut residuals = Vec::new();
    for _ in 0..draws {
        let a = BASES[rng.random_range(0..BASES.len())];
        let n = rng.random_range(0..=depth);
        let f = random_observable(&mut rng, atoms, normal);
        let g = random_observable(&mut rng, atoms, normal);
        residuals.push(summation_by_parts_residual(&f, &g, system, a, n)?);
    }
    checks.push(IdentityCheck::from_residuals(
        "summation_by_parts",
        ABS_TOL,
        &residuals,
    ));

    let mut rng = trial_rng(seed, 4);
    let mut residuals = Vec::new();
    for _ in 0..draws {
        let g = random_observable(&mut rng, atoms, normal);
        residuals.push(pythagoras_residual(&g, system.filtration(), space)?);
    }
    checks.push(IdentityCheck::from_residuals(
        "pythagoras",
        REL_TOL,
        &residuals,
    ));

    let mut rng = trial_rng(seed, 5);
    let mut residuals = Vec::new();
    let max_n = (0..=10usize)
        .rev()
        .find(|&n| (1usize << (n + 1)).saturating_mul(atoms) <= MAX_MODEL_ENTRIES / 8)
        .unwrap_or(0);
    for _ in 0..draws {
        let f = random_observable(&mut rng, atoms, normal);
        let n = rng.random_range(0..=max_n);
        for p in NORM_EXPONENTS {
            residuals.push(transference_residual(&f, system, n, p)?);
        }
    }
    checks.push(IdentityCheck::from_residuals(
        "transference",
        ABS_TOL,
        &residuals,
    ));

    Ok(checks)
}

/// Relative gap in `‖g‖₂² − ‖E_D g‖₂² = Σ_k ‖d_k‖₂²`.
pub fn pythagoras_residual(
    g: &Observable,
    filt: &BackwardFiltration,
    space: &AtomSpace,
) -> Result<f64> {
    let mart = backward_martingale(g, filt, space)?;
    let total = lp_norm_pow(g, 2.0, space)?;
    let top = lp_norm_pow(mart.level(mart.depth()), 2.0, space)?;
    let sum = martingale_differences(&mart)
        .iter()
        .map(|d| lp_norm_pow(d, 2.0, space))
        .sum::<Result<f64>>()?;
    let gap = ((total - top) - sum).abs();
    Ok(if total > 0.0 { gap / total } else { gap })
}

/// The catalog systems the suites iterate over at desk scale.
pub fn desk_catalog() -> Result<Vec<(String, DynamicalSystem)>> {
    use crate::dynamics::{generated_subgroup, group_translation};
    let mut out = Vec::new();
    for m in 0..=8u32 {
        for depth in 0..=m as usize {
            out.push((format!("cyclic:{m}:{depth}"), cyclic_rotation(m, depth)?));
        }
    }
    let z2z2 = [2u64, 2];
    let chain = vec![
        vec![vec![0, 0]],
        vec![vec![0, 0], vec![1, 0]],
        generated_subgroup(&z2z2, &[vec![1, 0], vec![0, 1]])?,
    ];
    for t in [[0u64, 0], [1, 0], [0, 1], [1, 1]] {
        out.push((
            format!("group:Z2xZ2:t={t:?}"),
            group_translation(&z2z2, &t, &chain, 2)?,
        ));
    }
    let moduli = [4u64, 6, 3];
    let chain = vec![
        vec![vec![0, 0, 0]],
        generated_subgroup(&moduli, &[vec![0, 3, 0]])?,
        generated_subgroup(&moduli, &[vec![0, 3, 0], vec![2, 0, 0]])?,
        generated_subgroup(&moduli, &[vec![0, 1, 0], vec![2, 0, 0]])?,
        generated_subgroup(&moduli, &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]])?,
    ];
    for t in [[1u64, 1, 1], [3, 5, 2], [2, 3, 0]] {
        out.push((
            format!("group:Z4xZ6xZ3:t={t:?}"),
            group_translation(&moduli, &t, &chain, 4)?,
        ));
    }
    for (m1, m2) in [(1u32, 1u32), (2, 3), (4, 4)] {
        for depth in 0..=m1.min(m2) as usize {
            for (s, t) in [([1u64, 0], [0u64, 1]), ([1, 1], [3, 2])] {
                let pair = product_torus(m1, m2, s, t, depth)?;
                out.push((
                    format!("torus:{m1},{m2}:{depth}:S={s:?}:T={t:?}"),
                    pair.system.clone(),
                ));
                let swapped = DynamicalSystem::checked(
                    pair.system.space().clone(),
                    pair.second.clone(),
                    pair.system.filtration().clone(),
                )?;
                out.push((format!("torus:{m1},{m2}:{depth}:S={t:?}"), swapped));
            }
        }
    }
    Ok(out)
}

/// `sup_M ‖A_M f − (orbit mean)‖_∞` checked against `2‖f‖_∞ L / M` for
/// each `M`, where `L` is the longest orbit. Returns `(M, error, bound)`.
pub fn cesaro_errors(
    f: &Observable,
    system: &DynamicalSystem,
    times: &[u64],
) -> Result<Vec<(u64, f64, f64)>> {
    system.check_observable(f, "observable")?;
    let orbits = system.orbits();
    let limit = orbits.orbit_mean(f);
    let longest = (0..orbits.cycle_count())
        .map(|c| orbits.cycle(c).len())
        .max()
        .unwrap_or(1);
    times
        .iter()
        .map(|&m| {
            let err = system.ergodic_average(f, m)?.max_abs_diff(&limit);
            Ok((m, err, 2.0 * f.max_abs() * longest as f64 / m as f64))
        })
        .collect()
}

/// `(1/L) Σ_{k<L} (f∘S^k)(g∘T^k)` with `L` the least common period of `S`
/// and `T`, evaluated by direct iteration.
pub fn double_average_limit(
    f: &Observable,
    g: &Observable,
    map_s: &Transformation,
    map_t: &Transformation,
) -> Observable {
    let period = common_period(map_s, map_t);
    let atoms = f.len();
    let mut out = vec![0.0; atoms];
    for (i, o) in out.iter_mut().enumerate() {
        let (mut x, mut y) = (i, i);
        let mut acc = 0.0;
        for _ in 0..period {
            acc += f.get(x) * g.get(y);
            x = map_s.image(x);
            y = map_t.image(y);
        }
        *o = acc / period as f64;
    }
    Observable::new(out)
}

fn common_period(map_s: &Transformation, map_t: &Transformation) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let order = |t: &Transformation| {
        let orbits = crate::dynamics::OrbitDecomposition::new(t);
        (0..orbits.cycle_count())
            .map(|c| orbits.cycle(c).len() as u64)
            .fold(1, |acc, l| acc / gcd(acc, l) * l)
    };
    let (a, b) = (order(map_s), order(map_t));
    a / gcd(a, b) * b
}

/// Checks `⌊a^n⌋` is representable for every `n ≤ depth`.
pub fn max_representable_level(a: f64, depth: usize) -> usize {
    (0..=depth)
        .take_while(|&n| u32::try_from(n).is_ok_and(|k| floor_pow(a, k).is_ok()))
        .last()
        .unwrap_or(0)
}
