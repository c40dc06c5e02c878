//! The ergodic–martingale paraproduct
//!
//! ```text
//! Π_n^em(f, g) = Σ_{k<n} (A_{⌊a^k⌋} f)(E_{k+1} g − E_k g)
//! ```
//!
//! its mirror `Π_n^me`, which differences the averages instead, the
//! two-filtration martingale–martingale paraproduct on product spaces and the
//! double ergodic averages `B_N`.
//!
//! Sums over `k` are accumulated in increasing index order, so results are
//! deterministic.

use crate::dynamics::{floor_pow, k_index, DynamicalSystem, OrbitSums, Transformation};
use crate::error::{Error, Result};
use crate::martingale::{martingale_levels, MartingaleSequence};
use crate::space::{
    block_average, lp_norm, AtomSpace, Exponent, ForwardFiltration, Observable, Partition,
};

/// Shared ingredients of one paraproduct evaluation.
struct Ingredients<'a> {
    sums: OrbitSums<'a>,
    mart: MartingaleSequence,
}

impl<'a> Ingredients<'a> {
    fn new(
        f: &Observable,
        g: &Observable,
        system: &'a DynamicalSystem,
        through: usize,
    ) -> Result<Self> {
        system.check_observable(f, "f")?;
        system.check_observable(g, "g")?;
        if through > system.depth() {
            return Err(Error::invalid(format!(
                "n = {through} exceeds the filtration depth {}",
                system.depth()
            )));
        }
        Ok(Ingredients {
            sums: system.orbits().sums(f),
            mart: martingale_levels(g, system.filtration(), system.space(), through),
        })
    }

    /// `(A_N f)(E_{k+1} g − E_k g)`.
    fn em_term(&self, n_avg: u64, k: usize) -> Observable {
        let lo = self.mart.level(k);
        let hi = self.mart.level(k + 1);
        Observable::new(
            lo.values()
                .iter()
                .zip(hi.values())
                .enumerate()
                .map(|(atom, (&l, &h))| {
                    let d = h - l;
                    if d == 0.0 {
                        0.0
                    } else {
                        self.sums.orbit_sum(atom, n_avg) / n_avg as f64 * d
                    }
                })
                .collect(),
        )
    }
}

fn check_base(a: f64) -> Result<()> {
    if !(a.is_finite() && a > 1.0) {
        return Err(Error::invalid(format!(
            "a = {a} must be a finite number > 1"
        )));
    }
    Ok(())
}

/// `⌊a^k⌋` for `k = 0..=n`.
pub fn lacunary_times(a: f64, n: usize) -> Result<Vec<u64>> {
    (0..=n)
        .map(|k| {
            let k = u32::try_from(k).map_err(|_| Error::range("index too large"))?;
            floor_pow(a, k)
        })
        .collect()
}

/// `Π_n^em(f, g)`; `n = 0` gives the zero observable.
pub fn pi_em(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    n: usize,
) -> Result<Observable> {
    Ok(pi_em_partial_sums(f, g, system, a, n)?
        .pop()
        .expect("Π_0 is always present"))
}

/// `[Π_0, Π_1, …, Π_horizon]` with `Π_0 = 0`.
pub fn pi_em_partial_sums(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    horizon: usize,
) -> Result<Vec<Observable>> {
    check_base(a)?;
    let ing = Ingredients::new(f, g, system, horizon)?;
    let times = lacunary_times(a, horizon.saturating_sub(1))?;
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(Observable::zeros(system.atom_count()));
    for k in 0..horizon {
        let mut next = out[k].clone();
        next.add_scaled(1.0, &ing.em_term(times[k], k));
        out.push(next);
    }
    Ok(out)
}

/// Terms `(A_{⌊a^k⌋} f)(E_{k+1} g − E_k g)` for `k < n`.
pub fn pi_em_terms(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    n: usize,
) -> Result<Vec<Observable>> {
    check_base(a)?;
    let ing = Ingredients::new(f, g, system, n)?;
    let times = lacunary_times(a, n.saturating_sub(1))?;
    Ok((0..n).map(|k| ing.em_term(times[k], k)).collect())
}

/// `Π_n^me(f, g) = Σ_{k<n} (A_{⌊a^{k+1}⌋} f − A_{⌊a^k⌋} f)(E_{k+1} g)`.
pub fn pi_me(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    n: usize,
) -> Result<Observable> {
    check_base(a)?;
    let ing = Ingredients::new(f, g, system, n)?;
    let times = lacunary_times(a, n)?;
    let mut acc = Observable::zeros(system.atom_count());
    if n == 0 {
        return Ok(acc);
    }
    let mut prev = ing.sums.average(times[0]);
    for k in 0..n {
        let next = ing.sums.average(times[k + 1]);
        let term = &(&next - &prev) * ing.mart.level(k + 1);
        acc.add_scaled(1.0, &term);
        prev = next;
    }
    Ok(acc)
}

/// Both sides of `Π_n^em + Π_n^me = (A_{⌊a^n⌋} f)(E_n g) − fg`, each
/// evaluated independently.
pub fn summation_by_parts_sides(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    n: usize,
) -> Result<(Observable, Observable)> {
    let lhs = &pi_em(f, g, system, a, n)? + &pi_me(f, g, system, a, n)?;
    let time = floor_pow(
        a,
        u32::try_from(n).map_err(|_| Error::range("n too large"))?,
    )?;
    let avg = system.ergodic_average(f, time)?;
    let top = martingale_levels(g, system.filtration(), system.space(), n);
    let rhs = &(&avg * top.level(n)) - &(f * g);
    Ok((lhs, rhs))
}

/// Max-norm of `Π_n^em + Π_n^me − (A_{⌊a^n⌋} f)(E_n g) + fg`.
pub fn summation_by_parts_residual(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    n: usize,
) -> Result<f64> {
    let (lhs, rhs) = summation_by_parts_sides(f, g, system, a, n)?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// Upper summation index `⌊(n−1) log₂ a⌋`, computed exactly as the largest
/// `l` with `2^l ≤ ⌊a^{n−1}⌋`.
pub fn sampled_upper_index(a: f64, n: usize) -> Result<u32> {
    check_base(a)?;
    if n == 0 {
        return Err(Error::invalid("sampled paraproduct index needs n ≥ 1"));
    }
    let p = floor_pow(
        a,
        u32::try_from(n - 1).map_err(|_| Error::range("n too large"))?,
    )?;
    Ok(63 - p.leading_zeros())
}

/// `Σ_{l=0}^{⌊(n−1) log₂ a⌋} (A_{2^l} f)(E_{K(l+1)} g − E_{K(l)} g)`, the
/// dyadic averages paired with the backward martingale sampled at the times
/// `K(l)`. `n = 0` gives the zero observable.
pub fn sampled_pi_em(
    f: &Observable,
    g: &Observable,
    system: &DynamicalSystem,
    a: f64,
    n: usize,
) -> Result<Observable> {
    check_base(a)?;
    if n == 0 {
        system.check_observable(f, "f")?;
        system.check_observable(g, "g")?;
        return Ok(Observable::zeros(system.atom_count()));
    }
    let top = sampled_upper_index(a, n)?;
    let ks = (0..=top + 1)
        .map(|l| k_index(a, l))
        .collect::<Result<Vec<_>>>()?;
    let needed = *ks.last().expect("nonempty") as usize;
    if needed > system.depth() {
        return Err(Error::invalid(format!(
            "sampling needs filtration depth {needed}, system has {}",
            system.depth()
        )));
    }
    let ing = Ingredients::new(f, g, system, needed)?;
    let mut acc = Observable::zeros(system.atom_count());
    for l in 0..=top as usize {
        let avg = ing.sums.average(1u64 << l);
        let d = ing.mart.level(ks[l + 1] as usize) - ing.mart.level(ks[l] as usize);
        acc.add_scaled(1.0, &(&avg * &d));
    }
    Ok(acc)
}

/// Errors with the first atom where `S∘T ≠ T∘S`.
pub fn check_commuting(s: &Transformation, t: &Transformation) -> Result<()> {
    if s.atom_count() != t.atom_count() {
        return Err(Error::invalid("transformations act on different spaces"));
    }
    for atom in 0..s.atom_count() {
        if s.image(t.image(atom)) != t.image(s.image(atom)) {
            return Err(Error::NonCommuting { atom });
        }
    }
    Ok(())
}

/// `B_N(f, g) = (1/N) Σ_{k<N} (f∘S^k)(g∘T^k)` for commuting `S`, `T`.
pub fn double_average(
    f: &Observable,
    g: &Observable,
    map_s: &Transformation,
    map_t: &Transformation,
    n: u64,
) -> Result<Observable> {
    Ok(double_average_sequence(f, g, map_s, map_t, &[n])?
        .pop()
        .expect("one time requested"))
}

/// `B_N` for every `N` in a strictly increasing list, in one pass over `k`.
pub fn double_average_sequence(
    f: &Observable,
    g: &Observable,
    map_s: &Transformation,
    map_t: &Transformation,
    times: &[u64],
) -> Result<Vec<Observable>> {
    check_commuting(map_s, map_t)?;
    let atoms = map_s.atom_count();
    if f.len() != atoms || g.len() != atoms {
        return Err(Error::invalid("observable and transformation sizes differ"));
    }
    if times.is_empty() || times[0] == 0 || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "averaging times must be positive and strictly increasing",
        ));
    }
    let mut at_s: Vec<usize> = (0..atoms).collect();
    let mut at_t: Vec<usize> = (0..atoms).collect();
    let mut acc = vec![0.0; atoms];
    let mut out = Vec::with_capacity(times.len());
    let mut k = 0u64;
    for &stop in times {
        while k < stop {
            for i in 0..atoms {
                acc[i] += f.get(at_s[i]) * g.get(at_t[i]);
                at_s[i] = map_s.image(at_s[i]);
                at_t[i] = map_t.image(at_t[i]);
            }
            k += 1;
        }
        out.push(Observable::new(
            acc.iter().map(|s| s / stop as f64).collect(),
        ));
    }
    Ok(out)
}

/// `Ω₁ × Ω₂` with a forward filtration acting in each coordinate.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    space1: AtomSpace,
    space2: AtomSpace,
    forward1: ForwardFiltration,
    forward2: ForwardFiltration,
}

impl ProductSpace {
    pub fn new(
        space1: AtomSpace,
        space2: AtomSpace,
        forward1: ForwardFiltration,
        forward2: ForwardFiltration,
    ) -> Result<Self> {
        space1.check_len(forward1.atom_count(), "first filtration")?;
        space2.check_len(forward2.atom_count(), "second filtration")?;
        Ok(ProductSpace {
            space1,
            space2,
            forward1,
            forward2,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.space1.atom_count(), self.space2.atom_count())
    }

    pub fn space1(&self) -> &AtomSpace {
        &self.space1
    }

    pub fn space2(&self) -> &AtomSpace {
        &self.space2
    }

    pub fn forward1(&self) -> &ForwardFiltration {
        &self.forward1
    }

    pub fn forward2(&self) -> &ForwardFiltration {
        &self.forward2
    }

    /// Product weights `w₁(i)·w₂(j)`, row-major.
    pub fn weights(&self) -> Vec<f64> {
        self.space1
            .weights()
            .iter()
            .flat_map(|&a| self.space2.weights().iter().map(move |&b| a * b))
            .collect()
    }

    fn check(&self, obs: &ProductObservable, what: &str) -> Result<()> {
        if obs.shape() != self.shape() {
            return Err(Error::invalid(format!(
                "{what} has shape {:?}, product space {:?}",
                obs.shape(),
                self.shape()
            )));
        }
        Ok(())
    }

    pub fn lp_norm(&self, obs: &ProductObservable, p: impl Into<Exponent>) -> Result<f64> {
        self.check(obs, "observable")?;
        let flat = AtomSpace::new(self.weights())?;
        lp_norm(&Observable::new(obs.values.clone()), p, &flat)
    }

    /// `E₁(F | part)`: conditioning in the first coordinate for each fixed
    /// second coordinate.
    pub fn condition_first(
        &self,
        obs: &ProductObservable,
        part: &Partition,
    ) -> Result<ProductObservable> {
        self.check(obs, "observable")?;
        self.space1.check_len(part.atom_count(), "partition")?;
        let (rows, cols) = self.shape();
        let mut out = vec![0.0; rows * cols];
        let mut column = vec![0.0; rows];
        for j in 0..cols {
            for (i, c) in column.iter_mut().enumerate() {
                *c = obs.get(i, j);
            }
            let avg = block_average(&column, part, self.space1.weights());
            for i in 0..rows {
                out[i * cols + j] = avg.get(i);
            }
        }
        Ok(ProductObservable {
            rows,
            cols,
            values: out,
        })
    }

    /// `E₂(G | part)`: conditioning in the second coordinate for each fixed
    /// first coordinate.
    pub fn condition_second(
        &self,
        obs: &ProductObservable,
        part: &Partition,
    ) -> Result<ProductObservable> {
        self.check(obs, "observable")?;
        self.space2.check_len(part.atom_count(), "partition")?;
        let (rows, cols) = self.shape();
        let values = (0..rows)
            .flat_map(|i| block_average(obs.row(i), part, self.space2.weights()).into_values())
            .collect();
        Ok(ProductObservable { rows, cols, values })
    }
}

/// A function on `Ω₁ × Ω₂`, stored row-major (`rows = |Ω₁|`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductObservable {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ProductObservable {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values for a {rows}×{cols} observable",
                values.len()
            )));
        }
        Ok(ProductObservable { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        ProductObservable { rows, cols, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &ProductObservable) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn zip_with(
        &self,
        other: &ProductObservable,
        f: impl Fn(f64, f64) -> f64,
    ) -> ProductObservable {
        ProductObservable {
            rows: self.rows,
            cols: self.cols,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// `Σ_{k<n} E₁(F | U_k) (E₂(G | V_{k+1}) − E₂(G | V_k))`.
pub fn mm_paraproduct(
    big_f: &ProductObservable,
    big_g: &ProductObservable,
    ps: &ProductSpace,
    n: usize,
) -> Result<ProductObservable> {
    ps.check(big_f, "F")?;
    ps.check(big_g, "G")?;
    let max = ps.forward1.depth().min(ps.forward2.depth());
    if n > max {
        return Err(Error::invalid(format!(
            "n = {n} exceeds the common filtration depth {max}"
        )));
    }
    let (rows, cols) = ps.shape();
    let mut acc = ProductObservable {
        rows,
        cols,
        values: vec![0.0; rows * cols],
    };
    if n == 0 {
        return Ok(acc);
    }
    let mut prev = ps.condition_second(big_g, ps.forward2.level(0))?;
    for k in 0..n {
        let next = ps.condition_second(big_g, ps.forward2.level(k + 1))?;
        let first = ps.condition_first(big_f, ps.forward1.level(k))?;
        let term = first.zip_with(&next.zip_with(&prev, |x, y| x - y), |x, y| x * y);
        acc = acc.zip_with(&term, |x, y| x + y);
        prev = next;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{cyclic_rotation, product_torus};

    fn f_unit() -> Observable {
        Observable::new(vec![1.0, 0.0, 0.0, 0.0])
    }

    fn g_ramp() -> Observable {
        Observable::new(vec![1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn golden_z4_pi_em() {
        let s = cyclic_rotation(2, 2).unwrap();
        let p = pi_em(&f_unit(), &g_ramp(), &s, 2.0, 2).unwrap();
        assert!(p.max_abs_diff(&Observable::new(vec![1.25, 0.0, 0.0, -0.25])) < 1e-12);
    }

    #[test]
    fn golden_z4_pi_me_and_identity() {
        let s = cyclic_rotation(2, 2).unwrap();
        let p = pi_me(&f_unit(), &g_ramp(), &s, 2.0, 2).unwrap();
        assert!(p.max_abs_diff(&Observable::new(vec![-1.625, 0.625, 0.625, 0.875])) < 1e-12);
        let (lhs, rhs) = summation_by_parts_sides(&f_unit(), &g_ramp(), &s, 2.0, 2).unwrap();
        let both = Observable::new(vec![-0.375, 0.625, 0.625, 0.625]);
        assert!(lhs.max_abs_diff(&both) < 1e-12);
        assert!(rhs.max_abs_diff(&both) < 1e-12);
        assert!(summation_by_parts_residual(&f_unit(), &g_ramp(), &s, 2.0, 2).unwrap() < 1e-12);
        let z = Observable::zeros(4);
        assert_eq!(
            summation_by_parts_residual(&z, &z, &s, 2.0, 2).unwrap(),
            0.0
        );
    }

    #[test]
    fn pi_em_degenerate_inputs() {
        let s = cyclic_rotation(3, 3).unwrap();
        let f = Observable::new(vec![0.2, -1.0, 3.0, 0.5, 0.0, 1.5, -2.0, 0.7]);
        let g = Observable::new(vec![1.1, 0.3, -0.4, 2.0, 0.9, -1.3, 0.0, 0.6]);
        let c = Observable::constant(8, 1.7);
        for n in 0..=3 {
            assert_eq!(pi_em(&f, &c, &s, 1.5, n).unwrap().max_abs(), 0.0);
            let one = Observable::constant(8, 1.0);
            let top = martingale_levels(&g, s.filtration(), s.space(), n);
            let expect = top.level(n) - &g;
            assert!(pi_em(&one, &g, &s, 1.5, n).unwrap().max_abs_diff(&expect) < 1e-12);
            assert!(pi_me(&c, &g, &s, 3.0, n).unwrap().max_abs() < 1e-12);
            let t = floor_pow(2.0, n as u32).unwrap();
            let expect = (&s.ergodic_average(&f, t).unwrap() - &f).scale(1.7);
            assert!(pi_me(&f, &c, &s, 2.0, n).unwrap().max_abs_diff(&expect) < 1e-12);
        }
        assert_eq!(pi_em(&f, &g, &s, 2.0, 0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn depth_and_base_errors() {
        let s = cyclic_rotation(2, 2).unwrap();
        assert!(matches!(
            pi_em(&f_unit(), &g_ramp(), &s, 2.0, 3),
            Err(Error::InvalidInput(_))
        ));
        assert!(pi_me(&f_unit(), &g_ramp(), &s, 2.0, 3).is_err());
        assert!(pi_em(&f_unit(), &g_ramp(), &s, 1.0, 1).is_err());
        assert!(pi_em(&Observable::zeros(3), &g_ramp(), &s, 2.0, 1).is_err());
    }

    /// Term-by-term evaluation straight from the definition, iterating the map.
    fn sampled_oracle(
        f: &Observable,
        g: &Observable,
        s: &DynamicalSystem,
        a: f64,
        n: usize,
    ) -> Observable {
        let upper = ((n - 1) as f64 * a.log2()).floor() as u32;
        let k = |l: u32| {
            (0..)
                .find(|&k| a.powi(k).floor() >= 2f64.powi(l as i32))
                .unwrap() as usize
        };
        let cond = |level: usize| {
            let mut x = g.clone();
            for lv in 1..=level {
                x = crate::space::conditional_expectation(&x, s.filtration().level(lv), s.space())
                    .unwrap();
            }
            x
        };
        let atoms = s.atom_count();
        let mut out = vec![0.0; atoms];
        for l in 0..=upper {
            let n_avg = 1usize << l;
            let d = &cond(k(l + 1)) - &cond(k(l));
            for (atom, o) in out.iter_mut().enumerate() {
                let mut x = atom;
                let mut sum = 0.0;
                for _ in 0..n_avg {
                    sum += f.get(x);
                    x = s.map().image(x);
                }
                *o += sum / n_avg as f64 * d.get(atom);
            }
        }
        Observable::new(out)
    }

    #[test]
    fn sampled_matches_pi_em_for_dyadic_base() {
        let s = cyclic_rotation(4, 4).unwrap();
        let f = Observable::new((0..16).map(|i| ((i * 7) % 5) as f64 - 1.5).collect());
        let g = Observable::new((0..16).map(|i| ((i * 3) % 11) as f64 * 0.25).collect());
        for n in 0..=4 {
            let a = sampled_pi_em(&f, &g, &s, 2.0, n).unwrap();
            let b = pi_em(&f, &g, &s, 2.0, n).unwrap();
            assert_eq!(a, b, "n={n}");
        }
        assert_eq!(
            sampled_pi_em(&f, &Observable::constant(16, 2.0), &s, 3.0, 2)
                .unwrap()
                .max_abs(),
            0.0
        );
    }

    #[test]
    fn sampled_matches_direct_sum_for_base_three() {
        let s = cyclic_rotation(5, 5).unwrap();
        let f = Observable::new((0..32).map(|i| ((i * 13) % 7) as f64 - 3.0).collect());
        let g = Observable::new((0..32).map(|i| ((i * 5) % 9) as f64 * 0.5).collect());
        // ⌊(n−1)log₂3⌋ = 1, 3 for n = 2, 3; K(2) = 2, K(4) = 3
        for n in [1, 2, 3] {
            let got = sampled_pi_em(&f, &g, &s, 3.0, n).unwrap();
            let want = sampled_oracle(&f, &g, &s, 3.0, n);
            assert!(got.max_abs_diff(&want) < 1e-12, "n={n}");
        }
        // n = 5: ⌊4·log₂3⌋ = 6 and K(7) = 5 fits; n = 6 needs K(8) = 6 > 5
        assert!(sampled_pi_em(&f, &g, &s, 3.0, 5).is_ok());
        assert!(sampled_pi_em(&f, &g, &s, 3.0, 6).is_err());
    }

    #[test]
    fn sampled_upper_index_is_exact() {
        assert_eq!(sampled_upper_index(2.0, 1).unwrap(), 0);
        assert_eq!(sampled_upper_index(2.0, 9).unwrap(), 8);
        assert_eq!(sampled_upper_index(4.0, 3).unwrap(), 4);
        assert_eq!(sampled_upper_index(3.0, 3).unwrap(), 3);
        assert_eq!(sampled_upper_index(1.5, 5).unwrap(), 2);
    }

    #[test]
    fn mm_paraproduct_two_point_example() {
        let half = AtomSpace::uniform(2).unwrap();
        let u = ForwardFiltration::new(vec![Partition::trivial(2), Partition::discrete(2)], true)
            .unwrap();
        let ps = ProductSpace::new(half.clone(), half, u.clone(), u).unwrap();
        let big_f = ProductObservable::from_fn(2, 2, |x, _| x as f64);
        let big_g = ProductObservable::from_fn(2, 2, |_, y| y as f64);
        let m = mm_paraproduct(&big_f, &big_g, &ps, 1).unwrap();
        assert_eq!(m.values(), &[-0.25, 0.25, -0.25, 0.25]);

        let c = ProductObservable::from_fn(2, 2, |_, _| 3.0);
        assert_eq!(
            mm_paraproduct(&big_f, &c, &ps, 1).unwrap().values(),
            &[0.0; 4]
        );
        assert!(mm_paraproduct(&big_f, &big_g, &ps, 2).is_err());
    }

    #[test]
    fn mm_paraproduct_telescopes_for_unit_first_factor() {
        let s1 = AtomSpace::new(vec![0.2, 0.3, 0.5]).unwrap();
        let s2 = AtomSpace::uniform(4).unwrap();
        let u = ForwardFiltration::new(
            vec![
                Partition::trivial(3),
                Partition::from_blocks(3, &[vec![0, 2], vec![1]]).unwrap(),
                Partition::discrete(3),
            ],
            true,
        )
        .unwrap();
        let v = ForwardFiltration::dyadic(2).unwrap();
        let ps = ProductSpace::new(s1, s2, u, v).unwrap();
        let one = ProductObservable::from_fn(3, 4, |_, _| 1.0);
        let big_g = ProductObservable::from_fn(3, 4, |i, j| {
            (i as f64 - 1.0) * (j as f64).sin() + 0.1 * j as f64
        });
        for n in 0..=2 {
            let m = mm_paraproduct(&one, &big_g, &ps, n).unwrap();
            let expect = ps
                .condition_second(&big_g, ps.forward2().level(n))
                .unwrap()
                .zip_with(
                    &ps.condition_second(&big_g, ps.forward2().level(0)).unwrap(),
                    |x, y| x - y,
                );
            assert!(m.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn double_average_reductions() {
        let s = cyclic_rotation(3, 0).unwrap();
        let f = Observable::new((0..8).map(|i| (i as f64 * 0.7).cos()).collect());
        let g = Observable::new((0..8).map(|i| (i as f64 * 1.3).sin()).collect());
        let t = s.map();
        for n in [1, 2, 5, 8, 13] {
            let b = double_average(&f, &g, t, t, n).unwrap();
            let expect = s.ergodic_average(&(&f * &g), n).unwrap();
            assert!(b.max_abs_diff(&expect) < 1e-12);
        }
        let b1 = double_average(&f, &g, t, &crate::dynamics::iterate(t, 3), 1).unwrap();
        assert!(b1.max_abs_diff(&(&f * &g)) < 1e-15);
    }

    #[test]
    fn double_average_on_torus_matches_brute_force() {
        let pair = product_torus(2, 2, [1, 0], [0, 1], 0).unwrap();
        let f = Observable::new(
            (0..16)
                .map(|i| if i / 4 == 1 { 1.0 } else { 0.0 })
                .collect(),
        );
        let g = Observable::new(
            (0..16)
                .map(|i| if i % 4 == 2 { 1.0 } else { 0.0 })
                .collect(),
        );
        let b = double_average(&f, &g, pair.first(), &pair.second, 4).unwrap();
        for atom in 0..16 {
            let (x, y) = (atom / 4, atom % 4);
            let want: f64 = (0..4)
                .map(|k| f.get(((x + k) % 4) * 4 + y) * g.get(x * 4 + (y + k) % 4))
                .sum::<f64>()
                / 4.0;
            assert!((b.get(atom) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn double_average_rejects_non_commuting_maps() {
        let space = AtomSpace::uniform(3).unwrap();
        let s = Transformation::new(vec![1, 0, 2], &space).unwrap();
        let t = Transformation::new(vec![0, 2, 1], &space).unwrap();
        let f = Observable::constant(3, 1.0);
        assert_eq!(
            double_average(&f, &f, &s, &t, 2),
            Err(Error::NonCommuting { atom: 0 })
        );
    }
}
