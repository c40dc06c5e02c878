//! Brute-force evaluations of the operators straight from their definitions.
//! Nothing here shares code with the library beyond the data types.

#![allow(dead_code)]

use ergomart::dynamics::{DynamicalSystem, Transformation};
use ergomart::space::{Observable, Partition};

pub fn direct_average(f: &[f64], map: &Transformation, n: u64) -> Vec<f64> {
    (0..f.len())
        .map(|i| {
            let mut x = i;
            let mut acc = 0.0;
            for _ in 0..n {
                acc += f[x];
                x = map.image(x);
            }
            acc / n as f64
        })
        .collect()
}

pub fn direct_cond_exp(g: &[f64], part: &Partition, weights: &[f64]) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            let b = part.block(i);
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..g.len() {
                if part.block(j) == b {
                    num += weights[j] * g[j];
                    den += weights[j];
                }
            }
            num / den
        })
        .collect()
}

pub fn direct_floor_pow(a: f64, k: usize) -> u64 {
    // exact for the rational bases used in tests
    let (num, den): (u128, u128) = if a == 1.5 {
        (3, 2)
    } else if a == 2.0 {
        (2, 1)
    } else if a == 3.0 {
        (3, 1)
    } else if a == 1.25 {
        (5, 4)
    } else {
        panic!("unsupported base {a}")
    };
    (num.pow(k as u32) / den.pow(k as u32)) as u64
}

fn mart(g: &[f64], s: &DynamicalSystem, k: usize) -> Vec<f64> {
    direct_cond_exp(g, s.filtration().level(k), s.space().weights())
}

pub fn direct_pi_em(f: &[f64], g: &[f64], s: &DynamicalSystem, a: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for k in 0..n {
        let avg = direct_average(f, s.map(), direct_floor_pow(a, k));
        let (lo, hi) = (mart(g, s, k), mart(g, s, k + 1));
        for i in 0..f.len() {
            out[i] += avg[i] * (hi[i] - lo[i]);
        }
    }
    out
}

pub fn direct_pi_me(f: &[f64], g: &[f64], s: &DynamicalSystem, a: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for k in 0..n {
        let lo = direct_average(f, s.map(), direct_floor_pow(a, k));
        let hi = direct_average(f, s.map(), direct_floor_pow(a, k + 1));
        let e = mart(g, s, k + 1);
        for i in 0..f.len() {
            out[i] += (hi[i] - lo[i]) * e[i];
        }
    }
    out
}

/// `E(f∘T | G_n) = E(f | G_n)∘T` tested on every indicator and level.
pub fn direct_commutes(s: &DynamicalSystem) -> Option<(usize, usize)> {
    let n = s.atom_count();
    let w = s.space().weights();
    for level in 0..=s.depth() {
        let part = s.filtration().level(level);
        for atom in 0..n {
            let mut ind = vec![0.0; n];
            ind[atom] = 1.0;
            let pulled: Vec<f64> = (0..n).map(|i| ind[s.map().image(i)]).collect();
            let lhs = direct_cond_exp(&pulled, part, w);
            let e = direct_cond_exp(&ind, part, w);
            let rhs: Vec<f64> = (0..n).map(|i| e[s.map().image(i)]).collect();
            if lhs.iter().zip(&rhs).any(|(x, y)| (x - y).abs() > 1e-12) {
                return Some((level, atom));
            }
        }
    }
    None
}

pub fn max_diff(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn obs(v: &[f64]) -> Observable {
    Observable::new(v.to_vec())
}
