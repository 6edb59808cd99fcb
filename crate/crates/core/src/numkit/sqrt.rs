use num_complex::Complex64;

use super::path::SampledPath;
use crate::error::{Error, Result};

pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-10;

/// Square root of a sampled complex path with the sign chosen per sample to
/// keep the result continuous.
///
/// The first sample takes the principal root; every later one takes whichever
/// of `±√w` lies closer to its predecessor. Samples with modulus below
/// `zero_threshold` make the branch ambiguous and are rejected.
pub fn continuous_sqrt(path: &SampledPath<Complex64>, zero_threshold: f64) -> Result<SampledPath<Complex64>> {
    let mut out = Vec::with_capacity(path.len());
    let mut prev: Option<Complex64> = None;
    for (x, w) in path.iter() {
        let modulus = w.norm();
        if !(modulus >= zero_threshold) {
            return Err(Error::BranchAmbiguity { x, modulus });
        }
        let root = w.sqrt();
        let chosen = match prev {
            Some(p) if (-root - p).norm() < (root - p).norm() => -root,
            _ => root,
        };
        out.push(chosen);
        prev = Some(chosen);
    }
    SampledPath::new(path.grid().to_vec(), out, path.x0())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn constant_path() {
        let p = SampledPath::sample(0.0, 1.0, 8, |_| Complex64::new(4.0, 0.0)).unwrap();
        let r = continuous_sqrt(&p, DEFAULT_ZERO_THRESHOLD).unwrap();
        assert!(r.values().iter().all(|v| *v == Complex64::new(2.0, 0.0)));
    }

    #[test]
    fn continues_past_the_branch_cut() {
        let p = SampledPath::sample(0.0, TAU, 255, |t| Complex64::new(0.0, t).exp()).unwrap();
        let r = continuous_sqrt(&p, DEFAULT_ZERO_THRESHOLD).unwrap();
        for (t, v) in r.iter() {
            assert!((v - Complex64::new(0.0, 0.5 * t).exp()).norm() < 1e-12, "t = {t}");
        }
        assert!((r.values()[255] + 1.0).norm() < 1e-12);
    }

    #[test]
    fn zero_crossing_is_rejected() {
        let p = SampledPath::sample(-1.0, 1.0, 10, |x| Complex64::new(x, 0.0)).unwrap();
        match continuous_sqrt(&p, DEFAULT_ZERO_THRESHOLD) {
            Err(Error::BranchAmbiguity { x, .. }) => assert!(x.abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn max_jump(v: &[Complex64]) -> f64 {
        v.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn squares_back_and_minimizes_jumps(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..=12)
        ) {
            let values: Vec<Complex64> = pts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            prop_assume!(values.iter().all(|v| v.norm() > 1e-3));
            let grid: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
            let p = SampledPath::new(grid, values.clone(), 0.0).unwrap();
            let r = continuous_sqrt(&p, DEFAULT_ZERO_THRESHOLD).unwrap();
            for (s, w) in r.values().iter().zip(&values) {
                prop_assert!((s * s - w).norm() <= 1e-14 * w.norm().max(1.0));
            }
            // Brute force over every sign assignment that fixes the first
            // sample to the principal root.
            let roots: Vec<Complex64> = values.iter().map(|w| w.sqrt()).collect();
            let n = roots.len();
            let greedy = max_jump(r.values());
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << (n - 1)) {
                let signed: Vec<Complex64> = roots
                    .iter()
                    .enumerate()
                    .map(|(k, s)| if k > 0 && mask & (1 << (k - 1)) != 0 { -s } else { *s })
                    .collect();
                best = best.min(max_jump(&signed));
            }
            prop_assert!(greedy <= best + 1e-12, "greedy {} > best {}", greedy, best);
        }
    }
}
