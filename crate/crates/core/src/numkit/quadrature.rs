//! Fourth-order quadrature on uniform grids.
//!
//! Each cell is integrated exactly against the cubic through four
//! neighbouring samples (centred where possible, one-sided at the ends), which
//! gives the interior weights `(−1, 13, 13, −1)/24`. Partial cells integrate
//! the same cubic over a fraction of the cell.

use num_complex::Complex64;

use super::path::SampledPath;
use crate::error::{Error, Result};

/// Running integral `∫_{grid[0]}^{grid[k]} f` at every grid point.
pub fn cumulative_integral(samples: &SampledPath<Complex64>) -> Vec<Complex64> {
    let n = samples.len();
    let h = samples.step();
    let f = samples.values();
    let mut out = Vec::with_capacity(n);
    let mut acc = Complex64::default();
    out.push(acc);
    for k in 0..n - 1 {
        acc += partial_cell(f, h, k, 1.0);
        out.push(acc);
    }
    out
}

/// `∫_a^b f` for samples on a uniform grid; `a` and `b` may fall inside cells.
pub fn periodic_quadrature(samples: &SampledPath<Complex64>, a: f64, b: f64) -> Result<Complex64> {
    if b < a {
        return periodic_quadrature(samples, b, a).map(|v| -v);
    }
    let cumulative = cumulative_integral(samples);
    Ok(integral_to(samples, &cumulative, b)? - integral_to(samples, &cumulative, a)?)
}

/// `∫_{grid[0]}^{x} f` given the precomputed running integral.
pub(crate) fn integral_to(
    samples: &SampledPath<Complex64>,
    cumulative: &[Complex64],
    x: f64,
) -> Result<Complex64> {
    let (start, end) = (samples.start(), samples.end());
    let h = samples.step();
    let slack = 1e-9 * h;
    if !(x >= start - slack && x <= end + slack) {
        return Err(Error::domain(format!(
            "integration bound {x} outside sampled range [{start}, {end}]"
        )));
    }
    if let Some(k) = samples.index_of(x) {
        return Ok(cumulative[k]);
    }
    let n = samples.len();
    let k = (((x - start) / h).floor() as usize).min(n - 2);
    let t = (x - samples.grid()[k]) / h;
    Ok(cumulative[k] + partial_cell(samples.values(), h, k, t))
}

/// `∫_{x_k}^{x_k + t h}` of the interpolating polynomial through up to four
/// samples around cell `k`.
fn partial_cell(f: &[Complex64], h: f64, k: usize, t: f64) -> Complex64 {
    let n = f.len();
    let m = n.min(4);
    let first = if m < 4 { 0 } else { k.saturating_sub(1).min(n - 4) };
    let offsets: Vec<f64> = (0..m).map(|j| (first + j) as f64 - k as f64).collect();
    let weights = lagrange_integral_weights(&offsets, t);
    weights
        .iter()
        .enumerate()
        .map(|(j, w)| f[first + j] * *w)
        .sum::<Complex64>()
        * h
}

/// `∫_0^t L_j(s) ds` for the Lagrange basis on the given node offsets.
fn lagrange_integral_weights(nodes: &[f64], t: f64) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            // Expand Π_{i≠j} (s − x_i)/(x_j − x_i) into monomial coefficients.
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for (i, &xi) in nodes.iter().enumerate() {
                if i == j {
                    continue;
                }
                let mut next = vec![0.0; poly.len() + 1];
                for (d, p) in poly.iter().enumerate() {
                    next[d + 1] += p;
                    next[d] -= p * xi;
                }
                poly = next;
                denom *= xj - xi;
            }
            poly.iter()
                .enumerate()
                .map(|(d, p)| p * t.powi(d as i32 + 1) / (d as f64 + 1.0))
                .sum::<f64>()
                / denom
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn sampled(f: impl Fn(f64) -> f64, n: usize) -> SampledPath<Complex64> {
        SampledPath::sample(0.0, TAU, n, |x| Complex64::new(f(x), 0.0)).unwrap()
    }

    #[test]
    fn interior_weights_are_the_cubic_rule() {
        let w = lagrange_integral_weights(&[-1.0, 0.0, 1.0, 2.0], 1.0);
        let expected = [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let edge = lagrange_integral_weights(&[0.0, 1.0, 2.0, 3.0], 1.0);
        for (a, b) in edge.iter().zip([9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn textbook_integrals() {
        let one = sampled(|_| 1.0, 2048);
        assert!((periodic_quadrature(&one, 0.0, TAU).unwrap().re - TAU).abs() < 1e-12);
        let cos = sampled(f64::cos, 2048);
        assert!(periodic_quadrature(&cos, 0.0, TAU).unwrap().norm() < 1e-10);
        let cos2 = sampled(|x| x.cos().powi(2), 2048);
        assert!((periodic_quadrature(&cos2, 0.0, TAU).unwrap().re - PI).abs() < 1e-10);
    }

    #[test]
    fn partial_cells_are_fourth_order() {
        let exp = sampled(f64::exp, 256);
        let (a, b) = (0.0123f64, 5.4321f64);
        let exact = b.exp() - a.exp();
        let got = periodic_quadrature(&exp, a, b).unwrap().re;
        assert!((got - exact).abs() < 1e-8 * exact, "{got} vs {exact}");
        let back = periodic_quadrature(&exp, b, a).unwrap().re;
        assert_eq!(back, -got);
    }

    #[test]
    fn convergence_order_is_at_least_four() {
        let err = |n| {
            let p = sampled(|x| (0.3 * x).exp(), n);
            (periodic_quadrature(&p, 0.1, 6.0).unwrap().re - ((0.3f64 * 6.0).exp() - 0.03f64.exp()) / 0.3).abs()
        };
        assert!(err(32) / err(64) > 14.0);
    }

    #[test]
    fn out_of_range_is_a_domain_error() {
        let p = sampled(f64::cos, 16);
        assert!(matches!(periodic_quadrature(&p, -0.5, 1.0), Err(Error::Domain(_))));
        assert!(periodic_quadrature(&p, 0.0, 7.0).is_err());
    }

    #[test]
    fn short_paths_fall_back_to_lower_order() {
        let p = SampledPath::new(vec![0.0, 1.0], vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)], 0.0).unwrap();
        assert!((periodic_quadrature(&p, 0.0, 1.0).unwrap().re - 2.0).abs() < 1e-15);
    }
}
