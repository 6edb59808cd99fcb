//! Fourth-order central finite differences on uniform grids.
//!
//! Each function returns derivative estimates for the interior samples only;
//! the first entry belongs to grid index [`FIRST_MARGIN`] (or
//! [`THIRD_MARGIN`] for the third derivative).

use num_complex::Complex64;

pub const FIRST_MARGIN: usize = 2;
pub const SECOND_MARGIN: usize = 2;
pub const THIRD_MARGIN: usize = 3;

pub fn first_derivative(f: &[Complex64], h: f64) -> Vec<Complex64> {
    stencil(f, FIRST_MARGIN, |w| (w[0] - 8.0 * w[1] + 8.0 * w[3] - w[4]) / (12.0 * h))
}

pub fn second_derivative(f: &[Complex64], h: f64) -> Vec<Complex64> {
    stencil(f, SECOND_MARGIN, |w| {
        (-w[0] + 16.0 * w[1] - 30.0 * w[2] + 16.0 * w[3] - w[4]) / (12.0 * h * h)
    })
}

pub fn third_derivative(f: &[Complex64], h: f64) -> Vec<Complex64> {
    stencil(f, THIRD_MARGIN, |w| {
        (w[0] - 8.0 * w[1] + 13.0 * w[2] - 13.0 * w[4] + 8.0 * w[5] - w[6]) / (8.0 * h * h * h)
    })
}

fn stencil(f: &[Complex64], margin: usize, rule: impl Fn(&[Complex64]) -> Complex64) -> Vec<Complex64> {
    if f.len() < 2 * margin + 1 {
        return Vec::new();
    }
    f.windows(2 * margin + 1).map(rule).collect()
}
