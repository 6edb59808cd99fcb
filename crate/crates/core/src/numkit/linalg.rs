use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::c;

/// Column vector in ℂ².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct C2Vector {
    pub v1: Complex64,
    pub v2: Complex64,
}

impl C2Vector {
    pub const fn new(v1: Complex64, v2: Complex64) -> Self {
        Self { v1, v2 }
    }

    pub fn real(v1: f64, v2: f64) -> Self {
        Self::new(c(v1, 0.0), c(v2, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.v1.norm().max(self.v2.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.v1.is_finite() && self.v2.is_finite()
    }
}

impl Add for C2Vector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.v1 + rhs.v1, self.v2 + rhs.v2)
    }
}

impl Sub for C2Vector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.v1 - rhs.v1, self.v2 - rhs.v2)
    }
}

impl Mul<C2Vector> for Complex64 {
    type Output = C2Vector;
    fn mul(self, rhs: C2Vector) -> C2Vector {
        C2Vector::new(self * rhs.v1, self * rhs.v2)
    }
}

/// 2×2 complex matrix, row-major entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct C2Matrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl C2Matrix {
    pub const fn new(m11: Complex64, m12: Complex64, m21: Complex64, m22: Complex64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub fn real(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Self::new(c(m11, 0.0), c(m12, 0.0), c(m21, 0.0), c(m22, 0.0))
    }

    pub fn identity() -> Self {
        Self::scalar(c(1.0, 0.0))
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(s: Complex64) -> Self {
        Self::new(s, Complex64::default(), Complex64::default(), s)
    }

    pub fn diag(d1: Complex64, d2: Complex64) -> Self {
        Self::new(d1, Complex64::default(), Complex64::default(), d2)
    }

    pub fn trace(&self) -> Complex64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Adjugate; equals the inverse when `det == 1`.
    pub fn adjugate(&self) -> Self {
        Self::new(self.m22, -self.m12, -self.m21, self.m11)
    }

    /// General inverse, `None` for an exactly singular matrix.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == Complex64::default() {
            return None;
        }
        Some(self.adjugate().scale(d.inv()))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(s * self.m11, s * self.m12, s * self.m21, s * self.m22)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn column(&self, j: usize) -> C2Vector {
        match j {
            0 => C2Vector::new(self.m11, self.m21),
            _ => C2Vector::new(self.m12, self.m22),
        }
    }

    pub fn from_columns(c1: C2Vector, c2: C2Vector) -> Self {
        Self::new(c1.v1, c2.v1, c1.v2, c2.v2)
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Self::identity(), |acc, _| acc * *self)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.m11, self.m12, self.m21, self.m22]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|e| e.is_finite())
    }
}

impl Add for C2Matrix {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Self::new(self.m11 + r.m11, self.m12 + r.m12, self.m21 + r.m21, self.m22 + r.m22)
    }
}

impl Sub for C2Matrix {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Self::new(self.m11 - r.m11, self.m12 - r.m12, self.m21 - r.m21, self.m22 - r.m22)
    }
}

impl Neg for C2Matrix {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(c(-1.0, 0.0))
    }
}

impl Mul for C2Matrix {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        Self::new(
            self.m11 * r.m11 + self.m12 * r.m21,
            self.m11 * r.m12 + self.m12 * r.m22,
            self.m21 * r.m11 + self.m22 * r.m21,
            self.m21 * r.m12 + self.m22 * r.m22,
        )
    }
}

impl Mul<C2Vector> for C2Matrix {
    type Output = C2Vector;
    fn mul(self, v: C2Vector) -> C2Vector {
        C2Vector::new(
            self.m11 * v.v1 + self.m12 * v.v2,
            self.m21 * v.v1 + self.m22 * v.v2,
        )
    }
}

const SERIES_SWITCH: f64 = 1e-6;

/// Matrix exponential in closed form.
///
/// With `τ = tr M`, `N = M − (τ/2)I` and `μ² = (τ/2)² − det M` (so `N² = μ²I`),
/// `exp(M) = e^{τ/2} (cosh μ · I + sinh(μ)/μ · N)`. Both `cosh μ` and
/// `sinh(μ)/μ` are even in `μ`, so the branch of the square root is
/// irrelevant. For `|μ| < 1e-6` the two functions are summed as 6-term
/// Taylor series.
pub fn mat2_exp(m: &C2Matrix) -> C2Matrix {
    let half_trace = m.trace() * 0.5;
    let traceless = *m - C2Matrix::scalar(half_trace);
    let mu_sq = half_trace * half_trace - m.det();
    let mu = mu_sq.sqrt();
    let (cosh_mu, sinhc_mu) = if mu.norm() < SERIES_SWITCH {
        even_series(mu_sq)
    } else {
        (mu.cosh(), mu.sinh() / mu)
    };
    let e = half_trace.exp();
    (C2Matrix::scalar(cosh_mu) + traceless.scale(sinhc_mu)).scale(e)
}

/// `(cosh μ, sinh μ / μ)` as power series in `μ²`.
fn even_series(mu_sq: Complex64) -> (Complex64, Complex64) {
    let mut cosh = Complex64::default();
    let mut sinhc = Complex64::default();
    let mut power = c(1.0, 0.0);
    let mut fact_even = 1.0;
    let mut fact_odd = 1.0;
    for k in 0..6 {
        if k > 0 {
            fact_even *= (2 * k - 1) as f64 * (2 * k) as f64;
            fact_odd *= (2 * k) as f64 * (2 * k + 1) as f64;
        }
        cosh += power / fact_even;
        sinhc += power / fact_odd;
        power *= mu_sq;
    }
    (cosh, sinhc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &C2Matrix, b: &C2Matrix, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(mat2_exp(&C2Matrix::zero()), C2Matrix::identity());
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat2_exp(&C2Matrix::real(1.0, 0.0, 0.0, -1.0));
        assert!(close(&e, &C2Matrix::real(1f64.exp(), 0.0, 0.0, (-1f64).exp()), 1e-14));
    }

    #[test]
    fn exp_of_nilpotent_uses_series() {
        let e = mat2_exp(&C2Matrix::real(0.0, 3.0, 0.0, 0.0));
        assert!(close(&e, &C2Matrix::real(1.0, 3.0, 0.0, 1.0), 1e-15));
    }

    #[test]
    fn exp_of_swap_generator_is_hyperbolic() {
        let e = mat2_exp(&C2Matrix::real(0.0, 1.0, 1.0, 0.0));
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        assert!(close(&e, &C2Matrix::real(ch, sh, sh, ch), 1e-14));
    }

    #[test]
    fn series_and_closed_form_agree_near_switch() {
        // μ² = ε² for M = [[0, ε²],[1, 0]].
        for eps in [0.9e-6, 1.1e-6] {
            let m = C2Matrix::real(0.3, eps * eps, 1.0, 0.3);
            let e = mat2_exp(&m);
            let expected = C2Matrix::real(1.0, 0.0, 1.0, 1.0).scale(c(0.3f64.exp(), 0.0));
            assert!(close(&e, &expected, 1e-11), "{e:?}");
        }
    }

    #[test]
    fn rotation_generator() {
        let t = 0.7;
        let e = mat2_exp(&C2Matrix::real(0.0, -t, t, 0.0));
        assert!(close(&e, &C2Matrix::real(t.cos(), -t.sin(), t.sin(), t.cos()), 1e-15));
    }

    #[test]
    fn adjugate_inverts_unimodular() {
        let m = mat2_exp(&C2Matrix::new(c(0.2, 0.1), c(1.0, -0.3), c(0.4, 0.0), c(-0.2, -0.1)));
        assert!((m.det() - 1.0).norm() < 1e-14);
        assert!(close(&(m * m.adjugate()), &C2Matrix::identity(), 1e-14));
    }
}
