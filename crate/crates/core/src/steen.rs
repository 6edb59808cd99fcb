//! The Steen / Ermakov–Pinney oscillator pair.
//!
//! Two independent solutions `u`, `v` of the linear equation `y'' = ω y`
//! combine into `z = √(A u² + 2B u v + C v²)`, which solves the Pinney
//! equation `z'' = ω z + k / z³` with `k = (AC − B²) W²`, `W` the Wronskian of
//! `u` and `v`. Products of solutions of the linear equation satisfy the
//! third-order equation `α''' − 2ω'α − 4ωα' = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::diff::{first_derivative, second_derivative, third_derivative, FIRST_MARGIN, SECOND_MARGIN, THIRD_MARGIN};
use crate::numkit::{continuous_sqrt, integrate_linear_system, C2Matrix, C2Vector, IntegratorSettings, SampledPath};
use crate::potentials::ScalarCoefficient;
use crate::report::CheckRecord;

/// How a [`ScalarCoefficient`] enters the linear equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `y'' + q y = 0`; the coefficient is `q` and `ω = −q`.
    Steen,
    /// `y'' = ω y`; the coefficient is `ω`.
    #[default]
    Omega,
}

impl Convention {
    pub fn omega(self, coeff: &ScalarCoefficient, x: f64) -> Complex64 {
        match self {
            Convention::Steen => -coeff.eval(x),
            Convention::Omega => coeff.eval(x),
        }
    }

    pub fn omega_derivative(self, coeff: &ScalarCoefficient, x: f64) -> Complex64 {
        match self {
            Convention::Steen => -coeff.derivative(x),
            Convention::Omega => coeff.derivative(x),
        }
    }
}

/// A solution of the linear oscillator sampled as `(y, y')`.
#[derive(Debug, Clone)]
pub struct OscillatorSolution {
    pub path: SampledPath<C2Vector>,
    pub coefficient: ScalarCoefficient,
    pub convention: Convention,
}

impl OscillatorSolution {
    pub fn y(&self) -> SampledPath<Complex64> {
        self.path.map(|s| s.v1)
    }

    pub fn dy(&self) -> SampledPath<Complex64> {
        self.path.map(|s| s.v2)
    }

    /// Max-norm of `y'' − ω y` on interior points, `y''` differenced from `y'`.
    pub fn residual(&self) -> f64 {
        let dy: Vec<Complex64> = self.path.values().iter().map(|s| s.v2).collect();
        let d2 = first_derivative(&dy, self.path.step());
        d2.iter()
            .enumerate()
            .map(|(j, d)| {
                let k = j + FIRST_MARGIN;
                let x = self.path.grid()[k];
                (d - self.convention.omega(&self.coefficient, x) * self.path.values()[k].v1).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `y'' = ω y` (or `y'' + q y = 0`) from `(y0, dy0)` at `x0` onto a
/// uniform grid of `n_cells` cells ending at `x1`.
#[allow(clippy::too_many_arguments)]
pub fn solve_oscillator(
    coeff: &ScalarCoefficient,
    convention: Convention,
    y0: Complex64,
    dy0: Complex64,
    x0: f64,
    x1: f64,
    n_cells: usize,
    settings: &IntegratorSettings,
) -> Result<OscillatorSolution> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let rhs = |x: f64| C2Matrix::new(zero, one, convention.omega(coeff, x), zero);
    let traj = integrate_linear_system(rhs, C2Vector::new(y0, dy0), x0, x1, n_cells, settings)?;
    Ok(OscillatorSolution {
        path: traj.path,
        coefficient: coeff.clone(),
        convention,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wronskian {
    /// `u v' − u' v` at the first grid point.
    pub value: Complex64,
    /// `max |W(x) − W(x0)|` over the grid.
    pub constancy_defect: f64,
}

pub fn wronskian(u: &OscillatorSolution, v: &OscillatorSolution) -> Result<Wronskian> {
    if !u.path.same_grid(&v.path) {
        return Err(Error::domain("wronskian needs solutions on the same grid"));
    }
    let w: Vec<Complex64> = u
        .path
        .values()
        .iter()
        .zip(v.path.values())
        .map(|(a, b)| a.v1 * b.v2 - a.v2 * b.v1)
        .collect();
    let value = w[0];
    let constancy_defect = w.iter().map(|wk| (wk - value).norm()).fold(0.0, f64::max);
    Ok(Wronskian { value, constancy_defect })
}

/// Coefficients of the quadratic form `A u² + 2B u v + C v²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperpositionCoeffs {
    #[serde(rename = "A")]
    pub a: Complex64,
    #[serde(rename = "B")]
    pub b: Complex64,
    #[serde(rename = "C")]
    pub c: Complex64,
    /// Declared nonlinearity strength, checked against the implied one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Complex64>,
}

impl SuperpositionCoeffs {
    pub fn real(a: f64, b: f64, c: f64) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            k: None,
        }
    }

    /// `(AC − B²) W²`.
    pub fn implied_k(&self, w: Complex64) -> Complex64 {
        (self.a * self.c - self.b * self.b) * w * w
    }

    fn form(&self, u: Complex64, v: Complex64) -> Complex64 {
        self.a * u * u + 2.0 * self.b * u * v + self.c * v * v
    }
}

#[derive(Debug, Clone)]
pub struct PinneySolution {
    pub z: SampledPath<Complex64>,
    pub k_implied: Complex64,
    pub wronskian: Wronskian,
}

/// Branch-tracked `z = √(A u² + 2B u v + C v²)` together with the implied `k`.
pub fn pinney_superpose(
    u: &OscillatorSolution,
    v: &OscillatorSolution,
    coeffs: &SuperpositionCoeffs,
    zero_threshold: f64,
) -> Result<PinneySolution> {
    let w = wronskian(u, v)?;
    let form = u.y().zip_with(&v.y(), |a, b| coeffs.form(*a, *b))?;
    let z = continuous_sqrt(&form, zero_threshold)?;
    Ok(PinneySolution {
        z,
        k_implied: coeffs.implied_k(w.value),
        wronskian: w,
    })
}

/// Max-norm of `z'' − ω z − k / z³` on interior grid points.
pub fn pinney_residual(
    z: &SampledPath<Complex64>,
    coeff: &ScalarCoefficient,
    convention: Convention,
    k: Complex64,
    zero_threshold: f64,
) -> Result<f64> {
    if let Some((x, _)) = z.iter().find(|(_, zk)| !(zk.norm() >= zero_threshold)) {
        return Err(Error::Singularity { x, component: 0 });
    }
    let d2 = second_derivative(z.values(), z.step());
    Ok(d2
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let i = j + SECOND_MARGIN;
            let x = z.grid()[i];
            let zi = z.values()[i];
            (d - convention.omega(coeff, x) * zi - k / (zi * zi * zi)).norm()
        })
        .fold(0.0, f64::max))
}

/// Max-norm of `α''' − 2ω'α − 4ωα'` on interior grid points, `ω'` analytic.
pub fn cubic_invariance_residual(
    alpha: &SampledPath<Complex64>,
    coeff: &ScalarCoefficient,
    convention: Convention,
) -> Result<f64> {
    if alpha.len() < 2 * THIRD_MARGIN + 1 {
        return Err(Error::domain(format!(
            "third derivative needs at least {} samples, got {}",
            2 * THIRD_MARGIN + 1,
            alpha.len()
        )));
    }
    let h = alpha.step();
    let d1 = first_derivative(alpha.values(), h);
    let d3 = third_derivative(alpha.values(), h);
    let shift = THIRD_MARGIN - FIRST_MARGIN;
    Ok(d3
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let i = j + THIRD_MARGIN;
            let x = alpha.grid()[i];
            let a = alpha.values()[i];
            let da = d1[j + shift];
            (d - 2.0 * convention.omega_derivative(coeff, x) * a - 4.0 * convention.omega(coeff, x) * da).norm()
        })
        .fold(0.0, f64::max))
}

/// Superposition, Pinney, third-order and Wronskian checks for one pair.
pub fn verify_superposition_identity(
    u: &OscillatorSolution,
    v: &OscillatorSolution,
    coeffs: &SuperpositionCoeffs,
    tolerance: f64,
    zero_threshold: f64,
) -> Result<Vec<CheckRecord>> {
    let mut records = Vec::new();
    let p = pinney_superpose(u, v, coeffs, zero_threshold)?;
    let w = p.wronskian.value;

    records.push(
        CheckRecord::assert_le(
            "wronskian-constancy",
            "W = u v' − u' v is constant",
            p.wronskian.constancy_defect,
            1e-8 * (1.0 + w.norm()),
        )
        .with_complex("W", w),
    );
    records.push(
        CheckRecord::assert_le(
            "linear-residual",
            "y'' = ω y",
            u.residual().max(v.residual()),
            tolerance,
        ),
    );

    let pinney = pinney_residual(&p.z, &u.coefficient, u.convention, p.k_implied, zero_threshold)?;
    records.push(
        CheckRecord::assert_le("pinney-residual", "z'' = ω z + k/z³ with k = (AC − B²) W²", pinney, tolerance)
            .with_complex("k_implied", p.k_implied),
    );

    let beta = p.z.map(|zk| zk * zk);
    let beta_res = cubic_invariance_residual(&beta, &u.coefficient, u.convention)?;
    records.push(CheckRecord::assert_le(
        "cubic-invariance-z2",
        "β''' − 2ω'β − 4ωβ' = 0 for β = z²",
        beta_res,
        tolerance,
    ));

    let product = u.y().zip_with(&v.y(), |a, b| a * b)?;
    let product_res = cubic_invariance_residual(&product, &u.coefficient, u.convention)?;
    records.push(CheckRecord::assert_le(
        "cubic-invariance-uv",
        "α''' − 2ω'α − 4ωα' = 0 for α = u v",
        product_res,
        tolerance,
    ));

    // The alternative sign B² − AC = 1/W² is measured but never asserted.
    let disc = coeffs.b * coeffs.b - coeffs.a * coeffs.c;
    let printed_defect = if w.norm() > 0.0 { (disc - 1.0 / (w * w)).norm() } else { f64::INFINITY };
    records.push(
        CheckRecord::reported("printed-wronskian-relation", "B² − AC = 1/W²")
            .with_residual(printed_defect)
            .with_complex("b2_minus_ac", disc),
    );

    if let Some(k) = coeffs.k {
        records.push(
            CheckRecord::assert_le(
                "declared-k",
                "k = (AC − B²) W²",
                (k - p.k_implied).norm(),
                tolerance * (1.0 + k.norm()),
            )
            .with_complex("k_declared", k),
        );
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::DEFAULT_ZERO_THRESHOLD;
    use crate::potentials::FunctionSpec;
    use std::f64::consts::{PI, TAU};

    const N: usize = 2048;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn harmonic(y0: f64, dy0: f64, x1: f64) -> OscillatorSolution {
        let coeff = ScalarCoefficient::constant(-1.0);
        solve_oscillator(&coeff, Convention::Omega, c(y0), c(dy0), 0.0, x1, N, &IntegratorSettings::default()).unwrap()
    }

    fn max_error(s: &OscillatorSolution, f: impl Fn(f64) -> f64) -> f64 {
        s.path.iter().map(|(x, v)| (v.v1 - f(x)).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn cosine_sine_and_exponential() {
        assert!(max_error(&harmonic(1.0, 0.0, TAU), f64::cos) < 1e-9);
        assert!(max_error(&harmonic(0.0, 1.0, TAU), f64::sin) < 1e-9);
        let coeff = ScalarCoefficient::constant(1.0);
        let e = solve_oscillator(&coeff, Convention::Omega, c(1.0), c(1.0), 0.0, 2.0, N, &IntegratorSettings::default())
            .unwrap();
        assert!(max_error(&e, f64::exp) < 1e-8);
    }

    #[test]
    fn steen_convention_flips_sign() {
        let q = ScalarCoefficient::constant(1.0);
        let s = solve_oscillator(&q, Convention::Steen, c(1.0), c(0.0), 0.0, TAU, N, &IntegratorSettings::default())
            .unwrap();
        assert!(max_error(&s, f64::cos) < 1e-9);
        assert!(s.residual() < 1e-7);
    }

    #[test]
    fn wronskian_examples() {
        let u = harmonic(1.0, 0.0, TAU);
        let v = harmonic(0.0, 1.0, TAU);
        let w = wronskian(&u, &v).unwrap();
        assert!((w.value - 1.0).norm() < 1e-12);
        assert!(w.constancy_defect < 1e-9);
        assert!(wronskian(&u, &u).unwrap().value.norm() < 1e-15);
        let v2 = harmonic(0.0, 2.0, TAU);
        assert!((wronskian(&u, &v2).unwrap().value - 2.0).norm() < 1e-12);
        let short = harmonic(0.0, 1.0, PI);
        assert!(matches!(wronskian(&u, &short), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_pinney_solution() {
        let u = harmonic(1.0, 0.0, TAU);
        let v = harmonic(0.0, 1.0, TAU);
        let p = pinney_superpose(&u, &v, &SuperpositionCoeffs::real(1.0, 0.0, 1.0), DEFAULT_ZERO_THRESHOLD).unwrap();
        assert!((p.k_implied - 1.0).norm() < 1e-12);
        assert!(p.z.values().iter().all(|z| (z - 1.0).norm() < 1e-9));
    }

    #[test]
    fn anisotropic_pinney_solution() {
        let u = harmonic(1.0, 0.0, TAU);
        let v = harmonic(0.0, 1.0, TAU);
        let coeff = ScalarCoefficient::constant(-1.0);
        let p = pinney_superpose(&u, &v, &SuperpositionCoeffs::real(4.0, 0.0, 1.0), DEFAULT_ZERO_THRESHOLD).unwrap();
        assert!((p.k_implied - 4.0).norm() < 1e-10);
        assert!((p.z.values()[0] - 2.0).norm() < 1e-12);
        let quarter = p.z.index_of(PI / 2.0).unwrap_or(N / 4);
        assert!((p.z.values()[quarter] - 1.0).norm() < 1e-8);
        let r = pinney_residual(&p.z, &coeff, Convention::Omega, p.k_implied, DEFAULT_ZERO_THRESHOLD).unwrap();
        assert!(r < 1e-7, "{r}");
        let beta = p.z.map(|z| z * z);
        assert!(cubic_invariance_residual(&beta, &coeff, Convention::Omega).unwrap() < 1e-6);
    }

    #[test]
    fn degenerate_form_solves_linear_equation() {
        let u = harmonic(1.0, 0.0, 2.0);
        let v = harmonic(0.0, 1.0, 2.0);
        let coeff = ScalarCoefficient::constant(-1.0);
        let p = pinney_superpose(&u, &v, &SuperpositionCoeffs::real(1.0, 1.0, 1.0), DEFAULT_ZERO_THRESHOLD).unwrap();
        assert!(p.k_implied.norm() < 1e-12);
        let r = pinney_residual(&p.z, &coeff, Convention::Omega, c(0.0), DEFAULT_ZERO_THRESHOLD).unwrap();
        assert!(r < 1e-7);
    }

    #[test]
    fn degenerate_form_hits_zero_over_full_period() {
        let u = harmonic(1.0, 0.0, TAU);
        let v = harmonic(0.0, 1.0, TAU);
        let err = pinney_superpose(&u, &v, &SuperpositionCoeffs::real(1.0, 1.0, 1.0), DEFAULT_ZERO_THRESHOLD);
        assert!(matches!(err, Err(Error::BranchAmbiguity { .. })));
    }

    #[test]
    fn pinney_residual_oracles() {
        let coeff = ScalarCoefficient::constant(-1.0);
        let ones = SampledPath::sample(0.0, TAU, N, |_| c(1.0)).unwrap();
        assert!(pinney_residual(&ones, &coeff, Convention::Omega, c(1.0), 1e-10).unwrap() < 1e-10);
        let cos = SampledPath::sample(0.0, 1.5, N, |x| c(x.cos())).unwrap();
        assert!(pinney_residual(&cos, &coeff, Convention::Omega, c(0.0), 1e-10).unwrap() < 1e-7);
        let through_zero = SampledPath::sample(0.0, TAU, 4, |x| c(x.cos())).unwrap();
        assert!(pinney_residual(&through_zero, &coeff, Convention::Omega, c(0.0), 1e-10).is_err());
    }

    #[test]
    fn cubic_invariance_oracles() {
        let coeff = ScalarCoefficient::constant(-1.0);
        let alpha = SampledPath::sample(0.0, TAU, N, |x| c(0.5 * (2.0 * x).sin())).unwrap();
        assert!(cubic_invariance_residual(&alpha, &coeff, Convention::Omega).unwrap() < 1e-7);
        let ones = SampledPath::sample(0.0, TAU, N, |_| c(1.0)).unwrap();
        assert!(cubic_invariance_residual(&ones, &coeff, Convention::Omega).unwrap() < 1e-10);
        let short = SampledPath::sample(0.0, 1.0, 5, |_| c(1.0)).unwrap();
        assert!(matches!(
            cubic_invariance_residual(&short, &coeff, Convention::Omega),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mathieu_pipeline() {
        let spec = FunctionSpec::Sum {
            terms: vec![
                (c(-1.0), FunctionSpec::constant(c(1.0))),
                (c(-1.0), FunctionSpec::cosine(1, 0.3)),
            ],
        };
        let coeff = ScalarCoefficient::new(spec, TAU).unwrap();
        let s = IntegratorSettings::default();
        let u = solve_oscillator(&coeff, Convention::Omega, c(1.0), c(0.0), 0.0, TAU, N, &s).unwrap();
        let v = solve_oscillator(&coeff, Convention::Omega, c(0.0), c(1.0), 0.0, TAU, N, &s).unwrap();
        let mut coeffs = SuperpositionCoeffs::real(2.0, 0.5, 1.0);
        coeffs.k = Some(c(1.75));
        let records = verify_superposition_identity(&u, &v, &coeffs, 1e-6, DEFAULT_ZERO_THRESHOLD).unwrap();
        for r in &records {
            assert!(r.passed(), "{r:?}");
        }
    }
}
