//! Periodic potentials `q = (q₁, q₂)` of the Dirac equation and scalar
//! oscillator coefficients.
//!
//! Every representation compiles to a finite Fourier series
//! `Σ c_k exp(i k x 2π/P)`, so evaluation and differentiation are exact for
//! `zero`, `constant` and `fourier` specs and spectrally accurate for sampled
//! ones.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::C2Matrix;

/// Function specification as it appears in config files. Complex numbers are
/// `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero,
    Constant { value: Complex64 },
    Fourier { terms: Vec<(i64, Complex64)> },
    /// Values on the uniform grid `x_j = j P / N`, `j = 0..N`, interpolated
    /// trigonometrically.
    Samples { values: Vec<Complex64> },
    /// Linear combination `Σ w_i f_i`.
    Sum { terms: Vec<(Complex64, FunctionSpec)> },
}

impl FunctionSpec {
    pub fn constant(value: Complex64) -> Self {
        FunctionSpec::Constant { value }
    }

    /// `amplitude · cos(k x 2π/P)`.
    pub fn cosine(k: i64, amplitude: f64) -> Self {
        let half = Complex64::new(0.5 * amplitude, 0.0);
        FunctionSpec::Fourier {
            terms: vec![(k, half), (-k, half)],
        }
    }

    /// `amplitude · sin(k x 2π/P)`.
    pub fn sine(k: i64, amplitude: f64) -> Self {
        let half = Complex64::new(0.0, -0.5 * amplitude);
        FunctionSpec::Fourier {
            terms: vec![(k, half), (-k, -half)],
        }
    }

    fn accumulate(&self, weight: Complex64, out: &mut BTreeMap<i64, Complex64>) -> Result<()> {
        match self {
            FunctionSpec::Zero => {}
            FunctionSpec::Constant { value } => *out.entry(0).or_default() += weight * value,
            FunctionSpec::Fourier { terms } => {
                for (k, ck) in terms {
                    *out.entry(*k).or_default() += weight * ck;
                }
            }
            FunctionSpec::Samples { values } => {
                for (k, ck) in trigonometric_coefficients(values)? {
                    *out.entry(k).or_default() += weight * ck;
                }
            }
            FunctionSpec::Sum { terms } => {
                for (w, spec) in terms {
                    spec.accumulate(weight * w, out)?;
                }
            }
        }
        Ok(())
    }
}

/// Discrete Fourier coefficients of uniform samples, with the Nyquist mode
/// split evenly between `±N/2` so that real samples interpolate to a real
/// function.
fn trigonometric_coefficients(values: &[Complex64]) -> Result<Vec<(i64, Complex64)>> {
    let n = values.len();
    if n == 0 {
        return Err(Error::domain("samples spec needs at least one value"));
    }
    let half = n as i64 / 2;
    let mut out = Vec::with_capacity(n + 1);
    for k in -(half)..=half {
        if n % 2 == 1 || k.abs() < half {
            out.push((k, dft(values, k)));
        } else if k == half {
            let ck = dft(values, k) * 0.5;
            out.push((half, ck));
            out.push((-half, ck));
        }
    }
    Ok(out)
}

fn dft(values: &[Complex64], k: i64) -> Complex64 {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let phase = -TAU * ((k * j as i64).rem_euclid(n as i64)) as f64 / n as f64;
            v * Complex64::from_polar(1.0, phase)
        })
        .sum::<Complex64>()
        / n as f64
}

/// A `P`-periodic complex function compiled to Fourier form.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFunction {
    period: f64,
    spec: FunctionSpec,
    terms: Vec<(i64, Complex64)>,
}

impl PeriodicFunction {
    pub fn new(spec: FunctionSpec, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::domain(format!("period must be positive, got {period}")));
        }
        let mut acc = BTreeMap::new();
        spec.accumulate(Complex64::new(1.0, 0.0), &mut acc)?;
        if acc.values().any(|c| !c.is_finite()) {
            return Err(Error::domain("function spec has non-finite coefficients"));
        }
        let terms = acc.into_iter().filter(|(_, c)| *c != Complex64::default()).collect();
        Ok(Self { period, spec, terms })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let base = TAU * x / self.period;
        self.terms
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, *k as f64 * base))
            .sum()
    }

    /// Exact derivative of the compiled series.
    pub fn derivative(&self, x: f64) -> Complex64 {
        let w = TAU / self.period;
        let base = w * x;
        self.terms
            .iter()
            .map(|(k, c)| Complex64::new(0.0, *k as f64 * w) * c * Complex64::from_polar(1.0, *k as f64 * base))
            .sum()
    }

    /// The value if the function is constant (including zero).
    pub fn constant_value(&self) -> Option<Complex64> {
        match self.terms.as_slice() {
            [] => Some(Complex64::default()),
            [(0, c)] => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `self + eps · other` with this function's period.
    pub fn perturbed(&self, direction: &FunctionSpec, eps: f64) -> Result<Self> {
        Self::new(
            FunctionSpec::Sum {
                terms: vec![
                    (Complex64::new(1.0, 0.0), self.spec.clone()),
                    (Complex64::new(eps, 0.0), direction.clone()),
                ],
            },
            self.period,
        )
    }
}

/// Raw form of a potential in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default = "default_period")]
    pub period: f64,
    pub q1: FunctionSpec,
    pub q2: FunctionSpec,
}

pub fn default_period() -> f64 {
    TAU
}

/// Periodic potential pair `(q₁, q₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    q1: PeriodicFunction,
    q2: PeriodicFunction,
}

impl Potential {
    pub fn new(q1: FunctionSpec, q2: FunctionSpec, period: f64) -> Result<Self> {
        Ok(Self {
            q1: PeriodicFunction::new(q1, period)?,
            q2: PeriodicFunction::new(q2, period)?,
        })
    }

    pub fn from_config(config: &PotentialConfig) -> Result<Self> {
        Self::new(config.q1.clone(), config.q2.clone(), config.period)
    }

    pub fn to_config(&self) -> PotentialConfig {
        PotentialConfig {
            period: self.period(),
            q1: self.q1.spec.clone(),
            q2: self.q2.spec.clone(),
        }
    }

    pub fn zero() -> Self {
        Self::new(FunctionSpec::Zero, FunctionSpec::Zero, TAU).expect("zero potential")
    }

    pub fn constant(q1: Complex64, q2: Complex64) -> Self {
        Self::new(FunctionSpec::constant(q1), FunctionSpec::constant(q2), TAU).expect("constant potential")
    }

    pub fn period(&self) -> f64 {
        self.q1.period
    }

    pub fn q1(&self) -> &PeriodicFunction {
        &self.q1
    }

    pub fn q2(&self) -> &PeriodicFunction {
        &self.q2
    }

    /// `(q₁, q₂)` if both components are constant.
    pub fn constant_values(&self) -> Option<(Complex64, Complex64)> {
        Some((self.q1.constant_value()?, self.q2.constant_value()?))
    }

    /// `q + ε δq` for a direction `δq = (δq₁, δq₂)`.
    pub fn perturbed(&self, direction: &(FunctionSpec, FunctionSpec), eps: f64) -> Result<Self> {
        Ok(Self {
            q1: self.q1.perturbed(&direction.0, eps)?,
            q2: self.q2.perturbed(&direction.1, eps)?,
        })
    }
}

pub fn eval_potential(q: &Potential, x: f64) -> (Complex64, Complex64) {
    (q.q1.eval(x), q.q2.eval(x))
}

/// `l(λ; q)(x) = [[λ, q₁(x)], [q₂(x), −λ]]`.
pub fn dirac_coefficient_matrix(q: &Potential, lambda: Complex64, x: f64) -> C2Matrix {
    let (q1, q2) = eval_potential(q, x);
    C2Matrix::new(lambda, q1, q2, -lambda)
}

/// Oscillator coefficient: `q(u)` in `g'' + q g = 0` or `ω(t)` in `y'' = ω y`,
/// depending on the convention it is used with.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCoefficient {
    f: PeriodicFunction,
}

impl ScalarCoefficient {
    pub fn new(spec: FunctionSpec, period: f64) -> Result<Self> {
        Ok(Self {
            f: PeriodicFunction::new(spec, period)?,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(FunctionSpec::constant(Complex64::new(value, 0.0)), TAU).expect("constant coefficient")
    }

    pub fn period(&self) -> f64 {
        self.f.period
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.f.eval(x)
    }

    pub fn derivative(&self, x: f64) -> Complex64 {
        self.f.derivative(x)
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.f.spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn presets_evaluate() {
        assert_eq!(eval_potential(&Potential::zero(), 1.3), (cx(0.0, 0.0), cx(0.0, 0.0)));
        let q = Potential::constant(cx(0.3, 0.0), cx(0.3, 0.0));
        assert_eq!(eval_potential(&q, 1.7), (cx(0.3, 0.0), cx(0.3, 0.0)));
        let cos = Potential::new(FunctionSpec::cosine(1, 1.0), FunctionSpec::Zero, TAU).unwrap();
        assert!((cos.q1().eval(0.0) - 1.0).norm() < 1e-15);
        assert!((cos.q1().eval(2.0) - 2f64.cos()).norm() < 1e-15);
        let sin = PeriodicFunction::new(FunctionSpec::sine(2, 3.0), TAU).unwrap();
        assert!((sin.eval(0.4) - 3.0 * 0.8f64.sin()).norm() < 1e-14);
        assert!((sin.derivative(0.4) - 6.0 * 0.8f64.cos()).norm() < 1e-14);
    }

    #[test]
    fn coefficient_matrix_is_trace_free() {
        let q = Potential::constant(cx(0.3, 0.0), cx(0.3, 0.0));
        let l = dirac_coefficient_matrix(&q, cx(0.4, 0.0), 0.9);
        assert_eq!(l, C2Matrix::real(0.4, 0.3, 0.3, -0.4));
        assert_eq!(l.trace(), cx(0.0, 0.0));
        let l0 = dirac_coefficient_matrix(&Potential::zero(), cx(0.5, 0.0), 3.0);
        assert_eq!(l0, C2Matrix::real(0.5, 0.0, 0.0, -0.5));
    }

    #[test]
    fn config_schema_round_trips() {
        let json = r#"{ "period": 5.5,
            "q1": {"type":"fourier","terms":[[1,[0.5,0]],[-1,[0.5,0]]]},
            "q2": {"type":"constant","value":[0.3,-0.1]} }"#;
        let cfg: PotentialConfig = serde_json::from_str(json).unwrap();
        let q = Potential::from_config(&cfg).unwrap();
        assert_eq!(q.period(), 5.5);
        assert_eq!(q.q2().constant_value(), Some(cx(0.3, -0.1)));
        let back: PotentialConfig = serde_json::from_str(&serde_json::to_string(&q.to_config()).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let zero: PotentialConfig = serde_json::from_str(r#"{"q1":{"type":"zero"},"q2":{"type":"zero"}}"#).unwrap();
        assert_eq!(zero.period, TAU);
        assert!(serde_json::from_str::<PotentialConfig>(r#"{"q1":{"type":"bogus"},"q2":{"type":"zero"}}"#).is_err());
    }

    #[test]
    fn bad_period_is_rejected() {
        assert!(Potential::new(FunctionSpec::Zero, FunctionSpec::Zero, 0.0).is_err());
        assert!(Potential::new(FunctionSpec::Zero, FunctionSpec::Zero, f64::NAN).is_err());
    }

    #[test]
    fn perturbation_adds_direction() {
        let q = Potential::constant(cx(0.3, 0.0), cx(0.3, 0.0));
        let p = q.perturbed(&(FunctionSpec::cosine(1, 1.0), FunctionSpec::Zero), 1e-3).unwrap();
        let (a, b) = eval_potential(&p, 0.7);
        assert!((a - (0.3 + 1e-3 * 0.7f64.cos())).norm() < 1e-16);
        assert_eq!(b, cx(0.3, 0.0));
        assert!(p.constant_values().is_none());
    }

    fn fourier_terms() -> impl Strategy<Value = Vec<(i64, Complex64)>> {
        proptest::collection::vec((-4i64..=4, -1.0f64..1.0, -1.0f64..1.0), 1..6)
            .prop_map(|v| v.into_iter().map(|(k, re, im)| (k, cx(re, im))).collect())
    }

    proptest! {
        #[test]
        fn fourier_specs_are_periodic(terms in fourier_terms(), x in -10.0f64..10.0, period in 0.5f64..10.0) {
            let f = PeriodicFunction::new(FunctionSpec::Fourier { terms }, period).unwrap();
            let (a, b) = (f.eval(x), f.eval(x + period));
            prop_assert!((a - b).norm() <= 1e-13 * (1.0 + a.norm()));
        }

        #[test]
        fn samples_reproduce_fourier_specs(terms in fourier_terms(), n in 10usize..40, x in 0.0f64..TAU) {
            let f = PeriodicFunction::new(FunctionSpec::Fourier { terms }, TAU).unwrap();
            let values = (0..n).map(|j| f.eval(TAU * j as f64 / n as f64)).collect();
            let g = PeriodicFunction::new(FunctionSpec::Samples { values }, TAU).unwrap();
            prop_assert!((f.eval(x) - g.eval(x)).norm() <= 1e-10);
            prop_assert!((f.derivative(x) - g.derivative(x)).norm() <= 1e-9);
        }
    }
}
