//! The linear Dirac system `f' = l(λ; q) f` with `l = [[λ, q₁], [q₂, −λ]]`.
//!
//! The fundamental solution `F(x, x₀)` is integrated over whole periods; the
//! monodromy `S(x) = F(x + P, x)` is assembled from it as
//! `F(x + P, x₀) F(x, x₀)⁻¹`, using the adjugate for the inverse since
//! `det F = 1`.

use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkit::diff::{first_derivative, FIRST_MARGIN};
use crate::numkit::{integrate_matrix_system, C2Matrix, C2Vector, DenseOutput, IntegratorSettings, SampledPath, State};
use crate::potentials::{dirac_coefficient_matrix, Potential};

#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub path: SampledPath<C2Matrix>,
    pub lambda: Complex64,
    pub potential: Potential,
    pub x0: f64,
    pub cells_per_period: usize,
    dense: DenseOutput,
}

impl FundamentalSolution {
    /// `F(x, x₀)` anywhere in the integrated span.
    pub fn at(&self, x: f64) -> Result<C2Matrix> {
        if let Some(k) = self.path.index_of(x) {
            return Ok(self.path.values()[k]);
        }
        Ok(C2Matrix::from_components(&self.dense.eval(x)?))
    }

    pub fn periods(&self) -> usize {
        (self.path.len() - 1) / self.cells_per_period
    }

    /// `max |det F − 1|` over the grid.
    pub fn det_defect(&self) -> f64 {
        self.path.values().iter().map(|f| (f.det() - 1.0).norm()).fold(0.0, f64::max)
    }
}

/// Integrates `F' = l F`, `F(x₀) = 1`, over `span` rounded up to whole periods.
pub fn fundamental_solution(
    q: &Potential,
    lambda: Complex64,
    x0: f64,
    span: f64,
    cells_per_period: usize,
    settings: &IntegratorSettings,
) -> Result<FundamentalSolution> {
    let p = q.period();
    if !(span >= 2.0 * p * (1.0 - 1e-12)) {
        return Err(Error::domain(format!("span {span} is shorter than two periods ({})", 2.0 * p)));
    }
    if cells_per_period < 4 {
        return Err(Error::domain("need at least 4 cells per period"));
    }
    let periods = ((span / p) - 1e-9).ceil().max(2.0) as usize;
    let traj = integrate_matrix_system(
        |x| dirac_coefficient_matrix(q, lambda, x),
        C2Matrix::identity(),
        x0,
        x0 + periods as f64 * p,
        periods * cells_per_period,
        settings,
    )?;
    Ok(FundamentalSolution {
        path: traj.path,
        lambda,
        potential: q.clone(),
        x0,
        cells_per_period,
        dense: traj.dense,
    })
}

/// `F(x, x₀) f₀`.
pub fn propagate(f: &FundamentalSolution, f0: C2Vector, x: f64) -> Result<C2Vector> {
    Ok(f.at(x)? * f0)
}

/// `S(x)` on the grid of one period `[x₀, x₀ + P]`.
#[derive(Debug, Clone)]
pub struct Monodromy {
    pub path: SampledPath<C2Matrix>,
    pub lambda: Complex64,
}

impl Monodromy {
    pub fn at_x0(&self) -> C2Matrix {
        self.path.values()[0]
    }

    pub fn det_defect(&self) -> f64 {
        self.path.values().iter().map(|s| (s.det() - 1.0).norm()).fold(0.0, f64::max)
    }

    /// `max |tr S(x) − tr S(x₀)|`.
    pub fn trace_defect(&self) -> f64 {
        let t0 = self.at_x0().trace();
        self.path.values().iter().map(|s| (s.trace() - t0).norm()).fold(0.0, f64::max)
    }
}

pub fn monodromy(f: &FundamentalSolution) -> Result<Monodromy> {
    let n = f.cells_per_period;
    if f.path.len() < 2 * n + 1 {
        return Err(Error::domain("monodromy needs a fundamental solution spanning two periods"));
    }
    let vals = f.path.values();
    let values: Vec<C2Matrix> = (0..=n).map(|k| vals[k + n] * vals[k].adjugate()).collect();
    Ok(Monodromy {
        path: SampledPath::new(f.path.grid()[..=n].to_vec(), values, f.x0)?,
        lambda: f.lambda,
    })
}

/// `S(x₀)` from a single period of integration.
pub fn monodromy_at(
    q: &Potential,
    lambda: Complex64,
    x0: f64,
    cells_per_period: usize,
    settings: &IntegratorSettings,
) -> Result<C2Matrix> {
    let traj = integrate_matrix_system(
        |x| dirac_coefficient_matrix(q, lambda, x),
        C2Matrix::identity(),
        x0,
        x0 + q.period(),
        cells_per_period,
        settings,
    )?;
    Ok(*traj.path.values().last().expect("nonempty path"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    /// `gamma[j - 1] = tr S(x₀)^j`.
    pub gamma: Vec<Complex64>,
    pub det: Complex64,
    /// `max |tr S(x) − tr S(x₀)|` over the period.
    pub trace_defect: f64,
}

impl InvariantSet {
    pub fn gamma1(&self) -> Complex64 {
        self.gamma[0]
    }

    /// `|γ₂ − (γ₁² − 2)|`, or `None` for `J < 2`.
    pub fn cayley_hamilton_defect(&self) -> Option<f64> {
        let g1 = self.gamma[0];
        self.gamma.get(1).map(|g2| (g2 - (g1 * g1 - 2.0)).norm())
    }
}

pub const DEFAULT_INVARIANT_COUNT: usize = 4;

pub fn invariants(s: &Monodromy, j: usize) -> Result<InvariantSet> {
    if j == 0 {
        return Err(Error::domain("need at least one invariant"));
    }
    let s0 = s.at_x0();
    let mut power = s0;
    let mut gamma = Vec::with_capacity(j);
    for _ in 0..j {
        gamma.push(power.trace());
        power = power * s0;
    }
    Ok(InvariantSet {
        gamma,
        det: s0.det(),
        trace_defect: s.trace_defect(),
    })
}

/// Max-norm of `S' − [l, S]` on interior grid points.
pub fn novikov_residual(s: &Monodromy, q: &Potential, lambda: Complex64) -> f64 {
    let h = s.path.step();
    let entries: Vec<Vec<Complex64>> = (0..4)
        .map(|e| s.path.values().iter().map(|m| m.entries()[e]).collect())
        .collect();
    let derivs: Vec<Vec<Complex64>> = entries.iter().map(|col| first_derivative(col, h)).collect();
    let mut worst = 0.0_f64;
    for j in 0..derivs[0].len() {
        let k = j + FIRST_MARGIN;
        let ds = C2Matrix::new(derivs[0][j], derivs[1][j], derivs[2][j], derivs[3][j]);
        let l = dirac_coefficient_matrix(q, lambda, s.path.grid()[k]);
        worst = worst.max((ds - l.commutator(&s.path.values()[k])).max_abs());
    }
    worst
}

/// Max-norm of `S(x) − F(x, x₀) S(x₀) F(x, x₀)⁻¹` over the period.
pub fn similarity_check(f: &FundamentalSolution, s: &Monodromy) -> f64 {
    let c = s.at_x0();
    s.path
        .values()
        .iter()
        .zip(f.path.values())
        .map(|(sk, fk)| (*sk - *fk * c * fk.adjugate()).max_abs())
        .fold(0.0, f64::max)
}

/// A rectangular grid of spectral parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub re: (f64, f64, usize),
    pub im: (f64, f64, usize),
}

impl LambdaGrid {
    pub fn points(&self) -> Vec<Complex64> {
        let axis = |(lo, hi, n): (f64, f64, usize)| -> Vec<f64> {
            if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
            }
        };
        let im = axis(self.im);
        axis(self.re)
            .into_iter()
            .flat_map(|re| im.iter().map(move |&im| Complex64::new(re, im)))
            .collect()
    }
}

impl FromStr for LambdaGrid {
    type Err = Error;

    /// `re_min:re_max:n,im_min:im_max:m`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("invalid lambda grid {s:?}, expected re_min:re_max:n,im_min:im_max:m"));
        let axis = |part: &str| -> Result<(f64, f64, usize)> {
            let f: Vec<&str> = part.trim().split(':').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let lo = f[0].trim().parse().map_err(|_| bad())?;
            let hi = f[1].trim().parse().map_err(|_| bad())?;
            let n: usize = f[2].trim().parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            Ok((lo, hi, n))
        };
        let (re, im) = s.split_once(',').ok_or_else(bad)?;
        Ok(Self {
            re: axis(re)?,
            im: axis(im)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaScanRow {
    pub lambda: Complex64,
    pub gamma1: Complex64,
    pub det_defect: f64,
    pub novikov_residual: f64,
}

/// Monodromy diagnostics at every λ, computed in parallel, in input order.
pub fn lambda_scan(
    q: &Potential,
    lambdas: &[Complex64],
    cells_per_period: usize,
    settings: &IntegratorSettings,
) -> Result<Vec<LambdaScanRow>> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let f = fundamental_solution(q, lambda, 0.0, 2.0 * q.period(), cells_per_period, settings)?;
            let s = monodromy(&f)?;
            Ok(LambdaScanRow {
                lambda,
                gamma1: s.at_x0().trace(),
                det_defect: s.det_defect(),
                novikov_residual: novikov_residual(&s, q, lambda),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::mat2_exp;
    use crate::potentials::FunctionSpec;
    use std::f64::consts::{PI, TAU};

    const N: usize = 1024;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn solve(q: &Potential, lambda: Complex64) -> FundamentalSolution {
        fundamental_solution(q, lambda, 0.0, 2.0 * TAU, N, &IntegratorSettings::default()).unwrap()
    }

    #[test]
    fn free_fundamental_solution_is_diagonal() {
        let f = solve(&Potential::zero(), c(0.5, 0.0));
        assert!((f.path.values()[0] - C2Matrix::identity()).max_abs() < 1e-13);
        for (x, m) in f.path.iter() {
            let exact = C2Matrix::diag(c((0.5 * x).exp(), 0.0), c((-0.5 * x).exp(), 0.0));
            assert!((*m - exact).max_abs() < 1e-9 * (0.5 * x).exp());
        }
        assert!(f.det_defect() < 1e-9);
    }

    #[test]
    fn constant_potential_matches_matrix_exponential() {
        let q = Potential::constant(c(0.3, 0.0), c(0.3, 0.0));
        let f = solve(&q, c(0.4, 0.0));
        let l = dirac_coefficient_matrix(&q, c(0.4, 0.0), 0.0);
        for (x, m) in f.path.iter().step_by(64) {
            let exact = mat2_exp(&l.scale(c(x, 0.0)));
            assert!((*m - exact).max_abs() < 1e-8 * exact.max_abs(), "x = {x}");
        }
        let s = monodromy(&f).unwrap();
        let inv = invariants(&s, 4).unwrap();
        assert!((inv.gamma1() - 2.0 * PI.cosh()).norm() < 1e-6);
        assert!(novikov_residual(&s, &q, c(0.4, 0.0)) < 1e-7);
        assert!(inv.cayley_hamilton_defect().unwrap() < 1e-9 * (1.0 + inv.gamma[1].norm()));
    }

    #[test]
    fn free_monodromy_traces() {
        let q = Potential::zero();
        let s = monodromy(&solve(&q, c(0.5, 0.0))).unwrap();
        assert!((s.at_x0().trace() - 2.0 * PI.cosh()).norm() < 1e-7);
        assert!(novikov_residual(&s, &q, c(0.5, 0.0)) < 1e-7);
        let s = monodromy(&solve(&q, c(0.0, 0.5))).unwrap();
        let inv = invariants(&s, 4).unwrap();
        assert!((inv.gamma1() + 2.0).norm() < 1e-8);
        assert!((inv.det - 1.0).norm() < 1e-9);
    }

    #[test]
    fn propagate_examples() {
        let f = solve(&Potential::zero(), c(0.5, 0.0));
        let f0 = C2Vector::real(0.3, -0.2);
        assert!((propagate(&f, f0, 0.0).unwrap() - f0).max_abs() < 1e-13);
        let v = propagate(&f, C2Vector::real(1.0, 0.0), 2.0).unwrap();
        assert!((v - C2Vector::real(1f64.exp(), 0.0)).max_abs() < 1e-9);
        let off_grid = propagate(&f, C2Vector::real(1.0, 0.0), 1.2345).unwrap();
        assert!((off_grid.v1 - (0.5f64 * 1.2345).exp()).norm() < 1e-9);
        assert!(propagate(&f, f0, 100.0).is_err());
    }

    #[test]
    fn mathieu_type_potential() {
        let q = Potential::new(FunctionSpec::cosine(1, 0.5), FunctionSpec::constant(c(0.2, 0.0)), TAU).unwrap();
        let lambda = c(0.3, 0.2);
        let f = solve(&q, lambda);
        assert!(f.det_defect() < 1e-9);
        let s = monodromy(&f).unwrap();
        assert!(s.det_defect() < 1e-9);
        assert!(s.trace_defect() < 1e-8 * (1.0 + s.at_x0().trace().norm()));
        assert!(novikov_residual(&s, &q, lambda) < 1e-6);
        assert!(similarity_check(&f, &s) < 1e-7);
        let direct = monodromy_at(&q, lambda, 0.0, N, &IntegratorSettings::default()).unwrap();
        assert!((direct - s.at_x0()).max_abs() < 1e-9);
    }

    #[test]
    fn short_span_is_rejected() {
        let r = fundamental_solution(&Potential::zero(), c(0.5, 0.0), 0.0, TAU, N, &IntegratorSettings::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn lambda_grid_parsing() {
        let g: LambdaGrid = "0:1:3,-0.5:0.5:2".parse().unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], c(0.0, -0.5));
        assert_eq!(pts[5], c(1.0, 0.5));
        assert!("0:1,0:1:2".parse::<LambdaGrid>().is_err());
        assert!("0:1:0,0:1:2".parse::<LambdaGrid>().is_err());
    }

    #[test]
    fn free_lambda_scan_matches_cosh() {
        let g: LambdaGrid = "0:0.4:3,0:0.2:2".parse().unwrap();
        let rows = lambda_scan(&Potential::zero(), &g.points(), 512, &IntegratorSettings::default()).unwrap();
        for r in rows {
            let exact = (r.lambda * TAU).cosh() * 2.0;
            assert!((r.gamma1 - exact).norm() < 1e-7, "{r:?}");
        }
    }
}
