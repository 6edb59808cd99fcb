//! Explicit Runge–Kutta integration onto uniform report grids.
//!
//! Every report-grid abscissa is a step endpoint: the adaptive method
//! subdivides a grid cell when its error control demands it, but never steps
//! over a grid point. The sampled values therefore carry the smooth global
//! error of a one-step method rather than the seams of an interpolant, which
//! keeps finite-difference residuals of the output meaningful. Dense output is
//! kept for every accepted step so the solution can still be queried between
//! grid points.

use num_complex::Complex64;

use super::linalg::{C2Matrix, C2Vector};
use super::path::{uniform_grid, SampledPath};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Dormand–Prince 5(4), FSAL, with its 4th-order continuous extension.
    AdaptiveDopri5,
    /// Classical RK4 with `ceil(cell / max_step)` steps per grid cell and
    /// cubic Hermite dense output.
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveDopri5,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: f64::INFINITY,
            min_step: 1e-12,
        }
    }
}

impl IntegratorSettings {
    pub fn rk4() -> Self {
        Self {
            method: Method::FixedRk4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("integrator tolerances must be positive"));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return Err(Error::domain("integrator needs 0 < min_step <= max_step"));
        }
        Ok(())
    }
}

/// A state that can be flattened into complex components.
pub trait State: Clone {
    fn write_components(&self, out: &mut Vec<Complex64>);
    fn from_components(components: &[Complex64]) -> Self;
}

impl State for Complex64 {
    fn write_components(&self, out: &mut Vec<Complex64>) {
        out.push(*self);
    }
    fn from_components(c: &[Complex64]) -> Self {
        c[0]
    }
}

impl State for C2Vector {
    fn write_components(&self, out: &mut Vec<Complex64>) {
        out.extend([self.v1, self.v2]);
    }
    fn from_components(c: &[Complex64]) -> Self {
        C2Vector::new(c[0], c[1])
    }
}

impl State for C2Matrix {
    fn write_components(&self, out: &mut Vec<Complex64>) {
        out.extend(self.entries());
    }
    fn from_components(c: &[Complex64]) -> Self {
        C2Matrix::new(c[0], c[1], c[2], c[3])
    }
}

impl State for Vec<Complex64> {
    fn write_components(&self, out: &mut Vec<Complex64>) {
        out.extend_from_slice(self);
    }
    fn from_components(c: &[Complex64]) -> Self {
        c.to_vec()
    }
}

fn flatten<S: State>(s: &S) -> Vec<Complex64> {
    let mut v = Vec::new();
    s.write_components(&mut v);
    v
}

/// Continuous extension of one accepted step:
/// `y(θ) = r1 + θ(r2 + (1−θ)(r3 + θ(r4 + (1−θ) r5)))`, `θ = (x − x_start)/h`.
#[derive(Debug, Clone)]
struct Segment {
    x_start: f64,
    h: f64,
    coeffs: [Vec<Complex64>; 5],
}

impl Segment {
    fn eval(&self, x: f64) -> Vec<Complex64> {
        let theta = (x - self.x_start) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        (0..r1.len())
            .map(|i| r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i]))))
            .collect()
    }

    fn hermite(x: f64, h: f64, y0: &[Complex64], y1: &[Complex64], f0: &[Complex64], f1: &[Complex64]) -> Self {
        let r2: Vec<Complex64> = y1.iter().zip(y0).map(|(a, b)| a - b).collect();
        let r3: Vec<Complex64> = f0.iter().zip(&r2).map(|(f, d)| f * h - d).collect();
        let r4: Vec<Complex64> = (0..y0.len()).map(|i| r2[i] - f1[i] * h - r3[i]).collect();
        Self {
            x_start: x,
            h,
            coeffs: [y0.to_vec(), r2, r3, r4, vec![Complex64::default(); y0.len()]],
        }
    }
}

/// Piecewise continuous extension over all accepted steps.
#[derive(Debug, Clone, Default)]
pub struct DenseOutput {
    segments: Vec<Segment>,
}

impl DenseOutput {
    pub fn start(&self) -> Option<f64> {
        self.segments.first().map(|s| s.x_start)
    }

    pub fn end(&self) -> Option<f64> {
        self.segments.last().map(|s| s.x_start + s.h)
    }

    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    /// Interpolated state components at `x`.
    pub fn eval(&self, x: f64) -> Result<Vec<Complex64>> {
        let (start, end) = match (self.start(), self.end()) {
            (Some(s), Some(e)) => (s, e),
            _ => return Err(Error::domain("empty dense output")),
        };
        let slack = 1e-12 * (1.0 + start.abs().max(end.abs()));
        if x < start - slack || x > end + slack {
            return Err(Error::domain(format!(
                "x = {x} outside the integrated interval [{start}, {end}]"
            )));
        }
        let idx = self
            .segments
            .partition_point(|s| s.x_start <= x)
            .saturating_sub(1);
        Ok(self.segments[idx].eval(x))
    }
}

/// Grid samples plus dense output of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub path: SampledPath<T>,
    pub dense: DenseOutput,
}

impl<T: State> Trajectory<T> {
    /// State at an arbitrary abscissa of the integrated interval; exact grid
    /// samples are returned verbatim.
    pub fn at(&self, x: f64) -> Result<T> {
        if let Some(k) = self.path.index_of(x) {
            return Ok(self.path.values()[k].clone());
        }
        Ok(T::from_components(&self.dense.eval(x)?))
    }

    fn retype<U: State>(self) -> Trajectory<U>
    where
        T: State,
    {
        Trajectory {
            path: self.path.map(|v| U::from_components(&flatten(v))),
            dense: self.dense,
        }
    }
}

/// Guard predicate `(x, state at the start of the step, state at x) -> ok`.
pub type Guard<'a> = &'a dyn Fn(f64, &[Complex64], &[Complex64]) -> bool;

/// Solves `y' = A(x) y` for a ℂ² vector on a uniform grid of `n_cells` cells.
pub fn integrate_linear_system(
    rhs_matrix: impl Fn(f64) -> C2Matrix,
    y0: C2Vector,
    x0: f64,
    x1: f64,
    n_cells: usize,
    settings: &IntegratorSettings,
) -> Result<Trajectory<C2Vector>> {
    let rhs = |x: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let v = rhs_matrix(x) * C2Vector::new(y[0], y[1]);
        dy[0] = v.v1;
        dy[1] = v.v2;
    };
    Ok(integrate_system(rhs, &flatten(&y0), x0, x1, n_cells, settings, None)?.retype())
}

/// Solves `Y' = A(x) Y` for a 2×2 matrix: both columns share one step control.
pub fn integrate_matrix_system(
    rhs_matrix: impl Fn(f64) -> C2Matrix,
    y0: C2Matrix,
    x0: f64,
    x1: f64,
    n_cells: usize,
    settings: &IntegratorSettings,
) -> Result<Trajectory<C2Matrix>> {
    let rhs = |x: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let m = rhs_matrix(x) * C2Matrix::from_components(y);
        dy.copy_from_slice(&m.entries());
    };
    Ok(integrate_system(rhs, &flatten(&y0), x0, x1, n_cells, settings, None)?.retype())
}

/// Solves a general first-order system `y' = f(x, y)`.
///
/// When `guard` is given it is checked at every step endpoint against the
/// state at the start of that step; a violation is localized by bisection on
/// the step's dense output and reported as [`Error::GuardHalt`].
pub fn integrate_nonlinear_system<S: State>(
    rhs: impl FnMut(f64, &[Complex64], &mut [Complex64]),
    y0: &S,
    x0: f64,
    x1: f64,
    n_cells: usize,
    settings: &IntegratorSettings,
    guard: Option<Guard<'_>>,
) -> Result<Trajectory<S>> {
    Ok(integrate_system(rhs, &flatten(y0), x0, x1, n_cells, settings, guard)?.retype())
}

fn integrate_system(
    mut rhs: impl FnMut(f64, &[Complex64], &mut [Complex64]),
    y0: &[Complex64],
    x0: f64,
    x1: f64,
    n_cells: usize,
    settings: &IntegratorSettings,
    guard: Option<Guard<'_>>,
) -> Result<Trajectory<Vec<Complex64>>> {
    settings.validate()?;
    let grid = uniform_grid(x0, x1, n_cells)?;
    if let Some(g) = guard {
        if !g(x0, y0, y0) {
            return Err(Error::GuardHalt { x: x0, state: y0.to_vec() });
        }
    }
    let mut stepper = Stepper::new(y0.len(), settings);
    let mut y = y0.to_vec();
    let mut values = Vec::with_capacity(grid.len());
    values.push(y.clone());
    let mut dense = DenseOutput::default();
    for cell in grid.windows(2) {
        stepper.advance_cell(&mut rhs, cell[0], cell[1], &mut y, &mut dense, guard)?;
        values.push(y.clone());
    }
    Ok(Trajectory {
        path: SampledPath::new(grid, values, x0)?,
        dense,
    })
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const BISECTION_ITERATIONS: usize = 200;

struct Stepper<'s> {
    settings: &'s IntegratorSettings,
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
    y_new: Vec<Complex64>,
    // Kahan compensation for the state update.
    carry: Vec<Complex64>,
    // FSAL stage for the current state, valid when `have_k1`.
    have_k1: bool,
    h_next: Option<f64>,
}

impl<'s> Stepper<'s> {
    fn new(n: usize, settings: &'s IntegratorSettings) -> Self {
        let z = vec![Complex64::default(); n];
        Self {
            settings,
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z.clone(),
            carry: z,
            have_k1: false,
            h_next: None,
        }
    }

    fn advance_cell(
        &mut self,
        rhs: &mut impl FnMut(f64, &[Complex64], &mut [Complex64]),
        a: f64,
        b: f64,
        y: &mut [Complex64],
        dense: &mut DenseOutput,
        guard: Option<Guard<'_>>,
    ) -> Result<()> {
        match self.settings.method {
            Method::AdaptiveDopri5 => self.dopri_cell(rhs, a, b, y, dense, guard),
            Method::FixedRk4 => self.rk4_cell(rhs, a, b, y, dense, guard),
        }
    }

    fn dopri_cell(
        &mut self,
        rhs: &mut impl FnMut(f64, &[Complex64], &mut [Complex64]),
        a: f64,
        b: f64,
        y: &mut [Complex64],
        dense: &mut DenseOutput,
        guard: Option<Guard<'_>>,
    ) -> Result<()> {
        let cell = b - a;
        let mut x = a;
        if !self.have_k1 {
            rhs(x, y, &mut self.k[0]);
            self.have_k1 = true;
        }
        let mut h = self
            .h_next
            .unwrap_or(cell)
            .min(cell)
            .min(self.settings.max_step);
        loop {
            let remaining = b - x;
            let landing = h >= remaining * (1.0 - 1e-12);
            if landing {
                h = remaining;
            }
            self.dopri_stages(rhs, x, h, y);
            let err = self.error_norm(h, y);
            if err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                let suggestion = (h * factor).min(self.settings.max_step);
                let x_new = if landing { b } else { x + h };
                let segment = self.dopri_segment(x, h, y);
                if let Some(g) = guard {
                    if !g(x_new, y, &self.y_new) {
                        return Err(localize(g, &segment, x, x_new, y));
                    }
                }
                self.commit(y);
                self.k.swap(0, 6);
                dense.segments.push(segment);
                x = x_new;
                if landing {
                    // Keep the unclipped suggestion for the next cell.
                    self.h_next = Some(suggestion.max(h));
                    return Ok(());
                }
                h = suggestion;
            } else {
                let factor = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                h *= factor;
                if h < self.settings.min_step {
                    return Err(Error::StepUnderflow { x, step: h });
                }
            }
        }
    }

    fn dopri_stages(
        &mut self,
        rhs: &mut impl FnMut(f64, &[Complex64], &mut [Complex64]),
        x: f64,
        h: f64,
        y: &[Complex64],
    ) {
        let n = y.len();
        let k = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k[0][i];
        }
        rhs(x + C2 * h, tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        rhs(x + C3 * h, tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        rhs(x + C4 * h, tmp, &mut k[3]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        rhs(x + C5 * h, tmp, &mut k[4]);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        rhs(x + h, tmp, &mut k[5]);
        for i in 0..n {
            // Increment only; the state update is compensated in `commit`.
            self.y_new[i] = h
                * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
            tmp[i] = y[i] + self.y_new[i];
        }
        rhs(x + h, tmp, &mut k[6]);
        std::mem::swap(&mut self.y_new, tmp);
        // y_new now holds the full new state, tmp the increment.
    }

    fn error_norm(&self, h: f64, y: &[Complex64]) -> f64 {
        let k = &self.k;
        let n = y.len();
        let mut sum = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let scale = self.settings.abs_tol
                + self.settings.rel_tol * y[i].norm().max(self.y_new[i].norm());
            let r = e.norm() / scale;
            sum += r * r;
        }
        let err = (sum / n as f64).sqrt();
        if err.is_finite() && self.y_new.iter().all(|v| v.is_finite()) {
            err
        } else {
            f64::INFINITY
        }
    }

    fn dopri_segment(&self, x: f64, h: f64, y: &[Complex64]) -> Segment {
        let k = &self.k;
        let n = y.len();
        let r2: Vec<Complex64> = (0..n).map(|i| self.y_new[i] - y[i]).collect();
        let r3: Vec<Complex64> = (0..n).map(|i| h * k[0][i] - r2[i]).collect();
        let r4: Vec<Complex64> = (0..n).map(|i| r2[i] - h * k[6][i] - r3[i]).collect();
        let r5: Vec<Complex64> = (0..n)
            .map(|i| {
                h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i])
            })
            .collect();
        Segment {
            x_start: x,
            h,
            coeffs: [y.to_vec(), r2, r3, r4, r5],
        }
    }

    /// Applies the pending increment held in `tmp` with compensated summation.
    fn commit(&mut self, y: &mut [Complex64]) {
        for i in 0..y.len() {
            let inc = self.tmp[i] + self.carry[i];
            let next = y[i] + inc;
            self.carry[i] = inc - (next - y[i]);
            y[i] = next;
        }
        self.y_new.copy_from_slice(y);
    }

    fn rk4_cell(
        &mut self,
        rhs: &mut impl FnMut(f64, &[Complex64], &mut [Complex64]),
        a: f64,
        b: f64,
        y: &mut [Complex64],
        dense: &mut DenseOutput,
        guard: Option<Guard<'_>>,
    ) -> Result<()> {
        let n = y.len();
        let cell = b - a;
        let substeps = if self.settings.max_step.is_finite() {
            (cell / self.settings.max_step).ceil().max(1.0) as usize
        } else {
            1
        };
        let h = cell / substeps as f64;
        if h < self.settings.min_step {
            return Err(Error::StepUnderflow { x: a, step: h });
        }
        if !self.have_k1 {
            rhs(a, y, &mut self.k[0]);
            self.have_k1 = true;
        }
        for s in 0..substeps {
            let x = a + s as f64 * h;
            let x_new = if s + 1 == substeps { b } else { a + (s + 1) as f64 * h };
            let k = &mut self.k;
            let tmp = &mut self.tmp;
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k[0][i];
            }
            rhs(x + 0.5 * h, tmp, &mut k[1]);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k[1][i];
            }
            rhs(x + 0.5 * h, tmp, &mut k[2]);
            for i in 0..n {
                tmp[i] = y[i] + h * k[2][i];
            }
            rhs(x + h, tmp, &mut k[3]);
            for i in 0..n {
                tmp[i] = h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                self.y_new[i] = y[i] + tmp[i];
            }
            if self.y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::StepUnderflow { x, step: h });
            }
            rhs(x_new, &self.y_new, &mut k[6]);
            let segment = Segment::hermite(x, h, y, &self.y_new, &k[0], &k[6]);
            if let Some(g) = guard {
                if !g(x_new, y, &self.y_new) {
                    return Err(localize(g, &segment, x, x_new, y));
                }
            }
            self.commit(y);
            self.k.swap(0, 6);
            dense.segments.push(segment);
        }
        Ok(())
    }
}

/// Bisects the step `[lo, hi]` for the first abscissa where `guard` fails.
fn localize(guard: Guard<'_>, segment: &Segment, lo: f64, hi: f64, y_start: &[Complex64]) -> Error {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if guard(mid, y_start, &segment.eval(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Error::GuardHalt {
        x,
        state: segment.eval(x),
    }
}
