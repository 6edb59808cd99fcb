//! Scenario configuration and the verification runner.
//!
//! A run is described by one JSON document:
//!
//! ```json
//! { "settings": { "cells_per_period": 2048 },
//!   "scenarios": [ { "kind": "dirac", "name": "free", "potential": {...}, "lambdas": [[0.4, 0.0]] } ] }
//! ```
//!
//! Complex numbers are `[re, im]` pairs throughout.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deform::{
    alpha_consistency_defect, build_partial_solution, grad_gamma1, grad_similarity_defect, gradient_fd_check,
    integrate_deformed, novikov_entrywise_residuals, verify_theorem1, CMatrix, DeformSettings, DeformationState,
    Theorem1Tolerances,
};
use crate::dirac::{
    fundamental_solution, invariants, monodromy, novikov_residual, similarity_check, LambdaGrid,
};
use crate::error::{Error, Result};
use crate::numkit::{mat2_exp, IntegratorSettings, Method};
use crate::potentials::{dirac_coefficient_matrix, default_period, FunctionSpec, Potential, PotentialConfig, ScalarCoefficient};
use crate::report::{CheckRecord, Metadata, RunReport, Trace, Verdict, VerificationReport};
use crate::steen::{solve_oscillator, verify_superposition_identity, Convention, OscillatorSolution, SuperpositionCoeffs};

/// The bundled acceptance suite.
pub const DEFAULT_SUITE: &str = include_str!("../suites/default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Dopri5,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub method: MethodName,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: Option<f64>,
    pub min_step: f64,
    pub cells_per_period: usize,
    pub zero_threshold: f64,
    pub guard_threshold: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        let i = IntegratorSettings::default();
        let d = DeformSettings::default();
        Self {
            method: MethodName::Dopri5,
            abs_tol: i.abs_tol,
            rel_tol: i.rel_tol,
            max_step: None,
            min_step: i.min_step,
            cells_per_period: d.cells_per_period,
            zero_threshold: d.zero_threshold,
            guard_threshold: d.guard_threshold,
        }
    }
}

impl RunSettings {
    pub fn integrator(&self) -> IntegratorSettings {
        IntegratorSettings {
            method: match self.method {
                MethodName::Dopri5 => Method::AdaptiveDopri5,
                MethodName::Rk4 => Method::FixedRk4,
            },
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            min_step: self.min_step,
        }
    }

    pub fn deform(&self) -> DeformSettings {
        DeformSettings {
            cells_per_period: self.cells_per_period,
            integrator: self.integrator(),
            zero_threshold: self.zero_threshold,
            guard_threshold: self.guard_threshold,
        }
    }

    fn describe(&self) -> String {
        let method = match self.method {
            MethodName::Dopri5 => "dopri5",
            MethodName::Rk4 => "rk4",
        };
        match self.max_step {
            Some(m) => format!("{method} atol={:e} rtol={:e} max_step={m:e}", self.abs_tol, self.rel_tol),
            None => format!("{method} atol={:e} rtol={:e}", self.abs_tol, self.rel_tol),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.cells_per_period < 16 {
            return Err("cells_per_period must be at least 16".into());
        }
        if !(self.zero_threshold > 0.0 && self.guard_threshold > 0.0) {
            return Err("thresholds must be positive".into());
        }
        self.integrator().validate().map_err(|e| e.to_string())
    }
}

/// Per-scenario overrides of [`RunSettings`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsPatch {
    pub method: Option<MethodName>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub min_step: Option<f64>,
    pub cells_per_period: Option<usize>,
    pub zero_threshold: Option<f64>,
    pub guard_threshold: Option<f64>,
}

impl SettingsPatch {
    pub fn apply(&self, base: &RunSettings) -> RunSettings {
        RunSettings {
            method: self.method.unwrap_or(base.method),
            abs_tol: self.abs_tol.unwrap_or(base.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(base.rel_tol),
            max_step: self.max_step.or(base.max_step),
            min_step: self.min_step.unwrap_or(base.min_step),
            cells_per_period: self.cells_per_period.unwrap_or(base.cells_per_period),
            zero_threshold: self.zero_threshold.unwrap_or(base.zero_threshold),
            guard_threshold: self.guard_threshold.unwrap_or(base.guard_threshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTriples {
    pub count: usize,
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default)]
    pub seed: u64,
    /// Minimum of `|A u² + 2B u v + C v²|` over the grid for a triple to be kept.
    #[serde(default = "default_min_form")]
    pub min_form: f64,
}

fn default_bound() -> f64 {
    4.0
}

fn default_min_form() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteenSection {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub settings: Option<SettingsPatch>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub coefficient: FunctionSpec,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub convention: Convention,
    /// Integration interval; defaults to one period from 0.
    #[serde(default)]
    pub span: Option<(f64, f64)>,
    #[serde(default)]
    pub triples: Vec<SuperpositionCoeffs>,
    #[serde(default)]
    pub random_triples: Option<RandomTriples>,
    #[serde(default = "default_steen_tolerance")]
    pub tolerance: f64,
}

fn default_steen_tolerance() -> f64 {
    1e-6
}

/// Reference value for `γ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gamma1Oracle {
    /// `tr exp(l P)`, valid for constant potentials.
    MatrixExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracSection {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub settings: Option<SettingsPatch>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub lambdas: Vec<Complex64>,
    /// `re_min:re_max:n,im_min:im_max:m`, appended to `lambdas`.
    #[serde(default)]
    pub lambda_grid: Option<String>,
    #[serde(default = "default_invariant_count")]
    pub invariants: usize,
    #[serde(default)]
    pub gamma1_oracle: Option<Gamma1Oracle>,
}

fn default_invariant_count() -> usize {
    crate::dirac::DEFAULT_INVARIANT_COUNT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedC {
    /// `C = S(x₀)`.
    Monodromy,
    Symplectic,
    E12,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CSpec {
    Named(NamedC),
    Matrix(CMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaGridSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for AlphaGridSpec {
    fn default() -> Self {
        Self {
            min: -1.0,
            max: 1.0,
            steps: 41,
        }
    }
}

impl AlphaGridSpec {
    pub fn points(&self) -> Vec<Complex64> {
        if self.steps <= 1 {
            return vec![Complex64::new(self.min, 0.0)];
        }
        (0..self.steps)
            .map(|k| Complex64::new(self.min + (self.max - self.min) * k as f64 / (self.steps - 1) as f64, 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSingularity {
    pub x: f64,
    pub component: usize,
    #[serde(default = "default_abscissa_tolerance")]
    pub tolerance: f64,
}

fn default_abscissa_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub name: String,
    /// `(f̃₁, f̃₂, α)` at the start of the span.
    pub state0: (Complex64, Complex64, Complex64),
    /// Integration interval; defaults to one period from 0.
    #[serde(default)]
    pub span: Option<(f64, f64)>,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub expect_singularity: Option<ExpectedSingularity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformSection {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub settings: Option<SettingsPatch>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub potential: PotentialConfig,
    pub lambda: Complex64,
    #[serde(default = "default_c")]
    pub c: CSpec,
    #[serde(default)]
    pub alpha_grid: AlphaGridSpec,
    #[serde(default = "default_true")]
    pub theorem: bool,
    #[serde(default)]
    pub gradient_directions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fd_eps")]
    pub fd_eps: f64,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
}

fn default_c() -> CSpec {
    CSpec::Named(NamedC::Symplectic)
}

fn default_true() -> bool {
    true
}

fn default_fd_eps() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullChainSection {
    pub name: String,
    #[serde(default)]
    pub settings: Option<SettingsPatch>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub steen: Option<SteenSection>,
    #[serde(default)]
    pub dirac: Option<DiracSection>,
    #[serde(default)]
    pub deform: Option<DeformSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)]
pub enum Scenario {
    Steen(SteenSection),
    Dirac(DiracSection),
    Deform(DeformSection),
    FullChain(FullChainSection),
}

impl Scenario {
    pub fn name(&self) -> &str {
        match self {
            Scenario::Steen(s) => &s.name,
            Scenario::Dirac(s) => &s.name,
            Scenario::Deform(s) => &s.name,
            Scenario::FullChain(s) => &s.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Steen(_) => "steen",
            Scenario::Dirac(_) => "dirac",
            Scenario::Deform(_) => "deform",
            Scenario::FullChain(_) => "full-chain",
        }
    }

    fn settings_patch(&self) -> Option<&SettingsPatch> {
        match self {
            Scenario::Steen(s) => s.settings.as_ref(),
            Scenario::Dirac(s) => s.settings.as_ref(),
            Scenario::Deform(s) => s.settings.as_ref(),
            Scenario::FullChain(s) => s.settings.as_ref(),
        }
    }

    fn tolerances(&self) -> &BTreeMap<String, f64> {
        match self {
            Scenario::Steen(s) => &s.tolerances,
            Scenario::Dirac(s) => &s.tolerances,
            Scenario::Deform(s) => &s.tolerances,
            Scenario::FullChain(s) => &s.tolerances,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub settings: RunSettings,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

impl RunConfig {
    /// Parses and validates a config document. Errors carry a JSON pointer
    /// to the offending value.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
            pointer: json_pointer(e.path()),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn default_suite() -> Self {
        Self::from_json(DEFAULT_SUITE).expect("bundled suite is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |pointer: String, message: String| Error::Config { pointer, message };
        self.settings
            .validate()
            .map_err(|m| cfg_err("/settings".into(), m))?;
        let mut seen = BTreeSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            let at = |field: &str| format!("/scenarios/{i}{field}");
            if s.name().trim().is_empty() {
                return Err(cfg_err(at("/name"), "scenario name must not be empty".into()));
            }
            if !seen.insert(s.name().to_string()) {
                return Err(cfg_err(at("/name"), format!("duplicate scenario name {:?}", s.name())));
            }
            let settings = self.scenario_settings(s);
            settings.validate().map_err(|m| cfg_err(at("/settings"), m))?;
            for (check, tol) in s.tolerances() {
                if !(*tol > 0.0) {
                    return Err(cfg_err(at(&format!("/tolerances/{}", escape(check))), "tolerance must be positive".into()));
                }
            }
            match s {
                Scenario::Steen(sec) => validate_steen(sec).map_err(|(f, m)| cfg_err(at(&f), m))?,
                Scenario::Dirac(sec) => validate_dirac(sec).map_err(|(f, m)| cfg_err(at(&f), m))?,
                Scenario::Deform(sec) => validate_deform(sec).map_err(|(f, m)| cfg_err(at(&f), m))?,
                Scenario::FullChain(fc) => {
                    if fc.steen.is_none() && fc.dirac.is_none() && fc.deform.is_none() {
                        return Err(cfg_err(at(""), "full-chain scenario needs at least one section".into()));
                    }
                    if let Some(sec) = &fc.steen {
                        validate_steen(sec).map_err(|(f, m)| cfg_err(at(&format!("/steen{f}")), m))?;
                    }
                    if let Some(sec) = &fc.dirac {
                        validate_dirac(sec).map_err(|(f, m)| cfg_err(at(&format!("/dirac{f}")), m))?;
                    }
                    if let Some(sec) = &fc.deform {
                        validate_deform(sec).map_err(|(f, m)| cfg_err(at(&format!("/deform{f}")), m))?;
                    }
                }
            }
        }
        Ok(())
    }

    fn scenario_settings(&self, s: &Scenario) -> RunSettings {
        s.settings_patch().map_or(self.settings, |p| p.apply(&self.settings))
    }
}

type FieldError = (String, String);

fn validate_steen(s: &SteenSection) -> std::result::Result<(), FieldError> {
    ScalarCoefficient::new(s.coefficient.clone(), s.period).map_err(|e| ("/coefficient".into(), e.to_string()))?;
    if let Some((a, b)) = s.span {
        if !(b > a) {
            return Err(("/span".into(), "span must be increasing".into()));
        }
    }
    if !(s.tolerance > 0.0) {
        return Err(("/tolerance".into(), "tolerance must be positive".into()));
    }
    if let Some(r) = &s.random_triples {
        if !(r.bound > 0.0 && r.min_form > 0.0) {
            return Err(("/random_triples".into(), "bound and min_form must be positive".into()));
        }
    }
    Ok(())
}

fn validate_dirac(s: &DiracSection) -> std::result::Result<(), FieldError> {
    Potential::from_config(&s.potential).map_err(|e| ("/potential".into(), e.to_string()))?;
    if let Some(g) = &s.lambda_grid {
        g.parse::<LambdaGrid>().map_err(|e| ("/lambda_grid".into(), e.to_string()))?;
    }
    if s.invariants == 0 {
        return Err(("/invariants".into(), "need at least one invariant".into()));
    }
    if s.gamma1_oracle.is_some() && Potential::from_config(&s.potential).ok().and_then(|p| p.constant_values()).is_none() {
        return Err(("/gamma1_oracle".into(), "matrix-exponential oracle needs a constant potential".into()));
    }
    Ok(())
}

fn validate_deform(s: &DeformSection) -> std::result::Result<(), FieldError> {
    Potential::from_config(&s.potential).map_err(|e| ("/potential".into(), e.to_string()))?;
    if s.alpha_grid.steps == 0 {
        return Err(("/alpha_grid/steps".into(), "need at least one grid point".into()));
    }
    if !(1e-7..=1e-3).contains(&s.fd_eps) {
        return Err(("/fd_eps".into(), "fd_eps must lie in [1e-7, 1e-3]".into()));
    }
    let mut names = BTreeSet::new();
    for (i, f) in s.flows.iter().enumerate() {
        if !names.insert(f.name.as_str()) {
            return Err((format!("/flows/{i}/name"), format!("duplicate flow name {:?}", f.name)));
        }
        if let Some((a, b)) = f.span {
            if !(b > a) {
                return Err((format!("/flows/{i}/span"), "span must be increasing".into()));
            }
        }
    }
    Ok(())
}

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape(variant))),
            Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
    pub timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: None, timings: true }
    }
}

/// Runs every scenario and merges the reports in config order.
pub fn run_scenarios(config: &RunConfig, options: &RunOptions) -> Result<RunReport> {
    let run = || -> Vec<VerificationReport> {
        config
            .scenarios
            .par_iter()
            .map(|s| run_scenario(s, &config.scenario_settings(s), options.timings))
            .collect()
    };
    let reports = match options.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(RunReport::new(reports))
}

/// Runs one scenario; runtime failures become `error` records.
pub fn run_scenario(scenario: &Scenario, settings: &RunSettings, timings: bool) -> VerificationReport {
    let start = Instant::now();
    let mut traces = Vec::new();
    let mut records = match scenario {
        Scenario::Steen(s) => guarded("steen", || run_steen(s, settings)),
        Scenario::Dirac(s) => guarded("dirac", || run_dirac(s, settings, &mut traces)),
        Scenario::Deform(s) => guarded("deform", || run_deform(s, settings, &mut traces)),
        Scenario::FullChain(fc) => {
            let mut all = Vec::new();
            if let Some(s) = &fc.steen {
                all.extend(prefixed("steen/", guarded("steen", || run_steen(s, settings))));
            }
            if let Some(s) = &fc.dirac {
                all.extend(prefixed("dirac/", guarded("dirac", || run_dirac(s, settings, &mut traces))));
            }
            if let Some(s) = &fc.deform {
                all.extend(prefixed("deform/", guarded("deform", || run_deform(s, settings, &mut traces))));
            }
            all
        }
    };
    apply_tolerances(&mut records, scenario.tolerances());
    log::info!("scenario {} finished with {} records", scenario.name(), records.len());
    VerificationReport {
        scenario: scenario.name().to_string(),
        kind: scenario.kind().to_string(),
        records,
        metadata: Metadata {
            cells_per_period: settings.cells_per_period,
            integrator: settings.describe(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        timing_ms: timings.then(|| start.elapsed().as_secs_f64() * 1e3),
        traces,
    }
}

fn guarded(stage: &str, f: impl FnOnce() -> Result<Vec<CheckRecord>>) -> Vec<CheckRecord> {
    f().unwrap_or_else(|e| vec![CheckRecord::error(stage, "plumbing", &e)])
}

fn prefixed(prefix: &str, records: Vec<CheckRecord>) -> Vec<CheckRecord> {
    records
        .into_iter()
        .map(|mut r| {
            r.check = format!("{prefix}{}", r.check);
            r
        })
        .collect()
}

/// Re-judges asserted records whose check name has an override.
fn apply_tolerances(records: &mut [CheckRecord], overrides: &BTreeMap<String, f64>) {
    for r in records.iter_mut() {
        let name = r.check.rsplit('/').next().unwrap_or(&r.check);
        let tol = overrides.get(&r.check).or_else(|| overrides.get(name));
        if let (Some(&tol), Some(res), Verdict::Pass | Verdict::Fail) = (tol, r.residual, r.verdict) {
            r.tolerance = Some(tol);
            r.verdict = if res <= tol { Verdict::Pass } else { Verdict::Fail };
        }
    }
}

fn steen_span(s: &SteenSection) -> (f64, f64) {
    s.span.unwrap_or((0.0, s.period))
}

fn steen_cells(s: &SteenSection, settings: &RunSettings) -> usize {
    let (a, b) = steen_span(s);
    ((b - a) / s.period * settings.cells_per_period as f64).ceil().max(16.0) as usize
}

/// Draws real triples uniformly from `[−bound, bound]³`, keeping those whose
/// quadratic form stays at least `min_form` away from zero on the grid.
pub fn random_triples(
    spec: &RandomTriples,
    u: &OscillatorSolution,
    v: &OscillatorSolution,
) -> Vec<SuperpositionCoeffs> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    let mut attempts = 0;
    while out.len() < spec.count && attempts < 10_000 {
        attempts += 1;
        let mut draw = || rng.gen_range(-spec.bound..=spec.bound);
        let t = SuperpositionCoeffs::real(draw(), draw(), draw());
        let min_form = u
            .path
            .values()
            .iter()
            .zip(v.path.values())
            .map(|(a, b)| (t.a * a.v1 * a.v1 + 2.0 * t.b * a.v1 * b.v1 + t.c * b.v1 * b.v1).norm())
            .fold(f64::INFINITY, f64::min);
        if min_form >= spec.min_form {
            out.push(t);
        }
    }
    out
}

fn run_steen(s: &SteenSection, settings: &RunSettings) -> Result<Vec<CheckRecord>> {
    let coeff = ScalarCoefficient::new(s.coefficient.clone(), s.period)?;
    let (x0, x1) = steen_span(s);
    let n = steen_cells(s, settings);
    let integ = settings.integrator();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let u = solve_oscillator(&coeff, s.convention, one, zero, x0, x1, n, &integ)?;
    let v = solve_oscillator(&coeff, s.convention, zero, one, x0, x1, n, &integ)?;
    let mut records = vec![
        CheckRecord::assert_le("oscillator-residual", "y'' = ω y", u.residual().max(v.residual()), 1e-7),
    ];
    let mut triples: Vec<SuperpositionCoeffs> = s.triples.clone();
    if let Some(r) = &s.random_triples {
        let drawn = random_triples(r, &u, &v);
        if drawn.len() < r.count {
            records.push(
                CheckRecord::reported("random-triples", "plumbing")
                    .with_detail(format!("only {} of {} triples kept the form away from zero", drawn.len(), r.count)),
            );
        }
        triples.extend(drawn);
    }
    for (i, t) in triples.iter().enumerate() {
        let prefix = format!("triple[{i}]/");
        match verify_superposition_identity(&u, &v, t, s.tolerance, settings.zero_threshold) {
            Ok(recs) => records.extend(prefixed(&prefix, recs).into_iter().map(|r| {
                r.with_complex("A", t.a).with_complex("B", t.b).with_complex("C", t.c)
            })),
            Err(e) => records.push(CheckRecord::error(format!("{prefix}superposition"), "z² = A u² + 2B u v + C v²", &e)),
        }
    }
    Ok(records)
}

/// `tr exp(l P)` for a constant potential.
fn constant_trace(q: &Potential, lambda: Complex64) -> Complex64 {
    let l = dirac_coefficient_matrix(q, lambda, 0.0);
    mat2_exp(&l.scale(Complex64::new(q.period(), 0.0))).trace()
}

fn dirac_lambdas(s: &DiracSection) -> Result<Vec<Complex64>> {
    let mut lambdas = s.lambdas.clone();
    if let Some(g) = &s.lambda_grid {
        lambdas.extend(g.parse::<LambdaGrid>()?.points());
    }
    Ok(lambdas)
}

fn run_dirac(s: &DiracSection, settings: &RunSettings, traces: &mut Vec<Trace>) -> Result<Vec<CheckRecord>> {
    let q = Potential::from_config(&s.potential)?;
    let lambdas = dirac_lambdas(s)?;
    let n = settings.cells_per_period;
    let integ = settings.integrator();
    let per_lambda: Vec<(Vec<CheckRecord>, Option<Vec<f64>>)> = lambdas
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let prefix = format!("lambda[{i}]/");
            match dirac_checks(&q, lambda, n, &integ, s) {
                Ok((recs, row)) => (
                    prefixed(&prefix, recs)
                        .into_iter()
                        .map(|r| r.with_complex("lambda", lambda))
                        .collect(),
                    Some(row),
                ),
                Err(e) => (
                    vec![CheckRecord::error(format!("{prefix}monodromy"), "S(x) = F(x + P, x)", &e).with_complex("lambda", lambda)],
                    None,
                ),
            }
        })
        .collect();
    let mut trace = Trace::new(
        "lambda-scan",
        &["re_lambda", "im_lambda", "re_gamma1", "im_gamma1", "det_defect", "novikov_residual"],
    );
    let mut records = Vec::new();
    for (recs, row) in per_lambda {
        records.extend(recs);
        trace.rows.extend(row);
    }
    traces.push(trace);
    Ok(records)
}

fn dirac_checks(
    q: &Potential,
    lambda: Complex64,
    n: usize,
    integ: &IntegratorSettings,
    s: &DiracSection,
) -> Result<(Vec<CheckRecord>, Vec<f64>)> {
    let f = fundamental_solution(q, lambda, 0.0, 2.0 * q.period(), n, integ)?;
    let sm = monodromy(&f)?;
    let inv = invariants(&sm, s.invariants)?;
    let g1 = inv.gamma1();
    let nov = novikov_residual(&sm, q, lambda);
    let (r1, r2, r3) = novikov_entrywise_residuals(&sm, q, lambda);
    let mut recs = vec![
        CheckRecord::assert_le("det-F", "det F(x, x₀) = 1", f.det_defect(), 1e-9),
        CheckRecord::assert_le("det-S", "γ₂ = det S(x) = 1", sm.det_defect(), 1e-9),
        CheckRecord::assert_le(
            "trace-constancy",
            "dγ₁/dx = 0",
            inv.trace_defect,
            1e-8 * (1.0 + g1.norm()),
        ),
        CheckRecord::assert_le("novikov-commutator", "dS/dx = [l, S]", nov, 1e-6),
        CheckRecord::assert_le("novikov-entrywise", "a' + 2λa = q₂c, b' − 2λb = −q₁c, c' = 2(q₁a − q₂b)", r1.max(r2).max(r3), 1e-6)
            .with_value("a_row", r1)
            .with_value("b_row", r2)
            .with_value("c_row", r3),
        CheckRecord::assert_le("similarity", "S(x) = F(x, x₀) S(x₀) F(x, x₀)⁻¹", similarity_check(&f, &sm), 1e-8),
    ];
    if let Some(ch) = inv.cayley_hamilton_defect() {
        recs.push(CheckRecord::assert_le("cayley-hamilton", "γ₂ = γ₁² − 2", ch, 1e-9 * (1.0 + inv.gamma[1].norm())));
    }
    let mut gamma = CheckRecord::reported("gamma1", "γ₁ = tr S(x₀)").with_complex("gamma1", g1);
    for (j, gj) in inv.gamma.iter().enumerate().skip(1) {
        gamma = gamma.with_complex(&format!("gamma{}", j + 1), *gj);
    }
    recs.push(gamma);
    if let Some(Gamma1Oracle::MatrixExponential) = s.gamma1_oracle {
        let exact = constant_trace(q, lambda);
        recs.push(
            CheckRecord::assert_le("gamma1-oracle", "γ₁ = tr exp(l P)", (g1 - exact).norm(), 1e-7)
                .with_complex("gamma1", g1)
                .with_complex("exact", exact),
        );
    }
    let row = vec![lambda.re, lambda.im, g1.re, g1.im, sm.det_defect(), nov];
    Ok((recs, row))
}

fn resolve_c(spec: &CSpec, q: &Potential, lambda: Complex64, settings: &RunSettings) -> Result<CMatrix> {
    Ok(match spec {
        CSpec::Matrix(m) => *m,
        CSpec::Named(NamedC::Symplectic) => CMatrix::symplectic(),
        CSpec::Named(NamedC::E12) => CMatrix::e12(),
        CSpec::Named(NamedC::Monodromy) => CMatrix::from_matrix(&crate::dirac::monodromy_at(
            q,
            lambda,
            0.0,
            settings.cells_per_period,
            &settings.integrator(),
        )?),
    })
}

/// A random trigonometric polynomial of degree ≤ 2 per component.
fn random_direction(rng: &mut ChaCha8Rng) -> (FunctionSpec, FunctionSpec) {
    let mut component = || {
        let mut terms = vec![(0, Complex64::new(rng.gen_range(-1.0..=1.0), 0.0))];
        for k in 1..=2 {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            // a cos kx + b sin kx
            terms.push((k, Complex64::new(0.5 * a, -0.5 * b)));
            terms.push((-k, Complex64::new(0.5 * a, 0.5 * b)));
        }
        FunctionSpec::Fourier { terms }
    };
    (component(), component())
}

fn run_deform(s: &DeformSection, settings: &RunSettings, traces: &mut Vec<Trace>) -> Result<Vec<CheckRecord>> {
    let q = Potential::from_config(&s.potential)?;
    let lambda = s.lambda;
    let ds = settings.deform();
    let n = settings.cells_per_period;
    let c = resolve_c(&s.c, &q, lambda, settings)?;
    let mut records = Vec::new();

    let f = fundamental_solution(&q, lambda, 0.0, 2.0 * q.period(), n, &ds.integrator)?;
    let field = grad_gamma1(&f, &c)?;
    records.push(CheckRecord::assert_le(
        "grad-identity",
        "grad γ₁ = (S₂₁, S₁₂)",
        grad_similarity_defect(&f, &c, &field)? / (1.0 + field.max_abs()),
        1e-10,
    ));
    let sm = monodromy(&f)?;
    let (r1, r2, r3) = novikov_entrywise_residuals(&sm, &q, lambda);
    records.push(
        CheckRecord::assert_le("novikov-entrywise", "a' + 2λa = q₂c, b' − 2λb = −q₁c, c' = 2(q₁a − q₂b)", r1.max(r2).max(r3), 1e-6)
            .with_value("a_row", r1)
            .with_value("b_row", r2)
            .with_value("c_row", r3),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let directions: Vec<_> = (0..s.gradient_directions).map(|_| random_direction(&mut rng)).collect();
    let fd: Vec<CheckRecord> = directions
        .par_iter()
        .enumerate()
        .map(|(i, dir)| {
            let check = format!("gradient-fd[{i}]");
            match gradient_fd_check(&q, lambda, dir, s.fd_eps, &ds) {
                Ok((analytic, fd)) => {
                    let scale = analytic.norm().max(fd.norm()).max(1.0);
                    CheckRecord::assert_le(check, "⟨grad γ₁, δq⟩ = dγ₁(q + ε δq)/dε", (analytic - fd).norm() / scale, 1e-5)
                        .with_complex("analytic", analytic)
                        .with_complex("finite_difference", fd)
                }
                Err(e) => CheckRecord::error(check, "⟨grad γ₁, δq⟩ = dγ₁(q + ε δq)/dε", &e),
            }
        })
        .collect();
    records.extend(fd);

    if s.theorem {
        let tol = Theorem1Tolerances::default();
        match verify_theorem1(&q, lambda, &c, &s.alpha_grid.points(), &ds, &tol) {
            Ok(recs) => records.extend(recs),
            Err(e) => records.push(CheckRecord::error("theorem1", "f̃ = (√b, √(−a)) solves f̃' = l f̃ + δf̃", &e)),
        }
    }

    for flow in &s.flows {
        let (x0, x1) = flow.span.unwrap_or((0.0, q.period()));
        let cells = flow
            .cells
            .unwrap_or_else(|| ((x1 - x0) / q.period() * n as f64).ceil().max(16.0) as usize);
        let (f1, f2, alpha) = flow.state0;
        let result = integrate_deformed(&q, lambda, DeformationState::new(f1, f2, alpha), x0, x1, cells, &ds);
        let prefix = format!("flow[{}]/", flow.name);
        match (result, &flow.expect_singularity) {
            (Ok(path), None) => {
                records.push(CheckRecord::assert_le(
                    format!("{prefix}alpha-closed-form"),
                    "α = ᾱ exp[D_x⁻¹(q₁f̃₁/f̃₂ + q₂f̃₂/f̃₁)]",
                    alpha_consistency_defect(&q, &path)?,
                    1e-6,
                ));
                let mut trace = Trace::new(
                    format!("flow-{}", flow.name),
                    &["x", "re_f1", "im_f1", "re_f2", "im_f2", "re_alpha", "im_alpha"],
                );
                trace.rows = path
                    .iter()
                    .map(|(x, st)| vec![x, st.f1.re, st.f1.im, st.f2.re, st.f2.im, st.alpha.re, st.alpha.im])
                    .collect();
                traces.push(trace);
            }
            (Ok(_), Some(exp)) => records.push(
                CheckRecord::assert_le(format!("{prefix}singularity"), "plumbing", f64::INFINITY, exp.tolerance)
                    .with_detail("flow completed but a zero crossing was expected"),
            ),
            (Err(Error::Singularity { x, component }), Some(exp)) => {
                let mut rec = CheckRecord::assert_le(
                    format!("{prefix}singularity"),
                    "plumbing",
                    (x - exp.x).abs(),
                    exp.tolerance,
                )
                .with_value("x", x)
                .with_value("component", component as f64);
                if component != exp.component {
                    rec.verdict = Verdict::Fail;
                    rec.detail = Some(format!("component {component} vanished, expected {}", exp.component));
                }
                records.push(rec);
            }
            (Err(e), _) => records.push(CheckRecord::error(format!("{prefix}flow"), "f̃' = l f̃ + δf̃", &e)),
        }
    }
    Ok(records)
}

/// `f̃(x₀)` for a deform section, if the partial solution exists.
pub fn partial_solution_start(s: &DeformSection, settings: &RunSettings) -> Result<(Complex64, Complex64)> {
    let q = Potential::from_config(&s.potential)?;
    let c = resolve_c(&s.c, &q, s.lambda, settings)?;
    let f = fundamental_solution(&q, s.lambda, 0.0, 2.0 * q.period(), settings.cells_per_period, &settings.integrator())?;
    let ft = build_partial_solution(&f, &c, settings.zero_threshold)?;
    let v = ft.values()[0];
    Ok((v.v1, v.v2))
}
