//! Limit quantities of additive and kernel functionals, and empirical
//! convergence experiments against them.
//!
//! Under FR2 and MI the limiting density of the standardized process is the
//! standard normal density. Under FR1 it is `phi_{1/2}(x - X)` with the
//! random centre `X ~ N(0, 1/2)`, so limits become distributions and are
//! represented by seeded samples.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelfn::{additive_functional, kernel_functional, KernelSpec, INV_SQRT_2PI};
use crate::procgen::{draw_path, InnovationSpec, PresampleMode, ProcessKind, ProcessSpec};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::rng::{hash_words, StreamSeed};

/// Half-width of the integration window around the density centre.
pub const DOMAIN_HALF_WIDTH: f64 = 12.0;
pub const LIMIT_TOL: f64 = 1e-10;
pub const DEFAULT_FR1_DRAWS: usize = 1_000_000;

/// Which limit theory applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitVariant {
    Fr1,
    Fr2,
    Mi,
}

impl LimitVariant {
    pub fn of(kind: ProcessKind) -> Self {
        match kind {
            ProcessKind::FractionalTypeI => LimitVariant::Fr1,
            ProcessKind::FractionalTypeII => LimitVariant::Fr2,
            ProcessKind::MildlyIntegrated | ProcessKind::NearlyIntegrated => LimitVariant::Mi,
        }
    }

    /// The limiting density when it is deterministic.
    pub fn fixed_density(self) -> Option<Density> {
        match self {
            LimitVariant::Fr1 => None,
            LimitVariant::Fr2 | LimitVariant::Mi => Some(Density::standard()),
        }
    }
}

impl FromStr for LimitVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fr1" => Ok(LimitVariant::Fr1),
            "fr2" => Ok(LimitVariant::Fr2),
            "mi" | "ni" => Ok(LimitVariant::Mi),
            other => Err(Error::InvalidArgument(format!(
                "unknown limit variant `{other}`"
            ))),
        }
    }
}

/// A normal density `phi_{var}(x - centre)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Density {
    pub centre: f64,
    pub var: f64,
}

impl Density {
    pub fn standard() -> Self {
        Self {
            centre: 0.0,
            var: 1.0,
        }
    }

    /// The FR1 density for a realization of `X`.
    pub fn fr1(x_minus: f64) -> Self {
        Self {
            centre: x_minus,
            var: 0.5,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        normal_pdf(x - self.centre, self.var)
    }

    fn window(&self) -> (f64, f64) {
        let r = DOMAIN_HALF_WIDTH * self.var.sqrt().max(1.0);
        (self.centre - r, self.centre + r)
    }
}

#[inline]
pub fn normal_pdf(x: f64, var: f64) -> f64 {
    INV_SQRT_2PI / var.sqrt() * (-0.5 * x * x / var).exp()
}

/// Functions whose additive functionals are studied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum AdditiveFn {
    Constant(f64),
    /// `x^k`.
    Monomial(i32),
    /// `|x|^p`; locally integrable for `p > -1`.
    AbsPow(f64),
    /// `1{x > 0}`.
    Positive,
    /// Normal density with the given variance.
    NormalDensity(f64),
}

impl AdditiveFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            AdditiveFn::Constant(c) => c,
            AdditiveFn::Monomial(k) => x.powi(k),
            AdditiveFn::AbsPow(p) => x.abs().powf(p),
            AdditiveFn::Positive => (x > 0.0) as u8 as f64,
            AdditiveFn::NormalDensity(v) => normal_pdf(x, v),
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match *self {
            AdditiveFn::NormalDensity(v) => {
                let s = v.sqrt();
                vec![-4.0 * s, 0.0, 4.0 * s]
            }
            _ => vec![0.0],
        }
    }
}

impl fmt::Display for AdditiveFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdditiveFn::Constant(c) => write!(f, "const:{c}"),
            AdditiveFn::Monomial(k) => write!(f, "x^{k}"),
            AdditiveFn::AbsPow(p) => write!(f, "abs:{p}"),
            AdditiveFn::Positive => write!(f, "pos"),
            AdditiveFn::NormalDensity(v) => write!(f, "normal:{v}"),
        }
    }
}

impl FromStr for AdditiveFn {
    type Err = Error;
    /// Accepts `const:<c>`, `x^<k>`, `abs:<p>`, `pos`, `normal:<var>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse function `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let s = s.trim();
        if s == "pos" {
            Ok(AdditiveFn::Positive)
        } else if let Some(rest) = s.strip_prefix("const:") {
            Ok(AdditiveFn::Constant(num(rest)?))
        } else if let Some(rest) = s.strip_prefix("x^") {
            Ok(AdditiveFn::Monomial(
                rest.trim().parse().map_err(|_| bad())?,
            ))
        } else if let Some(rest) = s.strip_prefix("abs:") {
            Ok(AdditiveFn::AbsPow(num(rest)?))
        } else if let Some(rest) = s.strip_prefix("normal:") {
            let v = num(rest)?;
            if v > 0.0 {
                Ok(AdditiveFn::NormalDensity(v))
            } else {
                Err(bad())
            }
        } else {
            Err(bad())
        }
    }
}

/// A limit that is either a number or a distribution given by draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Limit {
    Value(f64),
    Sample(Vec<f64>),
}

impl Limit {
    pub fn mean(&self) -> f64 {
        match self {
            Limit::Value(v) => *v,
            Limit::Sample(s) => s.iter().sum::<f64>() / s.len() as f64,
        }
    }

    /// Monte Carlo standard error of [`Limit::mean`]; zero for values.
    pub fn se(&self) -> f64 {
        match self {
            Limit::Value(_) => 0.0,
            Limit::Sample(s) => sample_sd(s) / (s.len() as f64).sqrt(),
        }
    }
}

fn opts() -> QuadOptions {
    QuadOptions {
        abs_tol: LIMIT_TOL,
        rel_tol: LIMIT_TOL,
        ..QuadOptions::default()
    }
}

/// `int f(x) rho(x) dx`, after checking `int |f| rho < inf`.
pub fn integrate_against(f: &AdditiveFn, density: &Density) -> Result<f64> {
    let (a, b) = density.window();
    let mut breaks = f.breaks();
    breaks.push(density.centre);
    let abs = integrate_with_breaks(|x| f.eval(x).abs() * density.eval(x), a, b, &breaks, opts())?;
    if !abs.is_finite() {
        return Err(Error::Quadrature(format!(
            "{f} is not integrable against the limit density"
        )));
    }
    integrate_with_breaks(|x| f.eval(x) * density.eval(x), a, b, &breaks, opts())
}

/// Draws `X ~ N(0, 1/2)` from a seeded stream.
pub fn draw_x_minus(draws: usize, seed: StreamSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..draws)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

/// Limit of `n^{-1} sum f(x_t / beta_n)`.
pub fn limit_additive(
    f: &AdditiveFn,
    variant: LimitVariant,
    draws: usize,
    seed: StreamSeed,
) -> Result<Limit> {
    match variant.fixed_density() {
        Some(d) => integrate_against(f, &d).map(Limit::Value),
        None => {
            if draws == 0 {
                return Err(Error::InvalidArgument(
                    "FR1 limits need at least one draw".into(),
                ));
            }
            draw_x_minus(draws, seed)
                .into_par_iter()
                .map(|xm| integrate_against(f, &Density::fr1(xm)))
                .collect::<Result<Vec<_>>>()
                .map(Limit::Sample)
        }
    }
}

/// Limit of `(beta_n / (n h)) sum K((x_t - x) / h)`: `rho(0) int K`.
pub fn limit_kernel(
    variant: LimitVariant,
    k: &KernelSpec,
    draws: usize,
    seed: StreamSeed,
) -> Result<Limit> {
    let mass = k.moments.nu[0];
    match variant.fixed_density() {
        Some(d) => Ok(Limit::Value(d.eval(0.0) * mass)),
        None => {
            if draws == 0 {
                return Err(Error::InvalidArgument(
                    "FR1 limits need at least one draw".into(),
                ));
            }
            Ok(Limit::Sample(
                draw_x_minus(draws, seed)
                    .into_iter()
                    .map(|xm| Density::fr1(xm).eval(0.0) * mass)
                    .collect(),
            ))
        }
    }
}

/// `sigma_u^2 (int [1 H; H H^2] rho)^{-1}`.
pub fn ls_limit_cov<H: Fn(f64) -> f64>(
    h_g: H,
    density: &Density,
    sigma_u2: f64,
) -> Result<[[f64; 2]; 2]> {
    let (a, b) = density.window();
    let breaks = [0.0, density.centre];
    let m01 = integrate_with_breaks(|x| h_g(x) * density.eval(x), a, b, &breaks, opts())?;
    let m11 = integrate_with_breaks(|x| h_g(x).powi(2) * density.eval(x), a, b, &breaks, opts())?;
    let m00 = integrate_with_breaks(|x| density.eval(x), a, b, &breaks, opts())?;
    let det = m00 * m11 - m01 * m01;
    if !(det > 1e-10 * m00 * m11.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularDesign(
            "limit moment matrix is singular (H_g a.e. constant)".into(),
        ));
    }
    let s = sigma_u2 / det;
    Ok([[s * m11, -s * m01], [-s * m01, s * m00]])
}

/// The statistic tracked by [`convergence_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Functional {
    Additive {
        f: AdditiveFn,
    },
    /// Kernel functional at `x` with `h = n^b`.
    Kernel {
        kernel: KernelSpec,
        x: f64,
        b: f64,
    },
}

impl Functional {
    pub fn label(&self) -> String {
        match self {
            Functional::Additive { f } => format!("additive {f}"),
            Functional::Kernel { kernel, x, b } => {
                format!("kernel {} at x={x}, h=n^{b}", kernel.kind.name())
            }
        }
    }

    fn limit(&self, variant: LimitVariant, draws: usize, seed: StreamSeed) -> Result<Limit> {
        match self {
            Functional::Additive { f } => limit_additive(f, variant, draws, seed),
            Functional::Kernel { kernel, .. } => limit_kernel(variant, kernel, draws, seed),
        }
    }
}

pub const REPORT_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizeStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// `sd / sqrt(reps)`.
    pub se: f64,
    /// Values at [`REPORT_QUANTILES`].
    pub quantiles: Vec<f64>,
    /// Two-sample KS distance to the oracle draws (FR1 only).
    pub ks: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub process: String,
    pub functional: String,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub stats: Vec<SampleSizeStats>,
    /// Deterministic oracle value, if any.
    pub oracle_value: Option<f64>,
    pub oracle_mean: f64,
    pub oracle_se: f64,
    pub oracle_draws: usize,
    #[serde(skip)]
    pub values: Vec<Vec<f64>>,
}

impl ConvergenceReport {
    pub const CSV_HEADER: &'static str =
        "n,reps,mean,se,sd,q05,q25,q50,q75,q95,oracle_mean,oracle_se,ks";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in &self.stats {
            let q: Vec<String> = s.quantiles.iter().map(f64::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.n,
                self.reps,
                s.mean,
                s.se,
                s.sd,
                q.join(","),
                self.oracle_mean,
                self.oracle_se,
                s.ks.map_or(String::new(), |k| k.to_string())
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} for {} ({} reps)\n",
            self.functional, self.process, self.reps
        );
        match self.oracle_value {
            Some(v) => out.push_str(&format!("limit: {v:.6}\n")),
            None => out.push_str(&format!(
                "limit distribution: mean {:.6} (se {:.2e}, {} draws)\n",
                self.oracle_mean, self.oracle_se, self.oracle_draws
            )),
        }
        for s in &self.stats {
            out.push_str(&format!(
                "n={:>7}  mean {:.6}  se {:.2e}",
                s.n, s.mean, s.se
            ));
            if let Some(k) = s.ks {
                out.push_str(&format!("  ks {k:.4}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn sample_sd(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / m;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
}

/// Order-statistic quantile `ceil(q n)` of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let k = ((q * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup |F_a - F_b|` between two empirical distributions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `sup |F_n - F|` for a continuous reference CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let s = sorted(values);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n)
                .abs()
                .max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Simulates `reps` paths for each `n` and compares the functional with its limit.
pub fn convergence_check(
    spec: &ProcessSpec,
    functional: &Functional,
    n_grid: &[usize],
    reps: usize,
    oracle_draws: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    spec.validate()?;
    if reps == 0 || n_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "need reps >= 1 and a non-empty n grid".into(),
        ));
    }
    let variant = LimitVariant::of(spec.kind);
    let limit = functional.limit(variant, oracle_draws, StreamSeed::new(seed, u64::MAX))?;
    let innov = InnovationSpec::default();
    let mut stats = Vec::with_capacity(n_grid.len());
    let mut all_values = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let stream = hash_words(&[
            spec.kind as u64,
            spec.d.to_bits(),
            spec.alpha_kappa.to_bits(),
            n as u64,
        ]);
        let values = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let s = StreamSeed::new(seed, stream).derive(&[rep as u64]);
                let (path, _) = draw_path(spec, &innov, n, PresampleMode::Random, s)?;
                match functional {
                    Functional::Additive { f } => additive_functional(&path, |x| f.eval(x)),
                    Functional::Kernel { kernel, x, b } => {
                        kernel_functional(&path, kernel, *x, (n as f64).powf(*b))
                    }
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = values.iter().sum::<f64>() / reps as f64;
        let sd = sample_sd(&values);
        let s = sorted(&values);
        stats.push(SampleSizeStats {
            n,
            mean,
            sd,
            se: sd / (reps as f64).sqrt(),
            quantiles: REPORT_QUANTILES
                .iter()
                .map(|&q| sorted_quantile(&s, q))
                .collect(),
            ks: match &limit {
                Limit::Sample(draws) => Some(ks_two_sample(&values, draws)),
                Limit::Value(_) => None,
            },
        });
        all_values.push(values);
    }
    Ok(ConvergenceReport {
        process: spec.label(),
        functional: functional.label(),
        n_grid: n_grid.to_vec(),
        reps,
        stats,
        oracle_value: match limit {
            Limit::Value(v) => Some(v),
            Limit::Sample(_) => None,
        },
        oracle_mean: limit.mean(),
        oracle_se: limit.se(),
        oracle_draws: match &limit {
            Limit::Sample(s) => s.len(),
            Limit::Value(_) => 0,
        },
        values: all_values,
    })
}

/// One analytic check of a computed constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relative: bool,
}

impl OracleCheck {
    fn new(name: &str, computed: f64, expected: f64, tolerance: f64, relative: bool) -> Self {
        Self {
            name: name.to_string(),
            computed,
            expected,
            tolerance,
            relative,
        }
    }

    pub fn error(&self) -> f64 {
        let e = (self.computed - self.expected).abs();
        if self.relative {
            e / self.expected.abs()
        } else {
            e
        }
    }

    pub fn passed(&self) -> bool {
        self.error() <= self.tolerance
    }

    pub const CSV_HEADER: &'static str = "name,computed,expected,error,tolerance,pass";

    pub fn to_csv_record(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{}",
            self.name,
            self.computed,
            self.expected,
            self.error(),
            self.tolerance,
            self.passed()
        )
    }
}

/// Largest relative gap between `frac_coeffs(d, 200)` and
/// `Gamma(j + d) / (Gamma(d) Gamma(j + 1))`.
fn frac_coeff_gap(d: f64) -> f64 {
    use statrs::function::gamma::{gamma, ln_gamma};
    let psi = crate::procgen::frac_coeffs(d, 200);
    let g_d = gamma(d);
    psi.iter()
        .enumerate()
        .skip(1)
        .map(|(j, &p)| {
            let j = j as f64;
            let oracle =
                g_d.signum() * (ln_gamma(j + d) - g_d.abs().ln() - ln_gamma(j + 1.0)).exp();
            ((p - oracle) / oracle).abs()
        })
        .fold(0.0, f64::max)
}

/// Analytic values that every build must reproduce.
pub fn oracle_suite() -> Result<Vec<OracleCheck>> {
    use crate::procgen::exact_sd;
    use crate::spectest::chi2_quantile;
    let mut out = Vec::new();
    for d in [-0.5, 0.25, 0.5, 0.75] {
        out.push(OracleCheck::new(
            &format!("frac_coeffs gamma ratio d={d}"),
            frac_coeff_gap(d),
            0.0,
            1e-12,
            false,
        ));
    }
    let n = 1000;
    let rw = ProcessSpec::fractional_type2(1.0, vec![1.0])?;
    out.push(OracleCheck::new(
        "exact_sd^2 random walk n=1000",
        exact_sd(&rw, n)?.powi(2),
        n as f64,
        1e-10,
        true,
    ));
    let mi = ProcessSpec::mildly_integrated(0.5, vec![1.0])?;
    let r = 1.0 - (n as f64).powf(-0.5);
    out.push(OracleCheck::new(
        "exact_sd^2 MI alpha=0.5 n=1000",
        exact_sd(&mi, n)?.powi(2),
        (1.0 - r.powi(2 * n as i32)) / (1.0 - r * r),
        1e-10,
        true,
    ));
    out.push(OracleCheck::new(
        "chi2_quantile df=2 q=0.9",
        chi2_quantile(2, 0.9)?,
        -2.0 * 0.1f64.ln(),
        1e-7,
        false,
    ));
    out.push(OracleCheck::new(
        "chi2_quantile df=1 q=0.9",
        chi2_quantile(1, 0.9)?,
        1.644_853_626_951_472_2f64.powi(2),
        1e-7,
        false,
    ));
    out.push(OracleCheck::new(
        "chi2_quantile df=17 q=0.9",
        chi2_quantile(17, 0.9)?,
        24.769,
        5e-4,
        false,
    ));
    let g = KernelSpec::gaussian();
    out.push(OracleCheck::new(
        "gaussian Q11",
        g.q11(),
        0.5 / std::f64::consts::PI.sqrt(),
        1e-8,
        false,
    ));
    let seed = StreamSeed::new(0, 0);
    out.push(OracleCheck::new(
        "limit x^2 fr2",
        limit_additive(&AdditiveFn::Monomial(2), LimitVariant::Fr2, 0, seed)?.mean(),
        1.0,
        1e-8,
        false,
    ));
    out.push(OracleCheck::new(
        "limit x^4 fr2",
        limit_additive(&AdditiveFn::Monomial(4), LimitVariant::Fr2, 0, seed)?.mean(),
        3.0,
        1e-8,
        false,
    ));
    out.push(OracleCheck::new(
        "limit kernel fr2 gaussian",
        limit_kernel(LimitVariant::Fr2, &g, 0, seed)?.mean(),
        INV_SQRT_2PI,
        1e-10,
        false,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelfn::Kernel;

    fn value(l: Limit) -> f64 {
        match l {
            Limit::Value(v) => v,
            Limit::Sample(_) => panic!("expected a value"),
        }
    }

    fn seed() -> StreamSeed {
        StreamSeed::new(1, 2)
    }

    #[test]
    fn additive_limits_fr2() {
        let l = |f| value(limit_additive(&f, LimitVariant::Fr2, 0, seed()).unwrap());
        assert!((l(AdditiveFn::Constant(1.0)) - 1.0).abs() < 1e-10);
        assert!((l(AdditiveFn::Monomial(2)) - 1.0).abs() < 1e-10);
        assert!((l(AdditiveFn::Monomial(4)) - 3.0).abs() < 1e-9);
        assert!((l(AdditiveFn::Positive) - 0.5).abs() < 1e-10);
        // E|Z|^{-1/2} = 2^{-1/4} Gamma(1/4) / sqrt(pi)
        let oracle = 2f64.powf(-0.25) * 3.625_609_908_221_908 / std::f64::consts::PI.sqrt();
        assert!((l(AdditiveFn::AbsPow(-0.5)) - oracle).abs() < 1e-7);
    }

    #[test]
    fn non_integrable_function_errors() {
        assert!(limit_additive(&AdditiveFn::AbsPow(-1.0), LimitVariant::Mi, 0, seed()).is_err());
    }

    #[test]
    fn additive_linearity() {
        let a =
            value(limit_additive(&AdditiveFn::Monomial(2), LimitVariant::Fr2, 0, seed()).unwrap());
        let b = value(limit_additive(&AdditiveFn::Positive, LimitVariant::Fr2, 0, seed()).unwrap());
        let d = Density::standard();
        let (lo, hi) = d.window();
        let joint = integrate_with_breaks(
            |x| (2.0 * x * x - 3.0 * (x > 0.0) as u8 as f64) * d.eval(x),
            lo,
            hi,
            &[0.0],
            opts(),
        )
        .unwrap();
        assert!((joint - (2.0 * a - 3.0 * b)).abs() < 1e-9);
    }

    #[test]
    fn fr1_constant_is_one_per_draw() {
        let l = limit_additive(&AdditiveFn::Constant(1.0), LimitVariant::Fr1, 200, seed()).unwrap();
        match l {
            Limit::Sample(s) => assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-10)),
            Limit::Value(_) => panic!("FR1 limit should be random"),
        }
    }

    #[test]
    fn fr1_second_moment_closed_form() {
        let xs = draw_x_minus(50, seed());
        let l = limit_additive(&AdditiveFn::Monomial(2), LimitVariant::Fr1, 50, seed()).unwrap();
        let Limit::Sample(s) = l else { panic!() };
        for (v, xm) in s.iter().zip(&xs) {
            assert!((v - (0.5 + xm * xm)).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_limits() {
        let g = KernelSpec::gaussian();
        let v = value(limit_kernel(LimitVariant::Fr2, &g, 0, seed()).unwrap());
        assert!((v - 0.398_942_280_4).abs() < 1e-10);
        let draws = 1_000_000;
        let l = limit_kernel(LimitVariant::Fr1, &g, draws, seed()).unwrap();
        // E phi_{1/2}(X) with X ~ N(0, 1/2), as a nested quadrature
        let inner = Density {
            centre: 0.0,
            var: 0.5,
        };
        let oracle = integrate_with_breaks(
            |xm| Density::fr1(xm).eval(0.0) * inner.eval(xm),
            -12.0,
            12.0,
            &[0.0],
            opts(),
        )
        .unwrap();
        assert!((l.mean() - oracle).abs() < 3.0 * l.se());
        assert!((oracle - normal_pdf(0.0, 1.0)).abs() < 1e-10);
    }

    #[test]
    fn normal_density_approaches_rho_zero() {
        let target = normal_pdf(0.0, 1.0);
        let mut last = f64::INFINITY;
        for eps in [0.5f64, 0.1, 0.02] {
            let v = value(
                limit_additive(
                    &AdditiveFn::NormalDensity(eps * eps),
                    LimitVariant::Fr2,
                    0,
                    seed(),
                )
                .unwrap(),
            );
            let gap = (target - v).abs();
            assert!(gap < last);
            assert!((v - normal_pdf(0.0, 1.0 + eps * eps)).abs() < 1e-9);
            last = gap;
        }
    }

    #[test]
    fn ls_cov_examples() {
        let d = Density::standard();
        let c = ls_limit_cov(|u| u, &d, 2.0).unwrap();
        assert!((c[0][0] - 2.0).abs() < 1e-9 && (c[1][1] - 2.0).abs() < 1e-9);
        assert!(c[0][1].abs() < 1e-9);
        let c = ls_limit_cov(|u| (u > 0.0) as u8 as f64, &d, 1.0).unwrap();
        let want = [[2.0, -2.0], [-2.0, 4.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[i][j] - want[i][j]).abs() < 1e-8);
            }
        }
        assert!(ls_limit_cov(|_| 3.0, &d, 1.0).is_err());
    }

    #[test]
    fn additive_fn_parsing() {
        for s in ["const:2", "x^4", "abs:1.5", "pos", "normal:0.25"] {
            let f: AdditiveFn = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("normal:0".parse::<AdditiveFn>().is_err());
        assert!("sin".parse::<AdditiveFn>().is_err());
    }

    #[test]
    fn oracle_suite_passes() {
        for c in oracle_suite().unwrap() {
            assert!(c.passed(), "{}", c.to_csv_record());
        }
    }

    #[test]
    fn ks_distances() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[5.0, 6.0]), 1.0);
        assert!((ks_two_sample(&a, &[2.5]) - 0.5).abs() < 1e-15);
        let u = [0.125, 0.375, 0.625, 0.875];
        assert!((ks_one_sample(&u, |x| x) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn convergence_constant_is_exact() {
        let spec = ProcessSpec::mildly_integrated(0.5, vec![1.0]).unwrap();
        let f = Functional::Additive {
            f: AdditiveFn::Constant(2.0),
        };
        let r = convergence_check(&spec, &f, &[50, 100], 20, 0, 3).unwrap();
        for s in &r.stats {
            assert_eq!(s.mean, 2.0);
            assert_eq!(s.se, 0.0);
        }
        assert!((r.oracle_value.unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(r.to_csv().lines().count(), 3);
        let k = KernelSpec::new(Kernel::Epanechnikov).unwrap();
        let f = Functional::Kernel {
            kernel: k,
            x: 0.0,
            b: -0.1,
        };
        let r = convergence_check(&spec, &f, &[200], 30, 0, 3).unwrap();
        assert!((r.stats[0].se - r.stats[0].sd / 30f64.sqrt()).abs() < 1e-15);
    }
}
