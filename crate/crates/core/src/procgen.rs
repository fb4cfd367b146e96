//! Innovations and sample paths for fractional (type I / type II),
//! mildly integrated and nearly integrated processes, together with the
//! exact finite-sample standard deviation of the terminal observation.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamSeed;

/// Default type I truncation, as a multiple of the sample size.
pub const DEFAULT_TRUNCATION_PER_OBS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessKind {
    #[serde(rename = "fr2")]
    FractionalTypeII,
    #[serde(rename = "fr1")]
    FractionalTypeI,
    #[serde(rename = "mi")]
    MildlyIntegrated,
    #[serde(rename = "ni")]
    NearlyIntegrated,
}

impl ProcessKind {
    pub fn tag(self) -> &'static str {
        match self {
            ProcessKind::FractionalTypeII => "fr2",
            ProcessKind::FractionalTypeI => "fr1",
            ProcessKind::MildlyIntegrated => "mi",
            ProcessKind::NearlyIntegrated => "ni",
        }
    }
}

/// Generative contract for a sample path.
///
/// Serialized as `{"kind", "d", "alpha_kappa", "ma", "trunc"}`; fields that
/// do not apply to a kind may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProcessSpec", into = "RawProcessSpec")]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    /// Memory order (fractional kinds only).
    pub d: f64,
    /// Exponent of `kappa_n = n^alpha_kappa` (MI/NI only; NI is 1).
    pub alpha_kappa: f64,
    /// Finite MA filter `c_0..c_q` applied to the innovations.
    pub ma_coeffs: Vec<f64>,
    /// Retained pre-sample lags for type I; `None` means `50 n`.
    pub presample_truncation: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawProcessSpec {
    kind: ProcessKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trunc: Option<usize>,
}

impl TryFrom<RawProcessSpec> for ProcessSpec {
    type Error = Error;

    fn try_from(raw: RawProcessSpec) -> Result<Self> {
        let ma = raw.ma.unwrap_or_else(|| vec![1.0]);
        let spec = match raw.kind {
            ProcessKind::FractionalTypeII => ProcessSpec {
                kind: raw.kind,
                d: raw
                    .d
                    .ok_or_else(|| Error::InvalidSpec("fr2 requires `d`".into()))?,
                alpha_kappa: 0.0,
                ma_coeffs: ma,
                presample_truncation: None,
            },
            ProcessKind::FractionalTypeI => ProcessSpec {
                kind: raw.kind,
                d: raw.d.unwrap_or(0.5),
                alpha_kappa: 0.0,
                ma_coeffs: vec![1.0],
                presample_truncation: raw.trunc,
            },
            ProcessKind::MildlyIntegrated => ProcessSpec {
                kind: raw.kind,
                d: 0.0,
                alpha_kappa: raw
                    .alpha_kappa
                    .ok_or_else(|| Error::InvalidSpec("mi requires `alpha_kappa`".into()))?,
                ma_coeffs: ma,
                presample_truncation: None,
            },
            ProcessKind::NearlyIntegrated => ProcessSpec {
                kind: raw.kind,
                d: 0.0,
                alpha_kappa: raw.alpha_kappa.unwrap_or(1.0),
                ma_coeffs: ma,
                presample_truncation: None,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ProcessSpec> for RawProcessSpec {
    fn from(s: ProcessSpec) -> Self {
        let fractional = matches!(
            s.kind,
            ProcessKind::FractionalTypeII | ProcessKind::FractionalTypeI
        );
        RawProcessSpec {
            kind: s.kind,
            d: fractional.then_some(s.d),
            alpha_kappa: (!fractional).then_some(s.alpha_kappa),
            ma: (s.kind != ProcessKind::FractionalTypeI).then_some(s.ma_coeffs),
            trunc: s.presample_truncation,
        }
    }
}

impl ProcessSpec {
    pub fn fractional_type2(d: f64, ma_coeffs: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: ProcessKind::FractionalTypeII,
            d,
            alpha_kappa: 0.0,
            ma_coeffs,
            presample_truncation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fractional_type1(presample_truncation: Option<usize>) -> Result<Self> {
        let spec = Self {
            kind: ProcessKind::FractionalTypeI,
            d: 0.5,
            alpha_kappa: 0.0,
            ma_coeffs: vec![1.0],
            presample_truncation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mildly_integrated(alpha_kappa: f64, ma_coeffs: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: ProcessKind::MildlyIntegrated,
            d: 0.0,
            alpha_kappa,
            ma_coeffs,
            presample_truncation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn nearly_integrated(ma_coeffs: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: ProcessKind::NearlyIntegrated,
            d: 0.0,
            alpha_kappa: 1.0,
            ma_coeffs,
            presample_truncation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.ma_coeffs.is_empty() || self.ma_coeffs.iter().any(|c| !c.is_finite()) {
            return bad("MA coefficients must be a non-empty finite sequence".into());
        }
        let ma_sum: f64 = self.ma_coeffs.iter().sum();
        match self.kind {
            ProcessKind::FractionalTypeII => {
                if !(self.d > -0.5 && self.d < 1.5) {
                    return bad(format!("fr2 requires d in (-0.5, 1.5), got {}", self.d));
                }
                if ma_sum == 0.0 {
                    return bad("MA coefficients must not sum to zero".into());
                }
            }
            ProcessKind::FractionalTypeI => {
                if self.d != 0.5 {
                    return bad(format!("fr1 is defined for d = 1/2 only, got {}", self.d));
                }
                if self.ma_coeffs != [1.0] {
                    return bad("fr1 does not take an MA filter".into());
                }
                if self.presample_truncation == Some(0) {
                    return bad("fr1 truncation must be at least 1".into());
                }
            }
            ProcessKind::MildlyIntegrated => {
                if !(self.alpha_kappa > 0.0 && self.alpha_kappa < 1.0) {
                    return bad(format!(
                        "mi requires alpha_kappa in (0, 1), got {}",
                        self.alpha_kappa
                    ));
                }
                if ma_sum == 0.0 {
                    return bad("MA coefficients must not sum to zero".into());
                }
            }
            ProcessKind::NearlyIntegrated => {
                if self.alpha_kappa != 1.0 {
                    return bad(format!(
                        "ni requires alpha_kappa = 1, got {}",
                        self.alpha_kappa
                    ));
                }
                if ma_sum == 0.0 {
                    return bad("MA coefficients must not sum to zero".into());
                }
            }
        }
        Ok(())
    }

    /// MA order `q`.
    pub fn ma_order(&self) -> usize {
        self.ma_coeffs.len() - 1
    }

    /// Type I truncation for a sample of size `n`.
    pub fn truncation(&self, n: usize) -> usize {
        self.presample_truncation
            .unwrap_or(DEFAULT_TRUNCATION_PER_OBS * n.max(1))
    }

    /// Number of pre-sample innovations the simulator consumes.
    pub fn presample_len(&self, n: usize) -> usize {
        match self.kind {
            ProcessKind::FractionalTypeI => self.truncation(n),
            _ => self.ma_order(),
        }
    }

    /// `kappa_n = n^alpha_kappa` (autoregressive kinds).
    pub fn kappa(&self, n: usize) -> f64 {
        (n as f64).powf(self.alpha_kappa)
    }

    /// Regimes outside weak nonstationarity (d >= 1, or near integration).
    pub fn strongly_dependent(&self) -> bool {
        match self.kind {
            ProcessKind::FractionalTypeII => self.d >= 1.0,
            ProcessKind::NearlyIntegrated => true,
            ProcessKind::MildlyIntegrated => self.alpha_kappa >= 1.0,
            ProcessKind::FractionalTypeI => false,
        }
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self.kind {
            ProcessKind::FractionalTypeII => format!("fr2 d={}", self.d),
            ProcessKind::FractionalTypeI => "fr1 d=0.5".to_string(),
            ProcessKind::MildlyIntegrated => format!("mi alpha={}", self.alpha_kappa),
            ProcessKind::NearlyIntegrated => "ni alpha=1".to_string(),
        }
    }

    /// Simulates a path of length `n` from the given innovations.
    pub fn simulate(&self, n: usize, xi: &Innovations) -> Result<SamplePath> {
        match self.kind {
            ProcessKind::FractionalTypeII => simulate_type2(self, n, xi),
            ProcessKind::FractionalTypeI => simulate_type1(self, n, xi),
            ProcessKind::MildlyIntegrated | ProcessKind::NearlyIntegrated => {
                simulate_mi(self, n, xi)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub rho: f64,
    #[serde(default = "one")]
    pub sigma_u: f64,
    #[serde(default = "one")]
    pub sigma_xi: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InnovationSpec {
    fn default() -> Self {
        Self {
            rho: 0.0,
            sigma_u: 1.0,
            sigma_xi: 1.0,
        }
    }
}

impl InnovationSpec {
    pub fn new(rho: f64) -> Result<Self> {
        let spec = Self {
            rho,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "correlation must satisfy |rho| < 1, got {}",
                self.rho
            )));
        }
        if !(self.sigma_u > 0.0 && self.sigma_xi > 0.0) {
            return Err(Error::InvalidArgument(
                "standard deviations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How pre-sample innovations are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresampleMode {
    #[default]
    Random,
    Zero,
}

/// Process innovations `xi`, pre-sample values first.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovations {
    values: Vec<f64>,
    presample: usize,
    /// Standard deviation the innovations were drawn with.
    pub sigma: f64,
}

impl Innovations {
    /// `presample` leading values are `xi_{1-presample}..xi_0`; the rest are `xi_1..xi_n`.
    pub fn new(values: Vec<f64>, presample: usize) -> Result<Self> {
        if presample > values.len() {
            return Err(Error::InvalidArgument(format!(
                "presample length {presample} exceeds {} values",
                values.len()
            )));
        }
        Ok(Self {
            values,
            presample,
            sigma: 1.0,
        })
    }

    /// In-sample values with a zero pre-sample of the given length.
    pub fn with_zero_presample(in_sample: &[f64], presample: usize) -> Self {
        let mut values = vec![0.0; presample];
        values.extend_from_slice(in_sample);
        Self {
            values,
            presample,
            sigma: 1.0,
        }
    }

    pub fn presample(&self) -> usize {
        self.presample
    }

    /// Number of in-sample innovations.
    pub fn len(&self) -> usize {
        self.values.len() - self.presample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> &[f64] {
        &self.values
    }

    pub fn in_sample(&self) -> &[f64] {
        &self.values[self.presample..]
    }

    /// The last `k` pre-sample values followed by the in-sample values.
    fn tail_with_presample(&self, k: usize) -> Result<&[f64]> {
        if k > self.presample {
            return Err(Error::InsufficientPresample {
                needed: k,
                got: self.presample,
            });
        }
        Ok(&self.values[self.presample - k..])
    }
}

/// A simulated series with its exact standardizer attached.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub beta_n: f64,
    pub spec: ProcessSpec,
    /// Type I truncation used, if any.
    pub truncation: Option<usize>,
}

impl SamplePath {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Builds a path from raw values and a user-supplied standardizer.
    pub fn from_values(values: Vec<f64>, beta_n: f64, spec: ProcessSpec) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty path".into()));
        }
        if !(beta_n > 0.0 && beta_n.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "standardizer must be positive, got {beta_n}"
            )));
        }
        Ok(Self {
            values,
            beta_n,
            spec,
            truncation: None,
        })
    }

    /// CSV with header `t,x`.
    pub fn to_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "x"])?;
        for (t, x) in self.values.iter().enumerate() {
            wtr.write_record([(t + 1).to_string(), x.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Coefficients `psi_0..psi_J` of `(1 - L)^{-d}`.
pub fn frac_coeffs(d: f64, j_max: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(j_max + 1);
    psi.push(1.0);
    for j in 1..=j_max {
        let prev = psi[j - 1];
        psi.push(prev * (j as f64 - 1.0 + d) / j as f64);
    }
    psi
}

/// `v_t = sum_{i=0}^q c_i xi_{t-i}` for the in-sample `t`.
pub fn apply_ma(xi: &Innovations, c: &[f64]) -> Result<Vec<f64>> {
    if c.is_empty() {
        return Err(Error::InvalidArgument("empty MA filter".into()));
    }
    let q = c.len() - 1;
    let data = xi.tail_with_presample(q)?;
    let v = (0..xi.len())
        .map(|t| {
            // data[t + q] is xi_{t+1}
            c.iter()
                .enumerate()
                .map(|(i, ci)| ci * data[t + q - i])
                .sum()
        })
        .collect();
    Ok(v)
}

fn check_length(n: usize, xi: &Innovations) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    if xi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} in-sample innovations, got {}",
            xi.len()
        )));
    }
    Ok(())
}

fn running_sum(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Type II fractional path `x_t = sum_{j<t} psi_j v_{t-j}` with `x_0 = 0`.
pub fn simulate_type2(spec: &ProcessSpec, n: usize, xi: &Innovations) -> Result<SamplePath> {
    if spec.kind != ProcessKind::FractionalTypeII {
        return Err(Error::InvalidSpec(format!(
            "simulate_type2 called with kind {}",
            spec.kind.tag()
        )));
    }
    check_length(n, xi)?;
    let v = apply_ma(xi, &spec.ma_coeffs)?;
    let values = if spec.d == 1.0 {
        // (1 - L)^{-1} is plain cumulation
        running_sum(&v)
    } else {
        let psi = frac_coeffs(spec.d, n - 1);
        let psi_rev: Vec<f64> = psi.iter().rev().copied().collect();
        // x_t = sum_{s=1}^t psi_{t-s} v_s; psi_rev[n-t..] holds psi_{t-1}..psi_0
        (1..=n).map(|t| dot(&psi_rev[n - t..], &v[..t])).collect()
    };
    Ok(SamplePath {
        values,
        beta_n: xi.sigma * exact_sd(spec, n)?,
        spec: spec.clone(),
        truncation: None,
    })
}

/// Above this many multiply-adds the type I filter switches to FFT convolution.
const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 22;

/// Full linear convolution via FFT.
fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..len].iter().map(|z| z.re * scale).collect()
}

/// Type I path: partial sums of `v_t = sum_{i=0}^M c_i xi_{t-i}` with
/// `c = frac_coeffs(-1/2, M)` and `M` retained pre-sample innovations.
pub fn simulate_type1(spec: &ProcessSpec, n: usize, xi: &Innovations) -> Result<SamplePath> {
    if spec.kind != ProcessKind::FractionalTypeI {
        return Err(Error::InvalidSpec(format!(
            "simulate_type1 called with kind {}",
            spec.kind.tag()
        )));
    }
    check_length(n, xi)?;
    let m = spec.truncation(n);
    if m < 1 {
        return Err(Error::InvalidSpec(
            "fr1 truncation must be at least 1".into(),
        ));
    }
    let data = xi.tail_with_presample(m)?;
    let c = frac_coeffs(-0.5, m);
    let v: Vec<f64> = if n.saturating_mul(m + 1) <= DIRECT_CONVOLUTION_LIMIT {
        (0..n)
            .map(|t| {
                // data[t + m] is xi_{t+1}
                c.iter()
                    .enumerate()
                    .map(|(i, ci)| ci * data[t + m - i])
                    .sum()
            })
            .collect()
    } else {
        let conv = fft_convolve(&c, data);
        conv[m..m + n].to_vec()
    };
    Ok(SamplePath {
        values: running_sum(&v),
        beta_n: xi.sigma * exact_sd(spec, n)?,
        spec: spec.clone(),
        truncation: Some(m),
    })
}

/// Autoregressive array `x_t = (1 - 1/kappa_n) x_{t-1} + v_t`, `x_0 = 0`.
pub fn simulate_mi(spec: &ProcessSpec, n: usize, xi: &Innovations) -> Result<SamplePath> {
    if !matches!(
        spec.kind,
        ProcessKind::MildlyIntegrated | ProcessKind::NearlyIntegrated
    ) {
        return Err(Error::InvalidSpec(format!(
            "simulate_mi called with kind {}",
            spec.kind.tag()
        )));
    }
    check_length(n, xi)?;
    let root = ar_root(spec, n)?;
    let v = apply_ma(xi, &spec.ma_coeffs)?;
    let mut x = 0.0;
    let values = v
        .iter()
        .map(|&vt| {
            x = root * x + vt;
            x
        })
        .collect();
    Ok(SamplePath {
        values,
        beta_n: xi.sigma * exact_sd(spec, n)?,
        spec: spec.clone(),
        truncation: None,
    })
}

/// Autoregressive root `1 - 1/kappa_n`.
pub fn ar_root(spec: &ProcessSpec, n: usize) -> Result<f64> {
    let kappa = spec.kappa(n);
    if !(kappa > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "kappa_n = {kappa} must exceed 1 (n = {n})"
        )));
    }
    Ok(1.0 - 1.0 / kappa)
}

/// Convolution coefficients `a_k = sum_j phi_j c_{k-j}` (`j <= n-1`) of `x_n`
/// on `xi_{n-k}`.
fn terminal_coefficients(phi: &[f64], c: &[f64]) -> Vec<f64> {
    let q = c.len() - 1;
    let len = phi.len() + q;
    (0..len)
        .map(|k| {
            let lo = k.saturating_sub(q);
            let hi = k.min(phi.len() - 1);
            (lo..=hi).map(|j| phi[j] * c[k - j]).sum()
        })
        .collect()
}

/// Exact standard deviation of `x_n` for unit-variance innovations.
pub fn exact_sd(spec: &ProcessSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    let var: f64 = match spec.kind {
        ProcessKind::FractionalTypeII => {
            let phi = frac_coeffs(spec.d, n - 1);
            terminal_coefficients(&phi, &spec.ma_coeffs)
                .iter()
                .map(|a| a * a)
                .sum()
        }
        ProcessKind::MildlyIntegrated | ProcessKind::NearlyIntegrated => {
            let root = ar_root(spec, n)?;
            let phi: Vec<f64> = std::iter::successors(Some(1.0), |p| Some(p * root))
                .take(n)
                .collect();
            terminal_coefficients(&phi, &spec.ma_coeffs)
                .iter()
                .map(|a| a * a)
                .sum()
        }
        ProcessKind::FractionalTypeI => {
            let m = spec.truncation(n);
            let c = frac_coeffs(-0.5, m);
            // cum[i] = c_0 + ... + c_{i-1}
            let mut cum = Vec::with_capacity(m + 2);
            cum.push(0.0);
            for ci in &c {
                cum.push(cum.last().unwrap() + ci);
            }
            // coefficient of xi_{n-j}: sum of c_i over i in [max(0, j-n+1), min(M, j)]
            (0..n + m)
                .map(|j| {
                    let lo = j.saturating_sub(n - 1);
                    let hi = j.min(m);
                    let a = cum[hi + 1] - cum[lo];
                    a * a
                })
                .sum()
        }
    };
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::Degenerate(format!("variance of x_n is {var}")));
    }
    Ok(var.sqrt())
}

/// Draws `(u_t, xi_t)`, `t = 1..n`, i.i.d. bivariate normal, plus
/// `presample` extra `xi` values (zeros under [`PresampleMode::Zero`]).
pub fn correlated_innovations(
    innov: &InnovationSpec,
    n: usize,
    presample: usize,
    mode: PresampleMode,
    seed: StreamSeed,
) -> Result<(Vec<f64>, Innovations)> {
    innov.validate()?;
    let mut rng = seed.rng();
    let mut xi = Vec::with_capacity(presample + n);
    match mode {
        PresampleMode::Random => {
            for _ in 0..presample {
                let z: f64 = rng.sample(StandardNormal);
                xi.push(innov.sigma_xi * z);
            }
        }
        PresampleMode::Zero => xi.resize(presample, 0.0),
    }
    let mut u = Vec::with_capacity(n);
    let tail = (1.0 - innov.rho * innov.rho).sqrt();
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        xi.push(innov.sigma_xi * z1);
        u.push(innov.sigma_u * (innov.rho * z1 + tail * z2));
    }
    Ok((
        u,
        Innovations {
            values: xi,
            presample,
            sigma: innov.sigma_xi,
        },
    ))
}

/// Simulates a path together with regression errors.
pub fn draw_path(
    spec: &ProcessSpec,
    innov: &InnovationSpec,
    n: usize,
    mode: PresampleMode,
    seed: StreamSeed,
) -> Result<(SamplePath, Vec<f64>)> {
    let (u, xi) = correlated_innovations(innov, n, spec.presample_len(n), mode, seed)?;
    let path = spec.simulate(n, &xi)?;
    Ok((path, u))
}
