//! Parametric OLS and kernel (NW, local linear, local-g) regression of
//! `y_t` on the lagged regressor `x_{t-1}`.
//!
//! All estimators take aligned slices: `y[i]` is paired with `x_lagged[i]`,
//! i.e. the caller has already applied the `t = 2..n` timing.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernelfn::KernelSpec;

/// Observations `x_1..x_n` and `y_1..y_n` of a predictive regression.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PredictiveSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two observations".into(),
            ));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `y_2..y_n`.
    pub fn response(&self) -> &[f64] {
        &self.y[1..]
    }

    /// `x_1..x_{n-1}`.
    pub fn lagged(&self) -> &[f64] {
        &self.x[..self.x.len() - 1]
    }

    /// `x_1..x_n`, the sample the evaluation quantiles are taken from.
    pub fn levels(&self) -> &[f64] {
        &self.x
    }
}

/// The parametric regression function `g` of `y = mu + gamma g(x) + u`.
#[derive(Clone)]
pub enum GFunction {
    Identity,
    Custom {
        name: String,
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl GFunction {
    pub fn custom<G, D>(name: impl Into<String>, g: G, derivative: D) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        GFunction::Custom {
            name: name.into(),
            g: Arc::new(g),
            derivative: Arc::new(derivative),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GFunction::Identity => x,
            GFunction::Custom { g, .. } => g(x),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            GFunction::Identity => 1.0,
            GFunction::Custom { derivative, .. } => derivative(x),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            GFunction::Identity => "identity",
            GFunction::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GFunction({})", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametricFit {
    pub mu_hat: f64,
    pub gamma_hat: f64,
    pub residuals: Vec<f64>,
    pub se_mu: f64,
    pub se_gamma: f64,
    /// t statistic for `mu = 0`.
    pub t_mu: f64,
    /// t statistic for `gamma = 0`.
    pub t_gamma: f64,
    pub sigma2_hat: f64,
}

impl ParametricFit {
    /// t statistics for `H0: mu = mu0, gamma = gamma0`.
    pub fn t_stats(&self, mu0: f64, gamma0: f64) -> (f64, f64) {
        (
            (self.mu_hat - mu0) / self.se_mu,
            (self.gamma_hat - gamma0) / self.se_gamma,
        )
    }

    #[inline]
    pub fn fitted(&self, g: &GFunction, x: f64) -> f64 {
        self.mu_hat + self.gamma_hat * g.eval(x)
    }
}

fn check_aligned(y: &[f64], x_lagged: &[f64]) -> Result<()> {
    if y.len() != x_lagged.len() {
        return Err(Error::InvalidArgument(format!(
            "y has {} values but x_lagged has {}",
            y.len(),
            x_lagged.len()
        )));
    }
    Ok(())
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(())
}

/// Least squares of `y` on `[1, g(x_lagged)]`.
pub fn ols_fit(y: &[f64], x_lagged: &[f64], g: &GFunction) -> Result<ParametricFit> {
    check_aligned(y, x_lagged)?;
    let n = y.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "OLS needs at least 3 observations, got {n}"
        )));
    }
    let gx: Vec<f64> = x_lagged.iter().map(|&x| g.eval(x)).collect();
    let nf = n as f64;
    let g_bar = gx.iter().sum::<f64>() / nf;
    let y_bar = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut sgg) = (0.0, 0.0, 0.0);
    for (&gi, &yi) in gx.iter().zip(y) {
        let dg = gi - g_bar;
        sxx += dg * dg;
        sxy += dg * (yi - y_bar);
        sgg += gi * gi;
    }
    // det of the Gram matrix [[n, sum g], [sum g, sum g^2]] is n * sxx
    let trace = nf + sgg;
    if !(nf * sxx > 1e-12 * trace * trace) {
        return Err(Error::SingularDesign(
            "g(x_lagged) is constant on the sample".into(),
        ));
    }
    let gamma_hat = sxy / sxx;
    let mu_hat = y_bar - gamma_hat * g_bar;
    let residuals: Vec<f64> = gx
        .iter()
        .zip(y)
        .map(|(&gi, &yi)| yi - mu_hat - gamma_hat * gi)
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2_hat = rss / (nf - 2.0);
    let se_gamma = (sigma2_hat / sxx).sqrt();
    let se_mu = (sigma2_hat * (1.0 / nf + g_bar * g_bar / sxx)).sqrt();
    Ok(ParametricFit {
        mu_hat,
        gamma_hat,
        se_mu,
        se_gamma,
        t_mu: mu_hat / se_mu,
        t_gamma: gamma_hat / se_gamma,
        residuals,
        sigma2_hat,
    })
}

/// Kernel-weighted sums for a local regression of `y` on `[1, z]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalSums {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub t0: f64,
    pub t1: f64,
}

impl LocalSums {
    #[inline]
    pub fn add(&mut self, w: f64, z: f64, y: f64) {
        let wz = w * z;
        self.s0 += w;
        self.s1 += wz;
        self.s2 += wz * z;
        self.t0 += w * y;
        self.t1 += wz * y;
    }

    /// Weighted LS intercept and slope.
    pub fn solve(&self, x0: f64) -> Result<(f64, f64)> {
        if !(self.s0 > 0.0) {
            return Err(Error::ZeroKernelMass { x: x0 });
        }
        let det = self.s0 * self.s2 - self.s1 * self.s1;
        if !(det > 1e-10 * self.s0 * self.s2) {
            return Err(Error::SingularDesign(format!(
                "local design at x = {x0} has fewer than two effective points"
            )));
        }
        let a = (self.s2 * self.t0 - self.s1 * self.t1) / det;
        let b = (self.s0 * self.t1 - self.s1 * self.t0) / det;
        Ok((a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalFit {
    pub m_value: f64,
    /// Local slope (`None` for Nadaraya–Watson).
    pub slope: Option<f64>,
    /// Kernel-weighted mean of squared residuals.
    pub sigma2_local: f64,
    pub kernel_mass: f64,
    /// Studentized `m_value` against zero.
    pub t_stat: f64,
}

/// `sqrt(mass / (sigma2 q)) * diff`.
///
/// An exact fit (`sigma2` at rounding level relative to `scale`) maps a
/// rounding-level `diff` to zero and any other `diff` to a signed infinity.
pub fn studentize(mass: f64, sigma2: f64, q: f64, diff: f64, scale: f64) -> f64 {
    let tiny = 1e-10 * scale.max(f64::MIN_POSITIVE);
    if sigma2 <= tiny * tiny {
        if diff.abs() <= 1e-8 * scale.max(1.0) {
            return 0.0;
        }
        return f64::INFINITY.copysign(diff);
    }
    (mass / (sigma2 * q)).sqrt() * diff
}

fn rms(y: &[f64]) -> f64 {
    (y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64).sqrt()
}

fn weights<'a>(
    x_lagged: &'a [f64],
    x0: f64,
    h: f64,
    k: &'a KernelSpec,
) -> impl Iterator<Item = f64> + 'a {
    x_lagged.iter().map(move |&x| k.eval((x - x0) / h))
}

/// Nadaraya–Watson estimate at `x0`.
pub fn nw(y: &[f64], x_lagged: &[f64], x0: f64, h: f64, k: &KernelSpec) -> Result<LocalFit> {
    check_aligned(y, x_lagged)?;
    check_bandwidth(h)?;
    let (mut mass, mut wy) = (0.0, 0.0);
    for (w, &yt) in weights(x_lagged, x0, h, k).zip(y) {
        mass += w;
        wy += w * yt;
    }
    if !(mass > 0.0) {
        return Err(Error::ZeroKernelMass { x: x0 });
    }
    let m = wy / mass;
    let sigma2 = weights(x_lagged, x0, h, k)
        .zip(y)
        .map(|(w, &yt)| w * (yt - m) * (yt - m))
        .sum::<f64>()
        / mass;
    Ok(LocalFit {
        m_value: m,
        slope: None,
        sigma2_local: sigma2,
        kernel_mass: mass,
        t_stat: studentize(mass, sigma2, k.roughness(), m, rms(y)),
    })
}

/// Local regression of `y` on `[1, g(x_{t-1}) - g(x0)]`.
pub fn local_g(
    y: &[f64],
    x_lagged: &[f64],
    g: &GFunction,
    x0: f64,
    h: f64,
    k: &KernelSpec,
) -> Result<LocalFit> {
    check_aligned(y, x_lagged)?;
    check_bandwidth(h)?;
    let g0 = g.eval(x0);
    let mut sums = LocalSums::default();
    for (w, (&x, &yt)) in weights(x_lagged, x0, h, k).zip(x_lagged.iter().zip(y)) {
        sums.add(w, g.eval(x) - g0, yt);
    }
    let (a, b) = sums.solve(x0)?;
    let sigma2 = weights(x_lagged, x0, h, k)
        .zip(x_lagged.iter().zip(y))
        .map(|(w, (&x, &yt))| {
            let e = yt - a - b * (g.eval(x) - g0);
            w * e * e
        })
        .sum::<f64>()
        / sums.s0;
    Ok(LocalFit {
        m_value: a,
        slope: Some(b),
        sigma2_local: sigma2,
        kernel_mass: sums.s0,
        t_stat: studentize(sums.s0, sigma2, k.q11(), a, rms(y)),
    })
}

/// Local linear estimate `(m(x0), m'(x0))`.
pub fn loclin(y: &[f64], x_lagged: &[f64], x0: f64, h: f64, k: &KernelSpec) -> Result<LocalFit> {
    local_g(y, x_lagged, &GFunction::Identity, x0, h, k)
}

/// Kernel-weighted mean of squared parametric residuals around `x0`.
pub fn local_sigma2(
    x_lagged: &[f64],
    fit: &ParametricFit,
    x0: f64,
    h: f64,
    k: &KernelSpec,
) -> Result<f64> {
    check_aligned(&fit.residuals, x_lagged)?;
    check_bandwidth(h)?;
    let (mut mass, mut acc) = (0.0, 0.0);
    for (w, e) in weights(x_lagged, x0, h, k).zip(&fit.residuals) {
        mass += w;
        acc += w * e * e;
    }
    if !(mass > 0.0) {
        return Err(Error::ZeroKernelMass { x: x0 });
    }
    Ok(acc / mass)
}

/// Nonparametric t statistic for `H0: m(x0) = m0` from the local linear fit.
pub fn np_tstat_m0(
    y: &[f64],
    x_lagged: &[f64],
    x0: f64,
    h: f64,
    k: &KernelSpec,
    m0: f64,
) -> Result<f64> {
    let fit = loclin(y, x_lagged, x0, h, k)?;
    Ok(studentize(
        fit.kernel_mass,
        fit.sigma2_local,
        k.q11(),
        fit.m_value - m0,
        rms(y),
    ))
}

/// Per-point statistic comparing the local-g fit with the parametric fit.
pub fn np_tstat_fit(
    y: &[f64],
    x_lagged: &[f64],
    g: &GFunction,
    x0: f64,
    h: f64,
    k: &KernelSpec,
    fit: &ParametricFit,
) -> Result<f64> {
    let local = local_g(y, x_lagged, g, x0, h, k)?;
    let sigma2 = local_sigma2(x_lagged, fit, x0, h, k)?;
    Ok(studentize(
        local.kernel_mass,
        sigma2,
        k.q11(),
        local.m_value - fit.fitted(g, x0),
        rms(y),
    ))
}

/// Single-pass evaluation of the per-point statistic, used by the test
/// statistic where the same sample is visited at many points.
#[allow(clippy::too_many_arguments)]
pub(crate) fn np_tstat_fused(
    y: &[f64],
    x_lagged: &[f64],
    gx: &[f64],
    g: &GFunction,
    x0: f64,
    h: f64,
    k: &KernelSpec,
    fit: &ParametricFit,
    y_scale: f64,
) -> Result<f64> {
    let g0 = g.eval(x0);
    let inv_h = 1.0 / h;
    let mut sums = LocalSums::default();
    let mut resid2 = 0.0;
    for i in 0..y.len() {
        let w = k.eval((x_lagged[i] - x0) * inv_h);
        sums.add(w, gx[i] - g0, y[i]);
        let e = fit.residuals[i];
        resid2 += w * e * e;
    }
    let (a, _) = sums.solve(x0)?;
    Ok(studentize(
        sums.s0,
        resid2 / sums.s0,
        k.q11(),
        a - fit.fitted(g, x0),
        y_scale,
    ))
}

pub(crate) fn y_scale(y: &[f64]) -> f64 {
    rms(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelfn::Kernel;

    fn uniform() -> KernelSpec {
        KernelSpec::new(Kernel::Uniform).unwrap()
    }

    #[test]
    fn ols_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 + 3.0 * x).collect();
        let fit = ols_fit(&y, &x, &GFunction::Identity).unwrap();
        assert!((fit.mu_hat - 2.0).abs() < 1e-12);
        assert!((fit.gamma_hat - 3.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn ols_hand_case() {
        let fit = ols_fit(&[1.0, 2.0, 4.0], &[0.0, 1.0, 2.0], &GFunction::Identity).unwrap();
        assert!((fit.gamma_hat - 1.5).abs() < 1e-12);
        assert!((fit.mu_hat - 0.833_333_333_333_333_4).abs() < 1e-12);
        // RSS = 1/6, sigma2 = 1/6, se_gamma = sqrt(1/12)
        assert!((fit.se_gamma - (1.0f64 / 12.0).sqrt()).abs() < 1e-12);
        let (_, tg) = fit.t_stats(0.0, 1.5);
        assert!(tg.abs() < 1e-12);
    }

    #[test]
    fn ols_singular() {
        let err = ols_fit(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], &GFunction::Identity).unwrap_err();
        assert!(matches!(err, Error::SingularDesign(_)));
        assert!(ols_fit(&[1.0, 2.0], &[1.0, 2.0], &GFunction::Identity).is_err());
    }

    #[test]
    fn nw_examples() {
        let k = KernelSpec::gaussian();
        let fit = nw(&[4.0, 4.0, 4.0], &[0.1, -2.0, 3.0], 0.5, 0.7, &k).unwrap();
        assert!((fit.m_value - 4.0).abs() < 1e-14);
        let u = uniform();
        let fit = nw(&[7.0, 1.0, 9.0], &[0.0, 5.0, -5.0], 0.0, 1.0, &u).unwrap();
        assert_eq!(fit.m_value, 7.0);
        let fit = nw(&[1.0, 3.0], &[0.0, 0.1], 0.0, 1.0, &u).unwrap();
        assert!((fit.m_value - 2.0).abs() < 1e-15);
        assert!(matches!(
            nw(&[1.0], &[5.0], 0.0, 1.0, &u),
            Err(Error::ZeroKernelMass { .. })
        ));
    }

    #[test]
    fn loclin_examples() {
        let u = uniform();
        let fit = loclin(&[0.0, 1.0, 2.0], &[-1.0, 0.0, 1.0], 0.0, 10.0, &u).unwrap();
        assert!((fit.m_value - 1.0).abs() < 1e-14);
        assert!((fit.slope.unwrap() - 1.0).abs() < 1e-14);

        let k = KernelSpec::gaussian();
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.77).sin() * 3.0).collect();
        let y: Vec<f64> = x.iter().map(|x| -1.0 + 0.5 * x).collect();
        let fit = loclin(&y, &x, 0.4, 0.3, &k).unwrap();
        assert!((fit.m_value - (-1.0 + 0.2)).abs() < 1e-12);
        assert!((fit.slope.unwrap() - 0.5).abs() < 1e-12);

        // one effective point
        assert!(matches!(
            loclin(&[1.0, 2.0], &[0.0, 9.0], 0.0, 1.0, &u),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn local_g_examples() {
        let u = uniform();
        let sq = GFunction::custom("square", |x| x * x, |x| 2.0 * x);
        let fit = local_g(&[1.0, 4.0], &[1.0, 2.0], &sq, 1.0, 100.0, &u).unwrap();
        assert!((fit.m_value - 1.0).abs() < 1e-12);

        let k = KernelSpec::gaussian();
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos() * 2.0).collect();
        let y: Vec<f64> = x.iter().map(|x| 0.5 + 2.0 * x * x).collect();
        for h in [0.05, 0.5, 5.0] {
            let fit = local_g(&y, &x, &sq, 0.7, h, &k).unwrap();
            assert!((fit.m_value - (0.5 + 2.0 * 0.49)).abs() < 1e-10, "h = {h}");
        }
    }

    #[test]
    fn local_sigma2_examples() {
        let u = uniform();
        let fit = ParametricFit {
            mu_hat: 0.0,
            gamma_hat: 0.0,
            residuals: vec![1.0, -1.0],
            se_mu: 1.0,
            se_gamma: 1.0,
            t_mu: 0.0,
            t_gamma: 0.0,
            sigma2_hat: 1.0,
        };
        assert_eq!(local_sigma2(&[0.0, 0.1], &fit, 0.0, 1.0, &u).unwrap(), 1.0);
        let fit = ParametricFit {
            residuals: vec![0.3; 4],
            ..fit
        };
        let s = local_sigma2(&[0.0, 0.1, -0.2, 0.05], &fit, 0.0, 1.0, &u).unwrap();
        assert!((s - 0.09).abs() < 1e-15);
    }

    #[test]
    fn studentize_arithmetic() {
        // sqrt(4 / (1 * 0.25)) * 0.5
        assert!((studentize(4.0, 1.0, 0.25, 0.5, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(studentize(4.0, 1.0, 0.25, 0.0, 1.0), 0.0);
        assert_eq!(studentize(4.0, 0.0, 0.25, 1e-14, 1.0), 0.0);
        assert_eq!(studentize(4.0, 0.0, 0.25, -1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn np_tstat_identical_fits_is_zero() {
        let k = KernelSpec::gaussian();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.61).sin() * 2.0).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 - 0.3 * x).collect();
        let fit = ols_fit(&y, &x, &GFunction::Identity).unwrap();
        for x0 in [-1.0, 0.0, 0.9] {
            let t = np_tstat_fit(&y, &x, &GFunction::Identity, x0, 0.4, &k, &fit).unwrap();
            assert!(t.abs() < 1e-8);
        }
        let t = np_tstat_m0(&y, &x, 0.0, 0.4, &k, 1.0).unwrap();
        assert!(t.abs() < 1e-8);
    }

    #[test]
    fn np_tstat_composes_components() {
        let k = KernelSpec::gaussian();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 1.5).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, x)| 0.2 + x + 0.3 * ((i * 7 % 11) as f64 - 5.0) / 5.0)
            .collect();
        let g = GFunction::Identity;
        let fit = ols_fit(&y, &x, &g).unwrap();
        let x0 = 0.3;
        let local = local_g(&y, &x, &g, x0, 0.5, &k).unwrap();
        let s2 = local_sigma2(&x, &fit, x0, 0.5, &k).unwrap();
        let expected =
            (local.kernel_mass / (s2 * k.q11())).sqrt() * (local.m_value - fit.fitted(&g, x0));
        let t = np_tstat_fit(&y, &x, &g, x0, 0.5, &k, &fit).unwrap();
        assert!((t - expected).abs() < 1e-12);
        let gx: Vec<f64> = x.clone();
        let fused = np_tstat_fused(&y, &x, &gx, &g, x0, 0.5, &k, &fit, rms(&y)).unwrap();
        assert!((t - fused).abs() < 1e-10);
    }
}
