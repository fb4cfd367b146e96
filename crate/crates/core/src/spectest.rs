//! The persistence-robust specification test: evaluation points, the
//! sum-of-squared-t statistic with its chi-square calibration, and the
//! kernel-weighted residual U-statistic it is compared against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::kernelfn::KernelSpec;
use crate::regress::{self, GFunction, ParametricFit, PredictiveSample};

pub const DEFAULT_ALPHA: f64 = 0.1;
const LOWER_LEVEL: f64 = 0.1;
const UPPER_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalPoints {
    pub points: Vec<f64>,
    pub quantile_levels: Vec<f64>,
    /// False when two evaluation points coincide.
    pub distinct: bool,
}

/// Quantile levels `0.1 + k 0.8 / (p - 1)`; the median when `p = 1`.
pub fn quantile_levels(p: usize) -> Vec<f64> {
    match p {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..p)
            .map(|k| LOWER_LEVEL + k as f64 * (UPPER_LEVEL - LOWER_LEVEL) / (p - 1) as f64)
            .collect(),
    }
}

/// Order statistic `x_(ceil(q n))` of an already sorted sample.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    // guard against q * n landing a hair above an integer
    let rank = (q * n as f64 - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

pub fn eval_points(sample: &[f64], p: usize) -> Result<EvalPoints> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if p == 0 || sample.len() < p {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= sample size, got p = {p} with {} values",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "sample contains non-finite values".into(),
        ));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let levels = quantile_levels(p);
    let points: Vec<f64> = levels
        .iter()
        .map(|&q| empirical_quantile(&sorted, q))
        .collect();
    let distinct = points.windows(2).all(|w| w[0] < w[1]);
    Ok(EvalPoints {
        points,
        quantile_levels: levels,
        distinct,
    })
}

fn check_df(df: usize) -> Result<()> {
    if df == 0 {
        return Err(Error::InvalidArgument("chi-square needs df >= 1".into()));
    }
    Ok(())
}

pub fn chi2_cdf(df: usize, x: f64) -> Result<f64> {
    check_df(df)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_lr(df as f64 / 2.0, x / 2.0))
}

/// Upper tail `P(chi2_df > x)`.
pub fn chi2_sf(df: usize, x: f64) -> Result<f64> {
    check_df(df)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0))
}

/// Inverse chi-square CDF: the `x` with `P(chi2_df <= x) = prob`.
pub fn chi2_quantile(df: usize, prob: f64) -> Result<f64> {
    check_df(df)?;
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must be in (0, 1), got {prob}"
        )));
    }
    let k = df as f64;
    let upper_tail = prob > 0.5;
    // residual in whichever tail is smaller, for accuracy near 1
    let resid = |x: f64| -> f64 {
        if upper_tail {
            (1.0 - prob) - gamma_ur(k / 2.0, x / 2.0)
        } else {
            gamma_lr(k / 2.0, x / 2.0) - prob
        }
    };
    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while resid(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let ln_norm = (k / 2.0) * std::f64::consts::LN_2 + statrs::function::gamma::ln_gamma(k / 2.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = resid(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((k / 2.0 - 1.0) * x.ln() - x / 2.0 - ln_norm).exp();
        if density > 0.0 {
            let step = r / density;
            if step.abs() <= 1e-15 * x.max(1.0) {
                return Ok(x - step);
            }
            let newton = x - step;
            if newton > lo && newton < hi {
                x = newton;
                continue;
            }
        }
        x = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(x)
}

pub fn normal_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must be in (0, 1), got {prob}"
        )));
    }
    Ok(Normal::standard().inverse_cdf(prob))
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecTestResult {
    pub f_tilde: f64,
    #[serde(rename = "t")]
    pub per_point_t: Vec<f64>,
    pub p: usize,
    #[serde(rename = "crit")]
    pub critical_value: f64,
    #[serde(rename = "pvalue")]
    pub p_value: f64,
    pub reject: bool,
}

impl SpecTestResult {
    pub fn from_t(per_point_t: Vec<f64>, alpha: f64) -> Result<Self> {
        let p = per_point_t.len();
        let f_tilde: f64 = per_point_t.iter().map(|t| t * t).sum();
        let critical_value = chi2_quantile(p, 1.0 - alpha)?;
        Ok(Self {
            f_tilde,
            p,
            critical_value,
            p_value: chi2_sf(p, f_tilde)?,
            reject: f_tilde > critical_value,
            per_point_t,
        })
    }

    pub const CSV_HEADER: &'static str = "f_tilde,p,crit,pvalue,reject,t";

    /// One CSV record; the per-point statistics are `;`-separated.
    pub fn to_csv_record(&self) -> String {
        let t: Vec<String> = self.per_point_t.iter().map(|t| t.to_string()).collect();
        format!(
            "{},{},{},{},{},{}",
            self.f_tilde,
            self.p,
            self.critical_value,
            self.p_value,
            self.reject,
            t.join(";")
        )
    }
}

/// Settings of the specification test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTildeConfig {
    pub kernel: KernelSpec,
    pub h: f64,
    pub p: usize,
    pub alpha: f64,
}

impl FTildeConfig {
    pub fn new(h: f64, p: usize) -> Self {
        Self {
            kernel: KernelSpec::gaussian(),
            h,
            p,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Per-point statistics at the given evaluation points, reusing an OLS fit.
pub fn per_point_statistics(
    y: &[f64],
    x_lagged: &[f64],
    g: &GFunction,
    fit: &ParametricFit,
    points: &[f64],
    h: f64,
    k: &KernelSpec,
) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let gx: Vec<f64> = x_lagged.iter().map(|&x| g.eval(x)).collect();
    let scale = regress::y_scale(y);
    points
        .iter()
        .enumerate()
        .map(|(index, &x0)| {
            regress::np_tstat_fused(y, x_lagged, &gx, g, x0, h, k, fit, scale).map_err(|e| {
                Error::AtPoint {
                    index,
                    x: x0,
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

/// Full test: OLS fit, evaluation points from `levels_sample`, per-point
/// statistics and chi-square decision.
pub fn f_tilde_test(
    y: &[f64],
    x_lagged: &[f64],
    levels_sample: &[f64],
    g: &GFunction,
    cfg: &FTildeConfig,
) -> Result<(SpecTestResult, EvalPoints)> {
    let fit = regress::ols_fit(y, x_lagged, g)?;
    let points = eval_points(levels_sample, cfg.p)?;
    for (index, &x0) in points.points.iter().enumerate() {
        if g.derivative(x0) == 0.0 {
            return Err(Error::AtPoint {
                index,
                x: x0,
                source: Box::new(Error::InvalidArgument("g'(x) vanishes".into())),
            });
        }
    }
    let gx: Vec<f64> = x_lagged.iter().map(|&x| g.eval(x)).collect();
    let scale = regress::y_scale(y);
    let t = points
        .points
        .par_iter()
        .enumerate()
        .map(|(index, &x0)| {
            regress::np_tstat_fused(y, x_lagged, &gx, g, x0, cfg.h, &cfg.kernel, &fit, scale)
                .map_err(|e| Error::AtPoint {
                    index,
                    x: x0,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((SpecTestResult::from_t(t, cfg.alpha)?, points))
}

/// Convenience wrapper taking a whole predictive sample.
pub fn f_tilde_sample(
    sample: &PredictiveSample,
    g: &GFunction,
    cfg: &FTildeConfig,
) -> Result<(SpecTestResult, EvalPoints)> {
    f_tilde_test(sample.response(), sample.lagged(), sample.levels(), g, cfg)
}

/// Rejection region of the U-statistic test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    Upper,
}

impl Sidedness {
    pub fn critical_value(self, alpha: f64) -> Result<f64> {
        match self {
            Sidedness::TwoSided => normal_quantile(1.0 - alpha / 2.0),
            Sidedness::Upper => normal_quantile(1.0 - alpha),
        }
    }

    pub fn rejects(self, stat: f64, crit: f64) -> bool {
        match self {
            Sidedness::TwoSided => stat.abs() > crit,
            Sidedness::Upper => stat > crit,
        }
    }
}

/// Self-normalized U-statistic of kernel-weighted residuals at several
/// bandwidths at once:
/// `S = sum_{s != t} e_s e_t K(.)`, `V^2 = 2 sum_{s != t} e_s^2 e_t^2 K(.)^2`,
/// statistic `S / V`.
pub fn wp_from_residuals(
    residuals: &[f64],
    x_lagged: &[f64],
    hs: &[f64],
    k: &KernelSpec,
) -> Result<Vec<f64>> {
    if residuals.len() != x_lagged.len() {
        return Err(Error::InvalidArgument(
            "residuals and regressor lengths differ".into(),
        ));
    }
    if hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("bandwidths must be positive".into()));
    }
    let h_max = hs.iter().copied().fold(0.0, f64::max);
    let reach = k.kind.effective_radius() * h_max;
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| x_lagged[a].total_cmp(&x_lagged[b]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| x_lagged[i]).collect();
    let es: Vec<f64> = order.iter().map(|&i| residuals[i]).collect();
    let inv_h: Vec<f64> = hs.iter().map(|h| 1.0 / h).collect();
    let m = hs.len();
    let mut s = vec![0.0; m];
    let mut v = vec![0.0; m];
    for a in 0..xs.len() {
        let (xa, ea) = (xs[a], es[a]);
        let mut s_row = vec![0.0; m];
        let mut v_row = vec![0.0; m];
        for b in a + 1..xs.len() {
            let dx = xs[b] - xa;
            if dx > reach {
                break;
            }
            let eb = es[b];
            for j in 0..m {
                let w = k.eval(dx * inv_h[j]);
                s_row[j] += eb * w;
                v_row[j] += eb * eb * w * w;
            }
        }
        for j in 0..m {
            s[j] += ea * s_row[j];
            v[j] += ea * ea * v_row[j];
        }
    }
    s.iter()
        .zip(&v)
        .map(|(&s_half, &v_half)| {
            // the pair sums above cover s < t only
            let s_full = 2.0 * s_half;
            let v2 = 2.0 * 2.0 * v_half;
            if !(v2 > 0.0) {
                return Err(Error::Degenerate(
                    "U-statistic variance is zero (all residuals vanish)".into(),
                ));
            }
            Ok(s_full / v2.sqrt())
        })
        .collect()
}

/// Statistic at a single bandwidth, from OLS residuals of `y` on `[1, x_{t-1}]`.
pub fn wp_statistic(y: &[f64], x_lagged: &[f64], h: f64, k: &KernelSpec) -> Result<f64> {
    let fit = regress::ols_fit(y, x_lagged, &GFunction::Identity)?;
    Ok(wp_from_residuals(&fit.residuals, x_lagged, &[h], k)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelfn::Kernel;

    #[test]
    fn levels() {
        assert_eq!(quantile_levels(2), vec![0.1, 0.9]);
        let l = quantile_levels(17);
        assert_eq!(l.len(), 17);
        for (k, q) in l.iter().enumerate() {
            assert!((q - (0.10 + 0.05 * k as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn points_on_integer_grid() {
        let sample: Vec<f64> = (1..=100).rev().map(|i| i as f64).collect();
        let ep = eval_points(&sample, 5).unwrap();
        assert_eq!(ep.points, vec![10.0, 30.0, 50.0, 70.0, 90.0]);
        assert!(ep.distinct);
        let ep = eval_points(&sample, 17).unwrap();
        assert_eq!(ep.points[1], 15.0);
        assert!(eval_points(&[], 1).is_err());
        assert!(eval_points(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn ties_flagged() {
        let ep = eval_points(&[1.0; 10], 3).unwrap();
        assert!(!ep.distinct);
    }

    #[test]
    fn chi2_anchors() {
        assert!((chi2_quantile(2, 0.9).unwrap() - 4.605_170_185_988_091).abs() < 1e-10);
        assert!((chi2_quantile(1, 0.9).unwrap() - 2.705_543_454_095_404).abs() < 1e-10);
        assert!((chi2_quantile(17, 0.9).unwrap() - 24.769).abs() < 1e-3);
        assert!(chi2_quantile(3, 1.0).is_err());
        assert!(chi2_quantile(3, 0.0).is_err());
        assert!(chi2_quantile(0, 0.5).is_err());
    }

    #[test]
    fn chi2_round_trip() {
        for df in [1, 2, 17, 25] {
            for q in [0.5, 0.9, 0.95, 0.99] {
                let x = chi2_quantile(df, q).unwrap();
                assert!(
                    (chi2_sf(df, x).unwrap() - (1.0 - q)).abs() < 1e-8,
                    "df {df} q {q}"
                );
            }
        }
    }

    #[test]
    fn result_bookkeeping() {
        let r = SpecTestResult::from_t(vec![2.0], 0.1).unwrap();
        assert_eq!(r.f_tilde, 4.0);
        assert!(r.reject);
        let r = SpecTestResult::from_t(vec![0.0; 17], 0.1).unwrap();
        assert_eq!(r.f_tilde, 0.0);
        assert!(!r.reject);
        assert!((r.p_value - 1.0).abs() < 1e-15);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["f_tilde", "t", "p", "crit", "pvalue", "reject"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(r.to_csv_record().starts_with("0,17,"));
    }

    #[test]
    fn wp_two_point_hand_case() {
        let k = KernelSpec::new(Kernel::Uniform).unwrap();
        let stat = wp_from_residuals(&[1.0, -1.0], &[0.0, 0.1], &[1.0], &k).unwrap();
        assert!((stat[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn wp_degenerate() {
        let k = KernelSpec::gaussian();
        let err = wp_from_residuals(&[0.0; 5], &[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0], &k).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!(wp_statistic(&y, &[0.0, 1.0, 2.0, 3.0], 1.0, &k).is_err());
    }

    #[test]
    fn sidedness() {
        let c = Sidedness::TwoSided.critical_value(0.1).unwrap();
        assert!((c - 1.644_853_626_951_472).abs() < 1e-9);
        assert!(Sidedness::TwoSided.rejects(-2.0, c));
        assert!(!Sidedness::Upper.rejects(-2.0, c));
    }
}
