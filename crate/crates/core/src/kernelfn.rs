//! Kernel functions, their moment constants, and additive / kernel
//! functionals of standardized paths.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procgen::SamplePath;
use crate::quad::{integrate, QuadOptions};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
    Uniform,
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Uniform => {
                if u.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the support, `None` for unbounded support.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            Kernel::Gaussian => None,
            Kernel::Epanechnikov => Some(1.0),
            Kernel::Uniform => Some(0.5),
        }
    }

    /// Radius beyond which the kernel evaluates to exactly zero in `f64`.
    pub fn effective_radius(self) -> f64 {
        // exp(-u^2/2) underflows to 0 once u^2/2 exceeds ~745.2
        self.support_radius().unwrap_or(40.0)
    }

    fn integration_range(self) -> (f64, f64) {
        match self.support_radius() {
            Some(r) => (-r, r),
            None => (-20.0, 20.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

pub fn kernel_eval(k: &KernelSpec, u: f64) -> f64 {
    k.kind.eval(u)
}

/// Moment constants of a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    /// `nu[i] = int x^i K(x) dx`, `i = 0..4`.
    pub nu: [f64; 5],
    /// `int x^i K(x)^2 dx`, `i = 0..2`.
    pub sq: [f64; 3],
}

impl KernelMoments {
    /// `[[nu_0, nu_1], [nu_1, nu_2]]`.
    pub fn design_matrix(&self) -> [[f64; 2]; 2] {
        [[self.nu[0], self.nu[1]], [self.nu[1], self.nu[2]]]
    }

    pub fn squared_design_matrix(&self) -> [[f64; 2]; 2] {
        [[self.sq[0], self.sq[1]], [self.sq[1], self.sq[2]]]
    }
}

/// Computes the kernel moments by adaptive quadrature.
pub fn kernel_moments(kind: Kernel) -> Result<KernelMoments> {
    let (a, b) = kind.integration_range();
    let opts = QuadOptions::with_abs_tol(1e-12);
    let mut nu = [0.0; 5];
    for (i, slot) in nu.iter_mut().enumerate() {
        *slot = integrate(|x| x.powi(i as i32) * kind.eval(x), a, b, opts)?;
    }
    let mut sq = [0.0; 3];
    for (i, slot) in sq.iter_mut().enumerate() {
        *slot = integrate(
            |x| {
                let k = kind.eval(x);
                x.powi(i as i32) * k * k
            },
            a,
            b,
            opts,
        )?;
    }
    Ok(KernelMoments { nu, sq })
}

/// Closed-form moments, used as a cross-check on the quadrature.
pub fn closed_form_moments(kind: Kernel) -> KernelMoments {
    match kind {
        Kernel::Gaussian => {
            let r = 1.0 / (2.0 * PI.sqrt());
            KernelMoments {
                nu: [1.0, 0.0, 1.0, 0.0, 3.0],
                sq: [r, 0.0, 0.5 * r],
            }
        }
        Kernel::Epanechnikov => KernelMoments {
            nu: [1.0, 0.0, 0.2, 0.0, 3.0 / 35.0],
            sq: [0.6, 0.0, 3.0 / 35.0],
        },
        Kernel::Uniform => KernelMoments {
            nu: [1.0, 0.0, 1.0 / 12.0, 0.0, 1.0 / 80.0],
            sq: [1.0, 0.0, 1.0 / 12.0],
        },
    }
}

fn inverse2(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = (m[0][0].abs() + m[1][1].abs()).powi(2);
    if !(det.abs() > 1e-12 * scale) {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

fn mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `Q = A^{-1} B A^{-1}`, `A` and `B` the moment matrices of `K` and `K^2`.
pub fn q_matrix(m: &KernelMoments) -> Result<[[f64; 2]; 2]> {
    let a_inv = inverse2(m.design_matrix())
        .ok_or_else(|| Error::SingularDesign("kernel moment matrix is singular".into()))?;
    let q = mul2(mul2(a_inv, m.squared_design_matrix()), a_inv);
    // symmetrize away rounding
    let off = 0.5 * (q[0][1] + q[1][0]);
    Ok([[q[0][0], off], [off, q[1][1]]])
}

/// A kernel with its cached moments and `Q` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Kernel", into = "Kernel")]
pub struct KernelSpec {
    pub kind: Kernel,
    pub moments: KernelMoments,
    pub q: [[f64; 2]; 2],
}

impl KernelSpec {
    pub fn new(kind: Kernel) -> Result<Self> {
        let moments = kernel_moments(kind)?;
        let q = q_matrix(&moments)?;
        Ok(Self { kind, moments, q })
    }

    pub fn gaussian() -> Self {
        Self::new(Kernel::Gaussian).expect("gaussian kernel moments")
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.kind.eval(u)
    }

    pub fn q11(&self) -> f64 {
        self.q[0][0]
    }

    /// `int K^2`, the NW variance constant.
    pub fn roughness(&self) -> f64 {
        self.moments.sq[0]
    }
}

impl TryFrom<Kernel> for KernelSpec {
    type Error = Error;
    fn try_from(kind: Kernel) -> Result<Self> {
        KernelSpec::new(kind)
    }
}

impl From<KernelSpec> for Kernel {
    fn from(k: KernelSpec) -> Self {
        k.kind
    }
}

/// `n^{-1} sum_t f(x_t / beta_n)`.
pub fn additive_functional<F: Fn(f64) -> f64>(path: &SamplePath, f: F) -> Result<f64> {
    let n = path.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty path".into()));
    }
    if !(path.beta_n > 0.0) {
        return Err(Error::InvalidArgument(
            "standardizer must be positive".into(),
        ));
    }
    let mut sum = 0.0;
    for (t, &x) in path.values.iter().enumerate() {
        let value = f(x / path.beta_n);
        if !value.is_finite() {
            return Err(Error::NonFinite { t: t + 1, value });
        }
        sum += value;
    }
    Ok(sum / n as f64)
}

/// `(beta_n / (h n)) sum_t K((x_t - x) / h)`.
pub fn kernel_functional(path: &SamplePath, k: &KernelSpec, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let n = path.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty path".into()));
    }
    let sum: f64 = path.values.iter().map(|&xt| k.eval((xt - x) / h)).sum();
    Ok(path.beta_n / (h * n as f64) * sum)
}

/// `(beta_n / (n h)) sum_t K_j((x_t - a)/h) K_l((x_t - b)/h)` with
/// `K_j(u) = u^j K(u)`; vanishes asymptotically for `a != b`.
pub fn product_kernel_functional(
    path: &SamplePath,
    k: &KernelSpec,
    (j, a): (i32, f64),
    (l, b): (i32, f64),
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let sum: f64 = path
        .values
        .iter()
        .map(|&xt| {
            let ua = (xt - a) / h;
            let ub = (xt - b) / h;
            ua.powi(j) * k.eval(ua) * ub.powi(l) * k.eval(ub)
        })
        .sum();
    Ok(path.beta_n / (h * path.n() as f64) * sum)
}
