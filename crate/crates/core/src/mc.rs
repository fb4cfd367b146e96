//! Monte Carlo harness for size and power tables.
//!
//! Each replication is a pure function of `(master seed, cell, replication
//! index)`: the cell coordinates `(process, n, rho)` are hashed into a stream
//! id and the replication index selects a child stream. Bandwidths and
//! evaluation-point counts are evaluated on the same simulated dataset.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelfn::{KernelSpec, INV_SQRT_2PI};
use crate::procgen::{draw_path, InnovationSpec, PresampleMode, ProcessSpec};
use crate::regress::{ols_fit, GFunction};
use crate::rng::{hash_words, StreamSeed};
use crate::spectest::{
    chi2_quantile, eval_points, per_point_statistics, wp_from_residuals, Sidedness, DEFAULT_ALPHA,
};

/// Largest tolerated share of failed replications in a cell.
pub const MAX_FAILURE_RATE: f64 = 0.001;

pub const DEFAULT_SEED: u64 = 20_190_101;

/// Shape of the deviation `g_1` added to the null regression function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AltShape {
    /// `g_1 = 0`: the null, expressed as an alternative.
    Zero,
    /// Standard normal density at `scale * x`.
    GaussPdf {
        #[serde(default = "unit")]
        scale: f64,
    },
    /// `min(|x|^{-2}, 1)`.
    InvSqCapped,
    /// `min(|x|^{-1}, 1)`.
    InvCapped,
    /// `|x|^power`.
    AbsPow { power: f64 },
    /// `x^2`.
    Square,
}

fn unit() -> f64 {
    1.0
}

impl AltShape {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            AltShape::Zero => 0.0,
            AltShape::GaussPdf { scale } => {
                let z = scale * x;
                INV_SQRT_2PI * (-0.5 * z * z).exp()
            }
            AltShape::InvSqCapped => (1.0 / (x * x)).min(1.0),
            AltShape::InvCapped => (1.0 / x.abs()).min(1.0),
            AltShape::AbsPow { power } => x.abs().powf(power),
            AltShape::Square => x * x,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            AltShape::Zero => "0".into(),
            AltShape::GaussPdf { scale: 1.0 } => "phi1(x)".into(),
            AltShape::GaussPdf { scale } => format!("phi1({scale}x)"),
            AltShape::InvSqCapped => "|x|^-2 min 1".into(),
            AltShape::InvCapped => "|x|^-1 min 1".into(),
            AltShape::AbsPow { power } => format!("|x|^{power}"),
            AltShape::Square => "x^2".into(),
        }
    }
}

/// A fixed alternative `y_t = x_{t-1} + multiplier * shape(x_{t-1}) + u_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    #[serde(flatten)]
    pub shape: AltShape,
    #[serde(default = "unit")]
    pub multiplier: f64,
    #[serde(default)]
    pub rho_fixed: f64,
}

impl AlternativeSpec {
    pub fn new(shape: AltShape, multiplier: f64) -> Self {
        Self {
            shape,
            multiplier,
            rho_fixed: 0.0,
        }
    }

    #[inline]
    pub fn g1(&self, x: f64) -> f64 {
        self.multiplier * self.shape.eval(x)
    }

    pub fn label(&self) -> String {
        if self.multiplier == 1.0 {
            self.shape.label()
        } else {
            format!("{} (x{})", self.shape.label(), self.multiplier)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(Error::InvalidArgument(
                "alternative multiplier must be positive".into(),
            ));
        }
        InnovationSpec::new(self.rho_fixed)?;
        Ok(())
    }
}

fn default_rho() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5]
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_kernel() -> KernelSpec {
    KernelSpec::gaussian()
}

fn default_true() -> bool {
    true
}

/// A grid of simulation cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McDesign {
    pub processes: Vec<ProcessSpec>,
    pub n: Vec<usize>,
    /// Bandwidth exponents: `h = n^b`.
    pub b: Vec<f64>,
    pub p: Vec<usize>,
    /// Ignored by power runs, which use the alternative's `rho_fixed`.
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub alternative: Option<AlternativeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub wp_sidedness: Sidedness,
    #[serde(default)]
    pub presample: PresampleMode,
    #[serde(default = "default_true")]
    pub include_wp: bool,
}

impl McDesign {
    fn base(processes: Vec<ProcessSpec>, reps: usize) -> Self {
        Self {
            processes,
            n: vec![100, 200, 500],
            b: vec![-0.2, -0.1, -0.05],
            p: vec![17, 25],
            rho: default_rho(),
            reps,
            alpha: DEFAULT_ALPHA,
            alternative: None,
            seed: None,
            kernel: KernelSpec::gaussian(),
            wp_sidedness: Sidedness::default(),
            presample: PresampleMode::default(),
            include_wp: true,
        }
    }

    /// Fractional type II regressors `(1-L)^d x_t = xi_t + 0.5 xi_{t-1}`.
    pub fn fractional_size(ds: &[f64], reps: usize) -> Result<Self> {
        let processes = ds
            .iter()
            .map(|&d| ProcessSpec::fractional_type2(d, vec![1.0, 0.5]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::base(processes, reps))
    }

    /// Autoregressive regressors with `kappa_n = n^alpha`; `alpha = 1` is NI.
    pub fn autoregressive_size(alphas: &[f64], reps: usize) -> Result<Self> {
        let processes = alphas
            .iter()
            .map(|&a| {
                if a == 1.0 {
                    ProcessSpec::nearly_integrated(vec![1.0])
                } else {
                    ProcessSpec::mildly_integrated(a, vec![1.0])
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::base(processes, reps))
    }

    pub fn with_alternative(mut self, alt: AlternativeSpec) -> Self {
        self.rho = vec![alt.rho_fixed];
        self.alternative = Some(alt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        if self.processes.is_empty()
            || self.n.is_empty()
            || self.b.is_empty()
            || self.p.is_empty()
            || self.rho.is_empty()
        {
            return bad("design grids must be non-empty");
        }
        for spec in &self.processes {
            spec.validate()?;
        }
        if self.n.iter().any(|&n| n < 4) {
            return bad("sample sizes must be at least 4");
        }
        if self.b.iter().any(|b| !b.is_finite()) {
            return bad("bandwidth exponents must be finite");
        }
        for &n in &self.n {
            if self.p.iter().any(|&p| p == 0 || p > n) {
                return bad("evaluation point counts must lie in 1..=n");
            }
        }
        for &rho in &self.rho {
            InnovationSpec::new(rho)?;
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if let Some(alt) = &self.alternative {
            alt.validate()?;
        }
        Ok(())
    }

    pub fn bandwidth(n: usize, b: f64) -> f64 {
        (n as f64).powf(b)
    }
}

/// Coordinates of one simulation cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub process: usize,
    pub n: usize,
    pub rho: f64,
}

fn spec_words(spec: &ProcessSpec) -> Vec<u64> {
    let mut words = vec![
        spec.kind as u64,
        spec.d.to_bits(),
        spec.alpha_kappa.to_bits(),
        spec.presample_truncation.map_or(u64::MAX, |m| m as u64),
        spec.ma_coeffs.len() as u64,
    ];
    words.extend(spec.ma_coeffs.iter().map(|c| c.to_bits()));
    words
}

impl Cell {
    /// Stream id of the cell; independent of grid ordering.
    pub fn stream_id(&self, design: &McDesign) -> u64 {
        let mut words = spec_words(&design.processes[self.process]);
        words.push(self.n as u64);
        words.push(self.rho.to_bits());
        hash_words(&words)
    }

    pub fn seed(&self, design: &McDesign, master: u64, rep: usize) -> StreamSeed {
        StreamSeed::new(master, self.stream_id(design)).derive(&[rep as u64])
    }
}

/// Decisions of one replication: `wp[b]` and `f[p][b]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepOutcome {
    pub wp: Vec<bool>,
    pub f: Vec<Vec<bool>>,
}

struct Prepared {
    hs: Vec<f64>,
    f_crit: Vec<f64>,
    wp_crit: f64,
}

impl Prepared {
    fn new(design: &McDesign, n: usize) -> Result<Self> {
        Ok(Self {
            hs: design
                .b
                .iter()
                .map(|&b| McDesign::bandwidth(n, b))
                .collect(),
            f_crit: design
                .p
                .iter()
                .map(|&p| chi2_quantile(p, 1.0 - design.alpha))
                .collect::<Result<_>>()?,
            wp_crit: design.wp_sidedness.critical_value(design.alpha)?,
        })
    }
}

/// Simulates one dataset and runs every test under each scenario
/// (`None` = null). Scenarios share the innovations.
fn replicate_scenarios(
    design: &McDesign,
    prep: &Prepared,
    cell: &Cell,
    master: u64,
    rep: usize,
    scenarios: &[Option<AlternativeSpec>],
) -> Result<Vec<RepOutcome>> {
    let spec = &design.processes[cell.process];
    let n = cell.n;
    let innov = InnovationSpec::new(cell.rho)?;
    let (path, u) = draw_path(
        spec,
        &innov,
        n,
        design.presample,
        cell.seed(design, master, rep),
    )?;
    let x = &path.values;
    let x_lagged = &x[..n - 1];
    let points: Vec<Vec<f64>> = design
        .p
        .iter()
        .map(|&p| eval_points(x, p).map(|e| e.points))
        .collect::<Result<_>>()?;
    let g = GFunction::Identity;
    scenarios
        .iter()
        .map(|alt| {
            let y: Vec<f64> = x_lagged
                .iter()
                .zip(&u[1..])
                .map(|(&xl, &ut)| xl + alt.map_or(0.0, |a| a.g1(xl)) + ut)
                .collect();
            let fit = ols_fit(&y, x_lagged, &g)?;
            let mut f = Vec::with_capacity(design.p.len());
            for (pts, &crit) in points.iter().zip(&prep.f_crit) {
                let mut row = Vec::with_capacity(prep.hs.len());
                for &h in &prep.hs {
                    let t = per_point_statistics(&y, x_lagged, &g, &fit, pts, h, &design.kernel)?;
                    let stat: f64 = t.iter().map(|t| t * t).sum();
                    row.push(stat > crit);
                }
                f.push(row);
            }
            let wp = if design.include_wp {
                wp_from_residuals(&fit.residuals, x_lagged, &prep.hs, &design.kernel)?
                    .into_iter()
                    .map(|s| design.wp_sidedness.rejects(s, prep.wp_crit))
                    .collect()
            } else {
                Vec::new()
            };
            Ok(RepOutcome { wp, f })
        })
        .collect()
}

/// One replication of a cell under the design's alternative (or the null).
pub fn replicate_cell(
    design: &McDesign,
    cell: &Cell,
    master: u64,
    rep: usize,
) -> Result<RepOutcome> {
    let prep = Prepared::new(design, cell.n)?;
    let mut out = replicate_scenarios(design, &prep, cell, master, rep, &[design.alternative])?;
    Ok(out.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub cell: String,
    pub rep: usize,
    pub message: String,
}

/// Rejection counts of one cell under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub requested: usize,
    pub completed: usize,
    pub failures: Vec<FailureRecord>,
    pub wp_rejections: Vec<usize>,
    pub f_rejections: Vec<Vec<usize>>,
}

impl CellResult {
    pub fn wp_rate(&self, b: usize) -> f64 {
        self.wp_rejections[b] as f64 / self.completed as f64
    }

    pub fn f_rate(&self, p: usize, b: usize) -> f64 {
        self.f_rejections[p][b] as f64 / self.completed as f64
    }
}

#[derive(Debug, Clone)]
struct Tally {
    completed: usize,
    failures: Vec<(usize, String)>,
    wp: Vec<Vec<usize>>,
    f: Vec<Vec<Vec<usize>>>,
}

impl Tally {
    fn empty(scenarios: usize, nb: usize, np: usize) -> Self {
        Self {
            completed: 0,
            failures: Vec::new(),
            wp: vec![vec![0; nb]; scenarios],
            f: vec![vec![vec![0; nb]; np]; scenarios],
        }
    }

    fn record(mut self, rep: usize, outcome: Result<Vec<RepOutcome>>) -> Self {
        match outcome {
            Ok(outcomes) => {
                self.completed += 1;
                for (s, o) in outcomes.iter().enumerate() {
                    for (b, &r) in o.wp.iter().enumerate() {
                        self.wp[s][b] += r as usize;
                    }
                    for (p, row) in o.f.iter().enumerate() {
                        for (b, &r) in row.iter().enumerate() {
                            self.f[s][p][b] += r as usize;
                        }
                    }
                }
            }
            Err(e) => self.failures.push((rep, e.to_string())),
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        self.completed += other.completed;
        self.failures.extend(other.failures);
        for (a, b) in self.wp.iter_mut().zip(&other.wp) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.f.iter_mut().zip(&other.f) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
        }
        self
    }
}

fn cell_label(design: &McDesign, cell: &Cell) -> String {
    format!(
        "{} n={} rho={}",
        design.processes[cell.process].label(),
        cell.n,
        cell.rho
    )
}

/// Runs all replications of a cell for each scenario.
fn run_cell(
    design: &McDesign,
    cell: &Cell,
    master: u64,
    scenarios: &[Option<AlternativeSpec>],
) -> Result<Vec<CellResult>> {
    let prep = Prepared::new(design, cell.n)?;
    let nb = design.b.len();
    let np = design.p.len();
    let wp_cols = if design.include_wp { nb } else { 0 };
    let tally = (0..design.reps)
        .into_par_iter()
        .fold(
            || Tally::empty(scenarios.len(), wp_cols, np),
            |acc, rep| {
                let outcome = replicate_scenarios(design, &prep, cell, master, rep, scenarios);
                acc.record(rep, outcome)
            },
        )
        .reduce(|| Tally::empty(scenarios.len(), wp_cols, np), Tally::merge);
    let label = cell_label(design, cell);
    let mut failures: Vec<FailureRecord> = tally
        .failures
        .into_iter()
        .map(|(rep, message)| FailureRecord {
            cell: label.clone(),
            rep,
            message,
        })
        .collect();
    failures.sort_by_key(|f| f.rep);
    if failures.len() as f64 > MAX_FAILURE_RATE * design.reps as f64 || tally.completed == 0 {
        return Err(Error::TooManyFailures {
            cell: label,
            failures: failures.len(),
            reps: design.reps,
            first: failures
                .first()
                .map(|f| f.message.clone())
                .unwrap_or_default(),
        });
    }
    Ok((0..scenarios.len())
        .map(|s| CellResult {
            cell: *cell,
            requested: design.reps,
            completed: tally.completed,
            failures: failures.clone(),
            wp_rejections: tally.wp[s].clone(),
            f_rejections: tally.f[s].clone(),
        })
        .collect())
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub method: String,
    pub b: f64,
}

impl Column {
    pub fn header(&self) -> String {
        format!("{} b={}", self.method, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub n: usize,
    pub cells: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TableMetadata {
    pub seed: u64,
    pub reps: usize,
    pub alpha: f64,
    pub kernel: String,
    pub rho: Vec<f64>,
    pub quantile_rule: String,
    pub presample: String,
    pub wp_sidedness: String,
    pub completed_reps: Vec<(String, usize)>,
    pub failures: Vec<FailureRecord>,
    pub strongly_dependent: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionTable {
    pub title: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub metadata: TableMetadata,
}

impl RejectionTable {
    pub fn cell(&self, label: &str, n: usize, method: &str, b: f64) -> Option<f64> {
        let col = self
            .columns
            .iter()
            .position(|c| c.method == method && c.b == b)?;
        let row = self.rows.iter().find(|r| r.label == label && r.n == n)?;
        row.cells.get(col).copied()
    }
}

pub fn f_method(p: usize) -> String {
    format!("F p={p}")
}

pub const WP_METHOD: &str = "WP";

fn columns(design: &McDesign) -> Vec<Column> {
    let mut cols = Vec::new();
    if design.include_wp {
        cols.extend(design.b.iter().map(|&b| Column {
            method: WP_METHOD.into(),
            b,
        }));
    }
    for &p in &design.p {
        cols.extend(design.b.iter().map(|&b| Column {
            method: f_method(p),
            b,
        }));
    }
    cols
}

fn rates(design: &McDesign, r: &CellResult) -> Vec<f64> {
    let mut out = Vec::new();
    if design.include_wp {
        out.extend((0..design.b.len()).map(|b| r.wp_rate(b)));
    }
    for p in 0..design.p.len() {
        out.extend((0..design.b.len()).map(|b| r.f_rate(p, b)));
    }
    out
}

fn metadata(design: &McDesign, master: u64, rho: Vec<f64>) -> TableMetadata {
    let mut notes = vec![
        "regressor timing: y_t on x_{t-1}, t = 2..n".to_string(),
        "local variance: kernel-weighted squared OLS residuals".to_string(),
        "independent random streams per rho".to_string(),
    ];
    if design.alternative.is_some() {
        notes.push("null and alternative share innovations".to_string());
    }
    TableMetadata {
        seed: master,
        reps: design.reps,
        alpha: design.alpha,
        kernel: design.kernel.kind.name().to_string(),
        rho,
        quantile_rule: "order statistic at ceil(q n), levels 0.1 + k 0.8/(p-1)".into(),
        presample: format!("{:?}", design.presample).to_lowercase(),
        wp_sidedness: format!("{:?}", design.wp_sidedness),
        completed_reps: Vec::new(),
        failures: Vec::new(),
        strongly_dependent: design
            .processes
            .iter()
            .filter(|s| s.strongly_dependent())
            .map(|s| s.label())
            .collect(),
        notes,
    }
}

fn master_seed(design: &McDesign, seed: Option<u64>) -> u64 {
    seed.or(design.seed).unwrap_or(DEFAULT_SEED)
}

fn all_cells(design: &McDesign, rhos: &[f64]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for process in 0..design.processes.len() {
        for &n in &design.n {
            for &rho in rhos {
                cells.push(Cell { process, n, rho });
            }
        }
    }
    cells
}

/// Per-cell rejection counts under the null for every `(process, n, rho)`.
pub fn run_size_cells(design: &McDesign, seed: Option<u64>) -> Result<Vec<CellResult>> {
    design.validate()?;
    let master = master_seed(design, seed);
    let mut out = Vec::new();
    for cell in all_cells(design, &design.rho) {
        out.extend(run_cell(design, &cell, master, &[None])?);
    }
    Ok(out)
}

/// Null rejection frequencies, maximized over the rho grid.
pub fn run_size(design: &McDesign, seed: Option<u64>) -> Result<RejectionTable> {
    let master = master_seed(design, seed);
    let cells = run_size_cells(design, Some(master))?;
    let mut meta = metadata(design, master, design.rho.clone());
    let mut rows = Vec::new();
    for (pi, spec) in design.processes.iter().enumerate() {
        for &n in &design.n {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.cell.process == pi && c.cell.n == n)
                .collect();
            let per_rho: Vec<Vec<f64>> = group.iter().map(|c| rates(design, c)).collect();
            let max = (0..per_rho[0].len())
                .map(|j| {
                    per_rho
                        .iter()
                        .map(|r| r[j])
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            for c in &group {
                meta.completed_reps
                    .push((cell_label(design, &c.cell), c.completed));
                meta.failures.extend(c.failures.iter().cloned());
            }
            rows.push(Row {
                label: spec.label(),
                n,
                cells: max,
            });
        }
    }
    Ok(RejectionTable {
        title: "Size: maximum rejection frequency over rho".into(),
        columns: columns(design),
        rows,
        metadata: meta,
    })
}

/// Subtracts the null rate's excess over `alpha` from a power rate, floored at 0.
pub fn size_adjust(power_rate: f64, null_rate: f64, alpha: f64) -> f64 {
    if null_rate > alpha {
        (power_rate - (null_rate - alpha)).max(0.0)
    } else {
        power_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    /// Size-adjusted power of WP, then our test relative to WP.
    pub relative: RejectionTable,
    /// Size-adjusted power of every method.
    pub adjusted: RejectionTable,
    /// Unadjusted rejection rates under the alternative.
    pub raw: RejectionTable,
    /// Null rejection rates from the same innovations.
    pub null: RejectionTable,
}

/// Size-adjusted power at `rho = alternative.rho_fixed`.
pub fn run_power(design: &McDesign, seed: Option<u64>) -> Result<PowerReport> {
    design.validate()?;
    let alt = design
        .alternative
        .ok_or_else(|| Error::InvalidArgument("power design needs an alternative".into()))?;
    let master = master_seed(design, seed);
    let rho = alt.rho_fixed;
    let mut meta = metadata(design, master, vec![rho]);
    let title = alt.label();
    let (mut raw_rows, mut null_rows, mut adj_rows, mut rel_rows) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for cell in all_cells(design, &[rho]) {
        let results = run_cell(design, &cell, master, &[None, Some(alt)])?;
        let (null, power) = (&results[0], &results[1]);
        meta.completed_reps
            .push((cell_label(design, &cell), power.completed));
        meta.failures.extend(power.failures.iter().cloned());
        let null_r = rates(design, null);
        let raw_r = rates(design, power);
        let adj: Vec<f64> = raw_r
            .iter()
            .zip(&null_r)
            .map(|(&p, &s)| size_adjust(p, s, design.alpha))
            .collect();
        let nb = design.b.len();
        let rel: Vec<f64> = if design.include_wp {
            adj.iter()
                .enumerate()
                .map(|(j, &v)| if j < nb { v } else { v - adj[j % nb] })
                .collect()
        } else {
            adj.clone()
        };
        let label = design.processes[cell.process].label();
        let row = |cells| Row {
            label: label.clone(),
            n: cell.n,
            cells,
        };
        raw_rows.push(row(raw_r));
        null_rows.push(row(null_r));
        adj_rows.push(row(adj));
        rel_rows.push(row(rel));
    }
    let cols = columns(design);
    let table = |kind: &str, rows| RejectionTable {
        title: format!("{kind}: {title}"),
        columns: cols.clone(),
        rows,
        metadata: meta.clone(),
    };
    Ok(PowerReport {
        relative: table("Size-adjusted power (ours relative to WP)", rel_rows),
        adjusted: table("Size-adjusted power", adj_rows),
        raw: table("Raw power", raw_rows),
        null: table("Null rejection", null_rows),
    })
}

/// Values of the test statistic over replications of a single null cell,
/// at one bandwidth exponent and one point count.
pub fn null_f_tilde_values(
    spec: &ProcessSpec,
    n: usize,
    b: f64,
    p: usize,
    rho: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut design = McDesign::base(vec![spec.clone()], reps);
    design.n = vec![n];
    design.b = vec![b];
    design.p = vec![p];
    design.rho = vec![rho];
    design.include_wp = false;
    design.validate()?;
    let cell = Cell { process: 0, n, rho };
    let h = McDesign::bandwidth(n, b);
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let innov = InnovationSpec::new(rho)?;
            let (path, u) = draw_path(
                spec,
                &innov,
                n,
                design.presample,
                cell.seed(&design, seed, rep),
            )?;
            let x = &path.values;
            let y: Vec<f64> = x[..n - 1].iter().zip(&u[1..]).map(|(a, b)| a + b).collect();
            let g = GFunction::Identity;
            let fit = ols_fit(&y, &x[..n - 1], &g)?;
            let pts = eval_points(x, p)?.points;
            let t = per_point_statistics(&y, &x[..n - 1], &g, &fit, &pts, h, &design.kernel)?;
            Ok(t.iter().map(|t| t * t).sum())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Md,
    #[default]
    Both,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "md" => Ok(TableFormat::Md),
            "both" => Ok(TableFormat::Both),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

fn round2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn header(table: &RejectionTable) -> Vec<String> {
    let mut h = vec!["process".to_string(), "n".to_string()];
    h.extend(table.columns.iter().map(Column::header));
    h
}

/// CSV rendering; `full` keeps every digit (shortest round-trip form).
pub fn table_to_csv(table: &RejectionTable, full: bool) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header(table))?;
    for row in &table.rows {
        let mut rec = vec![row.label.clone(), row.n.to_string()];
        rec.extend(
            row.cells
                .iter()
                .map(|&v| if full { v.to_string() } else { round2(v) }),
        );
        wtr.write_record(rec)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses a table previously written by [`table_to_csv`].
pub fn table_from_csv(text: &str) -> Result<(Vec<String>, Vec<Row>)> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad number `{s}`: {e}")))
        };
        let n = rec[1]
            .parse::<usize>()
            .map_err(|e| Error::InvalidArgument(format!("bad n: {e}")))?;
        let cells = rec.iter().skip(2).map(parse).collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            label: rec[0].to_string(),
            n,
            cells,
        });
    }
    Ok((headers, rows))
}

/// Aligned markdown rendering with values to two decimals.
pub fn table_to_markdown(table: &RejectionTable) -> String {
    let head = header(table);
    let body: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.label.clone(), r.n.to_string()];
            v.extend(r.cells.iter().map(|&c| round2(c)));
            v
        })
        .collect();
    let widths: Vec<usize> = (0..head.len())
        .map(|j| {
            body.iter()
                .map(|r| r[j].len())
                .chain(std::iter::once(head[j].len()))
                .max()
                .unwrap_or(3)
                .max(3)
        })
        .collect();
    let line = |cells: &[String]| {
        let mut s = String::from("|");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(s, " {c:>w$} |");
        }
        s.push('\n');
        s
    };
    let mut out = format!("**{}**\n\n", table.title);
    out.push_str(&line(&head));
    out.push('|');
    for w in &widths {
        out.push_str(&format!("{}:|", "-".repeat(w + 1)));
    }
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

/// Writes `<stem>_full.csv` and `<stem>_meta.json`, plus `<stem>.csv`
/// and/or `<stem>.md` depending on `format`.
pub fn emit_table(
    table: &RejectionTable,
    dir: &Path,
    stem: &str,
    format: TableFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, content: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    put(format!("{stem}_full.csv"), table_to_csv(table, true)?)?;
    if matches!(format, TableFormat::Csv | TableFormat::Both) {
        put(format!("{stem}.csv"), table_to_csv(table, false)?)?;
    }
    if matches!(format, TableFormat::Md | TableFormat::Both) {
        put(format!("{stem}.md"), table_to_markdown(table))?;
    }
    put(
        format!("{stem}_meta.json"),
        serde_json::to_string_pretty(&table.metadata)?,
    )?;
    Ok(written)
}
