//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Reproduced tables are written to `$CARGO_TARGET_TMPDIR/acceptance`.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use statrs::function::gamma::ln_gamma;

use wnp_core::kernelfn::{kernel_functional, KernelSpec};
use wnp_core::limitlab::{convergence_check, ks_one_sample, AdditiveFn, Functional};
use wnp_core::mc::{
    emit_table, f_method, null_f_tilde_values, run_power, run_size, AltShape, AlternativeSpec,
    McDesign, RejectionTable, TableFormat, DEFAULT_SEED, WP_METHOD,
};
use wnp_core::procgen::{
    draw_path, exact_sd, frac_coeffs, InnovationSpec, PresampleMode, ProcessSpec,
};
use wnp_core::regress::{np_tstat_m0, ols_fit, GFunction};
use wnp_core::rng::StreamSeed;
use wnp_core::spectest::{chi2_cdf, chi2_quantile, empirical_quantile};

const REPS: usize = 5000;
const BS: [f64; 3] = [-0.2, -0.1, -0.05];
const NS: [usize; 3] = [100, 200, 500];

/// Rows `(parameter, n)`; columns WP, p = 17, p = 25, each at b = -0.2, -0.1, -0.05.
type ReferenceTable = [(f64, usize, [f64; 9]); 12];

const TABLE_FRACTIONAL: ReferenceTable = [
    (
        0.25,
        100,
        [0.04, 0.02, 0.01, 0.07, 0.05, 0.04, 0.09, 0.06, 0.04],
    ),
    (
        0.25,
        200,
        [0.05, 0.02, 0.01, 0.07, 0.06, 0.04, 0.09, 0.07, 0.05],
    ),
    (
        0.25,
        500,
        [0.06, 0.02, 0.01, 0.07, 0.06, 0.04, 0.09, 0.07, 0.05],
    ),
    (
        0.50,
        100,
        [0.05, 0.02, 0.01, 0.07, 0.06, 0.04, 0.09, 0.07, 0.05],
    ),
    (
        0.50,
        200,
        [0.06, 0.03, 0.02, 0.08, 0.07, 0.05, 0.11, 0.09, 0.07],
    ),
    (
        0.50,
        500,
        [0.07, 0.04, 0.03, 0.07, 0.07, 0.05, 0.10, 0.09, 0.07],
    ),
    (
        0.75,
        100,
        [0.06, 0.04, 0.03, 0.08, 0.07, 0.06, 0.11, 0.09, 0.07],
    ),
    (
        0.75,
        200,
        [0.08, 0.06, 0.04, 0.08, 0.08, 0.07, 0.10, 0.10, 0.09],
    ),
    (
        0.75,
        500,
        [0.08, 0.07, 0.05, 0.07, 0.08, 0.07, 0.09, 0.09, 0.09],
    ),
    (
        1.00,
        100,
        [0.08, 0.06, 0.05, 0.09, 0.09, 0.08, 0.13, 0.11, 0.11],
    ),
    (
        1.00,
        200,
        [0.09, 0.07, 0.06, 0.08, 0.10, 0.10, 0.11, 0.12, 0.12],
    ),
    (
        1.00,
        500,
        [0.09, 0.08, 0.08, 0.09, 0.09, 0.09, 0.10, 0.11, 0.11],
    ),
];

const TABLE_AUTOREGRESSIVE: ReferenceTable = [
    (
        0.25,
        100,
        [0.02, 0.01, 0.00, 0.06, 0.03, 0.02, 0.07, 0.03, 0.02],
    ),
    (
        0.25,
        200,
        [0.03, 0.01, 0.00, 0.06, 0.04, 0.02, 0.08, 0.04, 0.03],
    ),
    (
        0.25,
        500,
        [0.04, 0.01, 0.00, 0.07, 0.04, 0.03, 0.08, 0.05, 0.03],
    ),
    (
        0.50,
        100,
        [0.04, 0.02, 0.01, 0.07, 0.05, 0.04, 0.09, 0.06, 0.04],
    ),
    (
        0.50,
        200,
        [0.06, 0.03, 0.02, 0.08, 0.06, 0.05, 0.10, 0.08, 0.06],
    ),
    (
        0.50,
        500,
        [0.08, 0.05, 0.03, 0.08, 0.07, 0.07, 0.10, 0.09, 0.08],
    ),
    (
        0.75,
        100,
        [0.06, 0.03, 0.02, 0.08, 0.06, 0.05, 0.10, 0.08, 0.06],
    ),
    (
        0.75,
        200,
        [0.08, 0.05, 0.04, 0.07, 0.07, 0.06, 0.10, 0.09, 0.08],
    ),
    (
        0.75,
        500,
        [0.09, 0.07, 0.06, 0.08, 0.08, 0.08, 0.09, 0.10, 0.10],
    ),
    (
        1.00,
        100,
        [0.06, 0.04, 0.03, 0.08, 0.07, 0.06, 0.11, 0.09, 0.08],
    ),
    (
        1.00,
        200,
        [0.08, 0.05, 0.04, 0.08, 0.08, 0.08, 0.10, 0.10, 0.10],
    ),
    (
        1.00,
        500,
        [0.09, 0.07, 0.07, 0.08, 0.08, 0.09, 0.09, 0.10, 0.11],
    ),
];

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn design_grid(mut design: McDesign) -> McDesign {
    design.n = NS.to_vec();
    design.b = BS.to_vec();
    design.p = vec![17, 25];
    design.rho = vec![-0.5, 0.0, 0.5];
    design
}

/// Compares the F columns (both p) with the reference values; the WP columns are
/// reported alongside with their own tolerance.
fn compare_size(table: &RejectionTable, reference: &ReferenceTable, tol: f64, wp_tol: f64) -> Outcome {
    let methods: Vec<String> = [WP_METHOD.to_string(), f_method(17), f_method(25)].to_vec();
    let (mut worst, mut outside, mut cells) = (0.0f64, 0usize, 0usize);
    let (mut wp_worst, mut wp_outside) = (0.0f64, 0usize);
    let mut notes = Vec::new();
    for (row, (_, n, values)) in table.rows.chunks(1).zip(reference.iter()) {
        let row = &row[0];
        assert_eq!(row.n, *n);
        let mut line = format!("{:<16} n={:<4}", row.label, n);
        for (m, method) in methods.iter().enumerate() {
            for (j, &b) in BS.iter().enumerate() {
                let ours = table.cell(&row.label, *n, method, b).expect("cell present");
                let theirs = values[3 * m + j];
                let gap = (ours - theirs).abs();
                if m == 0 {
                    wp_worst = wp_worst.max(gap);
                    wp_outside += (gap > wp_tol + 1e-12) as usize;
                } else {
                    cells += 1;
                    worst = worst.max(gap);
                    outside += (gap > tol + 1e-12) as usize;
                }
                let flag = if gap > if m == 0 { wp_tol } else { tol } + 1e-12 {
                    "*"
                } else {
                    " "
                };
                line.push_str(&format!(" {ours:.3}/{theirs:.2}{flag}"));
            }
            line.push_str(" |");
        }
        notes.push(line);
    }
    let mut o = Outcome::new(
        outside == 0,
        format!(
            "{}/{} cells within +/-{tol} (max gap {worst:.3}); WP columns: {} outside +/-{wp_tol} (max gap {wp_worst:.3})",
            cells - outside,
            cells,
            wp_outside
        ),
    );
    notes.insert(
        0,
        "    ours/reference per cell, columns WP | p=17 | p=25 at b=-0.2,-0.1,-0.05; * marks a miss"
            .into(),
    );
    o.notes = notes;
    o
}

fn criterion_table1() -> Outcome {
    let design = design_grid(McDesign::fractional_size(&[0.25, 0.5, 0.75, 1.0], REPS).unwrap());
    let table = run_size(&design, Some(DEFAULT_SEED)).unwrap();
    emit_table(
        &table,
        &out_dir(),
        "table_size_fractional",
        TableFormat::Both,
    )
    .unwrap();
    compare_size(&table, &TABLE_FRACTIONAL, 0.02, 0.03)
}

fn criterion_table_f1() -> Outcome {
    let design = design_grid(McDesign::autoregressive_size(&[0.25, 0.5, 0.75, 1.0], REPS).unwrap());
    let table = run_size(&design, Some(DEFAULT_SEED)).unwrap();
    emit_table(
        &table,
        &out_dir(),
        "table_size_autoregressive",
        TableFormat::Both,
    )
    .unwrap();
    compare_size(&table, &TABLE_AUTOREGRESSIVE, 0.02, 0.03)
}

fn criterion_null_shape() -> Outcome {
    let spec = ProcessSpec::fractional_type2(0.5, vec![1.0, 0.5]).unwrap();
    let values = null_f_tilde_values(&spec, 500, -0.1, 17, 0.0, REPS, DEFAULT_SEED).unwrap();
    let ks = ks_one_sample(&values, |x| chi2_cdf(17, x).unwrap());
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Outcome::new(
        ks <= 0.05,
        format!("KS distance to chi2(17) = {ks:.4} (threshold 0.05); mean F = {mean:.2} vs 17"),
    )
}

fn criterion_power() -> Outcome {
    let mut checks = Vec::new();
    let mut pass = true;

    let mut d = McDesign::fractional_size(&[0.5], REPS).unwrap();
    d.n = vec![500];
    d.b = vec![-0.1];
    d.p = vec![17];
    let d = d.with_alternative(AlternativeSpec::new(AltShape::GaussPdf { scale: 1.0 }, 1.0));
    let report = run_power(&d, Some(DEFAULT_SEED)).unwrap();
    emit_table(
        &report.adjusted,
        &out_dir(),
        "power_phi1_d05",
        TableFormat::Both,
    )
    .unwrap();
    let label = &report.adjusted.rows[0].label;
    let wp = report.adjusted.cell(label, 500, WP_METHOD, -0.1).unwrap();
    let ours = report
        .adjusted
        .cell(label, 500, &f_method(17), -0.1)
        .unwrap();
    pass &= (wp - 0.42).abs() <= 0.03 && (ours - 0.60).abs() <= 0.05;
    checks.push(format!(
        "d=0.5 phi1(x): WP {wp:.3} (0.42+/-0.03), p=17 {ours:.3} (0.60+/-0.05)"
    ));

    let mut d = McDesign::fractional_size(&[1.0], REPS).unwrap();
    d.n = vec![500];
    let d = d.with_alternative(AlternativeSpec::new(AltShape::Square, 0.02));
    let report = run_power(&d, Some(DEFAULT_SEED)).unwrap();
    emit_table(
        &report.relative,
        &out_dir(),
        "power_square_d1",
        TableFormat::Both,
    )
    .unwrap();
    let row = &report.relative.rows[0];
    let rel: Vec<f64> = row.cells[BS.len()..].to_vec();
    let worst = rel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    pass &= worst <= 0.05;
    checks.push(format!(
        "d=1 x^2(x0.02): relative {} (0.00+/-0.05)",
        rel.iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>()
            .join(",")
    ));
    Outcome::new(pass, checks.join("; "))
}

fn criterion_mi_additive() -> Outcome {
    let spec = ProcessSpec::mildly_integrated(0.5, vec![1.0]).unwrap();
    let f = Functional::Additive {
        f: AdditiveFn::Monomial(2),
    };
    let r = convergence_check(&spec, &f, &[500, 2000], 1000, 0, DEFAULT_SEED).unwrap();
    let s = &r.stats[1];
    Outcome::new(
        (s.mean - 1.0).abs() <= 0.05,
        format!(
            "mean of n^-1 sum (x_t/beta_n)^2 at n=2000: {:.4} (se {:.4}); n=500: {:.4}; target 1 +/- 0.05",
            s.mean, s.se, r.stats[0].mean
        ),
    )
}

fn criterion_kernel_functional() -> Outcome {
    let spec = ProcessSpec::fractional_type2(0.5, vec![1.0]).unwrap();
    let n = 10_000;
    let reps = 1000;
    let h = (n as f64).powf(-0.1);
    let k = KernelSpec::gaussian();
    let innov = InnovationSpec::default();
    let values: Vec<f64> = (0..reps)
        .map(|rep| {
            let (path, _) = draw_path(
                &spec,
                &innov,
                n,
                PresampleMode::Random,
                StreamSeed::new(DEFAULT_SEED, 6).derive(&[rep as u64]),
            )
            .unwrap();
            kernel_functional(&path, &k, 0.0, h).unwrap()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let target = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let rel = (mean - target).abs() / target;
    Outcome::new(
        rel <= 0.15,
        format!(
            "mean {mean:.4} vs {target:.4}: relative gap {:.1}% (limit 15%)",
            100.0 * rel
        ),
    )
}

fn criterion_t_normality() -> Outcome {
    let spec = ProcessSpec::fractional_type2(0.5, vec![1.0, 0.5]).unwrap();
    let n = 500;
    let h = (n as f64).powf(-0.1);
    let z = 1.644_853_626_951_472_2;
    let k = KernelSpec::gaussian();
    let (mut par, mut np) = (0usize, 0usize);
    for rep in 0..REPS {
        let (path, u) = draw_path(
            &spec,
            &InnovationSpec::default(),
            n,
            PresampleMode::Random,
            StreamSeed::new(DEFAULT_SEED, 7).derive(&[rep as u64]),
        )
        .unwrap();
        let x = &path.values[..n - 1];
        let y: Vec<f64> = x.iter().zip(&u[1..]).map(|(a, b)| a + b).collect();
        let fit = ols_fit(&y, x, &GFunction::Identity).unwrap();
        let (_, t_gamma) = fit.t_stats(0.0, 1.0);
        par += (t_gamma.abs() > z) as usize;
        let mut sorted = path.values.clone();
        sorted.sort_by(f64::total_cmp);
        let x0 = empirical_quantile(&sorted, 0.5);
        let t = np_tstat_m0(&y, x, x0, h, &k, x0).unwrap();
        np += (t.abs() > z) as usize;
    }
    let (rp, rn) = (par as f64 / REPS as f64, np as f64 / REPS as f64);
    Outcome::new(
        (rp - 0.10).abs() <= 0.02 && (rn - 0.10).abs() <= 0.03,
        format!("parametric {rp:.4} (0.10+/-0.02), nonparametric at median {rn:.4} (0.10+/-0.03)"),
    )
}

fn criterion_oracles() -> Outcome {
    let mut worst_gamma = 0.0f64;
    for d in [-0.5f64, 0.25, 0.5, 0.75, 1.0] {
        let psi = frac_coeffs(d, 200);
        // Gamma(d) is negative only for d = -0.5 among these values
        let (sign, ln_abs_gd) = if d < 0.0 {
            (-1.0, (2.0 * std::f64::consts::PI.sqrt()).ln())
        } else {
            (1.0, ln_gamma(d))
        };
        for (j, &p) in psi.iter().enumerate().skip(1) {
            let j = j as f64;
            let oracle = sign * (ln_gamma(j + d) - ln_abs_gd - ln_gamma(j + 1.0)).exp();
            worst_gamma = worst_gamma.max(((p - oracle) / oracle).abs());
        }
    }
    let mut worst_sd = 0.0f64;
    for n in [10usize, 100, 1000] {
        let rw = ProcessSpec::fractional_type2(1.0, vec![1.0]).unwrap();
        let v = exact_sd(&rw, n).unwrap().powi(2);
        worst_sd = worst_sd.max((v - n as f64).abs() / n as f64);
        for a in [0.25, 0.5, 0.75] {
            let mi = ProcessSpec::mildly_integrated(a, vec![1.0]).unwrap();
            let r = 1.0 - (n as f64).powf(-a);
            let oracle = (1.0 - r.powi(2 * n as i32)) / (1.0 - r * r);
            let v = exact_sd(&mi, n).unwrap().powi(2);
            worst_sd = worst_sd.max((v - oracle).abs() / oracle);
        }
    }
    let c2 = (chi2_quantile(2, 0.9).unwrap() - 4.605_170_2).abs();
    let c1 = (chi2_quantile(1, 0.9).unwrap() - 2.705_543_5).abs();
    let q11 = (KernelSpec::gaussian().q11() - 0.5 / std::f64::consts::PI.sqrt()).abs();
    let pass = worst_gamma <= 1e-12 && worst_sd <= 1e-10 && c2 <= 1e-7 && c1 <= 1e-7 && q11 <= 1e-8;
    Outcome::new(
        pass,
        format!(
            "gamma ratio {worst_gamma:.1e} (1e-12), exact_sd {worst_sd:.1e} (1e-10), chi2 df=2 {c2:.1e}, df=1 {c1:.1e} (1e-7), Q11 {q11:.1e} (1e-8)"
        ),
    )
}

const DETERMINISM_DESIGN: &str = r#"{
  "processes": [{"kind": "fr2", "d": 0.5, "ma": [1, 0.5]}, {"kind": "ni"}],
  "n": [100, 200],
  "b": [-0.2, -0.1, -0.05],
  "p": [17, 25],
  "rho": [-0.5, 0, 0.5],
  "reps": 200,
  "alpha": 0.1,
  "alternative": null
}"#;

fn criterion_determinism() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let cfg = base.path().join("design.json");
    fs::write(&cfg, DETERMINISM_DESIGN).unwrap();
    let run = |threads: &str, k: usize| {
        let out = base.path().join(format!("t{threads}_{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_wnp"))
            .args([
                "mc-size",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "2024",
            ])
            .args([
                "--threads",
                threads,
                "--out",
                out.to_str().unwrap(),
                "--format",
                "both",
            ])
            .status()
            .unwrap();
        assert!(status.success());
        (
            fs::read(out.join("size.csv")).unwrap(),
            fs::read(out.join("size_full.csv")).unwrap(),
        )
    };
    let runs = [run("1", 0), run("1", 1), run("8", 0), run("8", 1)];
    let same = runs.iter().all(|r| *r == runs[0]);
    Outcome::new(
        same,
        "mc-size twice at 1 thread and twice at 8 threads: rounded and full-precision CSV byte-identical"
            .to_string()
            + if same { "" } else { " (MISMATCH)" },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("size table, fractional regressors", criterion_table1),
        ("size table, autoregressive regressors", criterion_table_f1),
        ("null distribution vs chi-square", criterion_null_shape),
        ("power spot checks", criterion_power),
        (
            "additive functional convergence (MI)",
            criterion_mi_additive,
        ),
        (
            "kernel functional convergence (FR2)",
            criterion_kernel_functional,
        ),
        ("t statistic normality", criterion_t_normality),
        ("analytic oracles", criterion_oracles),
        ("determinism across threads", criterion_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        failed += (!o.pass) as usize;
        println!(
            "criterion {} [{status}] {name}: {} ({:.0}s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        for note in &o.notes {
            println!("{note}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
