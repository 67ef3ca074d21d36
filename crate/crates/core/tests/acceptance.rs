use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use thinhom::corrector::{convergence_study, ConvergenceReport, ErrorColumn, StudyParams};
use thinhom::expr::{parse, Expr, Var};
use thinhom::fem::{solve_cell, solve_homog_1d, SolverOptions};
use thinhom::geometry::{build_partition, Bounds, ProfileSpec};
use thinhom::homogenize::{compute_effective, run_pipeline, EffectiveRow, EffectiveTable, PipelineParams};
use thinhom::unfolding::{
    adjoint_gap, char_gap, left_inverse_residual, uci_gap, unfold, FnField, ThinDomain, ThinQuadrature, UnfoldGrid,
};

fn verdict(id: u32, name: &str, checks: &[(String, bool)]) {
    let pass = checks.iter().all(|(_, ok)| *ok);
    let line = format!("criterion {id} {}: {name}", if pass { "PASS" } else { "FAIL" });
    // Written to the raw handle so the verdict survives libtest output capture.
    let _ = writeln!(std::io::stderr(), "{line}");
    println!("{line}");
    for (what, ok) in checks {
        println!("  [{}] {what}", if *ok { "ok" } else { "FAIL" });
    }
    assert!(pass, "criterion {id} failed");
}

fn flat() -> ProfileSpec {
    ProfileSpec::parse("2", "1", Bounds::new(1.0, 3.0, 0.5, 1.5).unwrap()).unwrap()
}

fn periodic() -> ProfileSpec {
    ProfileSpec::parse("2+cos(2*pi*y)", "1", Bounds::new(1.0, 3.0, 0.5, 1.5).unwrap()).unwrap()
}

fn model() -> ProfileSpec {
    ProfileSpec::parse(
        "2 + cos(2*pi*y/(1+0.5*x*(1-x)))",
        "1+0.5*x*(1-x)",
        Bounds::new(1.0, 3.0, 1.0, 1.25).unwrap(),
    )
    .unwrap()
}

fn forcing() -> Expr {
    parse("1+cos(pi*x)", &[Var::X]).unwrap()
}

fn exact_flat(x: f64) -> f64 {
    1.0 + (PI * x).cos() / (1.0 + PI * PI)
}

#[test]
fn criterion_1_flat_profile_exactness() {
    let start = Instant::now();
    let spec = flat();
    let cell = solve_cell(&spec, 0.5, 64, 64, &SolverOptions::default()).unwrap();
    let run = run_pipeline(&spec, &forcing(), &PipelineParams::default()).unwrap();
    let worst = run
        .homog
        .nodes
        .iter()
        .zip(&run.homog.u)
        .map(|(x, u)| (u - exact_flat(*x)).abs())
        .fold(0.0, f64::max);
    let seconds = start.elapsed().as_secs_f64();
    verdict(
        1,
        "flat-profile exactness",
        &[
            (format!("max|X| = {:e} <= 1e-10", cell.max_abs()), cell.max_abs() <= 1e-10),
            (format!("|r - 2| = {:e} <= 1e-10", (cell.r - 2.0).abs()), (cell.r - 2.0).abs() <= 1e-10),
            (format!("L-inf error of u at n_1d = 512: {worst:e} <= 1e-4"), worst <= 1e-4),
            (format!("runtime {seconds:.2} s < 5 s"), seconds < 5.0),
        ],
    );
}

#[test]
fn criterion_2_cell_energy_identity() {
    let start = Instant::now();
    let spec = periodic();
    let opts = SolverOptions::default();
    let mut checks = Vec::new();
    for j in 1..=9 {
        let x = j as f64 / 10.0;
        let fine = solve_cell(&spec, x, 64, 64, &opts).unwrap();
        let coarse = solve_cell(&spec, x, 32, 32, &opts).unwrap();
        let gap = (fine.r - fine.energy_r).abs();
        checks.push((
            format!("x = {x}: |r - energy_r| = {gap:e} <= 1e-6 max(1, r)"),
            gap <= 1e-6 * fine.r.max(1.0),
        ));
        let bound = fine.p / fine.period;
        checks.push((
            format!("x = {x}: 0 < r = {:.6} <= p/l = {bound:.6}", fine.r),
            fine.r > 0.0 && fine.r <= bound,
        ));
        let rel = (coarse.r - fine.r).abs() / fine.r;
        checks.push((
            format!("x = {x}: r(32) = {:.6}, r(64) = {:.6}, relative gap {rel:.2e} <= 1e-3", coarse.r, fine.r),
            rel <= 1e-3,
        ));
    }
    let seconds = start.elapsed().as_secs_f64();
    checks.push((format!("runtime {seconds:.2} s < 10 s"), seconds < 10.0));
    verdict(2, "cell energy identity and refinement", &checks);
}

#[test]
fn criterion_3_unfolding_identities() {
    let start = Instant::now();
    let spec = model();
    let eps = 1.0 / 16.0;
    let p = build_partition(&spec, eps).unwrap();
    let grid = UnfoldGrid::new(&spec, 256, 64, 64).unwrap();
    let domain = ThinDomain::new(spec, eps);
    let quad = ThinQuadrature::new(&domain, &p, 64, 64).unwrap();
    let one = FnField::new(domain.clone(), |_, _| 1.0);
    let x = FnField::new(domain.clone(), |x, _| x);
    let phi = FnField::new(domain.clone(), |x, y| 1.0 + x + 4.0 * y);
    let psi = |x: f64, y1: f64, y2: f64| (PI * x).cos() * (1.0 + y1) * (1.0 + y2);
    let points = p.points.clone();
    let step = FnField::new(domain.clone(), move |x, _| {
        let k = points.partition_point(|&t| t <= x).saturating_sub(1);
        1.0 + (k as f64).sin()
    });
    let g_one = uci_gap(&one, &p, &grid, &quad).unwrap();
    let g_x = uci_gap(&x, &p, &grid, &quad).unwrap();
    let adj = adjoint_gap(&phi, &psi, &p, &grid, &quad, 16).unwrap();
    let left = left_inverse_residual(&step, &p, &grid, &quad, 16).unwrap();

    let f = |x: f64, y: f64| (3.0 * x).sin() + y / eps;
    let g = |x: f64, y: f64| x * x - y;
    let tf = unfold(&FnField::new(domain.clone(), f), &p, &grid).unwrap();
    let tg = unfold(&FnField::new(domain.clone(), g), &p, &grid).unwrap();
    let (a, b) = (1.75, -0.5);
    let lin = unfold(&FnField::new(domain.clone(), move |x, y| a * f(x, y) + b * g(x, y)), &p, &grid).unwrap();
    let prod = unfold(&FnField::new(domain, move |x, y| f(x, y) * g(x, y)), &p, &grid).unwrap();
    let linear = (0..grid.len()).all(|i| lin.values[i] == a * tf.values[i] + b * tg.values[i]);
    let product = (0..grid.len()).all(|i| prod.values[i] == tf.values[i] * tg.values[i]);
    let seconds = start.elapsed().as_secs_f64();
    verdict(
        3,
        "unfolding identities at eps = 1/16 on the (256, 64, 64) grid",
        &[
            (format!("u.c.i. gap for 1: {:.3e} <= 1%", g_one.gap), g_one.gap <= 1e-2),
            (format!("u.c.i. gap for x: {:.3e} <= 1%", g_x.gap), g_x.gap <= 1e-2),
            (format!("adjointness gap: {:.3e} <= 1%", adj.gap), adj.gap <= 1e-2),
            (
                format!("left-inverse residual for per-interval constants: {left:e} (zero up to rounding of the z-average)"),
                left <= 1e-14,
            ),
            ("linearity exact nodewise".to_string(), linear),
            ("product exact nodewise".to_string(), product),
            (format!("runtime {seconds:.2} s < 30 s"), seconds < 30.0),
        ],
    );
}

#[test]
fn criterion_4_domain_convergence() {
    let start = Instant::now();
    let spec = model();
    let grid = UnfoldGrid::new(&spec, 256, 64, 64).unwrap();
    let tolerance = 0.9 + 2.0 / 64.0;
    let gaps: Vec<f64> = [0.125, 0.0625, 0.03125]
        .iter()
        .map(|&eps| {
            let p = build_partition(&spec, eps).unwrap();
            char_gap(&ThinDomain::new(spec.clone(), eps), &p, &grid).unwrap()
        })
        .collect();
    let mut checks = vec![(format!("char_gap = {gaps:?}"), true)];
    for w in gaps.windows(2) {
        let ratio = w[1] / w[0];
        checks.push((
            format!("ratio {ratio:.4} < 1 and <= {tolerance:.4}"),
            w[1] < w[0] && ratio <= tolerance,
        ));
    }
    let seconds = start.elapsed().as_secs_f64();
    checks.push((format!("runtime {seconds:.2} s < 30 s"), seconds < 30.0));
    verdict(4, "characteristic-function convergence", &checks);
}

fn describe(report: &ConvergenceReport) -> Vec<String> {
    report
        .rows
        .iter()
        .map(|r| {
            format!(
                "eps = {}: e_L2 = {:.4e}, e_H1_corr = {:.4e}, e_unfold_grad = {:.4e}, char_gap = {:.4e}, averaged gradient = {:.4e}",
                r.eps, r.e_l2, r.e_h1_corr, r.e_unfold_grad, r.char_gap, r.averaged_grad
            )
        })
        .collect()
}

#[test]
fn criterion_5_corrector_convergence() {
    let start = Instant::now();
    let eps = [0.125, 0.0625, 0.03125];
    let params = StudyParams::default();
    let oscillating = convergence_study(&model(), &forcing(), &eps, &params).unwrap();
    let baseline = convergence_study(&flat(), &forcing(), &eps, &params).unwrap();
    let mut checks: Vec<(String, bool)> = describe(&oscillating).into_iter().map(|d| (d, true)).collect();
    for column in [ErrorColumn::L2, ErrorColumn::H1Corr, ErrorColumn::UnfoldGrad] {
        for (i, ratio) in oscillating.ratios(column).into_iter().enumerate() {
            checks.push((
                format!("model {} ratio {} -> {}: {ratio:.4} <= 0.85", column.name(), eps[i], eps[i + 1]),
                ratio <= 0.85,
            ));
        }
    }
    checks.extend(describe(&baseline).into_iter().map(|d| (format!("flat {d}"), true)));
    for column in [ErrorColumn::L2, ErrorColumn::H1Corr, ErrorColumn::UnfoldGrad] {
        let values: Vec<f64> = baseline.rows.iter().map(|r| column.of(r)).collect();
        let hi = values.iter().copied().fold(0.0, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push((format!("flat max {} = {hi:.3e} <= 5e-3", column.name()), hi <= 5e-3));
        checks.push((
            format!("flat {} spread max/min = {:.3} <= 1.2", column.name(), hi / lo),
            hi <= 1.2 * lo,
        ));
    }
    let seconds = start.elapsed().as_secs_f64();
    checks.push((format!("runtime {seconds:.2} s < 300 s"), seconds < 300.0));
    verdict(5, "corrector convergence sweep at default resolution", &checks);
}

#[test]
fn criterion_6_purely_periodic_regression() {
    let spec = periodic();
    let f = forcing();
    let params = PipelineParams::default();
    let (table, _) = compute_effective(&spec, &f, &params).unwrap();
    let r0 = table.rows()[0].r;
    let spread = table
        .rows()
        .iter()
        .map(|row| (row.r - r0).abs() / r0)
        .fold(0.0, f64::max);
    let run = run_pipeline(&spec, &f, &params).unwrap();
    let single = solve_cell(&spec, 0.5, params.n1, params.n2, &params.solver).unwrap();
    let constant = EffectiveTable::new(vec![
        EffectiveRow { x: 0.0, r: single.r, p: single.p, l: single.period, f0: 0.0 },
        EffectiveRow { x: 1.0, r: single.r, p: single.p, l: single.period, f0: 0.0 },
    ]);
    let shortcut = solve_homog_1d(&constant, params.n_1d, &f).unwrap();
    let diff = run
        .homog
        .u
        .iter()
        .zip(&shortcut.u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    verdict(
        6,
        "purely periodic regression",
        &[
            (format!("r = {r0:.8}, relative spread across anchors {spread:e} <= 1e-10"), spread <= 1e-10),
            (format!("pipeline vs single-cell solve: L-inf {diff:e} <= 1e-6"), diff <= 1e-6),
        ],
    );
}

#[test]
fn criterion_7_partition_validity() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(20_240_607);
    let specs = [periodic(), model()];
    let mut checks = Vec::new();
    for _ in 0..20 {
        let eps: f64 = 0.25 - rng.gen_range(0.0..0.25);
        for spec in &specs {
            let p = build_partition(spec, eps).unwrap();
            let violations = p.invariant_violations(spec, 1e-9);
            checks.push((
                format!("eps = {eps:.6}, {} intervals: {violations:?}", p.len()),
                violations.is_empty(),
            ));
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    checks.push((format!("runtime {seconds:.2} s < 5 s"), seconds < 5.0));
    verdict(7, "partition validity for 20 random eps and both period functions", &checks);
}

fn study_csv(dir: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_thinhom"))
        .arg("--config")
        .arg(dir.join("study.conf"))
        .arg("study")
        .status()
        .unwrap();
    assert!(status.success());
    std::fs::read(dir.join("out").join("study.csv")).unwrap()
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("study.conf"),
        format!(
            "[domain]\nG = 2 + cos(2*pi*y/(1+0.5*x*(1-x)))\nl = 1+0.5*x*(1-x)\nG0 = 1\nG1 = 3\nl0 = 1\nl1 = 1.25\n\
             [forcing]\nf = 1 + cos(pi*x)\n[study]\neps = 0.125, 0.0625, 0.03125\n[output]\ndirectory = {}\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let first = study_csv(dir.path());
    let second = study_csv(dir.path());
    verdict(
        8,
        "study reruns are bit-identical",
        &[(format!("{} bytes, identical: {}", first.len(), first == second), first == second)],
    );
}
