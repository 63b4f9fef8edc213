//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kms_stationary::evolve::{self, microcanonical_error};
use kms_stationary::experiment::{max_g_hat_on_grid, Experiment, ExperimentConfig, TargetConfig};
use kms_stationary::filter::{g_hat, nu, w_hat, FilterParams, Weighting};
use kms_stationary::fourier::{fourier_coefficients, l1_bound, tail_bound, FourierTable};
use kms_stationary::generator::{assemble_superoperator, build_exact, build_exact_weighted, LindbladGenerator};
use kms_stationary::linalg;
use kms_stationary::spectral::{build_chain_hamiltonian, diagonalize, pauli_jump_set, ChainModel, HamiltonianSpectrum};
use kms_stationary::statefn::{derivative_l1_norms, gibbs_phi, window_phi, TargetFunction, WindowSpec};
use kms_stationary::verify::{self, check_truncation_bounds, TruncationBounds};

type Outcome = (bool, String);

fn tfim(n: usize, h: f64, margin: f64) -> HamiltonianSpectrum {
    let hm = build_chain_hamiltonian(&ChainModel::TransverseFieldIsing { j: 1.0, h }, n).unwrap();
    diagonalize(&hm, margin).unwrap()
}

/// Spectrum rescaled to the target's half period.
fn target_for(spec: &HamiltonianSpectrum, kind: &TargetKind) -> (HamiltonianSpectrum, TargetFunction) {
    let s0 = spec.energy_bound();
    let t = match *kind {
        TargetKind::Gibbs(beta) => gibbs_phi(beta, spec.max_abs_energy(), s0, 2).unwrap(),
        TargetKind::Window(w) => window_phi(w, s0.max(w.min_half_period()), 2).unwrap(),
    };
    (spec.with_energy_bound(t.half_period()).unwrap(), t)
}

#[derive(Clone, Copy, Debug)]
enum TargetKind {
    Gibbs(f64),
    Window(WindowSpec),
}

fn window(b: f64, c: f64, delta: f64, eta: f64) -> WindowSpec {
    WindowSpec { b, c, delta, eta }
}

/// Targets of the detailed-balance criteria.
fn kms_targets() -> Vec<TargetKind> {
    let mut v: Vec<TargetKind> = [0.5, 1.0, 2.0].iter().map(|&b| TargetKind::Gibbs(b)).collect();
    for delta in [0.25, 0.5] {
        for eta in [1e-3, 1e-6] {
            v.push(TargetKind::Window(window(-1.2, 0.2, delta, eta)));
        }
    }
    v
}

struct Instance {
    is_gibbs: bool,
    spec: HamiltonianSpectrum,
    target: TargetFunction,
    filter: FilterParams,
    exact: LindbladGenerator,
}

fn kms_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for n in 1..=3 {
        let base = tfim(n, 1.0, 1.2);
        let props = pauli_jump_set(n).unwrap();
        for kind in kms_targets() {
            let (spec, target) = target_for(&base, &kind);
            let filter = FilterParams::for_target(&target);
            let exact = build_exact(&spec, &target, &filter, &props).unwrap();
            out.push(Instance {
                is_gibbs: matches!(kind, TargetKind::Gibbs(_)),
                spec,
                target,
                filter,
                exact,
            });
        }
    }
    out
}

fn c1_kms_jump(instances: &[Instance]) -> Outcome {
    let mut worst = 0.0f64;
    let mut weakest_gibbs = f64::INFINITY;
    let mut best_window = 0.0f64;
    let mut detected = 0;
    for inst in instances {
        for l in inst.exact.jumps() {
            worst = worst.max(verify::check_kms_condition(l, inst.exact.state()).unwrap());
        }
        let props = pauli_jump_set(inst.spec.dim().trailing_zeros() as usize).unwrap();
        let bad = build_exact_weighted(&inst.spec, &inst.target, &inst.filter, Weighting::SquareRoot, &props).unwrap();
        let control = bad
            .jumps()
            .iter()
            .map(|l| verify::check_kms_condition(l, inst.exact.state()).unwrap())
            .fold(0.0, f64::max);
        detected += (control >= 1e-3) as usize;
        if inst.is_gibbs {
            weakest_gibbs = weakest_gibbs.min(control);
        } else {
            best_window = best_window.max(control);
        }
    }
    // on sharp windows the filter suppresses cross-level amplitudes, and with them the control
    (
        worst <= 1e-9 && weakest_gibbs >= 1e-3 && best_window >= 1e-3,
        format!(
            "{} instances, max residual {worst:.2e} (<= 1e-9); square-root control >= 1e-3 on {detected}/{} \
             (weakest Gibbs {weakest_gibbs:.2e}, best window {best_window:.2e})",
            instances.len(),
            instances.len()
        ),
    )
}

fn c2_stationarity(instances: &[Instance]) -> Outcome {
    let worst = instances
        .iter()
        .map(|i| verify::stationarity_residual(&assemble_superoperator(&i.exact).unwrap(), &i.exact.sigma()))
        .fold(0.0, f64::max);
    (worst <= 1e-9, format!("max ‖L(σ)‖_F/‖L‖_F = {worst:.2e} (<= 1e-9)"))
}

fn c3_adjointness(instances: &[Instance]) -> Outcome {
    let mut worst = 0.0f64;
    let mut weakest_control = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (idx, inst) in instances.iter().enumerate() {
        let sup = assemble_superoperator(&inst.exact).unwrap();
        worst = worst.max(verify::check_kms_self_adjoint(&sup, inst.exact.state(), 20, idx as u64).unwrap());
        let g = linalg::random_hermitian(&mut rng, inst.spec.dim());
        let bad = inst.exact.clone().with_coherent(g).unwrap();
        let bad_sup = assemble_superoperator(&bad).unwrap();
        weakest_control =
            weakest_control.min(verify::check_kms_self_adjoint(&bad_sup, inst.exact.state(), 20, idx as u64).unwrap());
    }
    (
        worst <= 1e-8 && weakest_control >= 1e-3,
        format!("max defect {worst:.2e} (<= 1e-8), weakest random-G control {weakest_control:.2e} (>= 1e-3)"),
    )
}

fn two_qubit_configs() -> Vec<ExperimentConfig> {
    let gibbs = ExperimentConfig {
        n_sites: 2,
        target: TargetConfig::Gibbs { beta: 1.0 },
        ..Default::default()
    };
    let win = ExperimentConfig {
        n_sites: 2,
        target: TargetConfig::Window {
            b: -2.5,
            c: -0.5,
            delta: 0.5,
            eta: 1e-3,
        },
        margin: 1.2,
        ..Default::default()
    };
    vec![gibbs, win]
}

fn c4_cptp() -> Outcome {
    let mut min_eig = f64::INFINITY;
    let mut trace = 0.0f64;
    for cfg in two_qubit_configs() {
        let ex = Experiment::build(&cfg).unwrap();
        let (a, b) = ex.superoperators().unwrap();
        for sup in [&a, &b] {
            for t in [0.1, 1.0, 10.0] {
                let c = verify::check_cptp(sup, t).unwrap();
                min_eig = min_eig.min(c.min_choi_eigenvalue);
                trace = trace.max(c.trace_residual);
            }
        }
    }
    (
        min_eig >= -1e-9 && trace <= 1e-10,
        format!("min Choi eigenvalue {min_eig:.2e} (>= -1e-9), trace residual {trace:.2e} (<= 1e-10)"),
    )
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn c5_truncation() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    let mut tightest = 0.0f64;
    let mut slopes = Vec::new();
    let mut cfgs = two_qubit_configs();
    cfgs.push(ExperimentConfig {
        n_sites: 2,
        target: TargetConfig::Window {
            b: -2.5,
            c: -0.5,
            delta: 0.25,
            eta: 1e-3,
        },
        ..Default::default()
    });
    for cfg in cfgs {
        let is_window = matches!(cfg.target, TargetConfig::Window { .. });
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for m in [4usize, 8, 16, 32] {
            let ex = Experiment::build(&ExperimentConfig {
                m_override: Some(m),
                ..cfg.clone()
            })
            .unwrap();
            let bounds = TruncationBounds {
                jump_tail: ex.truncation.jump_tail_bound,
                coherent_tail: ex.truncation.coherent_tail_bound,
            };
            let chk = check_truncation_bounds(&ex.exact, &ex.truncated, &bounds, 0.0).unwrap();
            checked += chk.jumps.len() + 1;
            violations += chk.violation as usize;
            for &(e, b) in chk.jumps.iter().chain(std::iter::once(&chk.coherent)) {
                tightest = tightest.max(e / b);
            }
            let err = chk.jumps.iter().map(|j| j.0).fold(0.0, f64::max);
            xs.push((m as f64).ln());
            ys.push(err.ln());
        }
        if is_window {
            slopes.push(slope(&xs, &ys));
        }
    }
    let k = 2.0;
    let worst_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (
        violations == 0 && worst_slope <= -(k - 1.0) + 0.5,
        format!(
            "{checked} comparisons, {violations} violations, max measured/bound {tightest:.2e}; window log-log slopes {slopes:.2?} (<= {:.1})",
            -(k - 1.0) + 0.5
        ),
    )
}

/// Brute-force tables at `M = 256` and norm estimates for the tail/l1 criteria.
struct BigTables {
    label: &'static str,
    s: f64,
    tables: Vec<(FourierTable, kms_stationary::statefn::DerivativeNorms)>,
}

fn big_tables() -> Vec<BigTables> {
    let base = tfim(2, 1.0, 1.2);
    let kinds = [
        ("gibbs", TargetKind::Gibbs(1.0)),
        ("window", TargetKind::Window(window(-2.5, -0.5, 0.5, 1e-3))),
    ];
    kinds
        .iter()
        .map(|(label, kind)| {
            let (_, t) = target_for(&base, kind);
            let p = FilterParams::for_target(&t);
            let s = t.half_period();
            let g = |a: f64, b: f64| Complex64::new(g_hat(&t, &p, a, b), 0.0);
            let w = |a: f64, b: f64| w_hat(&t, a, b);
            let tables = vec![
                (
                    fourier_coefficients(g, s, 256, 4096).unwrap(),
                    derivative_l1_norms(g, s, 2, 1024).unwrap(),
                ),
                (
                    fourier_coefficients(w, s, 256, 4096).unwrap(),
                    derivative_l1_norms(w, s, 2, 1024).unwrap(),
                ),
            ];
            BigTables { label, s, tables }
        })
        .collect()
}

fn c6_tail(big: &[BigTables]) -> Outcome {
    let mut ok = true;
    let mut tightest = 0.0f64;
    for b in big {
        for (table, norms) in &b.tables {
            for m in [8usize, 16, 32] {
                let mass = table.tail_mass(m);
                let bound = tail_bound(b.s, 2, m, norms).unwrap();
                ok &= mass <= bound;
                tightest = tightest.max(mass / bound);
            }
        }
    }
    (ok, format!("tail mass at M in {{8,16,32}} vs bound, max ratio {tightest:.2e} (<= 1)"))
}

fn c7_l1(big: &[BigTables]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in big {
        for ((table, norms), name) in b.tables.iter().zip(["Z_g", "Z_w"]) {
            let bound = l1_bound(b.s, 2, norms).unwrap();
            ok &= table.z() <= bound;
            parts.push(format!("{} {name} {:.3} <= {:.1}", b.label, table.z(), bound));
        }
    }
    (ok, parts.join(", "))
}

fn c8_filter(instances: &[Instance]) -> Outcome {
    let mut gmax = 0.0f64;
    for inst in instances {
        gmax = gmax.max(max_g_hat_on_grid(&inst.target, &inst.filter, 512));
    }
    for path in shipped_configs() {
        let cfg = ExperimentConfig::from_path(&path).unwrap();
        let ex = Experiment::build(&cfg).unwrap();
        gmax = gmax.max(max_g_hat_on_grid(&ex.target, &ex.filter, 512));
    }
    let p = FilterParams::new(7.3, 2.1).unwrap();
    let nu0 = (nu(&p, 0.0) - (-1.0f64).exp()).abs();
    (
        gmax <= 1.0 + 1e-12 && nu0 <= 1e-14,
        format!("max ĝ over 512² grids {gmax:.6} (<= 1 + 1e-12), |ν(0) - 1/e| = {nu0:.1e}"),
    )
}

/// `Σ |c_n|` for `|n|∞ ≤ m` by direct summation of the periodic trapezoidal rule.
fn direct_l1(f: impl Fn(f64, f64) -> f64, s: f64, m: i64, n: usize) -> f64 {
    let h = 2.0 * s / n as f64;
    let samples: Vec<f64> = (0..n * n).map(|i| f(-s + (i / n) as f64 * h, -s + (i % n) as f64 * h)).collect();
    let tau = PI / s;
    let mut total = 0.0;
    for n1 in -m..=m {
        for n2 in -m..=m {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let e1 = -s + i as f64 * h;
                for j in 0..n {
                    let e2 = -s + j as f64 * h;
                    let ph = -tau * (n1 as f64 * e1 + n2 as f64 * e2);
                    acc += Complex64::from_polar(samples[i * n + j], ph);
                }
            }
            total += acc.norm() / (n * n) as f64;
        }
    }
    total
}

fn c9_block_encoding() -> Outcome {
    let mut dev = 0.0f64;
    let mut alpha_err = 0.0f64;
    for cfg in two_qubit_configs() {
        let ex = Experiment::build(&ExperimentConfig {
            block_encoding_m: 8,
            ..cfg
        })
        .unwrap();
        let checks = ex.block_encoding().unwrap();
        let t = &ex.target;
        let oracle = direct_l1(|a, b| g_hat(t, &ex.filter, a, b), t.half_period(), 8, 256);
        for c in &checks {
            dev = dev.max(c.deviation);
            alpha_err = alpha_err.max((c.alpha - oracle).abs() / oracle);
        }
    }
    (
        dev <= 1e-9 && alpha_err <= 1e-6,
        format!("max block deviation {dev:.2e} (<= 1e-9), α_L vs directly summed Z_g rel. diff {alpha_err:.1e}"),
    )
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_path(&path).unwrap()
}

fn c10_window_preparation() -> Outcome {
    let mut cfg = config("window_2q.json");
    let mut times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    times.extend((3..=20).map(|i| i as f64 * 10.0));
    cfg.times = times;
    cfg.initial_states = vec!["mixed".into(), "zero".into(), "top".into()];
    let ex = Experiment::build(&cfg).unwrap();
    let trajectories = ex.trajectories().unwrap();
    let mixed = &trajectories.iter().find(|(n, _)| n == "exact_mixed").unwrap().1;
    let final_distance = mixed.final_distance();
    let mut monotone = true;
    for (_, t) in &trajectories {
        monotone &= t.is_monotone(1e-9);
        if let Some(k) = &t.kernel_distances {
            monotone &= k.windows(2).all(|w| w[1] <= w[0] + 1e-9);
        }
    }
    let gap = evolve::lindbladian_spectrum_diagnostics(&ex.superoperators().unwrap().0)
        .unwrap()
        .spectral_gap;
    (
        final_distance <= 1e-6 && monotone,
        format!(
            "‖e^{{200L}}(I/4) - σ‖ = {final_distance:.2e} (<= 1e-6), spectral gap {gap:.3}, {} trajectories monotone: {monotone}",
            trajectories.len()
        ),
    )
}

fn c11_trace_norm_regime() -> Outcome {
    let cfg = config("ground_3q.json");
    let ex = Experiment::build(&cfg).unwrap();
    let sigma = ex.exact.sigma();
    let ground = ex.spectrum.projector(0);
    let dist = evolve::trace_distance(&sigma, &ground);
    let stat = verify::stationarity_residual(&ex.superoperators().unwrap().0, &sigma);
    let e = ex.spectrum.eigenvalues();
    let gap = e[1] - e[0];
    let TargetConfig::Window { delta, .. } = cfg.target else {
        return (false, "ground config is not a window".into());
    };

    // two levels, one inside the window and one at the floor
    let eta = 1e-6;
    let w = window(-1.2, -0.8, 0.5, eta);
    let base = tfim(1, 1.0, 1.0);
    let (spec, t) = target_for(&base, &TargetKind::Window(w));
    let report = microcanonical_error(&spec, &w, &t).unwrap();
    let closed = eta / (1.0 + eta);
    let two_level = (report.exact_distance - closed).abs();
    (
        dist <= 1e-8 && stat <= 1e-9 && delta < gap && two_level <= 1e-12,
        format!(
            "ground-window fixed point vs ground projector {dist:.2e} (<= 1e-8, δ={delta} < gap {gap:.3}, stationarity {stat:.1e}); two-level |d - η/(1+η)| = {two_level:.1e}"
        ),
    )
}

fn c12_derivative_scaling() -> Outcome {
    let base = tfim(2, 1.0, 1.5);
    let mut ratios = Vec::new();
    let mut ok = true;
    for k in [2usize, 3] {
        let norm_at = |delta: f64| {
            let w = window(-1.0, 0.5, delta, 1e-3);
            let t = window_phi(w, base.energy_bound(), k).unwrap();
            let p = FilterParams::for_target(&t);
            derivative_l1_norms(|a, b| Complex64::new(g_hat(&t, &p, a, b), 0.0), t.half_period(), k, 1024)
                .unwrap()
                .d1
        };
        let ratio = norm_at(0.25) / norm_at(0.5);
        let expected = 2f64.powi(k as i32);
        ok &= ratio >= expected / 4.0 && ratio <= expected * 4.0;
        ratios.push(format!("k={k}: {ratio:.2} (expected {expected} within x4)"));
    }
    (ok, format!("‖∂₁^k ĝ‖(δ/2)/‖∂₁^k ĝ‖(δ): {}", ratios.join(", ")))
}

fn c13_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_kms-stationary");
    let cfg = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/gibbs_2q.json");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(bin)
            .args(["verify", "--seed", "11", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(d.path())
            .status()
            .unwrap();
        if !status.success() {
            return (false, format!("verify exited with {status}"));
        }
    }
    let mut files = 0;
    let mut identical = true;
    for name in ["report.txt", "report.csv", "fourier_g.csv", "fourier_w.csv", "generator_exact/sigma.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        identical &= a == b;
        files += 1;
    }
    (identical, format!("{files} output files byte-identical across two runs: {identical}"))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let start = Instant::now();
    let instances = kms_instances();
    let big = big_tables();
    let criteria: Vec<Criterion<'_>> = vec![
        ("kms jump condition", Box::new(|| c1_kms_jump(&instances))),
        ("stationarity", Box::new(|| c2_stationarity(&instances))),
        ("kms self-adjointness", Box::new(|| c3_adjointness(&instances))),
        ("cptp", Box::new(c4_cptp)),
        ("truncation bounds", Box::new(c5_truncation)),
        ("fourier tail bounds", Box::new(|| c6_tail(&big))),
        ("fourier l1 bounds", Box::new(|| c7_l1(&big))),
        ("filter boundedness", Box::new(|| c8_filter(&instances))),
        ("block encoding", Box::new(c9_block_encoding)),
        ("window preparation", Box::new(c10_window_preparation)),
        ("trace-norm regime", Box::new(c11_trace_norm_regime)),
        ("derivative scaling", Box::new(c12_derivative_scaling)),
        ("determinism", Box::new(c13_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (pass, detail) = run();
        failed += !pass as usize;
        println!(
            "[{}] {:>2} {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} passed in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
