mod common;

use std::fs;
use std::process::Command;

use gsp::ansatz::{build_gsp_circuit, param_init};
use gsp::qcore::uhlmann_fidelity;
use gsp::rng;
use gsp::runner::{run_grid, run_point, ExperimentConfig, RESULTS_HEADER};
use gsp::sim::{builtin_profiles, execute_reduced, profile_by_name, NoiseProfile};
use gsp::thermo::{exact_gibbs, free_energy, GibbsTarget, TfimParams};
use gsp::transpile::{gate_counts, lower, NativeGateSet};
use gsp::verify::{beta_sweep, default_sweep_grid, delta_beta_curve, grid_step};
use gsp::vqa::{cost_from_states, evaluate_cost, train, CostMode, ShotsPlan, TrainConfig};

fn trained_n2(beta: f64, seed: u64) -> gsp::ansatz::ParamSet {
    let t = GibbsTarget::new(TfimParams::new(2, 1.0).unwrap(), beta).unwrap();
    let cfg = TrainConfig { restarts: 4, mode: CostMode::Exact, ..Default::default() };
    train(&t, &NoiseProfile::noiseless(), &cfg, seed).unwrap().best().result.best_params.clone()
}

#[test]
fn fidelity_falls_as_two_qubit_error_grows() {
    let aria = profile_by_name("aria1").unwrap();
    for (k, beta) in [1.0, 2.0, 5.0].into_iter().enumerate() {
        let params = trained_n2(beta, 40 + k as u64);
        let c = build_gsp_circuit(&params).unwrap();
        let gibbs = exact_gibbs(&GibbsTarget::new(TfimParams::new(2, 1.0).unwrap(), beta).unwrap());
        let fids: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|&f| uhlmann_fidelity(&execute_reduced(&c, &aria.scaled_p2(f)).unwrap().system, &gibbs).unwrap())
            .collect();
        assert!(fids.windows(2).all(|w| w[1] <= w[0] + 1e-12), "beta={beta}: {fids:?}");
    }
}

#[test]
fn noiseless_ancilla_is_diagonal_and_exact_cost_is_free_energy() {
    let quiet = NoiseProfile::noiseless();
    for seed in 0..10 {
        let n = 2 + (seed % 2) as usize;
        let params = param_init(n, 1, 1, seed).unwrap();
        let states = execute_reduced(&build_gsp_circuit(&params).unwrap(), &quiet).unwrap();
        let a = states.ancilla.matrix();
        let off = (0..a.nrows())
            .flat_map(|i| (0..a.ncols()).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-10);

        let t = GibbsTarget::new(TfimParams::new(n, 0.8).unwrap(), 1.3).unwrap();
        let cost = cost_from_states(&states, &t, 0.0, CostMode::Exact, &mut rng::from_seed(0)).unwrap();
        assert!((cost.cost - free_energy(&states.system, &t).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn shot_cost_error_halves_when_shots_quadruple() {
    let quiet = NoiseProfile::noiseless();
    let params = param_init(2, 1, 1, 3).unwrap();
    let t = GibbsTarget::new(TfimParams::new(2, 1.0).unwrap(), 1.0).unwrap();
    let mut r = rng::from_seed(0);
    let exact = evaluate_cost(&params, Default::default(), &t, &quiet, CostMode::Exact, &mut r).unwrap().cost;
    let mean_err = |shots: u64| {
        let plan = ShotsPlan { system_x: shots, system_z: shots, ancilla_z: shots };
        (0..20u64)
            .map(|s| {
                let mut r = rng::stream(s, &[shots]);
                (evaluate_cost(&params, Default::default(), &t, &quiet, CostMode::Shots(plan), &mut r).unwrap().cost - exact)
                    .abs()
            })
            .sum::<f64>()
            / 20.0
    };
    let (e1, e4) = (mean_err(2048), mean_err(8192));
    let ratio = e4 / e1;
    assert!((0.25..=0.75).contains(&ratio), "errors {e1} -> {e4}, ratio {ratio}");
}

#[test]
fn sweep_refinement_moves_beta_star_at_most_one_step() {
    let p = TfimParams::new(2, 1.0).unwrap();
    let coarse = default_sweep_grid();
    let mut fine = coarse.clone();
    fine.extend(coarse[1..].windows(2).map(|w| 0.5 * (w[0] + w[1])));
    fine.sort_by(f64::total_cmp);
    let step = grid_step(&coarse);
    for seed in 0..10u64 {
        let rho = common::random_density(2, &mut rng::from_seed(seed));
        let a = beta_sweep(&rho, &p, 1.0, &coarse).unwrap();
        let b = beta_sweep(&rho, &p, 1.0, &fine).unwrap();
        assert!((a.beta_star - b.beta_star).abs() <= step + 1e-12, "{} vs {}", a.beta_star, b.beta_star);
    }
}

#[test]
fn noise_never_significantly_cools() {
    let grid = default_sweep_grid();
    let step = grid_step(&grid);
    let cfg = TrainConfig { restarts: 3, ..Default::default() };
    let p = TfimParams::new(2, 1.0).unwrap();
    for (k, profile) in builtin_profiles().into_iter().filter(|p| !p.is_noiseless()).enumerate() {
        for pt in delta_beta_curve(&profile, &p, &[1.0, 5.0], &cfg, 1024, &grid, 90 + k as u64).unwrap() {
            assert!(pt.sweep.delta_beta >= -step, "{} beta={} delta={}", profile.name, pt.beta, pt.sweep.delta_beta);
        }
    }
}

#[test]
fn two_qubit_count_slope_matches_layer_structure() {
    for (la, ls) in [(1, 1), (2, 1), (1, 2)] {
        let counts: Vec<usize> = (2..=6)
            .map(|n| {
                let c = build_gsp_circuit(&param_init(n, la, ls, n as u64).unwrap()).unwrap();
                gate_counts(&lower(&c, NativeGateSet::Zz).unwrap()).two_qubit
            })
            .collect();
        for w in counts.windows(2) {
            assert_eq!(w[1] - w[0], la + 1 + 2 * ls, "layers ({la},{ls}): {counts:?}");
        }
    }
}

#[test]
fn lowering_is_deterministic() {
    let c = build_gsp_circuit(&param_init(3, 1, 1, 5).unwrap()).unwrap();
    for gs in [NativeGateSet::Ms, NativeGateSet::Zz] {
        assert_eq!(lower(&c, gs).unwrap().to_text(), lower(&c, gs).unwrap().to_text());
    }
}

fn small_config(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(vec![2], vec![1.0], vec![1e-8, 1.0], "noiseless");
    cfg.restarts = 2;
    cfg.max_iterations = 60;
    cfg.output_directory = dir.to_path_buf();
    cfg
}

#[test]
fn identical_configs_give_identical_results_csv() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        let cfg = small_config(d.path());
        gsp::runner::report(&run_grid(&cfg).unwrap(), d.path()).unwrap();
    }
    let a = fs::read(d1.path().join("results.csv")).unwrap();
    let b = fs::read(d2.path().join("results.csv")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with(RESULTS_HEADER));
}

#[test]
fn three_by_three_by_three_grid_has_27_points() {
    let mut cfg = ExperimentConfig::new(vec![2, 3, 4], vec![0.5, 1.0, 1.5], vec![1e-8, 1.0, 5.0], "aria1");
    cfg.restarts = 1;
    assert_eq!(cfg.points().len(), 27);
}

#[test]
fn high_fidelity_noiseless_points_pin_beta_star() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let step = grid_step(&cfg.sweep.grid());
    for point in cfg.points() {
        let m = run_point(&cfg, &point).metrics.expect("point succeeds");
        if m.fidelity >= 0.99 {
            assert!(m.delta_beta.abs() <= step, "beta={} delta={}", point.beta, m.delta_beta);
        }
    }
}

fn gsp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gsp")).args(args).output().expect("run gsp")
}

#[test]
fn cli_run_report_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg_path = dir.path().join("grid.toml");
    let mut cfg = small_config(&out);
    cfg.beta = vec![1.0];
    fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();

    let run = gsp(&["run", "--config", cfg_path.to_str().unwrap(), "--workers", "2"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + cfg.restarts);
    fs::remove_file(out.join("results.csv")).unwrap();
    assert!(gsp(&["report", "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap(), csv);

    fs::write(&cfg_path, "n = [2]\nbogus = 1\n").unwrap();
    assert_eq!(gsp(&["run", "--config", cfg_path.to_str().unwrap()]).status.code(), Some(3));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(gsp(&["gate-count", "--params", bad.to_str().unwrap()]).status.code(), Some(5));
    assert_eq!(gsp(&["exact-gibbs", "--n", "1"]).status.code(), Some(6));
    assert_eq!(gsp(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn cli_train_then_gate_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let t = gsp(&["train", "--n", "2", "--beta", "1", "--restarts", "2", "--max-iter", "20", "--out", d, "--seed", "4"]);
    assert!(t.status.success());
    let params = dir.path().join("params.json");
    let g = gsp(&["gate-count", "--params", params.to_str().unwrap(), "--gate-set", "zz"]);
    let text = String::from_utf8(g.stdout).unwrap();
    assert!(text.contains("two_qubit,7"), "{text}");
}

#[test]
fn shipped_configs_parse() {
    for name in ["aria1_grid.toml", "noiseless_smoke.toml"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.validate().unwrap();
    }
}
