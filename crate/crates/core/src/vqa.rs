//! Cost estimation for the variational free energy and its SPSA minimization.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_gsp_circuit_with, param_init, ParamSet, RpKind};
use crate::error::{Error, Result};
use crate::qcore::{qubit_bit, shannon_entropy, uhlmann_fidelity, DensityMatrix};
use crate::rng::{self, Rng};
use crate::sim::{
    apply_readout_noise, execute_reduced, outcome_probabilities, sample_local, Basis, Counts, NoiseProfile, Pauli,
    ReducedStates, Register,
};
use crate::thermo::{exact_gibbs, GibbsTarget, TfimParams};

/// `⟨H⟩` from X- and Z-basis outcome distributions on the system register.
pub fn energy_from_distributions(px: &[f64], pz: &[f64], p: &TfimParams) -> Result<f64> {
    let dim = 1usize << p.n;
    if px.len() != dim || pz.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: px.len().max(pz.len()) });
    }
    let sign = |b: usize| 1.0 - 2.0 * b as f64;
    let mut xx = 0.0;
    for (i, j) in p.bonds() {
        xx += px.iter().enumerate().map(|(b, &w)| w * sign(qubit_bit(b, p.n, i) ^ qubit_bit(b, p.n, j))).sum::<f64>();
    }
    let mut z = 0.0;
    for i in 0..p.n {
        z += pz.iter().enumerate().map(|(b, &w)| w * sign(qubit_bit(b, p.n, i))).sum::<f64>();
    }
    Ok(-0.5 * xx - p.h * z)
}

/// Energy estimate from measured histograms: bond terms from X-basis bit
/// parities, field terms from Z-basis bits.
pub fn estimate_energy(counts_x: &Counts, counts_z: &Counts, p: &TfimParams) -> Result<f64> {
    if counts_x.basis != Basis::X || counts_z.basis != Basis::Z {
        return Err(Error::InvalidParameter(format!(
            "energy needs X and Z basis counts, got {} and {}",
            counts_x.basis, counts_z.basis
        )));
    }
    for c in [counts_x, counts_z] {
        if c.register != Register::S {
            return Err(Error::InvalidParameter("energy counts must come from the system register".into()));
        }
        if c.width != p.n {
            return Err(Error::DimensionMismatch { expected: p.n, found: c.width });
        }
    }
    energy_from_distributions(&counts_x.frequencies()?, &counts_z.frequencies()?, p)
}

/// Plug-in entropy (nats) of Z-basis ancilla frequencies.
pub fn estimate_entropy(counts_z_ancilla: &Counts) -> Result<f64> {
    if counts_z_ancilla.basis != Basis::Z || counts_z_ancilla.register != Register::A {
        return Err(Error::InvalidParameter(format!(
            "entropy needs Z-basis ancilla counts, got basis={} register={}",
            counts_z_ancilla.basis, counts_z_ancilla.register
        )));
    }
    Ok(shannon_entropy(&counts_z_ancilla.frequencies()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotsPlan {
    pub system_x: u64,
    pub system_z: u64,
    pub ancilla_z: u64,
}

impl Default for ShotsPlan {
    fn default() -> Self {
        Self { system_x: 8192, system_z: 8192, ancilla_z: 16384 }
    }
}

/// `Exact` is the infinite-shot limit of `Shots`: the same estimators on
/// exact outcome distributions (readout confusion included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    Exact,
    Shots(ShotsPlan),
}

impl Default for CostMode {
    fn default() -> Self {
        CostMode::Shots(ShotsPlan::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub energy: f64,
    pub entropy: f64,
    pub beta: f64,
    pub cost: f64,
}

impl CostBreakdown {
    pub fn new(energy: f64, entropy: f64, beta: f64) -> Self {
        Self { energy, entropy, beta, cost: energy - entropy / beta }
    }
}

/// Estimates the cost from already-computed reduced states.
pub fn cost_from_states(
    states: &ReducedStates,
    target: &GibbsTarget,
    p_spam: f64,
    mode: CostMode,
    rng: &mut Rng,
) -> Result<CostBreakdown> {
    let beta = target.beta();
    if beta <= 0.0 {
        return Err(Error::InvalidParameter("cost requires beta > 0".into()));
    }
    let params = target.params();
    let n = params.n;
    match mode {
        CostMode::Exact => {
            let noisy = |rho: &DensityMatrix, basis: Pauli| -> Result<Vec<f64>> {
                let width = rho.num_qubits();
                Ok(apply_readout_noise(&outcome_probabilities(rho, &vec![basis; width])?, width, p_spam))
            };
            let px = noisy(&states.system, Pauli::X)?;
            let pz = noisy(&states.system, Pauli::Z)?;
            let pa = noisy(&states.ancilla, Pauli::Z)?;
            let energy = energy_from_distributions(&px, &pz, &params)?;
            Ok(CostBreakdown::new(energy, shannon_entropy(&pa), beta))
        }
        CostMode::Shots(plan) => {
            let cx = sample_local(&states.system, Basis::X, Register::S, plan.system_x, p_spam, rng)?;
            let cz = sample_local(&states.system, Basis::Z, Register::S, plan.system_z, p_spam, rng)?;
            let ca = sample_local(&states.ancilla, Basis::Z, Register::A, plan.ancilla_z, p_spam, rng)?;
            if cx.width != n {
                return Err(Error::DimensionMismatch { expected: n, found: cx.width });
            }
            let energy = estimate_energy(&cx, &cz, &params)?;
            Ok(CostBreakdown::new(energy, estimate_entropy(&ca)?, beta))
        }
    }
}

/// Builds the GSP circuit for `params`, runs it under `noise` and estimates
/// `tr{H ρ_S} − S(ρ_A)/β`.
pub fn evaluate_cost(
    params: &ParamSet,
    rp: RpKind,
    target: &GibbsTarget,
    noise: &NoiseProfile,
    mode: CostMode,
    rng: &mut Rng,
) -> Result<CostBreakdown> {
    if target.beta() <= 0.0 {
        return Err(Error::InvalidParameter("cost requires beta > 0".into()));
    }
    if params.n != target.params().n {
        return Err(Error::DimensionMismatch { expected: target.params().n, found: params.n });
    }
    let states = execute_reduced(&build_gsp_circuit_with(params, rp)?, noise)?;
    cost_from_states(&states, target, noise.p_spam, mode, rng)
}

/// Prepared system state for `params` under `noise`.
pub fn prepare_system_state(params: &ParamSet, rp: RpKind, noise: &NoiseProfile) -> Result<DensityMatrix> {
    Ok(execute_reduced(&build_gsp_circuit_with(params, rp)?, noise)?.system)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub max_iter: usize,
    /// Fixed `a`; `None` calibrates it from gradient probes.
    pub a: Option<f64>,
    pub c: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub stability: f64,
    /// Infinity norm of the first update step targeted by calibration.
    pub target_step: f64,
    pub calibration_probes: usize,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            a: None,
            c: 0.2,
            alpha: 0.602,
            gamma: 0.101,
            stability: 10.0,
            target_step: 0.1,
            calibration_probes: 10,
        }
    }
}

impl SpsaConfig {
    pub fn a_k(&self, a: f64, k: usize) -> f64 {
        a / (k as f64 + 1.0 + self.stability).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaResult {
    pub best_x: Vec<f64>,
    pub best_cost: f64,
    /// Cost at the initial point, then at the iterate after each update.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub a: f64,
}

fn rademacher(len: usize, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn checked(value: f64, iteration: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { iteration, value })
    }
}

/// Standard SPSA minimization; `objective` may be stochastic and draws from
/// the same stream as the perturbations.
pub fn spsa_minimize<F>(mut objective: F, x0: &[f64], cfg: &SpsaConfig, rng: &mut Rng) -> Result<SpsaResult>
where
    F: FnMut(&[f64], &mut Rng) -> Result<f64>,
{
    if x0.is_empty() {
        return Err(Error::InvalidParameter("SPSA needs at least one parameter".into()));
    }
    let shifted = |x: &[f64], d: &[f64], s: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + s * di).collect() };

    let a = match cfg.a {
        Some(a) => a,
        None => {
            let c0 = cfg.c_k(0);
            let mut total = 0.0;
            let probes = cfg.calibration_probes.max(1);
            for _ in 0..probes {
                let d = rademacher(x0.len(), rng);
                let fp = checked(objective(&shifted(x0, &d, c0), rng)?, 0)?;
                let fm = checked(objective(&shifted(x0, &d, -c0), rng)?, 0)?;
                total += ((fp - fm) / (2.0 * c0)).abs();
            }
            let mean = total / probes as f64;
            let scale = (1.0 + cfg.stability).powf(cfg.alpha);
            if mean > 0.0 {
                cfg.target_step * scale / mean
            } else {
                cfg.target_step * scale
            }
        }
    };

    let mut x = x0.to_vec();
    let f0 = checked(objective(&x, rng)?, 0)?;
    let mut cost_trace = vec![f0];
    let (mut best_x, mut best_cost) = (x.clone(), f0);
    for k in 0..cfg.max_iter {
        let (ak, ck) = (cfg.a_k(a, k), cfg.c_k(k));
        let d = rademacher(x.len(), rng);
        let fp = checked(objective(&shifted(&x, &d, ck), rng)?, k + 1)?;
        let fm = checked(objective(&shifted(&x, &d, -ck), rng)?, k + 1)?;
        let g = (fp - fm) / (2.0 * ck);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= ak * g / di;
        }
        let f = checked(objective(&x, rng)?, k + 1)?;
        cost_trace.push(f);
        if f < best_cost {
            best_cost = f;
            best_x.clone_from(&x);
        }
    }
    Ok(SpsaResult { best_x, best_cost, cost_trace, iterations: cfg.max_iter, a })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: ParamSet,
    pub best_cost: f64,
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

impl OptResult {
    /// `iteration,cost` CSV of the trace.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,cost\n");
        for (i, c) in self.cost_trace.iter().enumerate() {
            out.push_str(&format!("{i},{c:.16e}\n"));
        }
        out
    }
}

/// SPSA over a GSP parameter set; the RNG stream is derived from `seed`.
pub fn optimize_params<F>(objective: F, init: &ParamSet, cfg: &SpsaConfig, seed: u64) -> Result<OptResult>
where
    F: FnMut(&[f64], &mut Rng) -> Result<f64>,
{
    init.validate()?;
    let mut r = rng::from_seed(seed);
    let res = spsa_minimize(objective, &init.to_flat(), cfg, &mut r)?;
    Ok(OptResult {
        best_params: init.with_flat(&res.best_x)?,
        best_cost: res.best_cost,
        cost_trace: res.cost_trace,
        iterations: res.iterations,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Highest fidelity of the prepared state with the exact Gibbs state.
    Fidelity,
    /// Lowest best cost; needs no oracle.
    #[default]
    Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub restarts: usize,
    pub ancilla_layers: usize,
    pub system_layers: usize,
    pub rp: RpKind,
    pub mode: CostMode,
    pub selection: Selection,
    pub spsa: SpsaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            ancilla_layers: 1,
            system_layers: 1,
            rp: RpKind::default(),
            mode: CostMode::default(),
            selection: Selection::default(),
            spsa: SpsaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub restart: usize,
    pub result: OptResult,
    /// Fidelity of the prepared (noisy) system state with the exact Gibbs state.
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
}

impl TrainOutcome {
    pub fn best(&self) -> &RestartOutcome {
        &self.restarts[self.best_restart]
    }

    pub fn best_fidelity(&self) -> f64 {
        self.best().fidelity
    }
}

/// Seeds `(init, optimizer)` used by restart `restart` of a training run.
pub fn restart_seeds(seed: u64, restart: usize) -> (u64, u64) {
    (rng::derive_seed(seed, &[restart as u64, 0]), rng::derive_seed(seed, &[restart as u64, 1]))
}

/// One restart: draw initial parameters, run SPSA on the cost, score the result.
pub fn train_restart(
    target: &GibbsTarget,
    noise: &NoiseProfile,
    cfg: &TrainConfig,
    seed: u64,
    restart: usize,
) -> Result<RestartOutcome> {
    let n = target.params().n;
    let (init_seed, opt_seed) = restart_seeds(seed, restart);
    let init = param_init(n, cfg.ancilla_layers, cfg.system_layers, init_seed)?;
    let objective = |x: &[f64], r: &mut Rng| -> Result<f64> {
        let p = init.with_flat(x)?;
        Ok(evaluate_cost(&p, cfg.rp, target, noise, cfg.mode, r)?.cost)
    };
    let result = optimize_params(objective, &init, &cfg.spsa, opt_seed)?;
    let rho = prepare_system_state(&result.best_params, cfg.rp, noise)?;
    let fidelity = uhlmann_fidelity(&rho, &exact_gibbs(target))?;
    Ok(RestartOutcome { restart, result, fidelity })
}

/// Best-of-restarts training; restarts run in parallel with independent streams.
pub fn train(target: &GibbsTarget, noise: &NoiseProfile, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    if target.beta() <= 0.0 {
        return Err(Error::InvalidParameter("training requires beta > 0".into()));
    }
    let restarts: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| train_restart(target, noise, cfg, seed, r))
        .collect::<Result<_>>()?;
    let key = |o: &RestartOutcome| match cfg.selection {
        Selection::Fidelity => -o.fidelity,
        Selection::Cost => o.result.best_cost,
    };
    let best_restart = restarts
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| key(a).total_cmp(&key(b)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    Ok(TrainOutcome { best_restart, restarts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::von_neumann_entropy;
    use crate::thermo::free_energy;
    use std::collections::BTreeMap;

    fn counts(basis: Basis, register: Register, entries: &[(&str, u64)]) -> Counts {
        let width = entries[0].0.len();
        let hist: BTreeMap<String, u64> = entries.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Counts::new(basis, register, width, hist).unwrap()
    }

    fn target(n: usize, h: f64, beta: f64) -> GibbsTarget {
        GibbsTarget::new(TfimParams::new(n, h).unwrap(), beta).unwrap()
    }

    #[test]
    fn energy_estimator_cases() {
        let p = TfimParams::new(2, 1.0).unwrap();
        let cx = counts(Basis::X, Register::S, &[("00", 100)]);
        let cz = counts(Basis::Z, Register::S, &[("00", 100)]);
        assert!((estimate_energy(&cx, &cz, &p).unwrap() + 3.0).abs() < 1e-15);

        // Field term alone: X bits split evenly between parities.
        let cx = counts(Basis::X, Register::S, &[("00", 50), ("01", 50)]);
        let cz = counts(Basis::Z, Register::S, &[("11", 10)]);
        assert!((estimate_energy(&cx, &cz, &p).unwrap() - 2.0).abs() < 1e-15);

        assert!(estimate_energy(&cz, &cx, &p).is_err());
        let p3 = TfimParams::new(3, 1.0).unwrap();
        let cx = counts(Basis::X, Register::S, &[("00", 1)]);
        assert!(estimate_energy(&cx, &cz, &p3).is_err());
    }

    #[test]
    fn energy_of_uniform_counts_is_near_zero() {
        let mut r = rng::from_seed(11);
        let p = TfimParams::new(2, 1.0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        let cx = sample_local(&mixed, Basis::X, Register::S, 1 << 16, 0.0, &mut r).unwrap();
        let cz = sample_local(&mixed, Basis::Z, Register::S, 1 << 16, 0.0, &mut r).unwrap();
        assert!(estimate_energy(&cx, &cz, &p).unwrap().abs() < 0.05);
    }

    #[test]
    fn entropy_estimator_cases() {
        let one = counts(Basis::Z, Register::A, &[("01", 7)]);
        assert_eq!(estimate_entropy(&one).unwrap(), 0.0);
        let uniform = counts(Basis::Z, Register::A, &[("00", 5), ("01", 5), ("10", 5), ("11", 5)]);
        assert!((estimate_entropy(&uniform).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        let skew = counts(Basis::Z, Register::A, &[("0", 3), ("1", 1)]);
        let expect = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((estimate_entropy(&skew).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.5623).abs() < 1e-4);
        assert!(estimate_entropy(&counts(Basis::X, Register::A, &[("0", 1)])).is_err());
    }

    #[test]
    fn exact_cost_at_zero_params() {
        let mut r = rng::from_seed(0);
        for (n, h, beta) in [(2, 1.0, 1.0), (3, 0.5, 2.0), (2, 1.5, 0.3)] {
            let p = ParamSet::zeros(n, 1, 1).unwrap();
            let t = target(n, h, beta);
            let c = evaluate_cost(&p, RpKind::default(), &t, &NoiseProfile::noiseless(), CostMode::Exact, &mut r).unwrap();
            assert!((c.energy + n as f64 * h).abs() < 1e-12);
            assert!(c.entropy.abs() < 1e-12);
            assert!((c.cost - c.energy + c.entropy / beta).abs() < 1e-12);
        }
        let p = ParamSet::zeros(2, 1, 1).unwrap();
        let t0 = target(2, 1.0, 0.0);
        assert!(evaluate_cost(&p, RpKind::default(), &t0, &NoiseProfile::noiseless(), CostMode::Exact, &mut r).is_err());
    }

    #[test]
    fn exact_cost_for_maximally_mixed_output() {
        // RY(π/2) on every ancilla then transversal CNOTs gives ρ_S = I/4.
        let theta = vec![std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, 0.0, 0.0];
        let p = ParamSet::new(2, 1, 1, theta, vec![0.0; 4]).unwrap();
        let t = target(2, 1.0, 0.8);
        let mut r = rng::from_seed(0);
        let c = evaluate_cost(&p, RpKind::default(), &t, &NoiseProfile::noiseless(), CostMode::Exact, &mut r).unwrap();
        assert!((c.cost + 2.0 * 2f64.ln() / 0.8).abs() < 1e-12);
    }

    #[test]
    fn exact_cost_equals_free_energy_for_noiseless_circuits() {
        let mut r = rng::from_seed(0);
        for seed in 0..6 {
            let n = 2 + (seed as usize % 2);
            let p = param_init(n, 1, 1, seed).unwrap();
            let t = target(n, 0.9, 1.3);
            let c = evaluate_cost(&p, RpKind::default(), &t, &NoiseProfile::noiseless(), CostMode::Exact, &mut r).unwrap();
            let rho = prepare_system_state(&p, RpKind::default(), &NoiseProfile::noiseless()).unwrap();
            assert!((c.cost - free_energy(&rho, &t).unwrap()).abs() < 1e-10);
            assert!((c.entropy - von_neumann_entropy(&rho)).abs() < 1e-10);
        }
    }

    #[test]
    fn shot_cost_tracks_exact_cost() {
        let t = target(2, 1.0, 1.0);
        let plan = ShotsPlan { system_x: 1 << 16, system_z: 1 << 16, ancilla_z: 1 << 16 };
        for seed in 0..5 {
            let p = param_init(2, 1, 1, 40 + seed).unwrap();
            let mut r = rng::from_seed(seed);
            let noise = NoiseProfile::noiseless();
            let exact = evaluate_cost(&p, RpKind::default(), &t, &noise, CostMode::Exact, &mut r).unwrap();
            let shots = evaluate_cost(&p, RpKind::default(), &t, &noise, CostMode::Shots(plan), &mut r).unwrap();
            assert!((exact.cost - shots.cost).abs() <= 0.1, "seed {seed}");
        }
    }

    #[test]
    fn spsa_on_quadratic() {
        let f = |x: &[f64], _: &mut Rng| -> Result<f64> { Ok(x.iter().map(|v| v * v).sum()) };
        let cfg = SpsaConfig { max_iter: 200, ..Default::default() };
        let res = spsa_minimize(f, &[1.0; 8], &cfg, &mut rng::from_seed(5)).unwrap();
        assert!(res.best_cost <= 1e-2, "best cost {}", res.best_cost);
        assert_eq!(res.cost_trace.len(), 201);
        let min = res.cost_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, res.best_cost);
    }

    #[test]
    fn spsa_on_constant_and_determinism() {
        let f = |_: &[f64], _: &mut Rng| -> Result<f64> { Ok(3.5) };
        let res = spsa_minimize(f, &[0.1, 0.2], &SpsaConfig::default(), &mut rng::from_seed(1)).unwrap();
        assert_eq!(res.best_cost, 3.5);
        assert!(res.best_x.iter().all(|v| v.is_finite()));

        let g = |x: &[f64], _: &mut Rng| -> Result<f64> { Ok((x[0] - 1.0).powi(2) + x[1].sin()) };
        let a = spsa_minimize(g, &[0.0, 0.0], &SpsaConfig::default(), &mut rng::from_seed(8)).unwrap();
        let b = spsa_minimize(g, &[0.0, 0.0], &SpsaConfig::default(), &mut rng::from_seed(8)).unwrap();
        assert_eq!(a.cost_trace, b.cost_trace);
    }

    #[test]
    fn spsa_aborts_on_non_finite() {
        let f = |x: &[f64], _: &mut Rng| -> Result<f64> { Ok(if x[0] > 0.5 { f64::NAN } else { -x[0] }) };
        let cfg = SpsaConfig { a: Some(1.0), ..Default::default() };
        let err = spsa_minimize(f, &[0.0], &cfg, &mut rng::from_seed(2)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn calibration_hits_target_step() {
        // Linear objective: |Δf/(2c)| is the same for every probe.
        let f = |x: &[f64], _: &mut Rng| -> Result<f64> { Ok(3.0 * x[0]) };
        let cfg = SpsaConfig { max_iter: 1, ..Default::default() };
        let res = spsa_minimize(f, &[0.0], &cfg, &mut rng::from_seed(3)).unwrap();
        let step = (res.cost_trace[1] - res.cost_trace[0]).abs() / 3.0;
        assert!((step - 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_restart_matches_direct_optimization() {
        let t = target(2, 1.0, 1.0);
        let noise = NoiseProfile::noiseless();
        let cfg = TrainConfig {
            restarts: 1,
            mode: CostMode::Exact,
            spsa: SpsaConfig { max_iter: 15, ..Default::default() },
            ..Default::default()
        };
        let out = train(&t, &noise, &cfg, 42).unwrap();
        let (init_seed, opt_seed) = restart_seeds(42, 0);
        let init = param_init(2, 1, 1, init_seed).unwrap();
        let f = |x: &[f64], r: &mut Rng| -> Result<f64> {
            Ok(evaluate_cost(&init.with_flat(x)?, cfg.rp, &t, &noise, CostMode::Exact, r)?.cost)
        };
        let direct = optimize_params(f, &init, &cfg.spsa, opt_seed).unwrap();
        assert_eq!(out.best().result, direct);
        assert!(train(&t, &noise, &TrainConfig { restarts: 0, ..cfg }, 1).is_err());
    }

    #[test]
    fn training_improves_cost() {
        let t = target(2, 1.0, 1.0);
        let cfg = TrainConfig { restarts: 3, mode: CostMode::Exact, ..Default::default() };
        let out = train(&t, &NoiseProfile::noiseless(), &cfg, 7).unwrap();
        for r in &out.restarts {
            assert!(r.result.best_cost < r.result.cost_trace[0]);
        }
    }
}
