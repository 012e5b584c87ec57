//! Verification of prepared states: local-Pauli tomography, parity, and the
//! inverse-temperature sweep used to measure digital heating.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::RpKind;
use crate::error::{Error, Result};
use crate::qcore::{c, hermitian_eigen, qubit_bit, uhlmann_fidelity, DensityMatrix, C64};
use crate::rng::{self, Rng};
use crate::sim::{outcome_probabilities, sample_local, Basis, Counts, NoiseProfile, Pauli, Register};
use crate::thermo::{exact_gibbs, GibbsTarget, TfimParams};
use crate::vqa::{prepare_system_state, train, TrainConfig};

/// All `3^n` local settings in lexicographic order (qubit 0 is the first letter).
pub fn tomography_settings(n: usize) -> Vec<Vec<Pauli>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| {
                [Pauli::X, Pauli::Y, Pauli::Z].into_iter().map(move |p| {
                    let mut t = s.clone();
                    t.push(p);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn setting_label(setting: &[Pauli]) -> String {
    setting.iter().map(|p| p.letter()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyData {
    pub n: usize,
    /// One record per setting, in [`tomography_settings`] order.
    pub counts: Vec<Counts>,
}

impl TomographyData {
    pub fn validate(&self) -> Result<()> {
        let settings = tomography_settings(self.n);
        if self.counts.len() != settings.len() {
            return Err(Error::InvalidParameter(format!(
                "tomography needs {} settings, got {}",
                settings.len(),
                self.counts.len()
            )));
        }
        let shots = self.counts.first().map(|c| c.shots).unwrap_or(0);
        for (c, s) in self.counts.iter().zip(&settings) {
            if c.basis.paulis(self.n) != *s {
                return Err(Error::InvalidParameter(format!("missing setting {}", setting_label(s))));
            }
            if c.shots == 0 {
                return Err(Error::InvalidParameter(format!("setting {} has zero shots", setting_label(s))));
            }
            if c.shots != shots {
                return Err(Error::InvalidParameter("settings have unequal shot budgets".into()));
            }
        }
        Ok(())
    }

    /// Writes `tomo_<setting>.txt` files into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for c in &self.counts {
            let label = setting_label(&c.basis.paulis(self.n));
            fs::write(dir.join(format!("tomo_{label}.txt")), c.to_text())?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path, n: usize) -> Result<Self> {
        let counts = tomography_settings(n)
            .iter()
            .map(|s| {
                let path = dir.join(format!("tomo_{}.txt", setting_label(s)));
                let mut c = Counts::from_text(&fs::read_to_string(&path)?)?;
                // A uniform setting parses as `Basis::Z`/`Basis::X`; normalize.
                c.basis = Basis::Local(c.basis.paulis(n));
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        let data = Self { n, counts };
        data.validate()?;
        Ok(data)
    }

    pub fn distributions(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        self.counts.iter().map(Counts::frequencies).collect()
    }
}

/// Samples every local setting of `rho` with `shots` each. Settings use
/// independent streams derived from one draw of `rng`.
pub fn tomography_collect(rho: &DensityMatrix, shots: u64, p_spam: f64, rng: &mut Rng) -> Result<TomographyData> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let n = rho.num_qubits();
    let base: u64 = rng.random();
    let counts = tomography_settings(n)
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(base, &[i as u64]);
            sample_local(rho, Basis::Local(s), Register::S, shots, p_spam, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TomographyData { n, counts })
}

/// Exact outcome distributions for every setting (the infinite-shot limit).
pub fn tomography_exact(rho: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
    tomography_settings(rho.num_qubits()).iter().map(|s| outcome_probabilities(rho, s)).collect()
}

/// Linear inversion `2^{−n} Σ_P ⟨P⟩ P` over all `4^n` Pauli strings.
/// Strings containing `I` are evaluated on the setting with `I → Z`.
/// The result is Hermitian with unit trace but may be indefinite.
pub fn linear_inversion(n: usize, distributions: &[Vec<f64>]) -> Result<DMatrix<C64>> {
    let dim = 1usize << n;
    let settings = tomography_settings(n);
    if distributions.len() != settings.len() {
        return Err(Error::InvalidParameter(format!(
            "tomography needs {} settings, got {}",
            settings.len(),
            distributions.len()
        )));
    }
    if let Some(d) = distributions.iter().find(|d| d.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: d.len() });
    }
    // Pauli string digits: 0 = I, 1 = X, 2 = Y, 3 = Z; qubit 0 most significant.
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for code in 0..(1usize << (2 * n)) {
        let ops: Vec<usize> = (0..n).map(|q| (code >> (2 * (n - 1 - q))) & 3).collect();
        let setting_index = ops.iter().fold(0, |acc, &o| acc * 3 + if o == 0 { 2 } else { o - 1 });
        let dist = &distributions[setting_index];
        let expectation: f64 = dist
            .iter()
            .enumerate()
            .map(|(b, &p)| {
                let odd = (0..n).filter(|&q| ops[q] != 0 && qubit_bit(b, n, q) == 1).count() % 2;
                if odd == 1 {
                    -p
                } else {
                    p
                }
            })
            .sum();
        let flip: usize = (0..n).filter(|&q| ops[q] == 1 || ops[q] == 2).map(|q| 1 << (n - 1 - q)).sum();
        let coeff = expectation / dim as f64;
        for col in 0..dim {
            let mut phase = c(1.0, 0.0);
            for (q, &op) in ops.iter().enumerate().take(n) {
                let bit = qubit_bit(col, n, q);
                match op {
                    2 => phase *= if bit == 0 { c(0.0, 1.0) } else { c(0.0, -1.0) },
                    3 if bit == 1 => phase = -phase,
                    _ => {}
                }
            }
            rho[(col ^ flip, col)] += phase * coeff;
        }
    }
    Ok(rho)
}

/// Clips negative eigenvalues to zero and renormalizes the trace.
pub fn psd_project(m: &DMatrix<C64>) -> Result<DensityMatrix> {
    let dim = m.nrows();
    if !dim.is_power_of_two() || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.ncols() });
    }
    let (values, vectors) = hermitian_eigen(m);
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Ok(DensityMatrix::maximally_mixed(dim.trailing_zeros() as usize));
    }
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for (k, &w) in clipped.iter().enumerate() {
        if w > 0.0 {
            let v = vectors.column(k);
            out += v * v.adjoint() * c(w / total, 0.0);
        }
    }
    let out = (&out + out.adjoint()) * c(0.5, 0.0);
    DensityMatrix::from_matrix_unchecked(out)
}

/// Reconstructs a valid density matrix from sampled tomography data.
pub fn reconstruct(data: &TomographyData) -> Result<DensityMatrix> {
    psd_project(&linear_inversion(data.n, &data.distributions()?)?)
}

/// Reconstruction from exact per-setting distributions.
pub fn reconstruct_exact(n: usize, distributions: &[Vec<f64>]) -> Result<DensityMatrix> {
    psd_project(&linear_inversion(n, distributions)?)
}

/// Fraction of Z-basis shots with even Hamming weight.
pub fn parity_even_fraction(counts_z: &Counts) -> Result<f64> {
    if counts_z.basis.paulis(counts_z.width).iter().any(|&p| p != Pauli::Z) {
        return Err(Error::InvalidParameter(format!("parity needs Z-basis counts, got {}", counts_z.basis)));
    }
    if counts_z.shots == 0 {
        return Err(Error::InvalidParameter("counts contain zero shots".into()));
    }
    let even: u64 = counts_z
        .histogram
        .iter()
        .filter(|(k, _)| k.bytes().filter(|&b| b == b'1').count() % 2 == 0)
        .map(|(_, &v)| v)
        .sum();
    Ok(even as f64 / counts_z.shots as f64)
}

/// Exact even-parity weight of a state's Z-basis distribution.
pub fn parity_even_probability(rho: &DensityMatrix) -> f64 {
    rho.diagonal_probabilities()
        .iter()
        .enumerate()
        .filter(|(i, _)| i.count_ones() % 2 == 0)
        .map(|(_, p)| p)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepResult {
    pub beta_true: f64,
    pub grid: Vec<f64>,
    pub fidelities: Vec<f64>,
    pub beta_star: f64,
    pub delta_beta: f64,
}

impl BetaSweepResult {
    /// `beta,fidelity` rows followed by a `# summary` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,fidelity\n");
        for (b, f) in self.grid.iter().zip(&self.fidelities) {
            out.push_str(&format!("{b:.16e},{f:.16e}\n"));
        }
        out.push_str(&format!(
            "# beta_true={:.16e} beta_star={:.16e} delta_beta={:.16e}\n",
            self.beta_true, self.beta_star, self.delta_beta
        ));
        out
    }

    pub fn max_fidelity(&self) -> f64 {
        self.fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `{1e-8} ∪ linspace(0.05, 6.0, 60)`.
pub fn default_sweep_grid() -> Vec<f64> {
    let mut g = vec![1e-8];
    g.extend((0..60).map(|i| 0.05 + (6.0 - 0.05) * i as f64 / 59.0));
    g
}

/// Largest spacing between consecutive grid points.
pub fn grid_step(grid: &[f64]) -> f64 {
    grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Fidelity of `rho_exp` with the exact Gibbs state at each grid β; `beta_star`
/// is the smallest β whose fidelity is within 1e-12 of the maximum.
pub fn beta_sweep(rho_exp: &DensityMatrix, params: &TfimParams, beta_true: f64, grid: &[f64]) -> Result<BetaSweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    if grid.iter().any(|&b| !(b >= 0.0 && b.is_finite())) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sweep grid must be finite, nonnegative and strictly increasing".into()));
    }
    if rho_exp.num_qubits() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, found: rho_exp.num_qubits() });
    }
    let base = GibbsTarget::new(*params, grid[0])?;
    let fidelities = grid
        .par_iter()
        .map(|&b| uhlmann_fidelity(rho_exp, &exact_gibbs(&base.at_beta(b)?)))
        .collect::<Result<Vec<f64>>>()?;
    let max = fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let idx = fidelities.iter().position(|&f| f >= max - 1e-12).expect("nonempty grid");
    let beta_star = grid[idx];
    Ok(BetaSweepResult { beta_true, grid: grid.to_vec(), fidelities, beta_star, delta_beta: beta_true - beta_star })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBetaPoint {
    pub beta: f64,
    /// Fidelity of the reconstructed state with the Gibbs state at `beta`.
    pub fidelity: f64,
    pub sweep: BetaSweepResult,
}

/// Outcome of the train, prepare, tomograph, sweep pipeline at one point.
#[derive(Debug, Clone)]
pub struct VerifiedPoint {
    pub training: crate::vqa::TrainOutcome,
    pub reconstructed: DensityMatrix,
    pub fidelity: f64,
    pub sweep: BetaSweepResult,
    pub even_parity_fraction: f64,
}

/// Prepares the trained state under `noise`, runs tomography and the sweep.
#[allow(clippy::too_many_arguments)]
pub fn verify_trained(
    target: &GibbsTarget,
    noise: &NoiseProfile,
    training: crate::vqa::TrainOutcome,
    rp: RpKind,
    tomo_shots: u64,
    grid: &[f64],
    rng: &mut Rng,
) -> Result<VerifiedPoint> {
    let rho_s = prepare_system_state(&training.best().result.best_params, rp, noise)?;
    let data = tomography_collect(&rho_s, tomo_shots, noise.p_spam, rng)?;
    let reconstructed = reconstruct(&data)?;
    let fidelity = uhlmann_fidelity(&reconstructed, &exact_gibbs(target))?;
    let sweep = beta_sweep(&reconstructed, &target.params(), target.beta(), grid)?;
    let all_z = data.counts.last().expect("complete settings end with all-Z");
    let even_parity_fraction = parity_even_fraction(all_z)?;
    Ok(VerifiedPoint { training, reconstructed, fidelity, sweep, even_parity_fraction })
}

/// End-to-end Δβ per β: train under `noise`, prepare, tomograph, sweep.
pub fn delta_beta_curve(
    noise: &NoiseProfile,
    params: &TfimParams,
    betas: &[f64],
    cfg: &TrainConfig,
    tomo_shots: u64,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<DeltaBetaPoint>> {
    if betas.iter().any(|&b| b.is_nan() || b <= 0.0) {
        return Err(Error::InvalidParameter("delta-beta curve needs beta > 0".into()));
    }
    betas
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            let target = GibbsTarget::new(*params, beta)?;
            let point_seed = rng::derive_seed(seed, &[i as u64]);
            let training = train(&target, noise, cfg, point_seed)?;
            let mut r = rng::stream(point_seed, &[u64::MAX]);
            let v = verify_trained(&target, noise, training, cfg.rp, tomo_shots, grid, &mut r)?;
            Ok(DeltaBetaPoint { beta, fidelity: v.fidelity, sweep: v.sweep })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::StateVector;
    use std::collections::BTreeMap;

    fn random_state(n: usize, seed: u64) -> DensityMatrix {
        let mut r = rng::from_seed(seed);
        let dim = 1 << n;
        let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    }

    #[test]
    fn settings_enumeration() {
        assert_eq!(tomography_settings(1).len(), 3);
        assert_eq!(tomography_settings(2).len(), 9);
        let labels: Vec<String> = tomography_settings(2).iter().map(|s| setting_label(s)).collect();
        assert_eq!(labels[0], "XX");
        assert_eq!(labels[1], "XY");
        assert_eq!(labels[8], "ZZ");
    }

    #[test]
    fn exact_moments_invert_exactly() {
        for n in 1..=3 {
            for seed in 0..4 {
                let rho = random_state(n, seed + 10 * n as u64);
                let rec = reconstruct_exact(n, &tomography_exact(&rho).unwrap()).unwrap();
                assert!(rec.max_abs_diff(&rho) < 1e-10, "n={n} seed={seed}");
            }
        }
    }

    #[test]
    fn sampled_zero_state_and_mixed_state() {
        let mut r = rng::from_seed(3);
        let zero = StateVector::zero(1).to_density();
        let data = tomography_collect(&zero, 1024, 0.0, &mut r).unwrap();
        let z = data.counts.iter().find(|c| c.basis == Basis::Local(vec![Pauli::Z])).unwrap();
        assert_eq!(z.histogram.get("0"), Some(&1024));

        let mixed = DensityMatrix::maximally_mixed(1);
        let data = tomography_collect(&mixed, 1024, 0.0, &mut r).unwrap();
        let rec = reconstruct(&data).unwrap();
        assert!(uhlmann_fidelity(&rec, &mixed).unwrap() >= 0.99);
    }

    #[test]
    fn unphysical_data_projects_to_valid_state() {
        let n = 2;
        let counts = tomography_settings(n)
            .into_iter()
            .map(|s| {
                let mut h = BTreeMap::new();
                h.insert("00".to_string(), 100);
                Counts::new(Basis::Local(s), Register::S, n, h).unwrap()
            })
            .collect();
        let rec = reconstruct(&TomographyData { n, counts }).unwrap();
        rec.validate().unwrap();
        assert!((rec.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_data_is_rejected() {
        let mut r = rng::from_seed(1);
        let mut data = tomography_collect(&DensityMatrix::maximally_mixed(2), 10, 0.0, &mut r).unwrap();
        data.counts.pop();
        assert!(reconstruct(&data).is_err());
        assert!(tomography_collect(&DensityMatrix::maximally_mixed(2), 0, 0.0, &mut r).is_err());
    }

    #[test]
    fn psd_projection_is_idempotent() {
        let rho = random_state(2, 99);
        let once = psd_project(rho.matrix()).unwrap();
        assert!(once.max_abs_diff(&rho) < 1e-12);
        let twice = psd_project(once.matrix()).unwrap();
        assert!(twice.max_abs_diff(&once) < 1e-12);
    }

    #[test]
    fn parity_cases() {
        let mk = |entries: &[(&str, u64)]| {
            let h: BTreeMap<String, u64> = entries.iter().map(|(k, v)| (k.to_string(), *v)).collect();
            Counts::new(Basis::Z, Register::S, 2, h).unwrap()
        };
        assert_eq!(parity_even_fraction(&mk(&[("00", 512), ("11", 512)])).unwrap(), 1.0);
        assert_eq!(parity_even_fraction(&mk(&[("01", 100)])).unwrap(), 0.0);
        assert!((parity_even_fraction(&mk(&[("00", 90), ("01", 10)])).unwrap() - 0.9).abs() < 1e-15);
        let x = Counts { basis: Basis::X, ..mk(&[("00", 1)]) };
        assert!(parity_even_fraction(&x).is_err());
    }

    #[test]
    fn sweep_cases() {
        let p = TfimParams::new(2, 1.0).unwrap();
        let g1 = exact_gibbs(&GibbsTarget::new(p, 1.0).unwrap());
        let grid = [0.5, 1.0, 1.5];
        let s = beta_sweep(&g1, &p, 1.0, &grid).unwrap();
        assert_eq!(s.beta_star, 1.0);
        assert_eq!(s.delta_beta, 0.0);

        let grid = default_sweep_grid();
        assert_eq!(grid.len(), 61);
        assert!((grid[60] - 6.0).abs() < 1e-12 && grid[1] == 0.05);
        let s = beta_sweep(&DensityMatrix::maximally_mixed(2), &p, 0.3, &grid).unwrap();
        assert_eq!(s.beta_star, 1e-8);
        assert!(s.to_csv().lines().count() == 63);

        assert!(beta_sweep(&g1, &p, 1.0, &[]).is_err());
        assert!(beta_sweep(&g1, &p, 1.0, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn tomography_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rng::from_seed(8);
        let data = tomography_collect(&random_state(2, 5), 64, 0.0, &mut r).unwrap();
        data.write_dir(dir.path()).unwrap();
        assert!(dir.path().join("tomo_XY.txt").exists());
        let back = TomographyData::read_dir(dir.path(), 2).unwrap();
        assert_eq!(back, data);
    }
}
