//! Circuit execution (ideal statevector or noisy density matrix) and shot
//! sampling.
//!
//! The noise model is gate-local: every abstract gate is followed by a
//! depolarizing channel on the qubits it touched (`p1` for one-qubit gates,
//! `p2` for CNOT). `RP` is charged as one two-qubit gate plus one one-qubit
//! gate on each of its qubits. Readout errors are independent bit flips with
//! probability `p_spam`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ansatz::{Circuit, GateOp, RegisterMap};
use crate::error::{Error, Result};
use crate::qcore::{
    apply_gate_to_density, apply_gate_to_slice, bit_position, dephase_density, depolarize_density, gates,
    partial_trace, partial_trace_pure, DensityMatrix, StateVector,
};
use crate::rng::Rng;

/// Hardware timing rows carried for reference; the simulator ignores them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetadata {
    pub t1_s: f64,
    pub t2_s: f64,
    pub one_qubit_gate_us: f64,
    pub two_qubit_gate_us: f64,
    pub readout_us: f64,
    pub reset_us: f64,
    pub qubits: usize,
    /// Native entangler name, `MS` or `ZZ`.
    pub entangler: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub name: String,
    pub p1: f64,
    pub p2: f64,
    pub p_spam: f64,
    #[serde(default)]
    pub metadata: Option<DeviceMetadata>,
}

impl NoiseProfile {
    pub fn new(name: impl Into<String>, p1: f64, p2: f64, p_spam: f64) -> Result<Self> {
        let p = Self { name: name.into(), p1, p2, p_spam, metadata: None };
        p.validate()?;
        Ok(p)
    }

    pub fn noiseless() -> Self {
        Self { name: "noiseless".into(), p1: 0.0, p2: 0.0, p_spam: 0.0, metadata: None }
    }

    pub fn validate(&self) -> Result<()> {
        for (label, p) in [("p1", self.p1), ("p2", self.p2), ("p_spam", self.p_spam)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{label} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.p_spam == 0.0
    }

    /// Copy with the two-qubit rate multiplied by `factor` (clamped to 1).
    pub fn scaled_p2(&self, factor: f64) -> Self {
        Self { name: format!("{}*p2x{factor}", self.name), p2: (self.p2 * factor).min(1.0), ..self.clone() }
    }
}

#[allow(clippy::too_many_arguments)]
fn device(
    name: &str,
    one_q_fid: f64,
    two_q_fid: f64,
    spam_fid: f64,
    t1_s: f64,
    t2_s: f64,
    speeds_us: [f64; 4],
    entangler: &str,
) -> NoiseProfile {
    let round = |x: f64| (x * 1e6).round() / 1e6;
    NoiseProfile {
        name: name.into(),
        p1: round(1.0 - one_q_fid),
        p2: round(1.0 - two_q_fid),
        p_spam: round(1.0 - spam_fid),
        metadata: Some(DeviceMetadata {
            t1_s,
            t2_s,
            one_qubit_gate_us: speeds_us[0],
            two_qubit_gate_us: speeds_us[1],
            readout_us: speeds_us[2],
            reset_us: speeds_us[3],
            qubits: if name == "aria1" { 25 } else { 36 },
            entangler: entangler.into(),
        }),
    }
}

/// `noiseless`, `aria1`, `forte1`, `forte-ent1`; rates are one minus the
/// published gate and SPAM fidelities.
pub fn builtin_profiles() -> Vec<NoiseProfile> {
    vec![
        NoiseProfile::noiseless(),
        device("aria1", 0.9998, 0.9799, 0.9951, 100.0, 1.0, [135.0, 600.0, 300.0, 20.0], "MS"),
        device("forte1", 0.9998, 0.9849, 0.9946, 100.0, 1.0, [130.0, 970.0, 150.0, 50.0], "ZZ"),
        device("forte-ent1", 0.9998, 0.9915, 0.9939, 188.0, 0.95, [63.0, 650.0, 250.0, 150.0], "ZZ"),
    ]
}

pub fn profile_by_name(name: &str) -> Result<NoiseProfile> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown device profile `{name}`")))
}

/// `U|0…0⟩` for a measurement-free circuit.
pub fn run_statevector(c: &Circuit) -> Result<StateVector> {
    let n = c.num_qubits();
    let mut psi = StateVector::zero(n);
    for op in c.ops() {
        let u = op.unitary(c.rp_kind()).ok_or_else(|| {
            Error::Unsupported(format!("{} in a statevector run; use run_density", op.name()))
        })?;
        apply_gate_to_slice(psi.amplitudes_mut(), n, u.matrix(), &op.qubits());
    }
    Ok(psi)
}

/// Noisy density-matrix execution from `|0…0⟩⟨0…0|`.
pub fn run_density(c: &Circuit, noise: &NoiseProfile) -> Result<DensityMatrix> {
    noise.validate()?;
    let n = c.num_qubits();
    let mut rho = StateVector::zero(n).to_density().into_matrix();
    let cnot = gates::cnot();
    for op in c.ops() {
        match *op {
            GateOp::Ry { qubit, .. } | GateOp::X { qubit } => {
                let u = op.unitary(c.rp_kind()).expect("unitary op");
                apply_gate_to_density(&mut rho, n, u.matrix(), &[qubit]);
                depolarize_density(&mut rho, n, &[qubit], noise.p1);
            }
            GateOp::Cnot { control, target } => {
                apply_gate_to_density(&mut rho, n, cnot.matrix(), &[control, target]);
                depolarize_density(&mut rho, n, &[control, target], noise.p2);
            }
            GateOp::Rp { q0, q1, .. } => {
                let u = op.unitary(c.rp_kind()).expect("unitary op");
                apply_gate_to_density(&mut rho, n, u.matrix(), &[q0, q1]);
                depolarize_density(&mut rho, n, &[q0, q1], noise.p2);
                depolarize_density(&mut rho, n, &[q0], noise.p1);
                depolarize_density(&mut rho, n, &[q1], noise.p1);
            }
            GateOp::MeasureZ { qubit } => dephase_density(&mut rho, n, qubit),
            GateOp::ClassicalX { target, condition } => {
                // Σ_b (|b⟩⟨b| ⊗ X^b) ρ (|b⟩⟨b| ⊗ X^b)†
                dephase_density(&mut rho, n, condition);
                apply_gate_to_density(&mut rho, n, cnot.matrix(), &[condition, target]);
                depolarize_density(&mut rho, n, &[target], noise.p1);
            }
        }
    }
    DensityMatrix::from_matrix_unchecked(rho)
}

pub fn reduced_system_state(rho: &DensityMatrix, registers: &RegisterMap) -> Result<DensityMatrix> {
    partial_trace(rho, &registers.system)
}

pub fn reduced_ancilla_state(rho: &DensityMatrix, registers: &RegisterMap) -> Result<DensityMatrix> {
    partial_trace(rho, &registers.ancilla)
}

/// Reduced ancilla and system states of an executed GSP-style circuit.
#[derive(Debug, Clone)]
pub struct ReducedStates {
    pub ancilla: DensityMatrix,
    pub system: DensityMatrix,
}

/// Runs `c` under `noise` and returns both reduced states. Gate-noiseless,
/// measurement-free circuits take the statevector path, which scales to
/// twelve qubits without forming the full density matrix.
pub fn execute_reduced(c: &Circuit, noise: &NoiseProfile) -> Result<ReducedStates> {
    let regs = c.registers();
    if regs.ancilla.is_empty() || regs.system.is_empty() {
        return Err(Error::InvalidQubits("circuit needs both ancilla and system registers".into()));
    }
    if noise.p1 == 0.0 && noise.p2 == 0.0 && !c.has_measurements() {
        let psi = run_statevector(c)?;
        return Ok(ReducedStates {
            ancilla: partial_trace_pure(&psi, &regs.ancilla)?,
            system: partial_trace_pure(&psi, &regs.system)?,
        });
    }
    let rho = run_density(c, noise)?;
    Ok(ReducedStates {
        ancilla: reduced_ancilla_state(&rho, regs)?,
        system: reduced_system_state(&rho, regs)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(ch: char) -> Option<Self> {
        match ch {
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Measurement basis of a counts record: uniform Z, uniform X, or a
/// per-qubit local Pauli setting (tomography).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Local(Vec<Pauli>),
}

impl Basis {
    pub fn paulis(&self, width: usize) -> Vec<Pauli> {
        match self {
            Basis::Z => vec![Pauli::Z; width],
            Basis::X => vec![Pauli::X; width],
            Basis::Local(v) => v.clone(),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => f.write_str("Z"),
            Basis::X => f.write_str("X"),
            Basis::Local(v) => v.iter().try_for_each(|p| f.write_char(p.letter())),
        }
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Z" => Ok(Basis::Z),
            "X" => Ok(Basis::X),
            _ => s
                .chars()
                .map(Pauli::from_letter)
                .collect::<Option<Vec<_>>>()
                .filter(|v| !v.is_empty())
                .map(Basis::Local)
                .ok_or_else(|| Error::InvalidParameter(format!("bad basis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Register {
    A,
    S,
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Register::A => "A",
            Register::S => "S",
        })
    }
}

impl FromStr for Register {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Register::A),
            "S" => Ok(Register::S),
            _ => Err(Error::InvalidParameter(format!("bad register `{s}`"))),
        }
    }
}

/// Measurement histogram; bitstrings use the crate-wide qubit order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub basis: Basis,
    pub register: Register,
    pub shots: u64,
    pub width: usize,
    pub histogram: BTreeMap<String, u64>,
}

impl Counts {
    pub fn new(basis: Basis, register: Register, width: usize, histogram: BTreeMap<String, u64>) -> Result<Self> {
        let shots = histogram.values().sum();
        let c = Self { basis, register, shots, width, histogram };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.histogram.values().sum::<u64>() != self.shots {
            return Err(Error::InvalidParameter("histogram does not sum to shots".into()));
        }
        for key in self.histogram.keys() {
            if key.len() != self.width || !key.chars().all(|ch| ch == '0' || ch == '1') {
                return Err(Error::InvalidParameter(format!("bitstring `{key}` is not {} bits", self.width)));
            }
        }
        if let Basis::Local(v) = &self.basis {
            if v.len() != self.width {
                return Err(Error::DimensionMismatch { expected: self.width, found: v.len() });
            }
        }
        Ok(())
    }

    /// Builds counts from per-index tallies (index in crate-wide bit order).
    pub fn from_tallies(basis: Basis, register: Register, width: usize, tallies: &[u64]) -> Result<Self> {
        let histogram = tallies
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| (format!("{i:0width$b}"), k))
            .collect();
        Self::new(basis, register, width, histogram)
    }

    /// Outcome frequencies indexed by basis-state index.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.shots == 0 {
            return Err(Error::InvalidParameter("counts contain zero shots".into()));
        }
        let mut f = vec![0.0; 1 << self.width];
        for (key, &k) in &self.histogram {
            let idx = usize::from_str_radix(key, 2).expect("validated bitstring");
            f[idx] = k as f64 / self.shots as f64;
        }
        Ok(f)
    }

    /// Header `basis=<B> shots=<N> register=<A|S>` then `bitstring count` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("basis={} shots={} register={}\n", self.basis, self.shots, self.register);
        for (key, k) in &self.histogram {
            let _ = writeln!(out, "{key} {k}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty counts file".into() })?;
        let (mut basis, mut shots, mut register) = (None, None, None);
        let bad = |message: String| Error::Parse { line: 1, message };
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(format!("bad header field `{field}`")))?;
            match key {
                "basis" => basis = Some(value.parse::<Basis>().map_err(|e| bad(e.to_string()))?),
                "shots" => shots = Some(value.parse::<u64>().map_err(|_| bad(format!("bad shots `{value}`")))?),
                "register" => register = Some(value.parse::<Register>().map_err(|e| bad(e.to_string()))?),
                other => return Err(bad(format!("unknown header key `{other}`"))),
            }
        }
        let (basis, shots, register) = match (basis, shots, register) {
            (Some(b), Some(s), Some(r)) => (b, s, r),
            _ => return Err(bad("header needs basis, shots and register".into())),
        };
        let mut histogram = BTreeMap::new();
        let mut width = match &basis {
            Basis::Local(v) => Some(v.len()),
            _ => None,
        };
        for (idx, line) in lines {
            let err = |message: String| Error::Parse { line: idx + 1, message };
            let (key, k) = line.trim().split_once(' ').ok_or_else(|| err("expected `bitstring count`".into()))?;
            let k: u64 = k.trim().parse().map_err(|_| err(format!("bad count `{k}`")))?;
            if *width.get_or_insert(key.len()) != key.len() {
                return Err(err(format!("bitstring `{key}` has inconsistent width")));
            }
            if histogram.insert(key.to_string(), k).is_some() {
                return Err(err(format!("duplicate bitstring `{key}`")));
            }
        }
        let counts = Self { basis, register, shots, width: width.unwrap_or(0), histogram };
        counts.validate()?;
        Ok(counts)
    }
}

/// Exact outcome distribution of measuring each qubit of `rho` in the local
/// Pauli basis `setting` (outcome bit 0 ↔ eigenvalue +1).
pub fn outcome_probabilities(rho: &DensityMatrix, setting: &[Pauli]) -> Result<Vec<f64>> {
    let n = rho.num_qubits();
    if setting.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: setting.len() });
    }
    if setting.iter().all(|&p| p == Pauli::Z) {
        return Ok(rho.diagonal_probabilities().into_iter().map(|p| p.max(0.0)).collect());
    }
    let h = gates::hadamard();
    let h_sdg = h.compose(&gates::s_gate().adjoint()).expect("2x2");
    let mut m = rho.matrix().clone();
    for (q, p) in setting.iter().enumerate() {
        match p {
            Pauli::Z => {}
            Pauli::X => apply_gate_to_density(&mut m, n, h.matrix(), &[q]),
            Pauli::Y => apply_gate_to_density(&mut m, n, h_sdg.matrix(), &[q]),
        }
    }
    Ok((0..m.nrows()).map(|i| m[(i, i)].re.max(0.0)).collect())
}

/// Folds independent per-bit flip probability `p` into an outcome distribution.
pub fn apply_readout_noise(probs: &[f64], width: usize, p: f64) -> Vec<f64> {
    let mut out = probs.to_vec();
    if p == 0.0 {
        return out;
    }
    for q in 0..width {
        let bit = 1usize << bit_position(width, q);
        let prev = out.clone();
        for (i, v) in out.iter_mut().enumerate() {
            *v = (1.0 - p) * prev[i] + p * prev[i ^ bit];
        }
    }
    out
}

/// Multinomial draw of `shots` outcomes via a chain of binomials.
pub fn multinomial(probs: &[f64], shots: u64, rng: &mut Rng) -> Vec<u64> {
    let total: f64 = probs.iter().sum();
    let mut remaining_mass = total;
    let mut remaining = shots;
    let mut out = vec![0u64; probs.len()];
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || remaining_mass <= 0.0 {
            out[i] = remaining;
            remaining = 0;
            break;
        }
        let q = (p / remaining_mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = k;
        remaining -= k;
        remaining_mass -= p;
    }
    if remaining > 0 {
        // Only reachable when trailing probabilities were all zero.
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
        out[last] += remaining;
    }
    out
}

/// Samples a state that already lives on the measured register.
pub fn sample_local(
    rho: &DensityMatrix,
    basis: Basis,
    register: Register,
    shots: u64,
    p_spam: f64,
    rng: &mut Rng,
) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let width = rho.num_qubits();
    let probs = outcome_probabilities(rho, &basis.paulis(width))?;
    let probs = apply_readout_noise(&probs, width, p_spam);
    let tallies = multinomial(&probs, shots, rng);
    Counts::from_tallies(basis, register, width, &tallies)
}

/// Reduces a full-register state to `register` and samples it.
#[allow(clippy::too_many_arguments)]
pub fn sample_counts(
    rho: &DensityMatrix,
    registers: &RegisterMap,
    register: Register,
    basis: Basis,
    shots: u64,
    p_spam: f64,
    rng: &mut Rng,
) -> Result<Counts> {
    let reduced = match register {
        Register::A => reduced_ancilla_state(rho, registers)?,
        Register::S => reduced_system_state(rho, registers)?,
    };
    sample_local(&reduced, basis, register, shots, p_spam, rng)
}
