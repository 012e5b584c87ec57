//! The parameterized state-preparation circuit and its measure-and-feedforward
//! variant, as abstract gate lists over a `2n`-qubit register.
//!
//! Register layout: ancilla qubit `a_i` is qubit `i − 1`, system qubit `s_i`
//! is qubit `n + i − 1` (`i = 1..n`).

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{c, gates, kron, Operator};
use crate::rng;

/// Which two-qubit parity-preserving rotation realizes the `RP` gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RpKind {
    /// `exp(−i a X⊗Y / 2) · exp(−i b Y⊗X / 2)`: independent real rotations of
    /// the even- and odd-parity sectors.
    #[default]
    XyYx,
    /// `exp(−i a X⊗X / 2) · exp(−i b Y⊗Y / 2)`.
    XxYy,
}

impl RpKind {
    pub fn label(self) -> &'static str {
        match self {
            RpKind::XyYx => "xy-yx",
            RpKind::XxYy => "xx-yy",
        }
    }

    /// The two Pauli products generating the gate, in application order.
    pub fn generators(self) -> [(Operator, Operator); 2] {
        use gates::{pauli_x as x, pauli_y as y};
        match self {
            RpKind::XyYx => [(x(), y()), (y(), x())],
            RpKind::XxYy => [(x(), x()), (y(), y())],
        }
    }
}

impl FromStr for RpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy-yx" => Ok(RpKind::XyYx),
            "xx-yy" => Ok(RpKind::XxYy),
            other => Err(Error::InvalidParameter(format!("unknown RP kind `{other}`"))),
        }
    }
}

/// `exp(−i θ P / 2)` for an involutory Pauli product `P`.
fn pauli_rotation(p: &Operator, theta: f64) -> Operator {
    let (s, co) = (theta / 2.0).sin_cos();
    Operator::identity(p.dimension())
        .scale(c(co, 0.0))
        .add(&p.scale(c(0.0, -s)))
        .expect("same dimension")
}

/// The 4×4 `RP(a, b)` unitary. Identity at zero angles and commutes with Z⊗Z.
pub fn rp_gate(kind: RpKind, a: f64, b: f64) -> Operator {
    let [(p0, q0), (p1, q1)] = kind.generators();
    let first = pauli_rotation(&kron(&p0, &q0), a);
    let second = pauli_rotation(&kron(&p1, &q1), b);
    first.compose(&second).expect("4x4")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    Ry { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
    Rp { q0: usize, q1: usize, a: f64, b: f64 },
    X { qubit: usize },
    /// Computational-basis measurement; the outcome stays in the qubit as a
    /// classical record.
    MeasureZ { qubit: usize },
    /// Pauli-X on `target` when the recorded outcome of `condition` is 1.
    ClassicalX { target: usize, condition: usize },
}

impl GateOp {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Ry { qubit, .. } | GateOp::X { qubit } | GateOp::MeasureZ { qubit } => vec![qubit],
            GateOp::Cnot { control, target } => vec![control, target],
            GateOp::Rp { q0, q1, .. } => vec![q0, q1],
            GateOp::ClassicalX { target, condition } => vec![condition, target],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateOp::Ry { .. } => "RY",
            GateOp::Cnot { .. } => "CNOT",
            GateOp::Rp { .. } => "RP",
            GateOp::X { .. } => "X",
            GateOp::MeasureZ { .. } => "MEASURE_Z",
            GateOp::ClassicalX { .. } => "CLASSICAL_X",
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, GateOp::MeasureZ { .. } | GateOp::ClassicalX { .. })
    }

    /// Matrix of a unitary op over `qubits()` order; `None` for measurement ops.
    pub fn unitary(&self, rp: RpKind) -> Option<Operator> {
        Some(match *self {
            GateOp::Ry { angle, .. } => gates::ry(angle),
            GateOp::Cnot { .. } => gates::cnot(),
            GateOp::Rp { a, b, .. } => rp_gate(rp, a, b),
            GateOp::X { .. } => gates::pauli_x(),
            GateOp::MeasureZ { .. } | GateOp::ClassicalX { .. } => return None,
        })
    }
}

/// Qubit indices of the two registers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterMap {
    pub ancilla: Vec<usize>,
    pub system: Vec<usize>,
}

impl RegisterMap {
    /// Ancilla on qubits `0..n`, system on `n..2n`.
    pub fn standard(n: usize) -> Self {
        Self { ancilla: (0..n).collect(), system: (n..2 * n).collect() }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let mut seen = vec![false; num_qubits];
        for &q in self.ancilla.iter().chain(&self.system) {
            if q >= num_qubits || seen[q] {
                return Err(Error::InvalidQubits(format!("register map reuses or overflows qubit {q}")));
            }
            seen[q] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidQubits("register map does not cover every qubit".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<GateOp>,
    registers: RegisterMap,
    rp: RpKind,
}

impl Circuit {
    pub fn new(num_qubits: usize, registers: RegisterMap, rp: RpKind) -> Result<Self> {
        registers.validate(num_qubits)?;
        Ok(Self { num_qubits, ops: Vec::new(), registers, rp })
    }

    /// A circuit over `num_qubits` with every qubit in the system register.
    pub fn bare(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            ops: Vec::new(),
            registers: RegisterMap { ancilla: Vec::new(), system: (0..num_qubits).collect() },
            rp: RpKind::default(),
        }
    }

    pub fn with_rp(mut self, rp: RpKind) -> Self {
        self.rp = rp;
        self
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        let qubits = op.qubits();
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(Error::InvalidQubits(format!("{} targets qubit {q} of {}", op.name(), self.num_qubits)));
            }
            if qubits[..i].contains(&q) {
                return Err(Error::InvalidQubits(format!("{} repeats qubit {q}", op.name())));
            }
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn extend(&mut self, ops: impl IntoIterator<Item = GateOp>) -> Result<()> {
        ops.into_iter().try_for_each(|op| self.push(op))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn registers(&self) -> &RegisterMap {
        &self.registers
    }

    pub fn rp_kind(&self) -> RpKind {
        self.rp
    }

    pub fn has_measurements(&self) -> bool {
        self.ops.iter().any(|op| !op.is_unitary())
    }

    pub fn count(&self, name: &str) -> usize {
        self.ops.iter().filter(|op| op.name() == name).count()
    }

    /// Line-oriented text form: a `#` header with the register map, then one
    /// `KIND q0 [q1] [angle1] [angle2]` line per op.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
        let mut out = format!(
            "# qubits={} ancilla={} system={} rp={}\n",
            self.num_qubits,
            join(&self.registers.ancilla),
            join(&self.registers.system),
            self.rp.label()
        );
        for op in &self.ops {
            let _ = writeln!(out, "{op}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty circuit".into() })?;
        let header = header
            .trim()
            .strip_prefix('#')
            .ok_or(Error::Parse { line: 1, message: "missing `#` header".into() })?;
        let mut num_qubits = None;
        let mut ancilla = Vec::new();
        let mut system = Vec::new();
        let mut rp = RpKind::default();
        let bad = |message: String| Error::Parse { line: 1, message };
        let parse_list = |v: &str| -> Result<Vec<usize>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|q| q.parse().map_err(|_| bad(format!("bad qubit `{q}`")))).collect()
        };
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(format!("bad header field `{field}`")))?;
            match key {
                "qubits" => num_qubits = Some(value.parse().map_err(|_| bad(format!("bad qubit count `{value}`")))?),
                "ancilla" => ancilla = parse_list(value)?,
                "system" => system = parse_list(value)?,
                "rp" => rp = value.parse()?,
                other => return Err(bad(format!("unknown header key `{other}`"))),
            }
        }
        let num_qubits = num_qubits.ok_or_else(|| bad("header lacks `qubits=`".into()))?;
        let mut circuit = Circuit::new(num_qubits, RegisterMap { ancilla, system }, rp)?;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim_start().starts_with('#') {
                continue;
            }
            let op = parse_op(line).map_err(|message| Error::Parse { line: line_no, message })?;
            circuit.push(op).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        }
        Ok(circuit)
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GateOp::Ry { qubit, angle } => write!(f, "RY {qubit} {angle:.16e}"),
            GateOp::Cnot { control, target } => write!(f, "CNOT {control} {target}"),
            GateOp::Rp { q0, q1, a, b } => write!(f, "RP {q0} {q1} {a:.16e} {b:.16e}"),
            GateOp::X { qubit } => write!(f, "X {qubit}"),
            GateOp::MeasureZ { qubit } => write!(f, "MEASURE_Z {qubit}"),
            GateOp::ClassicalX { target, condition } => write!(f, "CLASSICAL_X {target} {condition}"),
        }
    }
}

fn parse_op(line: &str) -> std::result::Result<GateOp, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let q = |i: usize| -> std::result::Result<usize, String> {
        fields.get(i).ok_or("missing qubit")?.parse().map_err(|_| format!("bad qubit `{}`", fields[i]))
    };
    let angle = |i: usize| -> std::result::Result<f64, String> {
        fields.get(i).ok_or("missing angle")?.parse().map_err(|_| format!("bad angle `{}`", fields[i]))
    };
    let (op, arity) = match fields[0] {
        "RY" => (GateOp::Ry { qubit: q(1)?, angle: angle(2)? }, 3),
        "CNOT" => (GateOp::Cnot { control: q(1)?, target: q(2)? }, 3),
        "RP" => (GateOp::Rp { q0: q(1)?, q1: q(2)?, a: angle(3)?, b: angle(4)? }, 5),
        "X" => (GateOp::X { qubit: q(1)? }, 2),
        "MEASURE_Z" => (GateOp::MeasureZ { qubit: q(1)? }, 2),
        "CLASSICAL_X" => (GateOp::ClassicalX { target: q(1)?, condition: q(2)? }, 3),
        other => return Err(format!("unknown gate kind `{other}`")),
    };
    if fields.len() != arity {
        return Err(format!("{} expects {} fields, found {}", fields[0], arity, fields.len()));
    }
    Ok(op)
}

/// Variational angles. `theta` drives the ancilla unitary (`n·(L_A + 1)`
/// entries: an initial RY column plus one column per layer), `phi` the system
/// unitary (`2n` entries per layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub n: usize,
    pub ancilla_layers: usize,
    pub system_layers: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn theta_len(n: usize, ancilla_layers: usize) -> usize {
    n * (ancilla_layers + 1)
}

pub fn phi_len(n: usize, system_layers: usize) -> usize {
    2 * n * system_layers
}

fn check_shape(n: usize, ancilla_layers: usize, system_layers: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n}: the periodic chain needs at least 2 sites")));
    }
    if ancilla_layers == 0 || system_layers == 0 {
        return Err(Error::InvalidParameter("layer counts must be at least 1".into()));
    }
    Ok(())
}

impl ParamSet {
    pub fn new(n: usize, ancilla_layers: usize, system_layers: usize, theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let p = Self { n, ancilla_layers, system_layers, theta, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(n: usize, ancilla_layers: usize, system_layers: usize) -> Result<Self> {
        check_shape(n, ancilla_layers, system_layers)?;
        Self::new(
            n,
            ancilla_layers,
            system_layers,
            vec![0.0; theta_len(n, ancilla_layers)],
            vec![0.0; phi_len(n, system_layers)],
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_shape(self.n, self.ancilla_layers, self.system_layers)?;
        let (tl, pl) = (theta_len(self.n, self.ancilla_layers), phi_len(self.n, self.system_layers));
        if self.theta.len() != tl {
            return Err(Error::DimensionMismatch { expected: tl, found: self.theta.len() });
        }
        if self.phi.len() != pl {
            return Err(Error::DimensionMismatch { expected: pl, found: self.phi.len() });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.theta.len() + self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `theta` followed by `phi`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.phi).copied().collect()
    }

    /// Same shape as `self`, angles taken from `flat`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: flat.len() });
        }
        let (theta, phi) = flat.split_at(self.theta.len());
        Ok(Self { theta: theta.to_vec(), phi: phi.to_vec(), ..self.clone() })
    }
}

/// Draws every angle i.i.d. uniform on `[−π, π]`.
pub fn param_init(n: usize, ancilla_layers: usize, system_layers: usize, seed: u64) -> Result<ParamSet> {
    check_shape(n, ancilla_layers, system_layers)?;
    let mut rng = rng::from_seed(seed);
    let mut draw = |len: usize| (0..len).map(|_| rng.random_range(-PI..=PI)).collect::<Vec<_>>();
    let theta = draw(theta_len(n, ancilla_layers));
    let phi = draw(phi_len(n, system_layers));
    ParamSet::new(n, ancilla_layers, system_layers, theta, phi)
}

fn ancilla(i: usize) -> usize {
    i
}

fn system(n: usize, i: usize) -> usize {
    n + i
}

/// RY column, then per layer a nearest-neighbour CNOT ladder and another RY column.
pub fn build_ancilla_unitary(n: usize, ancilla_layers: usize, theta: &[f64]) -> Result<Vec<GateOp>> {
    let expected = theta_len(n, ancilla_layers);
    if theta.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: theta.len() });
    }
    let mut ops = Vec::with_capacity(expected + (n - 1) * ancilla_layers);
    let column = |ops: &mut Vec<GateOp>, offset: usize| {
        ops.extend((0..n).map(|i| GateOp::Ry { qubit: ancilla(i), angle: theta[offset + i] }));
    };
    column(&mut ops, 0);
    for layer in 0..ancilla_layers {
        ops.extend((0..n - 1).map(|i| GateOp::Cnot { control: ancilla(i), target: ancilla(i + 1) }));
        column(&mut ops, n * (layer + 1));
    }
    Ok(ops)
}

pub fn build_transversal_cnots(n: usize) -> Vec<GateOp> {
    (0..n).map(|i| GateOp::Cnot { control: ancilla(i), target: system(n, i) }).collect()
}

/// Per layer, `RP(φ_{2i−1}, φ_{2i})` on `(s_i, s_{i+1})` with `s_{n+1} = s_1`.
pub fn build_system_unitary(n: usize, system_layers: usize, phi: &[f64]) -> Result<Vec<GateOp>> {
    let expected = phi_len(n, system_layers);
    if phi.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: phi.len() });
    }
    let mut ops = Vec::with_capacity(n * system_layers);
    for layer in 0..system_layers {
        for i in 0..n {
            let k = 2 * n * layer + 2 * i;
            ops.push(GateOp::Rp { q0: system(n, i), q1: system(n, (i + 1) % n), a: phi[k], b: phi[k + 1] });
        }
    }
    Ok(ops)
}

pub fn build_gsp_circuit(params: &ParamSet) -> Result<Circuit> {
    build_gsp_circuit_with(params, RpKind::default())
}

pub fn build_gsp_circuit_with(params: &ParamSet, rp: RpKind) -> Result<Circuit> {
    params.validate()?;
    let n = params.n;
    let mut circuit = Circuit::new(2 * n, RegisterMap::standard(n), rp)?;
    circuit.extend(build_ancilla_unitary(n, params.ancilla_layers, &params.theta)?)?;
    circuit.extend(build_transversal_cnots(n))?;
    circuit.extend(build_system_unitary(n, params.system_layers, &params.phi)?)?;
    Ok(circuit)
}

/// Ancilla unitary, mid-circuit measurement of the ancilla, classically
/// controlled X on each system qubit, system unitary.
pub fn build_feedforward_variant(params: &ParamSet) -> Result<Circuit> {
    build_feedforward_variant_with(params, RpKind::default())
}

pub fn build_feedforward_variant_with(params: &ParamSet, rp: RpKind) -> Result<Circuit> {
    params.validate()?;
    let n = params.n;
    let mut circuit = Circuit::new(2 * n, RegisterMap::standard(n), rp)?;
    circuit.extend(build_ancilla_unitary(n, params.ancilla_layers, &params.theta)?)?;
    circuit.extend((0..n).map(|i| GateOp::MeasureZ { qubit: ancilla(i) }))?;
    circuit.extend((0..n).map(|i| GateOp::ClassicalX { target: system(n, i), condition: ancilla(i) }))?;
    circuit.extend(build_system_unitary(n, params.system_layers, &params.phi)?)?;
    Ok(circuit)
}
