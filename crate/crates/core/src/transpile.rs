//! Lowering of abstract circuits to trapped-ion native gates, with gate
//! counts and a dense equivalence check.
//!
//! Conventions: `VIRTZ(θ) = Rz(θ)`, `GPI(φ) = [[0, e^{−iφ}], [e^{iφ}, 0]]`,
//! `GPI2(φ) = exp(−iπ/4 σ_φ)`, `MS(φ0, φ1) = exp(−iπ/4 σ_φ0 ⊗ σ_φ1)` and
//! `ZZ(θ) = exp(−iθ/2 Z⊗Z)`, with `σ_φ = cos φ X + sin φ Y`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{Circuit, GateOp, RpKind};
use crate::error::{Error, Result};
use crate::qcore::{apply_gate_to_slice, c, gates, kron, Operator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NativeGateSet {
    /// GPI, GPI2, VIRTZ and the Mølmer–Sørensen gate.
    Ms,
    /// GPI, GPI2, VIRTZ and the ZZ gate.
    Zz,
}

impl NativeGateSet {
    pub fn name(self) -> &'static str {
        match self {
            NativeGateSet::Ms => "ms",
            NativeGateSet::Zz => "zz",
        }
    }

    pub fn two_qubit_name(self) -> &'static str {
        match self {
            NativeGateSet::Ms => "MS",
            NativeGateSet::Zz => "ZZ",
        }
    }
}

impl FromStr for NativeGateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ms" | "aria" | "aria1" => Ok(NativeGateSet::Ms),
            "zz" | "forte" | "forte1" | "forte-ent1" => Ok(NativeGateSet::Zz),
            _ => Err(Error::InvalidParameter(format!("unknown native gate set `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NativeGate {
    Gpi { qubit: usize, phi: f64 },
    Gpi2 { qubit: usize, phi: f64 },
    VirtZ { qubit: usize, theta: f64 },
    Ms { q0: usize, q1: usize, phi0: f64, phi1: f64 },
    Zz { q0: usize, q1: usize, theta: f64 },
}

impl NativeGate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            NativeGate::Gpi { qubit, .. } | NativeGate::Gpi2 { qubit, .. } | NativeGate::VirtZ { qubit, .. } => {
                vec![qubit]
            }
            NativeGate::Ms { q0, q1, .. } | NativeGate::Zz { q0, q1, .. } => vec![q0, q1],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, NativeGate::Ms { .. } | NativeGate::Zz { .. })
    }

    pub fn unitary(&self) -> Operator {
        match *self {
            NativeGate::Gpi { phi, .. } => gpi(phi),
            NativeGate::Gpi2 { phi, .. } => gpi2(phi),
            NativeGate::VirtZ { theta, .. } => gates::rz(theta),
            NativeGate::Ms { phi0, phi1, .. } => ms(phi0, phi1),
            NativeGate::Zz { theta, .. } => zz(theta),
        }
    }
}

impl fmt::Display for NativeGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NativeGate::Gpi { qubit, phi } => write!(f, "GPI {qubit} {phi:.16e}"),
            NativeGate::Gpi2 { qubit, phi } => write!(f, "GPI2 {qubit} {phi:.16e}"),
            NativeGate::VirtZ { qubit, theta } => write!(f, "VIRTZ {qubit} {theta:.16e}"),
            NativeGate::Ms { q0, q1, phi0, phi1 } => write!(f, "MS {q0} {q1} {phi0:.16e} {phi1:.16e}"),
            NativeGate::Zz { q0, q1, theta } => write!(f, "ZZ {q0} {q1} {theta:.16e}"),
        }
    }
}

fn sigma(phi: f64) -> Operator {
    Operator::from_rows(2, &[c(0.0, 0.0), C64::from_polar(1.0, -phi), C64::from_polar(1.0, phi), c(0.0, 0.0)])
}

pub fn gpi(phi: f64) -> Operator {
    sigma(phi)
}

pub fn gpi2(phi: f64) -> Operator {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Operator::identity(2).scale(c(h, 0.0)).add(&sigma(phi).scale(c(0.0, -h))).expect("2x2")
}

pub fn ms(phi0: f64, phi1: f64) -> Operator {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let a = kron(&sigma(phi0), &sigma(phi1));
    Operator::identity(4).scale(c(h, 0.0)).add(&a.scale(c(0.0, -h))).expect("4x4")
}

pub fn zz(theta: f64) -> Operator {
    let (p, m) = (C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0));
    let z = c(0.0, 0.0);
    Operator::from_rows(4, &[p, z, z, z, z, m, z, z, z, z, m, z, z, z, z, p])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeCircuit {
    pub num_qubits: usize,
    pub gate_set: NativeGateSet,
    pub ops: Vec<NativeGate>,
    /// SHA-256 (hex) of the abstract circuit's text form.
    pub source_hash: String,
}

impl NativeCircuit {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# qubits={} gateset={} source={}\n",
            self.num_qubits,
            self.gate_set.name(),
            self.source_hash
        );
        for op in &self.ops {
            let _ = writeln!(out, "{op}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateCounts {
    /// All one-qubit natives, VIRTZ included.
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub virtual_z: usize,
}

impl GateCounts {
    /// `category,count` CSV.
    pub fn to_csv(&self) -> String {
        format!(
            "category,count\none_qubit,{}\ntwo_qubit,{}\nvirtual_z,{}\n",
            self.one_qubit, self.two_qubit, self.virtual_z
        )
    }
}

pub fn gate_counts(nc: &NativeCircuit) -> GateCounts {
    let mut counts = GateCounts::default();
    for op in &nc.ops {
        match op {
            NativeGate::Ms { .. } | NativeGate::Zz { .. } => counts.two_qubit += 1,
            NativeGate::VirtZ { .. } => {
                counts.one_qubit += 1;
                counts.virtual_z += 1;
            }
            NativeGate::Gpi { .. } | NativeGate::Gpi2 { .. } => counts.one_qubit += 1,
        }
    }
    counts
}

/// Intermediate form: arbitrary one-qubit unitaries plus native entanglers.
enum Stage {
    Local(usize, Operator),
    Native(NativeGate),
}

fn push_cnot(out: &mut Vec<Stage>, control: usize, target: usize, gs: NativeGateSet) {
    // CNOT = (I⊗H)·CZ·(I⊗H) and CZ ∝ (Rz(π/2)⊗Rz(π/2))·exp(+iπ/4 Z⊗Z).
    let h = gates::hadamard();
    out.push(Stage::Local(target, h.clone()));
    match gs {
        NativeGateSet::Zz => out.push(Stage::Native(NativeGate::Zz { q0: control, q1: target, theta: -FRAC_PI_2 })),
        NativeGateSet::Ms => {
            // exp(+iπ/4 Z⊗Z) = (H⊗H)·MS(0, π)·(H⊗H).
            out.push(Stage::Local(control, h.clone()));
            out.push(Stage::Local(target, h.clone()));
            out.push(Stage::Native(NativeGate::Ms { q0: control, q1: target, phi0: 0.0, phi1: PI }));
            out.push(Stage::Local(control, h.clone()));
            out.push(Stage::Local(target, h.clone()));
        }
    }
    out.push(Stage::Local(control, gates::rz(FRAC_PI_2)));
    out.push(Stage::Local(target, gates::rz(FRAC_PI_2)));
    out.push(Stage::Local(target, h));
}

/// One-qubit frames `(C0, C1)`; conjugating by `C0⊗C1` maps `X⊗X` and
/// `Z⊗Z` onto the two RP generators.
fn rp_frames(kind: RpKind) -> (Operator, Operator) {
    // Rx(−π/2): X → X, Z → Y.
    let c0 = gates::rx(-FRAC_PI_2);
    let c1 = match kind {
        RpKind::XxYy => gates::rx(-FRAC_PI_2),
        // H·S†: X → Y, Z → X.
        RpKind::XyYx => gates::hadamard().compose(&gates::s_gate().adjoint()).expect("2x2"),
    };
    (c0, c1)
}

fn push_rp(out: &mut Vec<Stage>, q0: usize, q1: usize, a: f64, b: f64, kind: RpKind, gs: NativeGateSet) {
    // CNOT·(Rx(a)⊗Rz(b))·CNOT = exp(−ia X⊗X/2)·exp(−ib Z⊗Z/2); the frames map
    // X⊗X and Z⊗Z onto the RP generators.
    let (c0, c1) = rp_frames(kind);
    out.push(Stage::Local(q0, c0.adjoint()));
    out.push(Stage::Local(q1, c1.adjoint()));
    push_cnot(out, q0, q1, gs);
    out.push(Stage::Local(q0, gates::rx(a)));
    out.push(Stage::Local(q1, gates::rz(b)));
    push_cnot(out, q0, q1, gs);
    out.push(Stage::Local(q0, c0));
    out.push(Stage::Local(q1, c1));
}

const EPS: f64 = 1e-12;

fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn push_virtz(out: &mut Vec<NativeGate>, qubit: usize, theta: f64) {
    let theta = wrap_angle(theta);
    if theta.abs() > EPS && (theta.abs() - 2.0 * PI).abs() > EPS {
        out.push(NativeGate::VirtZ { qubit, theta });
    }
}

/// Natives (time order) realizing `u` up to global phase.
pub fn decompose_one_qubit(u: &Operator, qubit: usize) -> Vec<NativeGate> {
    let m = u.matrix();
    let (u00, u01, u10, u11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mut out = Vec::new();
    if u10.norm() < EPS && u01.norm() < EPS {
        push_virtz(&mut out, qubit, u11.arg() - u00.arg());
        return out;
    }
    if u00.norm() < EPS && u11.norm() < EPS {
        out.push(NativeGate::Gpi { qubit, phi: wrap_angle((u10 / u01).arg() / 2.0) });
        return out;
    }
    // U ∝ Rz(φ)·Ry(θ)·Rz(λ) and Rz(φ)Ry(θ)Rz(λ) ∝ Rz(φ+π)·Rx(π/2)·Rz(θ+π)·Rx(π/2)·Rz(λ).
    // Entry phases are δ ∓ (φ+λ)/2 on the diagonal and δ + (φ−λ)/2 at u10;
    // a 2π slip in φ is a global sign only.
    let theta = 2.0 * u10.norm().atan2(u00.norm());
    let phi = u10.arg() - u00.arg();
    let lambda = u11.arg() - u10.arg();
    push_virtz(&mut out, qubit, lambda);
    out.push(NativeGate::Gpi2 { qubit, phi: 0.0 });
    push_virtz(&mut out, qubit, theta + PI);
    out.push(NativeGate::Gpi2 { qubit, phi: 0.0 });
    push_virtz(&mut out, qubit, phi + PI);
    out
}

pub fn source_hash(c: &Circuit) -> String {
    Sha256::digest(c.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Lowers `c` to `gs`. One-qubit gates between entanglers are fused per qubit
/// and re-synthesized with at most two GPI2 and three VIRTZ.
pub fn lower(c: &Circuit, gs: NativeGateSet) -> Result<NativeCircuit> {
    let mut stages = Vec::new();
    for op in c.ops() {
        match *op {
            GateOp::Ry { qubit, .. } | GateOp::X { qubit } => {
                stages.push(Stage::Local(qubit, op.unitary(c.rp_kind()).expect("unitary op")));
            }
            GateOp::Cnot { control, target } => push_cnot(&mut stages, control, target, gs),
            GateOp::Rp { q0, q1, a, b } => push_rp(&mut stages, q0, q1, a, b, c.rp_kind(), gs),
            GateOp::MeasureZ { .. } | GateOp::ClassicalX { .. } => {
                return Err(Error::Unsupported(format!("cannot lower {}", op.name())));
            }
        }
    }
    let n = c.num_qubits();
    let mut pending: Vec<Option<Operator>> = vec![None; n];
    let mut ops = Vec::new();
    let flush = |q: usize, pending: &mut Vec<Option<Operator>>, ops: &mut Vec<NativeGate>| {
        if let Some(u) = pending[q].take() {
            ops.extend(decompose_one_qubit(&u, q));
        }
    };
    for stage in stages {
        match stage {
            Stage::Local(q, u) => {
                pending[q] = Some(match pending[q].take() {
                    Some(prev) => u.compose(&prev).expect("2x2"),
                    None => u,
                });
            }
            Stage::Native(g) => {
                for q in g.qubits() {
                    flush(q, &mut pending, &mut ops);
                }
                ops.push(g);
            }
        }
    }
    for q in 0..n {
        flush(q, &mut pending, &mut ops);
    }
    Ok(NativeCircuit { num_qubits: n, gate_set: gs, ops, source_hash: source_hash(c) })
}

const MAX_DENSE_QUBITS: usize = 10;

fn dense_unitary<'a>(n: usize, gates: impl Iterator<Item = (Operator, Vec<usize>)> + 'a) -> Result<DMatrix<C64>> {
    if n > MAX_DENSE_QUBITS {
        return Err(Error::Unsupported(format!("dense unitary of {n} qubits")));
    }
    let dim = 1usize << n;
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for (g, targets) in gates {
        for mut col in u.column_iter_mut() {
            apply_gate_to_slice(col.as_mut_slice(), n, g.matrix(), &targets);
        }
    }
    Ok(u)
}

pub fn circuit_unitary(c: &Circuit) -> Result<DMatrix<C64>> {
    let rp = c.rp_kind();
    let gates = c
        .ops()
        .iter()
        .map(|op| {
            op.unitary(rp)
                .map(|u| (u, op.qubits()))
                .ok_or_else(|| Error::Unsupported(format!("{} has no unitary", op.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    dense_unitary(c.num_qubits(), gates.into_iter())
}

pub fn native_unitary(nc: &NativeCircuit) -> Result<DMatrix<C64>> {
    dense_unitary(nc.num_qubits, nc.ops.iter().map(|g| (g.unitary(), g.qubits())))
}

/// `1 − |tr(U†V)|/2^N`.
pub fn unitary_distance(u: &DMatrix<C64>, v: &DMatrix<C64>) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::DimensionMismatch { expected: u.nrows(), found: v.nrows() });
    }
    let overlap: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok((1.0 - overlap.norm() / u.nrows() as f64).max(0.0))
}

pub fn verify_equivalence(c: &Circuit, nc: &NativeCircuit) -> Result<f64> {
    if c.num_qubits() != nc.num_qubits {
        return Err(Error::DimensionMismatch { expected: c.num_qubits(), found: nc.num_qubits });
    }
    unitary_distance(&circuit_unitary(c)?, &native_unitary(nc)?)
}

/// Gate counts per category for a lowered circuit, keyed for reports.
pub fn count_table(nc: &NativeCircuit) -> BTreeMap<&'static str, usize> {
    let g = gate_counts(nc);
    BTreeMap::from([("one_qubit", g.one_qubit), ("two_qubit", g.two_qubit), ("virtual_z", g.virtual_z)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_gsp_circuit_with, param_init, ParamSet};
    use crate::rng;
    use rand::Rng as _;

    fn close_up_to_phase(a: &Operator, b: &Operator) -> bool {
        unitary_distance(a.matrix(), b.matrix()).unwrap() < 1e-12
    }

    #[test]
    fn native_gate_identities() {
        assert!(close_up_to_phase(&gpi2(0.0), &gates::rx(FRAC_PI_2)));
        assert!(close_up_to_phase(&gpi(0.0), &gates::pauli_x()));
        assert!(close_up_to_phase(&gpi(FRAC_PI_2), &gates::pauli_y()));
        assert!(ms(0.3, 1.1).unitarity_deviation() < 1e-14);
        assert!(zz(0.7).unitarity_deviation() < 1e-14);
        // IonQ matrix form of MS.
        let m = ms(0.4, 0.9);
        let expect = C64::from_polar(1.0, 1.3) * c(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        assert!((m.matrix()[(3, 0)] - expect).norm() < 1e-14);
    }

    #[test]
    fn frames_conjugate_as_documented() {
        let conj = |c: &Operator, p: &Operator| c.compose(p).unwrap().compose(&c.adjoint()).unwrap();
        let (c0, c1) = rp_frames(RpKind::XyYx);
        assert!(conj(&c0, &gates::pauli_x()).max_abs_diff(&gates::pauli_x()) < 1e-14);
        assert!(conj(&c0, &gates::pauli_z()).max_abs_diff(&gates::pauli_y()) < 1e-14);
        assert!(conj(&c1, &gates::pauli_x()).max_abs_diff(&gates::pauli_y()) < 1e-14);
        assert!(conj(&c1, &gates::pauli_z()).max_abs_diff(&gates::pauli_x()) < 1e-14);
    }

    #[test]
    fn one_qubit_synthesis_is_exact() {
        let mut r = rng::from_seed(12);
        for _ in 0..200 {
            let (a, b, d) = (r.random_range(-PI..PI), r.random_range(-PI..PI), r.random_range(-PI..PI));
            let u = gates::rz(a).compose(&gates::ry(b)).unwrap().compose(&gates::rz(d)).unwrap();
            let nat = decompose_one_qubit(&u, 0);
            assert!(nat.len() <= 5);
            let v = dense_unitary(1, nat.iter().map(|g| (g.unitary(), g.qubits()))).unwrap();
            assert!(unitary_distance(u.matrix(), &v).unwrap() < 1e-12);
        }
        assert!(decompose_one_qubit(&Operator::identity(2), 0).is_empty());
        assert_eq!(decompose_one_qubit(&gates::rz(0.4), 0).len(), 1);
        assert!(matches!(decompose_one_qubit(&gates::pauli_y(), 0)[..], [NativeGate::Gpi { .. }]));
    }

    #[test]
    fn single_gates_lower_with_expected_counts() {
        for gs in [NativeGateSet::Ms, NativeGateSet::Zz] {
            let mut c = Circuit::bare(2);
            c.push(GateOp::Cnot { control: 0, target: 1 }).unwrap();
            let nc = lower(&c, gs).unwrap();
            assert_eq!(gate_counts(&nc).two_qubit, 1);
            assert!(verify_equivalence(&c, &nc).unwrap() < 1e-12);

            let mut c = Circuit::bare(1);
            c.push(GateOp::Ry { qubit: 0, angle: 0.3 }).unwrap();
            let nc = lower(&c, gs).unwrap();
            assert_eq!(gate_counts(&nc).two_qubit, 0);
            assert!(verify_equivalence(&c, &nc).unwrap() < 1e-12);

            for kind in [RpKind::XyYx, RpKind::XxYy] {
                let mut c = Circuit::bare(2).with_rp(kind);
                c.push(GateOp::Rp { q0: 1, q1: 0, a: 0.7, b: -1.9 }).unwrap();
                let nc = lower(&c, gs).unwrap();
                assert_eq!(gate_counts(&nc).two_qubit, 2);
                assert!(verify_equivalence(&c, &nc).unwrap() < 1e-12, "{kind:?} {gs:?}");
            }
        }
    }

    #[test]
    fn empty_circuit_counts_are_zero() {
        let nc = lower(&Circuit::bare(2), NativeGateSet::Ms).unwrap();
        assert_eq!(gate_counts(&nc), GateCounts::default());
    }

    #[test]
    fn gsp_lowering_counts_and_equivalence() {
        for n in 2..=3 {
            for gs in [NativeGateSet::Ms, NativeGateSet::Zz] {
                let c = build_gsp_circuit_with(&param_init(n, 1, 1, n as u64).unwrap(), RpKind::XyYx).unwrap();
                let nc = lower(&c, gs).unwrap();
                let g = gate_counts(&nc);
                assert_eq!(g.two_qubit, c.count("CNOT") + 2 * c.count("RP"));
                assert!(verify_equivalence(&c, &nc).unwrap() < 1e-8);
            }
        }
        let c = build_gsp_circuit_with(&ParamSet::zeros(2, 1, 1).unwrap(), RpKind::XyYx).unwrap();
        assert_eq!(gate_counts(&lower(&c, NativeGateSet::Ms).unwrap()).two_qubit, 7);
    }

    #[test]
    fn lowering_is_deterministic_and_hash_tracks_source() {
        let p = param_init(2, 1, 1, 3).unwrap();
        let c = build_gsp_circuit_with(&p, RpKind::XyYx).unwrap();
        assert_eq!(lower(&c, NativeGateSet::Zz).unwrap(), lower(&c, NativeGateSet::Zz).unwrap());
        let c2 = build_gsp_circuit_with(&param_init(2, 1, 1, 4).unwrap(), RpKind::XyYx).unwrap();
        assert_ne!(source_hash(&c), source_hash(&c2));
        assert_eq!(source_hash(&c).len(), 64);
    }

    #[test]
    fn distance_cases() {
        let cn = gates::cnot();
        let id = Operator::identity(4);
        assert!((unitary_distance(cn.matrix(), id.matrix()).unwrap() - 0.5).abs() < 1e-15);
        let phased = cn.scale(C64::from_polar(1.0, PI / 3.0));
        assert!(unitary_distance(cn.matrix(), phased.matrix()).unwrap() < 1e-12);
        assert!(unitary_distance(cn.matrix(), gates::i2().matrix()).is_err());
    }

    #[test]
    fn feedforward_circuits_are_rejected() {
        let c = crate::ansatz::build_feedforward_variant(&ParamSet::zeros(2, 1, 1).unwrap()).unwrap();
        assert!(matches!(lower(&c, NativeGateSet::Ms), Err(Error::Unsupported(_))));
    }
}
