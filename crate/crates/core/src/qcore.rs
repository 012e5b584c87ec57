//! Dense complex linear algebra and quantum-information primitives.
//!
//! Qubit ordering: qubit 0 is the most significant bit of a basis index, so
//! for a register of `n` qubits the basis state `|q0 q1 ... q(n-1)>` has index
//! `q0·2^(n-1) + ... + q(n-1)`. Bitstrings printed anywhere in the crate use
//! the same order (leftmost character is qubit 0).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-8;
const STATE_TOL: f64 = 1e-10;
/// Eigenvalues at or below this are treated as zero before logarithms / roots.
pub const EIGEN_FLOOR: f64 = 1e-15;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Bit position of qubit `q` inside a basis index of an `n`-qubit register.
#[inline]
pub fn bit_position(n: usize, q: usize) -> usize {
    n - 1 - q
}

/// Value (0 or 1) of qubit `q` in basis index `index`.
#[inline]
pub fn qubit_bit(index: usize, n: usize, q: usize) -> usize {
    (index >> bit_position(n, q)) & 1
}

fn log2_exact(dim: usize) -> Option<usize> {
    (dim.is_power_of_two() && dim > 0).then(|| dim.trailing_zeros() as usize)
}

fn max_hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A square complex operator whose dimension is a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if log2_exact(matrix.nrows()).is_none() {
            return Err(Error::InvalidParameter(format!(
                "operator dimension {} is not a power of two",
                matrix.nrows()
            )));
        }
        Ok(Self { matrix })
    }

    /// Builds an operator from row-major entries. Panics on a non-square or
    /// non-power-of-two length; intended for constant gate tables.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), dim * dim);
        Self::new(DMatrix::from_row_slice(dim, dim, entries)).expect("valid gate table")
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity dimension must be a power of two")
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dimension().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        if self.dimension() != rhs.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: rhs.dimension(),
            });
        }
        Ok(Self { matrix: &self.matrix * &rhs.matrix })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { matrix: self.matrix.map(|z| z * factor) }
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        if self.dimension() != rhs.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: rhs.dimension(),
            });
        }
        Ok(Self { matrix: &self.matrix + &rhs.matrix })
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_hermitian_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Largest entry magnitude of `U·U† − I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dimension();
        let prod = &self.matrix * self.matrix.adjoint();
        (prod - DMatrix::<C64>::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry magnitude of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        (&self.matrix - &rhs.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: psi.dimension(),
            });
        }
        Ok(StateVector { num_qubits: psi.num_qubits, amplitudes: &self.matrix * &psi.amplitudes })
    }
}

pub mod gates {
    //! Constant one- and two-qubit gate matrices.
    use super::{c, Operator};
    use std::f64::consts::FRAC_1_SQRT_2;

    pub fn i2() -> Operator {
        Operator::identity(2)
    }

    pub fn pauli_x() -> Operator {
        Operator::from_rows(2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn pauli_y() -> Operator {
        Operator::from_rows(2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn pauli_z() -> Operator {
        Operator::from_rows(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    pub fn hadamard() -> Operator {
        let h = FRAC_1_SQRT_2;
        Operator::from_rows(2, &[c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)])
    }

    /// Phase gate `diag(1, i)`.
    pub fn s_gate() -> Operator {
        Operator::from_rows(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)])
    }

    /// `exp(-i θ Y / 2)`.
    pub fn ry(theta: f64) -> Operator {
        let (s, co) = (theta / 2.0).sin_cos();
        Operator::from_rows(2, &[c(co, 0.), c(-s, 0.), c(s, 0.), c(co, 0.)])
    }

    /// `exp(-i θ X / 2)`.
    pub fn rx(theta: f64) -> Operator {
        let (s, co) = (theta / 2.0).sin_cos();
        Operator::from_rows(2, &[c(co, 0.), c(0., -s), c(0., -s), c(co, 0.)])
    }

    /// `exp(-i θ Z / 2)`.
    pub fn rz(theta: f64) -> Operator {
        let (s, co) = (theta / 2.0).sin_cos();
        Operator::from_rows(2, &[c(co, -s), c(0., 0.), c(0., 0.), c(co, s)])
    }

    /// Controlled-NOT with the first (most significant) qubit as control.
    pub fn cnot() -> Operator {
        let o = c(0., 0.);
        let l = c(1., 0.);
        Operator::from_rows(4, &[l, o, o, o, o, l, o, o, o, o, o, l, o, o, l, o])
    }
}

/// Kronecker product; `a`'s index is the high-order index of the result.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator { matrix: a.matrix.kronecker(&b.matrix) }
}

fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::InvalidQubits(format!("qubit {t} out of range for {n} qubits")));
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidQubits(format!("duplicate qubit {t}")));
        }
    }
    Ok(())
}

/// Lifts `gate` to an `n`-qubit operator acting on `targets` (the gate's own
/// qubit 0 maps to `targets[0]`) and as the identity elsewhere.
pub fn embed(gate: &Operator, targets: &[usize], n: usize) -> Result<Operator> {
    if gate.dimension() != 1 << targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1 << targets.len(),
            found: gate.dimension(),
        });
    }
    check_targets(targets, n)?;
    let dim = 1usize << n;
    let mut matrix = DMatrix::<C64>::identity(dim, dim);
    for col in 0..dim {
        apply_gate_to_slice(matrix.column_mut(col).as_mut_slice(), n, gate.matrix(), targets);
    }
    Ok(Operator { matrix })
}

/// Applies a `k`-qubit gate in place to an amplitude vector of `n` qubits.
///
/// Targets are assumed valid and distinct; callers validate.
pub fn apply_gate_to_slice(amps: &mut [C64], n: usize, gate: &DMatrix<C64>, targets: &[usize]) {
    let k = targets.len();
    let sub = 1usize << k;
    debug_assert_eq!(gate.nrows(), sub);
    debug_assert_eq!(amps.len(), 1 << n);
    let positions: Vec<usize> = targets.iter().map(|&t| bit_position(n, t)).collect();
    let mask: usize = positions.iter().map(|&p| 1usize << p).sum();
    let offsets: Vec<usize> = (0..sub)
        .map(|s| {
            (0..k)
                .filter(|&j| (s >> (k - 1 - j)) & 1 == 1)
                .map(|j| 1usize << positions[j])
                .sum()
        })
        .collect();
    let mut buf = vec![C64::new(0.0, 0.0); sub];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (s, b) in buf.iter_mut().enumerate() {
            *b = amps[base + offsets[s]];
        }
        for r in 0..sub {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..sub {
                acc += gate[(r, s)] * buf[s];
            }
            amps[base + offsets[r]] = acc;
        }
    }
}

/// `ρ → U ρ U†` for a gate on `targets` of an `n`-qubit density matrix.
pub fn apply_gate_to_density(rho: &mut DMatrix<C64>, n: usize, gate: &DMatrix<C64>, targets: &[usize]) {
    // Column-major storage: the flat index is `col·d + row`, i.e. a 2n-qubit
    // vector whose high qubits index the column and low qubits the row.
    let rows: Vec<usize> = targets.iter().map(|&t| t + n).collect();
    let conj = gate.map(|z| z.conj());
    let flat = rho.as_mut_slice();
    apply_gate_to_slice(flat, 2 * n, gate, &rows);
    apply_gate_to_slice(flat, 2 * n, &conj, targets);
}

/// Depolarizing channel `ρ → (1−p)ρ + p·(I/2^k ⊗ Tr_targets ρ)` on `targets`.
pub fn depolarize_density(rho: &mut DMatrix<C64>, n: usize, targets: &[usize], p: f64) {
    if p == 0.0 {
        return;
    }
    let k = targets.len();
    let sub = 1usize << k;
    let positions: Vec<usize> = targets.iter().map(|&t| bit_position(n, t)).collect();
    let mask: usize = positions.iter().map(|&p| 1usize << p).sum();
    let offsets: Vec<usize> = (0..sub)
        .map(|s| {
            (0..k)
                .filter(|&j| (s >> (k - 1 - j)) & 1 == 1)
                .map(|j| 1usize << positions[j])
                .sum()
        })
        .collect();
    let d = rho.nrows();
    let original = rho.clone();
    *rho *= C64::new(1.0 - p, 0.0);
    let weight = p / sub as f64;
    for i0 in (0..d).filter(|i| i & mask == 0) {
        for j0 in (0..d).filter(|j| j & mask == 0) {
            let traced: C64 = offsets.iter().map(|&o| original[(i0 + o, j0 + o)]).sum();
            for &o in &offsets {
                rho[(i0 + o, j0 + o)] += traced * weight;
            }
        }
    }
}

/// Removes coherences between the two computational states of `qubit`.
pub fn dephase_density(rho: &mut DMatrix<C64>, n: usize, qubit: usize) {
    let d = rho.nrows();
    for j in 0..d {
        for i in 0..d {
            if qubit_bit(i, n, qubit) != qubit_bit(j, n, qubit) {
                rho[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amplitudes = DVector::zeros(1 << num_qubits);
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { num_qubits, amplitudes }
    }

    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let num_qubits = log2_exact(amplitudes.len()).ok_or_else(|| {
            Error::InvalidState(format!("length {} is not a power of two", amplitudes.len()))
        })?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self { num_qubits, amplitudes })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(amplitudes / C64::new(norm, 0.0))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        self.amplitudes.as_mut_slice()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from(self)
    }
}

/// A mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: DMatrix<C64>,
}

impl From<&StateVector> for DensityMatrix {
    fn from(psi: &StateVector) -> Self {
        let a = &psi.amplitudes;
        Self { num_qubits: psi.num_qubits, matrix: a * a.adjoint() }
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity at `1e-10`.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Only checks the shape. Simulation engines use this on the hot path and
    /// produce valid states by construction.
    pub fn from_matrix_unchecked(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let num_qubits = log2_exact(matrix.nrows()).ok_or_else(|| {
            Error::InvalidState(format!("dimension {} is not a power of two", matrix.nrows()))
        })?;
        Ok(Self { num_qubits, matrix })
    }

    pub fn validate(&self) -> Result<()> {
        let dev = max_hermitian_deviation(&self.matrix);
        if dev > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        let matrix = DMatrix::<C64>::identity(d, d) / C64::new(d as f64, 0.0);
        Self { num_qubits, matrix }
    }

    /// `diag(p)` in the computational basis.
    pub fn diagonal(probabilities: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(probabilities.len(), probabilities.iter().map(|&p| C64::new(p, 0.0)));
        Self::new(DMatrix::from_diagonal(&v))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn as_operator(&self) -> Operator {
        Operator { matrix: self.matrix.clone() }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Real parts of the computational-basis diagonal.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        (0..self.dimension()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    /// `tr{O ρ}` (real part; exact for Hermitian `O`).
    pub fn expectation(&self, op: &Operator) -> Result<f64> {
        if op.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), found: op.dimension() });
        }
        let d = self.dimension();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += op.matrix[(i, j)] * self.matrix[(j, i)];
            }
        }
        Ok(acc.re)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_hermitian_deviation(&self.matrix)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Eigendecomposition of a Hermitian matrix, sorted ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn reconstruct(&self) -> Operator {
        self.map_eigenvalues(|e| e)
    }

    /// `V diag(f(E)) V†`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> Operator {
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        self.weighted(&weights)
    }

    /// `V diag(w) V†` for one weight per eigenvector.
    pub fn weighted(&self, weights: &[f64]) -> Operator {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &w) in weights.iter().enumerate() {
            scaled.column_mut(j).scale_mut(w);
        }
        Operator { matrix: scaled * v.adjoint() }
    }

    pub fn eigenvector(&self, i: usize) -> StateVector {
        StateVector {
            num_qubits: self.eigenvectors.nrows().trailing_zeros() as usize,
            amplitudes: self.eigenvectors.column(i).into_owned(),
        }
    }
}

pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn eigh(h: &Operator) -> Result<Spectrum> {
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(&h.matrix);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// `exp(scale · H)` for Hermitian `H`.
pub fn herm_exp(h: &Operator, scale: f64) -> Result<Operator> {
    Ok(eigh(h)?.map_eigenvalues(|e| (scale * e).exp()))
}

/// Reduced state on `keep` (ascending qubit order in the result).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_qubits;
    if keep.is_empty() {
        return Err(Error::InvalidQubits("keep set is empty".into()));
    }
    check_targets(keep, n)?;
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let kd = 1usize << keep.len();
    let td = 1usize << traced.len();

    let spread = |bits: usize, qubits: &[usize]| -> usize {
        let k = qubits.len();
        qubits
            .iter()
            .enumerate()
            .filter(|&(j, _)| (bits >> (k - 1 - j)) & 1 == 1)
            .map(|(_, &q)| 1usize << bit_position(n, q))
            .sum()
    };
    let keep_idx: Vec<usize> = (0..kd).map(|b| spread(b, &keep)).collect();
    let traced_idx: Vec<usize> = (0..td).map(|b| spread(b, &traced)).collect();

    let mut out = DMatrix::<C64>::zeros(kd, kd);
    for (kj, &cj) in keep_idx.iter().enumerate() {
        for (ki, &ci) in keep_idx.iter().enumerate() {
            out[(ki, kj)] = traced_idx.iter().map(|&t| rho.matrix[(ci + t, cj + t)]).sum();
        }
    }
    Ok(DensityMatrix { num_qubits: keep.len(), matrix: out })
}

/// Reduced state of a pure state on `keep`, via `ρ = M M†` where `M` is the
/// amplitude vector reshaped to keep × traced. Avoids the full density matrix.
pub fn partial_trace_pure(psi: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let n = psi.num_qubits();
    if keep.is_empty() {
        return Err(Error::InvalidQubits("keep set is empty".into()));
    }
    check_targets(keep, n)?;
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let gather = |index: usize, qubits: &[usize]| -> usize {
        qubits.iter().fold(0, |acc, &q| (acc << 1) | qubit_bit(index, n, q))
    };
    let mut m = DMatrix::<C64>::zeros(1 << keep.len(), 1 << traced.len());
    for (i, &a) in psi.amplitudes.iter().enumerate() {
        m[(gather(i, &keep), gather(i, &traced))] = a;
    }
    let rho = &m * m.adjoint();
    Ok(DensityMatrix { num_qubits: keep.len(), matrix: rho })
}

/// `−Σ p ln p` over eigenvalues, in nats; eigenvalues ≤ 1e-15 contribute 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.eigenvalues())
}

/// `−Σ p ln p` over a probability list with the same clipping rule.
pub fn shannon_entropy(probabilities: &[f64]) -> f64 {
    let s: f64 = probabilities
        .iter()
        .filter(|&&p| p > EIGEN_FLOOR)
        .map(|&p| -p * p.ln())
        .sum();
    s.max(0.0)
}

fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (values, vectors) = hermitian_eigen(m);
    Spectrum { eigenvalues: values, eigenvectors: vectors }
        .map_eigenvalues(|e| if e > EIGEN_FLOOR { e.sqrt() } else { 0.0 })
        .matrix
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dimension() != sigma.dimension() {
        return Err(Error::DimensionMismatch { expected: rho.dimension(), found: sigma.dimension() });
    }
    let sqrt_rho = psd_sqrt(&rho.matrix);
    let inner = &sqrt_rho * &sigma.matrix * &sqrt_rho;
    let (values, _) = hermitian_eigen(&inner);
    let root_sum: f64 = values.iter().filter(|&&e| e > EIGEN_FLOOR).map(|e| e.sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dimension() != sigma.dimension() {
        return Err(Error::DimensionMismatch { expected: rho.dimension(), found: sigma.dimension() });
    }
    let (values, _) = hermitian_eigen(&(&rho.matrix - &sigma.matrix));
    Ok((0.5 * values.iter().map(|e| e.abs()).sum::<f64>()).clamp(0.0, 1.0))
}
