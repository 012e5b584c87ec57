//! Transverse-field Ising Hamiltonian, exact Gibbs states and free energies.
//!
//! Natural units throughout: `k_B = 1`, entropies in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{c, embed, gates, von_neumann_entropy, DensityMatrix, Operator, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfimParams {
    pub n: usize,
    pub h: f64,
}

impl TfimParams {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("TFIM needs n >= 2, got {n}")));
        }
        if !h.is_finite() {
            return Err(Error::InvalidParameter(format!("field strength {h} is not finite")));
        }
        Ok(Self { n, h })
    }

    /// Bond list `(i, i+1 mod n)` for `i = 0..n`. At `n = 2` the pair
    /// `(0, 1)` appears twice (as `(0,1)` and `(1,0)`), doubling that coupling.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        (0..self.n).map(|i| (i, (i + 1) % self.n)).collect()
    }
}

/// `H = −½ Σ_i X_i X_{i+1} − h Σ_i Z_i` with periodic boundaries.
pub fn tfim_hamiltonian(p: &TfimParams) -> Result<Operator> {
    let p = TfimParams::new(p.n, p.h)?;
    let n = p.n;
    let xx = crate::qcore::kron(&gates::pauli_x(), &gates::pauli_x());
    let mut h = Operator::identity(1 << n).scale(c(0.0, 0.0));
    for (i, j) in p.bonds() {
        h = h.add(&embed(&xx, &[i, j], n)?.scale(c(-0.5, 0.0)))?;
    }
    for i in 0..n {
        h = h.add(&embed(&gates::pauli_z(), &[i], n)?.scale(c(-p.h, 0.0)))?;
    }
    Ok(h)
}

/// A Hamiltonian at inverse temperature `beta`, with its spectrum cached.
#[derive(Debug, Clone)]
pub struct GibbsTarget {
    params: TfimParams,
    beta: f64,
    hamiltonian: Operator,
    spectrum: Spectrum,
}

impl GibbsTarget {
    pub fn new(params: TfimParams, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        let hamiltonian = tfim_hamiltonian(&params)?;
        let spectrum = crate::qcore::eigh(&hamiltonian)?;
        Ok(Self { params, beta, hamiltonian, spectrum })
    }

    /// Same Hamiltonian at another temperature, reusing the spectrum.
    pub fn at_beta(&self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self { beta, ..self.clone() })
    }

    pub fn params(&self) -> TfimParams {
        self.params
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Boltzmann weights normalized to sum 1, ascending energy order.
    pub fn boltzmann_weights(&self) -> Vec<f64> {
        let e0 = self.spectrum.eigenvalues[0];
        let w: Vec<f64> = self.spectrum.eigenvalues.iter().map(|&e| (-self.beta * (e - e0)).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }
}

/// `e^{−βH} / Z`, computed with the spectrum shifted by its minimum.
pub fn exact_gibbs(t: &GibbsTarget) -> DensityMatrix {
    let d = t.spectrum.eigenvalues.len();
    if t.beta == 0.0 {
        return DensityMatrix::maximally_mixed(d.trailing_zeros() as usize);
    }
    let m = t.spectrum.weighted(&t.boltzmann_weights()).into_matrix();
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityMatrix::from_matrix_unchecked(m).expect("square power-of-two")
}

/// `ln Z(β)` evaluated stably as `−βE_0 + ln Σ e^{−β(E_i − E_0)}`.
pub fn log_partition_function(t: &GibbsTarget) -> f64 {
    let e = &t.spectrum.eigenvalues;
    let e0 = e[0];
    -t.beta * e0 + e.iter().map(|&x| (-t.beta * (x - e0)).exp()).sum::<f64>().ln()
}

/// `Z(β) = tr e^{−βH}`.
pub fn partition_function(t: &GibbsTarget) -> f64 {
    log_partition_function(t).exp()
}

/// `F(ρ) = tr{Hρ} − S(ρ)/β`; requires `β > 0`.
pub fn free_energy(rho: &DensityMatrix, t: &GibbsTarget) -> Result<f64> {
    if t.beta <= 0.0 {
        return Err(Error::InvalidParameter("free energy requires beta > 0".into()));
    }
    let energy = rho.expectation(&t.hamiltonian)?;
    Ok(energy - von_neumann_entropy(rho) / t.beta)
}

/// Equilibrium free energy `−ln Z / β`.
pub fn equilibrium_free_energy(t: &GibbsTarget) -> Result<f64> {
    if t.beta <= 0.0 {
        return Err(Error::InvalidParameter("free energy requires beta > 0".into()));
    }
    Ok(-log_partition_function(t) / t.beta)
}
