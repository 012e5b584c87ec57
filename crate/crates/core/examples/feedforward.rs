//! The coherent-CNOT circuit and its measure-and-correct variant prepare the
//! same system state.

use gsp::ansatz::{build_feedforward_variant, build_gsp_circuit, param_init};
use gsp::qcore::uhlmann_fidelity;
use gsp::sim::{execute_reduced, NoiseProfile};

fn main() -> gsp::Result<()> {
    let params = param_init(3, 1, 1, 11)?;
    let coherent = build_gsp_circuit(&params)?;
    let feedforward = build_feedforward_variant(&params)?;
    print!("{}", feedforward.to_text());

    let quiet = NoiseProfile::noiseless();
    let a = execute_reduced(&coherent, &quiet)?.system;
    let b = execute_reduced(&feedforward, &quiet)?.system;
    println!("max |rho_coherent - rho_feedforward| = {:.2e}", a.max_abs_diff(&b));
    println!("fidelity = {:.12}", uhlmann_fidelity(&a, &b)?);
    Ok(())
}
