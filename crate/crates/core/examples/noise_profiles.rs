//! Built-in device profiles and how the prepared state's free energy degrades
//! as two-qubit error grows.

use gsp::ansatz::build_gsp_circuit;
use gsp::sim::{builtin_profiles, execute_reduced};
use gsp::thermo::{equilibrium_free_energy, free_energy, GibbsTarget, TfimParams};
use gsp::vqa::{train, CostMode, TrainConfig};

fn main() -> gsp::Result<()> {
    for p in builtin_profiles() {
        let ent = p.metadata.as_ref().map_or("-", |m| m.entangler.as_str());
        println!("{:<11} p1={:<7} p2={:<7} spam={:<7} entangler={ent}", p.name, p.p1, p.p2, p.p_spam);
    }

    let target = GibbsTarget::new(TfimParams::new(2, 1.0)?, 1.0)?;
    let cfg = TrainConfig { restarts: 3, mode: CostMode::Exact, ..Default::default() };
    let quiet = gsp::sim::NoiseProfile::noiseless();
    let params = train(&target, &quiet, &cfg, 9)?.best().result.best_params.clone();
    let circuit = build_gsp_circuit(&params)?;

    let aria = gsp::sim::profile_by_name("aria1")?;
    println!("F_eq = {:.5}", equilibrium_free_energy(&target)?);
    for factor in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let rho = execute_reduced(&circuit, &aria.scaled_p2(factor))?.system;
        println!("p2 x{factor:<3} F = {:.5}", free_energy(&rho, &target)?);
    }
    Ok(())
}
