//! Train the variational ansatz for a two-site Gibbs state without noise and
//! compare against the exact state.

use gsp::sim::NoiseProfile;
use gsp::thermo::{GibbsTarget, TfimParams};
use gsp::vqa::{train, TrainConfig};

fn main() -> gsp::Result<()> {
    let target = GibbsTarget::new(TfimParams::new(2, 1.0)?, 1.0)?;
    let cfg = TrainConfig { restarts: 4, ..Default::default() };
    let out = train(&target, &NoiseProfile::noiseless(), &cfg, 7)?;

    for r in &out.restarts {
        println!("restart {} cost {:.5} fidelity {:.5}", r.restart, r.result.best_cost, r.fidelity);
    }
    let best = out.best();
    println!("selected restart {} (fidelity {:.5})", best.restart, best.fidelity);
    println!("theta = {:?}", best.result.best_params.theta);
    println!("phi   = {:?}", best.result.best_params.phi);
    Ok(())
}
