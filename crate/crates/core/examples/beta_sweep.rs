//! Train under the aria1 noise profile, reconstruct the prepared state by
//! tomography and find the temperature it is closest to.

use gsp::sim::profile_by_name;
use gsp::thermo::TfimParams;
use gsp::verify::{default_sweep_grid, delta_beta_curve};
use gsp::vqa::TrainConfig;

fn main() -> gsp::Result<()> {
    let noise = profile_by_name("aria1")?;
    let cfg = TrainConfig { restarts: 3, ..Default::default() };
    let points = delta_beta_curve(&noise, &TfimParams::new(2, 1.0)?, &[0.5, 2.0, 5.0], &cfg, 1024, &default_sweep_grid(), 5)?;
    println!("beta  beta*   delta  fidelity");
    for p in points {
        println!("{:<5} {:<7.3} {:<6.3} {:.4}", p.beta, p.sweep.beta_star, p.sweep.delta_beta, p.fidelity);
    }
    Ok(())
}
