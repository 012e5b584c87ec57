//! Local-Pauli tomography of an exact Gibbs state, with and without readout
//! error, at increasing shot counts.

use gsp::qcore::uhlmann_fidelity;
use gsp::rng;
use gsp::thermo::{exact_gibbs, GibbsTarget, TfimParams};
use gsp::verify::{reconstruct, tomography_collect};

fn main() -> gsp::Result<()> {
    let rho = exact_gibbs(&GibbsTarget::new(TfimParams::new(2, 1.0)?, 2.0)?);
    for p_spam in [0.0, 0.005] {
        for shots in [256, 1024, 8192] {
            let data = tomography_collect(&rho, shots, p_spam, &mut rng::from_seed(3))?;
            let est = reconstruct(&data)?;
            println!("p_spam={p_spam} shots={shots:<5} fidelity={:.5}", uhlmann_fidelity(&est, &rho)?);
        }
    }
    Ok(())
}
