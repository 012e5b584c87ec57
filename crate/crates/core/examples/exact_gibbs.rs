//! Exact thermal quantities of the periodic TFIM at a few temperatures.

use gsp::thermo::{equilibrium_free_energy, exact_gibbs, partition_function, GibbsTarget, TfimParams};

fn main() -> gsp::Result<()> {
    let params = TfimParams::new(3, 1.0)?;
    for beta in [0.1, 1.0, 5.0] {
        let t = GibbsTarget::new(params, beta)?;
        let rho = exact_gibbs(&t);
        let ground = rho.eigenvalues().into_iter().fold(0.0, f64::max);
        println!(
            "beta={beta:<4} Z={:<12.6} F={:<10.6} largest population={ground:.4}",
            partition_function(&t),
            equilibrium_free_energy(&t)?,
        );
    }
    let t = GibbsTarget::new(params, 1.0)?;
    println!("spectrum at h=1: {:?}", t.spectrum().eigenvalues.iter().map(|e| (e * 1e6).round() / 1e6).collect::<Vec<_>>());
    Ok(())
}
