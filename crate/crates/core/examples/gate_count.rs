//! Lower the GSP circuit to both trapped-ion native gate sets and check the
//! result against the source unitary.

use gsp::ansatz::{build_gsp_circuit, param_init};
use gsp::transpile::{gate_counts, lower, verify_equivalence, NativeGateSet};

fn main() -> gsp::Result<()> {
    for n in [2, 3] {
        let c = build_gsp_circuit(&param_init(n, 1, 1, 1)?)?;
        for gs in [NativeGateSet::Ms, NativeGateSet::Zz] {
            let nc = lower(&c, gs)?;
            let counts = gate_counts(&nc);
            println!(
                "n={n} {:<2} 1q={:<3} 2q={:<3} virtual_z={:<3} distance={:.1e}",
                gs.name(),
                counts.one_qubit,
                counts.two_qubit,
                counts.virtual_z,
                verify_equivalence(&c, &nc)?
            );
        }
    }
    Ok(())
}
