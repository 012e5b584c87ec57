//! A small resumable experiment grid written to a temporary directory.

use gsp::runner::{fidelity_trend_violations, report, run_grid, ExperimentConfig};

fn main() -> gsp::Result<()> {
    let dir = std::env::temp_dir().join("gsp-example-grid");
    let mut cfg = ExperimentConfig::new(vec![2], vec![1.0], vec![0.5, 2.0], "forte1");
    cfg.restarts = 2;
    cfg.max_iterations = 60;
    cfg.output_directory = dir.clone();

    let records = run_grid(&cfg)?;
    for r in &records {
        match (&r.metrics, &r.failure) {
            (Some(m), _) => println!(
                "beta={} restart={} fidelity={:.4} delta_beta={:.3}",
                r.point.beta, r.point.restart, m.fidelity, m.delta_beta
            ),
            (None, Some(f)) => println!("beta={} failed in {}: {}", r.point.beta, f.stage, f.message),
            (None, None) => unreachable!(),
        }
    }
    for path in report(&records, &dir)? {
        println!("wrote {}", path.display());
    }
    println!("trend violations: {:?}", fidelity_trend_violations(&records, 0.02));
    Ok(())
}
