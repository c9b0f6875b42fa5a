//! Scans the control-line time constant and prints the detected flat-region
//! width at the example pulse shape, then the width across pulse heights at
//! the default time constant.
//!
//! cargo run --release -p qcr-core --example calibrate_tau_c

use std::time::Instant;

use qcr_core::pipeline::{calibrate_tau_c, example_taus_ns, flat_region_ns, theory_table, DEFAULT_TAU_C_NS};
use qcr_core::reference::EXAMPLE_EDGE_NS;
use qcr_core::Config;

fn main() -> qcr_core::Result<()> {
    let config = Config::table_one();
    let start = Instant::now();
    let model = theory_table(&config.device)?;
    eprintln!("theory table in {:.2?}", start.elapsed());

    let candidates: Vec<f64> = (0..=16).map(|i| 0.25 * i as f64).collect();
    println!("tau_c_ns,flat_region_ns");
    for (tc, bp) in calibrate_tau_c(&config, &model, &candidates)? {
        println!("{tc},{bp:.3}");
    }

    println!("\nfraction,flat_region_ns (tau_c = {DEFAULT_TAU_C_NS} ns)");
    for fraction in [0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2] {
        let bp = flat_region_ns(&config, &model, DEFAULT_TAU_C_NS, fraction, EXAMPLE_EDGE_NS, example_taus_ns());
        match bp {
            Ok(bp) => println!("{fraction},{bp:.3}"),
            Err(e) => println!("{fraction},{e}"),
        }
    }
    eprintln!("total {:.2?}", start.elapsed());
    Ok(())
}
