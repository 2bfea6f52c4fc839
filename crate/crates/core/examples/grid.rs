//! Runs the 16-scenario budget grid with the default observer-augmented
//! frequency loop and prints the sweep table.

use dobc_core::dobc::ObserverConfig;
use dobc_core::scenario::{default_lfc_loop, generate_table3_grid, worst_case_scan};

fn main() -> Result<(), dobc_core::Error> {
    let spec = default_lfc_loop(Some(ObserverConfig::lfc_default()))?;
    let result = worst_case_scan(&generate_table3_grid(), &spec, 1e-3)?;
    print!("{}", result.to_csv());
    if let Some(w) = result.worst() {
        println!("worst: test {} with delta_f_max {:.4} Hz", w.scenario.test_number, w.delta_f_max);
    }
    Ok(())
}
