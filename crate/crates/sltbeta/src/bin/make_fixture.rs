//! Regenerates the bundled synthetic dataset. Run from the crate root:
//!
//! ```text
//! cargo run --bin make_fixture -- crates/sltbeta/data/synthetic_population.csv
//! ```

use std::error::Error;

use sltbeta::synth::{synthetic_population, SynthSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/sltbeta/data/synthetic_population.csv".to_string());
    let population = synthetic_population(&SynthSpec::default());
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["subject_id", "delay", "indifference_point"])?;
    for series in &population {
        for obs in series.observations() {
            writer.write_record([
                series.subject_id(),
                &format!("{}", obs.delay.value()),
                &format!("{:.16e}", obs.y),
            ])?;
        }
    }
    writer.flush()?;
    println!("wrote {} subjects to {path}", population.len());
    Ok(())
}
