//! Compares analytic gradients with central finite differences for every
//! parameter of a micro model, flat and hierarchical.
//!
//! cargo run --release --example gradcheck -- [config.cfg]

use keynet::model::Architecture;
use keynet::train::{gradient_check, parse_config};

fn main() -> keynet::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/micro.cfg").into());
    let text = std::fs::read_to_string(&path).map_err(|e| keynet::Error::io(&path, e))?;
    let (cfg, _) = parse_config(&text)?;
    for arch in [Architecture::Flat, Architecture::Hierarchical] {
        let cfg = keynet::model::ModelConfig { architecture: arch, ..cfg.clone() };
        let report = gradient_check(&cfg, 0)?;
        println!(
            "{arch:>12}: {} scalars, max relative error {:.2e} at {}[{}] -> {}",
            report.checked,
            report.max_relative_error,
            report.worst.0,
            report.worst.1,
            if report.passes(1e-4) { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
