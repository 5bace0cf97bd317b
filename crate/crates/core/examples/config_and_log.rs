//! Load a TOML configuration, simulate from it, round-trip the log through
//! JSONL and export two channels as CSV.
//!
//! ```bash
//! cargo run --example config_and_log
//! ```

use muse::config::Config;
use muse::log::{write_csv, StreamLog};
use muse::sim::generate;

const CONFIG: &str = r#"
[model]
preset = "anymal"
extero_sensor = "camera"

[scenario]
duration = 2.0
seed = 11
"#;

fn main() -> muse::Result<()> {
    let cfg = Config::from_toml(CONFIG)?;
    let log = generate(&cfg.scenario, &cfg.platform()?)?;

    let bytes = log.to_bytes();
    let back = StreamLog::read_from(bytes.as_slice())?;
    assert_eq!(back.to_bytes(), bytes);
    println!("{} records, {} bytes, round trip is byte-identical", back.records.len(), bytes.len());
    println!("header: {}", String::from_utf8_lossy(bytes.split(|b| *b == b'\n').next().unwrap_or_default()));

    let selectors = vec!["imu.accel".to_string(), "extero_pose.position".to_string()];
    let mut csv = Vec::new();
    let rows = write_csv(back.records.iter().cloned().map(Ok), &selectors, &mut csv)?;
    let text = String::from_utf8_lossy(&csv);
    println!("{rows} CSV rows, first lines:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
