//! Generates a small training dataset and prints its statistics.

use coldbend_dataset::{dataset_stats, generate_dataset, GenerateConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "small.jsonl".into());
    let ds = generate_dataset(&GenerateConfig { count: 40, ..GenerateConfig::default() })?;
    ds.save(std::path::Path::new(&out))?;
    println!("{}", serde_json::to_string_pretty(&dataset_stats(&ds))?);
    println!("written to {out}");
    Ok(())
}
