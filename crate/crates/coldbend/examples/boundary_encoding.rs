//! Encodes a curved panel boundary into its rigid-motion-free parameters and
//! decodes it again.

use coldbend_core::geometry::compact::compact_encode;
use coldbend_core::geometry::compact_decode;
use coldbend_dataset::{sample_boundary, SamplingRanges};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let boundary = sample_boundary(&mut rng, &SamplingRanges::default()).boundary()?;
    let encoded = compact_encode(&boundary)?;
    println!("parameters: {:?}", encoded.compact.p.map(|x| (x * 1e4).round() / 1e4));
    let decoded = compact_decode(&encoded.compact)?;
    let again = compact_encode(&decoded)?;
    let drift = encoded.compact.p.iter().zip(&again.compact.p).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("largest parameter drift after decode and re-encode: {drift:.2e}");
    Ok(())
}
