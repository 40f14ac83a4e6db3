//! Recomputes the stability scale: -1 over the 5th percentile of raw
//! stability for random genomes on the library surfaces.
//!
//!     cargo run --release --example stability_scale [genomes] [seed]

use gaitevo_core::fitness::{stability_raw, FitnessConfig, DEFAULT_STABILITY_SCALE};
use gaitevo_core::params::{decode, Genome, GENOME_LEN};
use gaitevo_core::surrogate::{rollout, surface_library};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut args = std::env::args().skip(1);
    let genomes: u64 = args
        .next()
        .map_or(400, |a| a.parse().expect("genome count"));
    let seed: u64 = args.next().map_or(42, |a| a.parse().expect("seed"));
    let alpha = FitnessConfig::default().alpha;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::new();
    let mut failed = 0;
    for i in 0..genomes {
        let v: [f64; GENOME_LEN] = std::array::from_fn(|_| rng.random());
        let spec = decode(&Genome::new(v).unwrap());
        for s in &surface_library() {
            match rollout(&spec, s, i) {
                Ok(trace) => raw.push(stability_raw(&trace, alpha).unwrap()),
                Err(_) => failed += 1,
            }
        }
    }
    raw.sort_by(f64::total_cmp);
    let q = |p: f64| raw[((raw.len() - 1) as f64 * p) as usize];
    println!("{} rollouts ({failed} unreachable)", raw.len());
    println!(
        "raw stability q05 {:.4}  q50 {:.4}  q95 {:.4}",
        q(0.05),
        q(0.5),
        q(0.95)
    );
    println!(
        "suggested scale {:.4} (current {DEFAULT_STABILITY_SCALE})",
        -1.0 / q(0.05)
    );
}
