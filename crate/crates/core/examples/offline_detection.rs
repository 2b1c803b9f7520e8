//! One offline pass over a single window of a RandomRBF ABC stream.

use driftlab::detector::{sddm_offline, SddmConfig};
use driftlab::streams::{compose_stream, normalize_stream, ConceptFamily, Pattern, StreamSpec};

fn main() -> driftlab::Result<()> {
    let seed = 21;
    let spec = StreamSpec {
        pattern: Pattern::ABC,
        b_length: 100,
        delta: 0,
        concepts: ConceptFamily::random_rbf().draw_concepts(3, seed)?,
        seed,
    };
    let (samples, truth) = compose_stream(&spec)?;
    let samples = normalize_stream(&samples)?;
    let window = &samples[550..1050];
    println!("truth {:?}, window [550, 1050)", truth.change_points);

    for config in [SddmConfig::default(), SddmConfig::with_kernel(driftlab::kernels::KernelConfig::rbf_median())] {
        let res = sddm_offline(window, &SddmConfig { seed, ..config.clone() })?;
        println!("{:>4}: k = {}, events {:?}", config.kernel.label(), res.k, res.events);
    }
    Ok(())
}
