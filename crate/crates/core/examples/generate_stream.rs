//! Compose an ABA benchmark stream from two STAGGER concepts and write it as
//! JSON lines next to its ground truth.
//!
//! ```text
//! cargo run --example generate_stream -- /tmp/aba.jsonl
//! ```

use std::fs::File;
use std::io::BufWriter;

use driftlab::streams::{compose_stream, write_jsonl, write_truth, ConceptFamily, Pattern, StreamSpec};

fn main() -> driftlab::Result<()> {
    let out = std::env::args().nth(1);
    let seed = 7;
    let spec = StreamSpec {
        pattern: Pattern::ABA,
        b_length: 100,
        delta: 30,
        concepts: ConceptFamily::Stagger.draw_concepts(2, seed)?,
        seed,
    };
    let (samples, truth) = compose_stream(&spec)?;

    println!("{} samples, {} features", samples.len(), samples[0].features.len());
    println!("layout (concept, run length): {:?}", spec.layout());
    println!("change points: {:?}", truth.change_points);

    if let Some(path) = out {
        write_jsonl(BufWriter::new(File::create(&path)?), &samples)?;
        write_truth(File::create(format!("{path}.truth.json"))?, &truth)?;
        println!("wrote {path} and {path}.truth.json");
    }
    Ok(())
}
