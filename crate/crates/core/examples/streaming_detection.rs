//! Feed a stream sample by sample. Each batch reports provisional change
//! points as soon as it runs; `finish` merges them across batches.

use driftlab::detector::{SddmConfig, SddmDetector};
use driftlab::eval::{benchmark_stream, Setting};
use driftlab::streams::{ConceptFamily, Pattern};

fn main() -> driftlab::Result<()> {
    let setting = Setting {
        pattern: Pattern::ABC,
        b_length: Some(100),
    };
    let (samples, truth) = benchmark_stream(&ConceptFamily::Stagger, setting, 3)?;
    println!("truth {truth:?}");

    let mut detector = SddmDetector::new(SddmConfig {
        seed: 3,
        ..SddmConfig::default()
    })?;
    for sample in samples {
        if let Some(batch) = detector.push(sample)? {
            if !batch.events.is_empty() {
                println!(
                    "batch {:>2} [{}, {}] k = {} provisional {:?}",
                    batch.span.batch_id, batch.span.first_time, batch.span.last_time, batch.k, batch.events
                );
            }
        }
    }
    let report = detector.finish();
    for e in &report.events {
        println!("event t = {} (first batch {}, support {})", e.time, e.batch_id, e.support);
    }
    Ok(())
}
