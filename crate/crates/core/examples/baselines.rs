//! KS-Win and MMDDDM on the same AB stream.

use driftlab::baselines::{kswin_detect, mmdddm_detect, BaselineConfig};
use driftlab::eval::{beta_score, benchmark_stream, Setting};
use driftlab::streams::{ConceptFamily, Pattern};

fn main() -> driftlab::Result<()> {
    let setting = Setting {
        pattern: Pattern::AB,
        b_length: None,
    };
    let (samples, truth) = benchmark_stream(&ConceptFamily::random_rbf(), setting, 17)?;
    let config = BaselineConfig {
        stride: 10,
        n_permutations: 100,
        seed: 17,
        ..BaselineConfig::default()
    };

    let ks = kswin_detect(&samples, &config)?;
    let mmd = mmdddm_detect(&samples, &config)?;
    println!("truth  {truth:?}");
    for (name, det) in [("kswin", ks), ("mmdddm", mmd)] {
        // alerts come a window after the change, so allow 2l of delay here
        let s = beta_score(&det, &truth, 2 * config.window, 0.5)?;
        println!("{name:<7}{det:?} β-score {:.3}", s.score);
    }
    Ok(())
}
