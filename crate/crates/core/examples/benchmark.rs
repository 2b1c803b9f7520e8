//! A small benchmark table. The full grid is `driftlab benchmark`.

use driftlab::eval::{run_benchmark, BenchmarkConfig, Method};
use driftlab::streams::{ConceptFamily, Pattern};

fn main() -> driftlab::Result<()> {
    let config = BenchmarkConfig {
        datasets: vec![ConceptFamily::Stagger],
        methods: vec![Method::SddmMt, Method::KsWin, Method::Oracle],
        patterns: vec![Pattern::AB, Pattern::ABC],
        b_lengths: vec![50],
        n_runs: 5,
        alignment_runs: 5,
        seed: 1,
        ..BenchmarkConfig::default()
    };
    let table = run_benchmark(&config)?;
    print!("{}", table.to_markdown());
    Ok(())
}
