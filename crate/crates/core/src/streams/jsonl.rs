//! JSON-lines stream files (`{"t": int, "x": [floats]}` per line) and the
//! ground-truth sidecar.

use std::io::{BufRead, Write};

use super::{GroundTruth, StreamSample};
use crate::error::{DriftError, Result};

pub fn write_jsonl(mut out: impl Write, samples: &[StreamSample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a stream file. Blank lines are skipped; errors carry the 1-based line number.
pub fn read_jsonl(input: impl BufRead) -> Result<Vec<StreamSample>> {
    let mut samples: Vec<StreamSample> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: StreamSample = serde_json::from_str(&line).map_err(|e| DriftError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(prev) = samples.last() {
            if sample.features.len() != prev.features.len() {
                return Err(DriftError::Parse {
                    line: line_no,
                    message: format!(
                        "dimension {} differs from {}",
                        sample.features.len(),
                        prev.features.len()
                    ),
                });
            }
            if sample.time <= prev.time {
                return Err(DriftError::Parse {
                    line: line_no,
                    message: format!("time {} does not increase", sample.time),
                });
            }
        }
        if sample.features.iter().any(|v| !v.is_finite()) {
            return Err(DriftError::Parse {
                line: line_no,
                message: "non-finite feature".into(),
            });
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_truth(mut out: impl Write, truth: &GroundTruth) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, truth).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_truth(input: impl std::io::Read) -> Result<GroundTruth> {
    serde_json::from_reader(input).map_err(|e| DriftError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::Pattern;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn jsonl_round_trips(rows in proptest::collection::vec(
            proptest::collection::vec(-1e6f64..1e6, 3), 1..40)) {
            let samples: Vec<StreamSample> = rows
                .into_iter()
                .enumerate()
                .map(|(t, x)| StreamSample::new(t * 2, x))
                .collect();
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &samples).unwrap();
            let back = read_jsonl(&buf[..]).unwrap();
            prop_assert_eq!(back, samples);
        }
    }

    #[test]
    fn corrupt_line_reports_its_number() {
        let text = "{\"t\":0,\"x\":[1.0]}\n{\"t\":1,\"x\":[2.0]}\n{\"t\":2,\"x\":[oops]}\n";
        match read_jsonl(text.as_bytes()) {
            Err(DriftError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truth_sidecar_round_trips() {
        let truth = GroundTruth {
            change_points: vec![725, 775],
            pattern: Pattern::ABA,
        };
        let mut buf = Vec::new();
        write_truth(&mut buf, &truth).unwrap();
        assert_eq!(read_truth(&buf[..]).unwrap(), truth);
    }
}
