use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ParamSet;
use crate::numerics::Tensor;
use crate::stream::GradStream;

/// Gradient payload of one trace record: the full tensor, or just its
/// norm for compact traces that only feed norm-level analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum TracePayload {
    Full(Tensor),
    Norm(f64),
}

/// One (step, parameter) entry of a recorded gradient trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub param: String,
    pub payload: TracePayload,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    v: u32,
    norms_only: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FullLine {
    step: u64,
    param: String,
    shape: Vec<usize>,
    /// Tensor elements as little-endian f64 bytes, base64.
    data: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormLine {
    step: u64,
    param: String,
    norm: f64,
}

fn encode_tensor(t: &Tensor) -> String {
    let mut bytes = Vec::with_capacity(t.len() * 8);
    for x in t.data() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_tensor(shape: Vec<usize>, data: &str) -> std::result::Result<Tensor, String> {
    let bytes = BASE64
        .decode(data)
        .map_err(|e| format!("bad base64 payload: {e}"))?;
    if bytes.len() % 8 != 0 {
        return Err(format!("payload length {} is not a multiple of 8", bytes.len()));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let expected: usize = shape.iter().product();
    if values.len() != expected {
        return Err(format!(
            "shape {shape:?} wants {expected} elements, payload has {}",
            values.len()
        ));
    }
    Tensor::new(shape, values).map_err(|e| e.to_string())
}

/// Incremental writer for the JSON-Lines trace format: a header
/// `{"v":1,"norms_only":…}` followed by one record per (step, param).
/// Tensor payloads are little-endian f64 bytes in base64, so a
/// round-trip is bit-exact.
#[derive(Debug)]
pub struct TraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
    norms_only: bool,
}

impl TraceWriter {
    pub fn create(path: impl AsRef<Path>, norms_only: bool) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut writer = TraceWriter {
            out: BufWriter::new(file),
            path,
            norms_only,
        };
        let header = serde_json::to_string(&HeaderLine {
            v: 1,
            norms_only,
        })
        .expect("header serializes");
        writer.write_line(&header)?;
        Ok(writer)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    /// Record every parameter's gradient for one step.
    pub fn write_step(&mut self, step: u64, grads: &ParamSet) -> Result<()> {
        for (name, tensor) in grads.iter() {
            let line = if self.norms_only {
                serde_json::to_string(&NormLine {
                    step,
                    param: name.to_owned(),
                    norm: tensor.l2_norm()?,
                })
            } else {
                serde_json::to_string(&FullLine {
                    step,
                    param: name.to_owned(),
                    shape: tensor.shape().to_vec(),
                    data: encode_tensor(tensor),
                })
            }
            .expect("record serializes");
            self.write_line(&line)?;
        }
        Ok(())
    }

    /// Flush and close the file.
    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// A parsed trace: the header flag plus records in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    norms_only: bool,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn norms_only(&self) -> bool {
        self.norms_only
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Reassemble the full gradient sequence, one [`ParamSet`] per
    /// distinct step in recorded order. Step numbers must be grouped
    /// and ascending, and every step must carry the same parameter
    /// layout. Norms-only traces cannot be replayed as tensors.
    pub fn into_stream(self) -> Result<GradStream> {
        if self.norms_only {
            return Err(Error::NormsOnlyTrace);
        }
        fn flush(
            entries: &mut Vec<(String, Tensor)>,
            layout: &mut Option<Vec<(String, Vec<usize>)>>,
            steps: &mut Vec<ParamSet>,
        ) -> Result<()> {
            let shape: Vec<(String, Vec<usize>)> = entries
                .iter()
                .map(|(n, t)| (n.clone(), t.shape().to_vec()))
                .collect();
            match layout {
                None => *layout = Some(shape),
                Some(l) if *l == shape => {}
                Some(_) => {
                    return Err(Error::InvalidArgument(
                        "trace steps disagree on parameter layout".into(),
                    ))
                }
            }
            steps.push(ParamSet::from_entries(std::mem::take(entries))?);
            Ok(())
        }

        let mut steps: Vec<ParamSet> = Vec::new();
        let mut current: Vec<(String, Tensor)> = Vec::new();
        let mut current_step: Option<u64> = None;
        let mut layout: Option<Vec<(String, Vec<usize>)>> = None;

        for rec in self.records {
            let tensor = match rec.payload {
                TracePayload::Full(t) => t,
                TracePayload::Norm(_) => unreachable!("norms_only checked above"),
            };
            match current_step {
                Some(s) if s == rec.step => {}
                Some(s) => {
                    if rec.step < s {
                        return Err(Error::InvalidArgument(format!(
                            "trace steps out of order: {} after {s}",
                            rec.step
                        )));
                    }
                    flush(&mut current, &mut layout, &mut steps)?;
                    current_step = Some(rec.step);
                }
                None => current_step = Some(rec.step),
            }
            current.push((rec.param, tensor));
        }
        if !current.is_empty() {
            flush(&mut current, &mut layout, &mut steps)?;
        }
        if steps.is_empty() {
            return Err(Error::InvalidArgument("trace holds no records".into()));
        }
        Ok(GradStream::new(steps))
    }
}

/// Parse a trace file, validating the header, per-line schema, and
/// (step, param) uniqueness. Errors carry the 1-based line number.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let parse_err = |line: usize, msg: String| Error::Parse {
        path: display.clone(),
        line,
        msg,
    };

    let mut lines = reader.lines().enumerate();
    let header: HeaderLine = match lines.next() {
        None => return Err(parse_err(1, "empty file; expected a header line".into())),
        Some((_, Err(e))) => return Err(Error::io(path, e)),
        Some((_, Ok(text))) => serde_json::from_str(&text)
            .map_err(|e| parse_err(1, format!("bad header: {e}")))?,
    };
    if header.v != 1 {
        return Err(parse_err(1, format!("unsupported trace version {}", header.v)));
    }

    let mut records = Vec::new();
    let mut seen: HashSet<(u64, String)> = HashSet::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let text = line.map_err(|e| Error::io(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        let record = if header.norms_only {
            let parsed: NormLine = serde_json::from_str(&text)
                .map_err(|e| parse_err(lineno, e.to_string()))?;
            TraceRecord {
                step: parsed.step,
                param: parsed.param,
                payload: TracePayload::Norm(parsed.norm),
            }
        } else {
            let parsed: FullLine = serde_json::from_str(&text)
                .map_err(|e| parse_err(lineno, e.to_string()))?;
            let tensor = decode_tensor(parsed.shape, &parsed.data)
                .map_err(|msg| parse_err(lineno, msg))?;
            TraceRecord {
                step: parsed.step,
                param: parsed.param,
                payload: TracePayload::Full(tensor),
            }
        };
        if record.step == 0 {
            return Err(parse_err(lineno, "step numbers are 1-based".into()));
        }
        if !seen.insert((record.step, record.param.clone())) {
            return Err(parse_err(
                lineno,
                format!("duplicate record for step {} param `{}`", record.step, record.param),
            ));
        }
        records.push(record);
    }
    Ok(Trace {
        norms_only: header.norms_only,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clip::{AdagcParams, ClipConfig, ClipMode, Granularity};
    use crate::stream::{drive_clipper, gen_stream, NormSchedule, StreamConfig, StreamParam};

    fn demo_stream() -> GradStream {
        let cfg = StreamConfig {
            params: vec![
                StreamParam {
                    name: "a".into(),
                    shape: vec![3],
                    schedule: NormSchedule::Constant { c: 1.0 },
                },
                StreamParam {
                    name: "b".into(),
                    shape: vec![2, 2],
                    schedule: NormSchedule::PowerDecay {
                        a: 1.0,
                        p: 0.4,
                        c: 0.05,
                    },
                },
            ],
            steps: 12,
            seed: 31,
        };
        gen_stream(&cfg, &[]).unwrap()
    }

    fn write_stream(path: &Path, stream: &GradStream, norms_only: bool) {
        let mut w = TraceWriter::create(path, norms_only).unwrap();
        for (i, grads) in stream.iter().enumerate() {
            w.write_step(i as u64 + 1, grads).unwrap();
        }
        w.finish().unwrap();
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let stream = demo_stream();
        write_stream(&path, &stream, false);
        let replayed = read_trace(&path).unwrap().into_stream().unwrap();
        assert_eq!(replayed.len(), stream.len());
        for (x, y) in stream.iter().zip(replayed.iter()) {
            assert!(x.same_layout(y));
            for ((_, p), (_, q)) in x.iter().zip(y.iter()) {
                for (u, v) in p.data().iter().zip(q.data()) {
                    assert_eq!(u.to_bits(), v.to_bits());
                }
            }
        }
    }

    #[test]
    fn awkward_values_survive_the_payload_encoding() {
        let t = Tensor::from_vec(vec![
            0.0,
            -0.0,
            std::f64::consts::PI,
            1e-308,          // subnormal territory
            -2.2250738585072014e-308,
            f64::MAX,
            5e-324,          // smallest subnormal
        ]);
        let decoded = decode_tensor(vec![7], &encode_tensor(&t)).unwrap();
        for (a, b) in t.data().iter().zip(decoded.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn replaying_a_trace_reproduces_reports_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let stream = demo_stream();
        write_stream(&path, &stream, false);
        let clip = ClipConfig {
            mode: ClipMode::Adagc(AdagcParams {
                t_start: 4,
                ..AdagcParams::default()
            }),
            granularity: Granularity::PerParameter,
        };
        let live = drive_clipper(&stream, &clip).unwrap();
        let replayed_stream = read_trace(&path).unwrap().into_stream().unwrap();
        let replayed = drive_clipper(&replayed_stream, &clip).unwrap();
        assert_eq!(live, replayed);
        // Belt and braces: identical serialized bytes, not just PartialEq.
        let a = serde_json::to_string(&live).unwrap();
        let b = serde_json::to_string(&replayed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn norms_only_traces_are_compact_and_rejected_for_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norms.jsonl");
        let stream = demo_stream();
        write_stream(&path, &stream, true);
        let trace = read_trace(&path).unwrap();
        assert!(trace.norms_only());
        assert_eq!(trace.records().len(), 24);
        match &trace.records()[0].payload {
            TracePayload::Norm(n) => assert!((n - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        match trace.into_stream() {
            Err(Error::NormsOnlyTrace) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_file_errors_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        write_stream(&path, &demo_stream(), false);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 20]).unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line, .. }) => {
                // 1 header + 12 steps × 2 params = 25 lines; the chopped
                // final line is the 25th.
                assert_eq!(line, 25);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_or_bad_header_is_line_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"step\":1,\"param\":\"a\",\"norm\":1.0}\n").unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, "{\"v\":2,\"norms_only\":false}\n").unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line: 1, msg, .. }) => assert!(msg.contains("version")),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicate_step_param_pairs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        std::fs::write(
            &path,
            "{\"v\":1,\"norms_only\":true}\n\
             {\"step\":1,\"param\":\"a\",\"norm\":1.0}\n\
             {\"step\":1,\"param\":\"a\",\"norm\":2.0}\n",
        )
        .unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line: 3, msg, .. }) => assert!(msg.contains("duplicate")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.jsonl");
        std::fs::write(
            &path,
            "{\"v\":1,\"norms_only\":true}\n\
             {\"step\":1,\"param\":\"a\",\"norm\":1.0,\"extra\":5}\n",
        )
        .unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line: 2, msg, .. }) => assert!(msg.contains("extra"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corrupt_payloads_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corrupt.jsonl");
        // Payload decodes to 8 bytes = 1 element, but shape says 2.
        let one = BASE64.encode(1.0f64.to_le_bytes());
        std::fs::write(
            &path,
            format!(
                "{{\"v\":1,\"norms_only\":false}}\n\
                 {{\"step\":1,\"param\":\"a\",\"shape\":[2],\"data\":\"{one}\"}}\n"
            ),
        )
        .unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line: 2, msg, .. }) => assert!(msg.contains("shape"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        // Not base64 at all.
        std::fs::write(
            &path,
            "{\"v\":1,\"norms_only\":false}\n\
             {\"step\":1,\"param\":\"a\",\"shape\":[1],\"data\":\"@@@\"}\n",
        )
        .unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line: 2, msg, .. }) => assert!(msg.contains("base64"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_steps_fail_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("order.jsonl");
        let one = BASE64.encode(1.0f64.to_le_bytes());
        std::fs::write(
            &path,
            format!(
                "{{\"v\":1,\"norms_only\":false}}\n\
                 {{\"step\":2,\"param\":\"a\",\"shape\":[1],\"data\":\"{one}\"}}\n\
                 {{\"step\":1,\"param\":\"a\",\"shape\":[1],\"data\":\"{one}\"}}\n"
            ),
        )
        .unwrap();
        let trace = read_trace(&path).unwrap();
        assert!(trace.into_stream().is_err());
    }
}
