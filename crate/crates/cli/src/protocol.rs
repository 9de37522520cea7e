//! Newline-delimited JSON protocol between an estimator and a measurement
//! source. The estimator sends `measure` and `estimate` messages and ends
//! with `done`; the source answers every `measure` with `counts`, or with
//! `error` before aborting.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use qst_core::{
    build_povm, DensityMatrix, MeasurementSource, OrientationAngles, OutcomeCounts, PovmFamily, ProductPovm,
};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmSpec {
    pub family: PovmFamily,
    /// Three angles per qubit, qubit 0 first.
    pub angles: Vec<f64>,
}

impl PovmSpec {
    pub fn of(povm: &ProductPovm) -> Self {
        Self {
            family: povm.family(),
            angles: povm.angles().flat(),
        }
    }

    pub fn build(&self) -> qst_core::Result<ProductPovm> {
        Ok(build_povm(self.family, &OrientationAngles::from_flat(&self.angles)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Measure { povm: PovmSpec, copies: u64 },
    Counts { counts: Vec<i64> },
    Estimate { step: usize, density_matrix: Vec<[f64; 2]>, confidence: f64 },
    Done,
    Error { reason: String },
}

impl Message {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }

    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(line.trim_end()).map_err(|e| format!("malformed message: {e}"))
    }
}

fn send<W: Write>(w: &mut W, m: &Message) -> std::io::Result<()> {
    writeln!(w, "{}", m.to_line())?;
    w.flush()
}

fn checked_counts(raw: &[i64], povm: &ProductPovm) -> std::result::Result<OutcomeCounts, String> {
    if raw.len() != povm.num_outcomes() {
        return Err(format!("expected {} counts, got {}", povm.num_outcomes(), raw.len()));
    }
    if let Some(n) = raw.iter().find(|&&n| n < 0) {
        return Err(format!("negative count {n}"));
    }
    Ok(OutcomeCounts::new(raw.iter().map(|&n| n as u64).collect()))
}

/// Estimator side: a measurement source on the other end of a line channel.
pub struct StdioSource<R, W> {
    reader: R,
    writer: W,
    line: usize,
    transcript: Vec<Message>,
}

impl<R: BufRead, W: Write> StdioSource<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            line: 0,
            transcript: Vec::new(),
        }
    }

    pub fn transcript(&self) -> &[Message] {
        &self.transcript
    }

    fn emit(&mut self, m: Message) -> qst_core::Result<()> {
        send(&mut self.writer, &m).map_err(|e| qst_core::Error::Source(e.to_string()))?;
        self.transcript.push(m);
        Ok(())
    }

    fn violation(&mut self, reason: String) -> qst_core::Error {
        let reason = format!("line {}: {reason}", self.line);
        let _ = send(&mut self.writer, &Message::Error { reason: reason.clone() });
        qst_core::Error::Source(reason)
    }
}

impl<R: BufRead, W: Write> MeasurementSource for StdioSource<R, W> {
    fn measure(&mut self, povm: &ProductPovm, copies: u64) -> qst_core::Result<OutcomeCounts> {
        self.emit(Message::Measure {
            povm: PovmSpec::of(povm),
            copies,
        })?;
        let mut buf = String::new();
        let n = self
            .reader
            .read_line(&mut buf)
            .map_err(|e| qst_core::Error::Source(e.to_string()))?;
        self.line += 1;
        if n == 0 {
            return Err(self.violation("source closed the channel".into()));
        }
        let msg = Message::parse(&buf).map_err(|e| self.violation(e))?;
        self.transcript.push(msg.clone());
        match msg {
            Message::Counts { counts } => {
                let c = checked_counts(&counts, povm).map_err(|e| self.violation(e))?;
                if c.total() != copies {
                    return Err(self.violation(format!("counts sum to {}, requested {copies}", c.total())));
                }
                Ok(c)
            }
            Message::Error { reason } => Err(qst_core::Error::Source(format!("source reported: {reason}"))),
            other => Err(self.violation(format!("expected counts, got {other:?}"))),
        }
    }

    fn report_estimate(&mut self, step: usize, estimate: &DensityMatrix, confidence: f64) -> qst_core::Result<()> {
        self.emit(Message::Estimate {
            step,
            density_matrix: estimate.to_pairs(),
            confidence,
        })
    }

    fn finish(&mut self) -> qst_core::Result<()> {
        self.emit(Message::Done)
    }
}

/// Source side: answers `measure` requests from `source` until `done`.
/// Returns every message seen or sent, in order.
pub fn serve<S: MeasurementSource, R: BufRead, W: Write>(source: &mut S, mut reader: R, mut writer: W) -> Result<Vec<Message>> {
    let mut transcript = Vec::new();
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            return Err(HarnessError::Protocol(format!("line {line_no}: channel closed before done")));
        }
        line_no += 1;
        if buf.trim().is_empty() {
            continue;
        }
        let msg = match Message::parse(&buf) {
            Ok(m) => m,
            Err(reason) => {
                let reason = format!("line {line_no}: {reason}");
                send(&mut writer, &Message::Error { reason: reason.clone() })?;
                return Err(HarnessError::Protocol(reason));
            }
        };
        transcript.push(msg.clone());
        match msg {
            Message::Measure { povm, copies } => {
                let reply = povm
                    .build()
                    .and_then(|p| source.measure(&p, copies))
                    .map(|c| Message::Counts {
                        counts: c.counts().iter().map(|&n| n as i64).collect(),
                    });
                match reply {
                    Ok(m) => {
                        send(&mut writer, &m)?;
                        transcript.push(m);
                    }
                    Err(e) => {
                        let reason = format!("line {line_no}: {e}");
                        send(&mut writer, &Message::Error { reason: reason.clone() })?;
                        return Err(HarnessError::Protocol(reason));
                    }
                }
            }
            Message::Estimate { .. } => {}
            Message::Done => return Ok(transcript),
            Message::Error { reason } => return Err(HarnessError::Protocol(format!("estimator reported: {reason}"))),
            Message::Counts { .. } => {
                let reason = format!("line {line_no}: unexpected counts message");
                send(&mut writer, &Message::Error { reason: reason.clone() })?;
                return Err(HarnessError::Protocol(reason));
            }
        }
    }
}

/// Replays the `measure`/`counts` pairs of a transcript.
pub struct ReplaySource {
    pending: VecDeque<(PovmSpec, u64, Vec<i64>)>,
}

impl ReplaySource {
    pub fn from_transcript(messages: &[Message]) -> Result<Self> {
        let mut pending = VecDeque::new();
        let mut request = None;
        for m in messages {
            match m {
                Message::Measure { povm, copies } => request = Some((povm.clone(), *copies)),
                Message::Counts { counts } => {
                    let (p, c) = request
                        .take()
                        .ok_or_else(|| HarnessError::Protocol("counts without a measure request".into()))?;
                    pending.push_back((p, c, counts.clone()));
                }
                _ => {}
            }
        }
        Ok(Self { pending })
    }

    pub fn remaining(&self) -> usize {
        self.pending.len()
    }
}

impl MeasurementSource for ReplaySource {
    fn measure(&mut self, povm: &ProductPovm, copies: u64) -> qst_core::Result<OutcomeCounts> {
        let (spec, want_copies, counts) = self
            .pending
            .pop_front()
            .ok_or_else(|| qst_core::Error::Source("transcript exhausted".into()))?;
        if spec != PovmSpec::of(povm) || want_copies != copies {
            return Err(qst_core::Error::Source("request differs from the transcript".into()));
        }
        checked_counts(&counts, povm).map_err(qst_core::Error::Source)
    }
}

/// Parses a transcript written one message per line.
pub fn parse_transcript(text: &str) -> Result<Vec<Message>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| Message::parse(l).map_err(|e| HarnessError::Protocol(format!("line {}: {e}", i + 1))))
        .collect()
}
