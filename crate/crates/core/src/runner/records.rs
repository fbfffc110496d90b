use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::RunError;
use crate::answerparse::{parse_answer, ParseOutcome, ParserConfig};
use crate::endpoint::FinishReason;
use crate::labels::OptionLetter;
use crate::seed::Seed;
use crate::taskgen::{Family, TaskInstance};

/// One evaluated instance, one JSONL line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub index: usize,
    pub instance_seed: Seed,
    pub instance: TaskInstance,
    pub prompt: String,
    pub raw_completion: String,
    pub finish_reason: FinishReason,
    pub parse: ParseOutcome,
    pub predicted: Option<OptionLetter>,
    pub correct_letter: OptionLetter,
    pub is_correct: bool,
    pub attempt_count: u32,
    pub latency_ms: u64,
    pub timestamp_ms: u64,
}

impl RunRecord {
    pub fn key(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.index)
    }

    /// Copy with the wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> RunRecord {
        RunRecord {
            latency_ms: 0,
            timestamp_ms: 0,
            ..self.clone()
        }
    }

    /// Re-parses the stored completion and recomputes correctness.
    pub fn rescored(&self, parser: &ParserConfig) -> RunRecord {
        let parse = parse_answer(
            &self.raw_completion,
            &self.instance.option_letters(),
            &self.instance.option_texts(),
            parser,
        );
        RunRecord {
            parse,
            predicted: parse.letter,
            is_correct: parse.letter == Some(self.correct_letter),
            ..self.clone()
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("records always serialize");
        line.push('\n');
        line
    }
}

/// Records read from a JSONL file.
#[derive(Debug, Default)]
pub struct LoadedRecords {
    pub records: Vec<RunRecord>,
    /// Byte length of the valid prefix of the file.
    pub valid_len: usize,
    /// A trailing partial or unparsable line was dropped.
    pub dropped_tail: bool,
}

/// Parses a records file. A bad final line is treated as a crash artifact and
/// dropped; a bad line followed by more content is an error.
pub fn read_records(path: &Path) -> Result<LoadedRecords, RunError> {
    if !path.exists() {
        return Ok(LoadedRecords::default());
    }
    let text = fs::read_to_string(path)?;
    let mut out = LoadedRecords::default();
    let mut offset = 0;
    let mut lineno = 0;
    while offset < text.len() {
        lineno += 1;
        let (line, next, complete) = match text[offset..].find('\n') {
            Some(i) => (&text[offset..offset + i], offset + i + 1, true),
            None => (&text[offset..], text.len(), false),
        };
        if line.trim().is_empty() && complete {
            offset = next;
            out.valid_len = offset;
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(rec) if complete => {
                out.records.push(rec);
                out.valid_len = next;
            }
            _ if text[next..].trim().is_empty() => {
                out.dropped_tail = true;
                break;
            }
            Err(e) => {
                return Err(RunError::MalformedRecords {
                    line: lineno,
                    message: e.to_string(),
                })
            }
            Ok(_) => unreachable!("an unterminated line is always the last one"),
        }
        offset = next;
    }
    Ok(out)
}

/// Drops a trailing crash artifact from the file on disk.
pub fn repair_records(path: &Path) -> Result<LoadedRecords, RunError> {
    let loaded = read_records(path)?;
    if loaded.dropped_tail {
        let file = fs::OpenOptions::new().write(true).open(path)?;
        file.set_len(loaded.valid_len as u64)?;
    }
    Ok(loaded)
}

/// Rewrites the file with `records` sorted by `(m, n, index)`, via a temporary
/// file and rename.
pub fn write_sorted(path: &Path, records: &mut [RunRecord]) -> Result<(), RunError> {
    records.sort_by_key(|r| r.key());
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        for r in records.iter() {
            f.write_all(r.to_line().as_bytes())?;
        }
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
