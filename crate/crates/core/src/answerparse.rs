//! Extracts the chosen option letter from a raw completion.
//!
//! Reasoning spans are stripped first, then the text is scanned for
//! well-formed JSON objects and the last one carrying an `"answer"` key is
//! resolved against the option letters (and, optionally, the option texts).

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::labels::OptionLetter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    Unparsed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnparsedReason {
    NoJsonObject,
    NoAnswerKey,
    InvalidOption,
    Truncated,
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub status: ParseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub letter: Option<OptionLetter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<UnparsedReason>,
}

impl ParseOutcome {
    pub fn parsed(letter: OptionLetter) -> Self {
        ParseOutcome {
            status: ParseStatus::Parsed,
            letter: Some(letter),
            reason: None,
        }
    }

    pub fn unparsed(reason: UnparsedReason) -> Self {
        ParseOutcome {
            status: ParseStatus::Unparsed,
            letter: None,
            reason: Some(reason),
        }
    }

    pub fn is_parsed(&self) -> bool {
        self.status == ParseStatus::Parsed
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParserConfig {
    pub reasoning_delimiters: Vec<(String, String)>,
    pub accept_option_text: bool,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            reasoning_delimiters: vec![("<think>".into(), "</think>".into())],
            accept_option_text: true,
        }
    }
}

impl ParserConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (open, close) in &self.reasoning_delimiters {
            if open.is_empty() || close.is_empty() || open == close {
                return Err(format!("invalid reasoning delimiters {open:?} / {close:?}"));
            }
        }
        Ok(())
    }
}

/// Result of removing reasoning spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stripped {
    pub text: String,
    /// An opening tag had no matching close; everything from it on was dropped.
    pub truncated: bool,
}

/// Removes every `open … close` span. A close tag with no preceding open tag
/// (templates that pre-fill the open tag in the prompt) drops everything up to
/// and including it. An open tag that is never closed drops the rest of the
/// text and marks the result truncated. Repeats until nothing changes, since a
/// removal can splice two fragments into a new tag.
pub fn strip_reasoning(raw: &str, delimiters: &[(String, String)]) -> Stripped {
    let mut current = Stripped {
        text: raw.to_string(),
        truncated: false,
    };
    loop {
        let next = strip_once(&current.text, delimiters);
        let done = next.text == current.text;
        current = Stripped {
            text: next.text,
            truncated: current.truncated || next.truncated,
        };
        if done {
            return current;
        }
    }
}

fn strip_once(raw: &str, delimiters: &[(String, String)]) -> Stripped {
    let mut text = raw.to_string();
    let mut truncated = false;
    for (open, close) in delimiters {
        let mut out = String::with_capacity(text.len());
        let mut rest = text.as_str();
        loop {
            let o = rest.find(open.as_str());
            let c = rest.find(close.as_str());
            match (o, c) {
                (None, None) => {
                    out.push_str(rest);
                    break;
                }
                (_, Some(ci)) if o.is_none_or(|oi| ci < oi) => {
                    out.clear();
                    rest = &rest[ci + close.len()..];
                }
                (Some(oi), _) => {
                    out.push_str(&rest[..oi]);
                    let after = &rest[oi + open.len()..];
                    match after.find(close.as_str()) {
                        Some(ci) => rest = &after[ci + close.len()..],
                        None => {
                            truncated = true;
                            break;
                        }
                    }
                }
                (None, Some(_)) => unreachable!(),
            }
        }
        text = out;
    }
    Stripped { text, truncated }
}

/// Top-level JSON objects in `text`, left to right, non-overlapping.
pub fn json_objects(text: &str) -> Vec<serde_json::Map<String, Value>> {
    let mut found = Vec::new();
    let mut pos = 0;
    while let Some(off) = text[pos..].find('{') {
        let start = pos + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => {
                pos = start + stream.byte_offset();
                found.push(map);
            }
            _ => pos = start + 1,
        }
    }
    found
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

pub fn parse_answer(
    raw: &str,
    option_letters: &[OptionLetter],
    option_texts: &[String],
    cfg: &ParserConfig,
) -> ParseOutcome {
    if raw.trim().is_empty() {
        return ParseOutcome::unparsed(UnparsedReason::Empty);
    }
    let stripped = strip_reasoning(raw, &cfg.reasoning_delimiters);
    let objects = json_objects(&stripped.text);
    let Some(value) = objects.iter().rev().find_map(|o| o.get("answer")) else {
        let reason = if stripped.truncated {
            UnparsedReason::Truncated
        } else if stripped.text.trim().is_empty() {
            UnparsedReason::Empty
        } else if objects.is_empty() {
            UnparsedReason::NoJsonObject
        } else {
            UnparsedReason::NoAnswerKey
        };
        return ParseOutcome::unparsed(reason);
    };

    let answer = match value {
        Value::String(s) => fold(s),
        Value::Number(n) => n.to_string(),
        _ => return ParseOutcome::unparsed(UnparsedReason::InvalidOption),
    };
    if let Some(letter) = option_letters
        .iter()
        .find(|l| fold(&l.to_string()) == answer)
    {
        return ParseOutcome::parsed(*letter);
    }
    if cfg.accept_option_text {
        if let Some(pos) = option_texts.iter().position(|t| fold(t) == answer) {
            if let Some(letter) = option_letters.get(pos) {
                return ParseOutcome::parsed(*letter);
            }
        }
    }
    ParseOutcome::unparsed(UnparsedReason::InvalidOption)
}
