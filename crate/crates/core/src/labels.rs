//! Alphabetic labels: variables `a, b, …, z, aa, ab, …`, particles `A, B, …`,
//! and option letters `A, B, C, D`.
//!
//! Labels use bijective base-26, so ordinal 0 is `a`, 25 is `z`, 26 is `aa`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

fn encode(mut index: usize, base: u8) -> String {
    let mut out = Vec::new();
    loop {
        out.push(base + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn decode(label: &str, base: u8) -> Option<usize> {
    if label.is_empty() {
        return None;
    }
    let mut acc: usize = 0;
    for b in label.bytes() {
        if !(base..base + 26).contains(&b) {
            return None;
        }
        acc = acc.checked_mul(26)?.checked_add((b - base) as usize + 1)?;
    }
    Some(acc - 1)
}

macro_rules! alpha_label {
    ($name:ident, $base:expr, $what:literal) => {
        #[derive(Clone, Debug, PartialEq, Eq, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn from_index(index: usize) -> Self {
                $name(encode(index, $base))
            }

            pub fn parse(label: &str) -> Option<Self> {
                decode(label, $base).map(|_| $name(label.to_string()))
            }

            pub fn index(&self) -> usize {
                decode(&self.0, $base).expect("labels are validated on construction")
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl Ord for $name {
            fn cmp(&self, other: &Self) -> Ordering {
                self.0
                    .len()
                    .cmp(&other.0.len())
                    .then_with(|| self.0.cmp(&other.0))
            }
        }

        impl PartialOrd for $name {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                $name::parse(&raw).ok_or_else(|| {
                    serde::de::Error::custom(format!("invalid {} label {raw:?}", $what))
                })
            }
        }
    };
}

alpha_label!(VarName, b'a', "variable");
alpha_label!(ParticleLabel, b'A', "particle");

/// A multiple-choice letter, `A` for position 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OptionLetter(u8);

impl OptionLetter {
    pub fn from_position(position: usize) -> Self {
        assert!(position < 26, "option position out of range");
        OptionLetter(position as u8)
    }

    pub fn position(self) -> usize {
        self.0 as usize
    }

    pub fn as_char(self) -> char {
        (b'A' + self.0) as char
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_uppercase() => Some(OptionLetter(c as u8 - b'A')),
            _ => None,
        }
    }

    pub fn first(count: usize) -> Vec<OptionLetter> {
        (0..count).map(OptionLetter::from_position).collect()
    }
}

impl fmt::Display for OptionLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for OptionLetter {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_char().to_string())
    }
}

impl<'de> Deserialize<'de> for OptionLetter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        OptionLetter::parse(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid option letter {raw:?}")))
    }
}
