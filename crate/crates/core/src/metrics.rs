//! Per-`(m, n)` aggregation of scored records.
//!
//! Raw accuracy is `correct / parsed` (zero when nothing parsed). Parsed-weighted
//! accuracy scales it by the parsed fraction, `accuracy × parsed / total`, which
//! is exactly `correct / total`. All ratios are kept as exact rationals and only
//! rendered to decimals at the edge.

use num_rational::Ratio;
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

use crate::runner::RunRecord;
use crate::taskgen::Family;

pub type Rational = Ratio<u64>;

pub const METRICS_CSV_HEADER: &str =
    "family,m,n,total,parsed,correct,accuracy,parsed_rate,parsed_weighted";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("records mix families {0} and {1}")]
    MixedFamilies(Family, Family),
    #[error("instance (m={m}, n={n}, index={index}) appears more than once")]
    DuplicateInstance { m: usize, n: usize, index: usize },
    #[error("bin total is zero")]
    ZeroTotal,
    #[error("parsed count {parsed} exceeds total {total}")]
    ParsedExceedsTotal { parsed: u64, total: u64 },
    #[error("no records to aggregate")]
    NoRecords,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BinMetrics {
    pub m: usize,
    pub n: usize,
    pub total: u64,
    pub parsed: u64,
    pub correct: u64,
}

impl BinMetrics {
    pub fn accuracy(&self) -> Rational {
        if self.parsed == 0 {
            Rational::from_integer(0)
        } else {
            Rational::new(self.correct, self.parsed)
        }
    }

    pub fn parsed_rate(&self) -> Rational {
        Rational::new(self.parsed, self.total.max(1))
    }

    pub fn parsed_weighted(&self) -> Rational {
        parsed_weighted(self.accuracy(), self.parsed, self.total)
            .unwrap_or_else(|_| Rational::from_integer(0))
    }
}

/// `accuracy × parsed / total`.
pub fn parsed_weighted(
    accuracy: Rational,
    parsed: u64,
    total: u64,
) -> Result<Rational, MetricsError> {
    if total == 0 {
        return Err(MetricsError::ZeroTotal);
    }
    if parsed > total {
        return Err(MetricsError::ParsedExceedsTotal { parsed, total });
    }
    Ok(accuracy * Rational::new(parsed, total))
}

/// Renders a rational in `[0, ∞)` with six decimals, rounding half up.
pub fn fixed6(r: Rational) -> String {
    let scaled = *r.numer() as u128 * 1_000_000;
    let den = *r.denom() as u128;
    let mut q = scaled / den;
    if 2 * (scaled % den) >= den {
        q += 1;
    }
    format!("{}.{:06}", q / 1_000_000, q % 1_000_000)
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridReport {
    pub family: Family,
    /// Sorted by `(m, n)`.
    pub bins: Vec<BinMetrics>,
    pub chance_level: f64,
}

impl GridReport {
    pub fn bin(&self, m: usize, n: usize) -> Option<&BinMetrics> {
        self.bins.iter().find(|b| b.m == m && b.n == n)
    }

    /// Counts pooled over every bin.
    pub fn pooled(&self) -> BinMetrics {
        self.bins.iter().fold(
            BinMetrics {
                m: 0,
                n: 0,
                total: 0,
                parsed: 0,
                correct: 0,
            },
            |acc, b| BinMetrics {
                total: acc.total + b.total,
                parsed: acc.parsed + b.parsed,
                correct: acc.correct + b.correct,
                ..acc
            },
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_CSV_HEADER);
        out.push('\n');
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.family,
                b.m,
                b.n,
                b.total,
                b.parsed,
                b.correct,
                fixed6(b.accuracy()),
                fixed6(b.parsed_rate()),
                fixed6(b.parsed_weighted()),
            ));
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>4} {:>4} {:>6} {:>6} {:>7} {:>9} {:>11} {:>15}\n",
            "m", "n", "total", "parsed", "correct", "accuracy", "parsed_rate", "parsed_weighted"
        );
        for b in &self.bins {
            out.push_str(&format!(
                "{:>4} {:>4} {:>6} {:>6} {:>7} {:>9} {:>11} {:>15}\n",
                b.m,
                b.n,
                b.total,
                b.parsed,
                b.correct,
                fixed6(b.accuracy()),
                fixed6(b.parsed_rate()),
                fixed6(b.parsed_weighted())
            ));
        }
        out.push_str(&format!(
            "family {} (chance level {:.2})\n",
            self.family, self.chance_level
        ));
        out
    }
}

pub fn aggregate(records: &[RunRecord]) -> Result<GridReport, MetricsError> {
    let family = records.first().ok_or(MetricsError::NoRecords)?.family;
    let mut seen = HashSet::new();
    let mut bins: BTreeMap<(usize, usize), BinMetrics> = BTreeMap::new();
    for r in records {
        if r.family != family {
            return Err(MetricsError::MixedFamilies(family, r.family));
        }
        if !seen.insert((r.m, r.n, r.index)) {
            return Err(MetricsError::DuplicateInstance {
                m: r.m,
                n: r.n,
                index: r.index,
            });
        }
        let bin = bins.entry((r.m, r.n)).or_insert(BinMetrics {
            m: r.m,
            n: r.n,
            total: 0,
            parsed: 0,
            correct: 0,
        });
        bin.total += 1;
        if r.parse.is_parsed() {
            bin.parsed += 1;
        }
        if r.is_correct {
            bin.correct += 1;
        }
    }
    Ok(GridReport {
        family,
        bins: bins.into_values().collect(),
        chance_level: family.chance_level(),
    })
}
