use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::SimError;
use crate::labels::VarName;

/// A simultaneous assignment `l0, l1 = r0, r1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapOp {
    pub left: [VarName; 2],
    pub right: [VarName; 2],
}

impl SwapOp {
    pub fn new(left: [VarName; 2], right: [VarName; 2]) -> Result<Self, SimError> {
        let op = SwapOp { left, right };
        op.check()?;
        Ok(op)
    }

    fn check(&self) -> Result<(), SimError> {
        if self.left[0] == self.left[1] || self.right[0] == self.right[1] {
            return Err(SimError::RepeatedName(self.to_string()));
        }
        Ok(())
    }
}

impl fmt::Display for SwapOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {} = {}, {}",
            self.left[0], self.left[1], self.right[0], self.right[1]
        )
    }
}

/// How Astro swap operations are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwapPattern {
    /// `q, x = x, y` with the query variable `q` on the left and `x != y`
    /// drawn from the other variables.
    #[default]
    Anchored,
    /// `p, q = q, p`.
    TrueSwap,
    /// Four names drawn freely; distinct within each side.
    General,
}

impl SwapPattern {
    pub fn as_str(self) -> &'static str {
        match self {
            SwapPattern::Anchored => "anchored",
            SwapPattern::TrueSwap => "true-swap",
            SwapPattern::General => "general",
        }
    }
}

impl FromStr for SwapPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "anchored" => Ok(SwapPattern::Anchored),
            "true-swap" => Ok(SwapPattern::TrueSwap),
            "general" => Ok(SwapPattern::General),
            other => Err(format!(
                "unknown swap pattern `{other}` (anchored, true-swap, general)"
            )),
        }
    }
}

/// Applies the swaps in order. Both right-hand values are read from the state
/// before the op, then written to the two left names at once.
pub fn simulate_swaps<T: Clone>(
    initial: &BTreeMap<VarName, T>,
    swaps: &[SwapOp],
) -> Result<BTreeMap<VarName, T>, SimError> {
    let mut state = initial.clone();
    for op in swaps {
        op.check()?;
        let fetch = |name: &VarName| -> Result<T, SimError> {
            state
                .get(name)
                .cloned()
                .ok_or_else(|| SimError::UnknownVariable(name.to_string()))
        };
        let r0 = fetch(&op.right[0])?;
        let r1 = fetch(&op.right[1])?;
        for name in &op.left {
            if !state.contains_key(name) {
                return Err(SimError::UnknownVariable(name.to_string()));
            }
        }
        state.insert(op.left[0].clone(), r0);
        state.insert(op.left[1].clone(), r1);
    }
    Ok(state)
}
