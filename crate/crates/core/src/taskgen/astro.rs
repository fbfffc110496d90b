use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::catalog::{Catalog, CatalogRow};
use super::swaps::{simulate_swaps, SwapOp, SwapPattern};
use super::GenError;
use crate::labels::{OptionLetter, VarName};
use crate::seed::{InstanceRng, Seed};

pub const ASTRO_OPTION_COUNT: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstroInstance {
    pub m: usize,
    pub n: usize,
    pub seed: Seed,
    pub columns: Vec<String>,
    pub target_column: String,
    pub retrieve_column: String,
    /// The sampled rows; variable `i` is initially bound to row `i`.
    pub rows: Vec<CatalogRow>,
    /// Ordinals of `rows` in the source catalog.
    pub catalog_rows: Vec<usize>,
    /// Variable → index into `rows`.
    pub binding: BTreeMap<VarName, usize>,
    pub swap_pattern: SwapPattern,
    pub swaps: Vec<SwapOp>,
    pub query_var: VarName,
    pub options: [String; 2],
    pub correct_letter: OptionLetter,
}

impl AstroInstance {
    fn column(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c == name)
            .expect("instance column present")
    }

    pub fn target_text(&self, row: usize) -> &str {
        &self.rows[row].cells[self.column(&self.target_column)]
    }

    pub fn identity(&self, row: usize) -> &str {
        &self.rows[row].cells[self.column(&self.retrieve_column)]
    }

    /// Row that `query_var` points at after all swaps.
    pub fn answer_row(&self) -> usize {
        let state = simulate_swaps(&self.binding, &self.swaps).expect("generated swaps are bound");
        state[&self.query_var]
    }

    pub fn answer(&self) -> &str {
        self.identity(self.answer_row())
    }

    pub fn option_letters(&self) -> Vec<OptionLetter> {
        OptionLetter::first(ASTRO_OPTION_COUNT)
    }

    pub fn option_texts(&self) -> Vec<String> {
        self.options.to_vec()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.rows.len() != self.m || self.binding.len() != self.m {
            return Err(format!("expected {} rows and bindings", self.m));
        }
        let mut targets: Vec<usize> = self.binding.values().copied().collect();
        targets.sort_unstable();
        if targets != (0..self.m).collect::<Vec<_>>() {
            return Err("binding is not a bijection onto the rows".into());
        }
        if self.swaps.len() != self.n {
            return Err(format!("{} swaps for n = {}", self.swaps.len(), self.n));
        }
        let state = simulate_swaps(&self.binding, &self.swaps).map_err(|e| e.to_string())?;
        let answer = self.identity(state[&self.query_var]);
        if self.options[0] == self.options[1] {
            return Err("options coincide".into());
        }
        if self.options[self.correct_letter.position()] != answer {
            return Err("correct letter does not point at the simulated answer".into());
        }
        if !(0..self.m)
            .any(|r| self.identity(r) == self.options[1 - self.correct_letter.position()])
        {
            return Err("distractor is not one of the sampled rows".into());
        }
        Ok(())
    }
}

fn draw_swap(rng: &mut InstanceRng, pattern: SwapPattern, m: usize, query: usize) -> SwapOp {
    let name = VarName::from_index;
    let op = match pattern {
        SwapPattern::Anchored => {
            let (i, j) = rng.distinct_pair(m - 1);
            let skip = |k: usize| if k >= query { k + 1 } else { k };
            let (x, y) = (skip(i), skip(j));
            SwapOp {
                left: [name(query), name(x)],
                right: [name(x), name(y)],
            }
        }
        SwapPattern::TrueSwap => {
            let (p, q) = rng.distinct_pair(m);
            SwapOp {
                left: [name(p), name(q)],
                right: [name(q), name(p)],
            }
        }
        SwapPattern::General => {
            let (a, b) = rng.distinct_pair(m);
            let (c, d) = rng.distinct_pair(m);
            SwapOp {
                left: [name(a), name(b)],
                right: [name(c), name(d)],
            }
        }
    };
    debug_assert!(op.left[0] != op.left[1] && op.right[0] != op.right[1]);
    op
}

/// Draw order: rows, query variable (fixed to `a` when anchored), swaps,
/// distractor, answer position.
///
/// Rows are taken from a forward Fisher-Yates pass over the catalog, skipping
/// rows whose target value equals one already taken, so that every variable
/// names a distinct value.
pub fn generate_astro(
    catalog: &Catalog,
    m: usize,
    n: usize,
    instance_seed: Seed,
    pattern: SwapPattern,
) -> Result<AstroInstance, GenError> {
    if m < 2 {
        return Err(GenError::InvalidParameters(format!(
            "astro tasks need m >= 2, got {m}"
        )));
    }
    if m > catalog.len() {
        return Err(GenError::CatalogTooSmall {
            m,
            rows: catalog.len(),
        });
    }
    if pattern == SwapPattern::Anchored && m < 3 && n > 0 {
        return Err(GenError::InvalidParameters(
            "anchored swaps draw two variables besides the query variable, so m >= 3".into(),
        ));
    }
    let mut rng = InstanceRng::new(instance_seed);

    let mut order: Vec<usize> = (0..catalog.len()).collect();
    let mut picked: Vec<usize> = Vec::with_capacity(m);
    let mut i = 0;
    while picked.len() < m && i < order.len() {
        let j = i + rng.below(order.len() - i);
        order.swap(i, j);
        let cand = order[i];
        if !picked
            .iter()
            .any(|&r| catalog.target_value(r) == catalog.target_value(cand))
        {
            picked.push(cand);
        }
        i += 1;
    }
    if picked.len() < m {
        return Err(GenError::NotEnoughDistinctTargets {
            m,
            available: picked.len(),
        });
    }

    let query = match pattern {
        SwapPattern::Anchored => 0,
        _ => rng.below(m),
    };
    let swaps: Vec<SwapOp> = (0..n)
        .map(|_| draw_swap(&mut rng, pattern, m, query))
        .collect();

    let binding: BTreeMap<VarName, usize> = (0..m).map(|i| (VarName::from_index(i), i)).collect();
    let query_var = VarName::from_index(query);
    let state = simulate_swaps(&binding, &swaps)?;
    let answer_row = state[&query_var];

    let mut distractor_row = rng.below(m - 1);
    if distractor_row >= answer_row {
        distractor_row += 1;
    }
    let answer = catalog.identity(picked[answer_row]).to_string();
    let distractor = catalog.identity(picked[distractor_row]).to_string();
    let correct = rng.below(ASTRO_OPTION_COUNT);
    let options = if correct == 0 {
        [answer, distractor]
    } else {
        [distractor, answer]
    };

    Ok(AstroInstance {
        m,
        n,
        seed: instance_seed,
        columns: catalog.columns().to_vec(),
        target_column: catalog.target_column().to_string(),
        retrieve_column: catalog.retrieve_column().to_string(),
        rows: picked.iter().map(|&r| catalog.rows()[r].clone()).collect(),
        catalog_rows: picked,
        binding,
        swap_pattern: pattern,
        swaps,
        query_var,
        options,
        correct_letter: OptionLetter::from_position(correct),
    })
}
