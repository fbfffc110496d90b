use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::astro::{generate_astro, AstroInstance};
use super::catalog::Catalog;
use super::collision::{generate_collision, CollisionInstance, VelocityPool};
use super::swaps::SwapPattern;
use super::GenError;
use crate::labels::OptionLetter;
use crate::seed::{derive_instance_seed, Seed};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Astro,
    Collision,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Astro => "astro",
            Family::Collision => "collision",
        }
    }

    /// Accuracy of uniform guessing over the family's options.
    pub fn chance_level(self) -> f64 {
        match self {
            Family::Astro => 0.5,
            Family::Collision => 0.25,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "astro" => Ok(Family::Astro),
            "collision" => Ok(Family::Collision),
            other => Err(format!("unknown family `{other}` (astro, collision)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Astro(AstroInstance),
    Collision(CollisionInstance),
}

/// One generated problem. Serializes to the canonical JSON form (fields in
/// declaration order, `"schema": 1` first).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub schema: u32,
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub index: usize,
    pub instance_seed: Seed,
    pub payload: Payload,
}

impl TaskInstance {
    pub fn correct_letter(&self) -> OptionLetter {
        match &self.payload {
            Payload::Astro(a) => a.correct_letter,
            Payload::Collision(c) => c.correct_letter,
        }
    }

    pub fn option_letters(&self) -> Vec<OptionLetter> {
        match &self.payload {
            Payload::Astro(a) => a.option_letters(),
            Payload::Collision(c) => c.option_letters(),
        }
    }

    pub fn option_texts(&self) -> Vec<String> {
        match &self.payload {
            Payload::Astro(a) => a.option_texts(),
            Payload::Collision(c) => c.option_texts(),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("instances always serialize")
    }

    pub fn validate(&self, pool: &VelocityPool) -> Result<(), String> {
        if self.schema != SCHEMA_VERSION {
            return Err(format!("unsupported schema {}", self.schema));
        }
        match (&self.payload, self.family) {
            (Payload::Astro(a), Family::Astro)
                if a.m == self.m && a.n == self.n && a.seed == self.instance_seed =>
            {
                a.validate()
            }
            (Payload::Collision(c), Family::Collision)
                if c.m == self.m && c.n == self.n && c.seed == self.instance_seed =>
            {
                c.validate(pool)
            }
            _ => Err("payload does not match the instance header".into()),
        }
    }
}

/// Everything generation depends on besides `(family, m, n, index, seed)`.
#[derive(Clone, Debug)]
pub struct GenContext {
    pub catalog: Arc<Catalog>,
    pub swap_pattern: SwapPattern,
    pub pool: VelocityPool,
}

impl Default for GenContext {
    fn default() -> Self {
        GenContext {
            catalog: Arc::new(Catalog::bundled()),
            swap_pattern: SwapPattern::default(),
            pool: VelocityPool::default(),
        }
    }
}

pub fn generate_task(
    ctx: &GenContext,
    family: Family,
    m: usize,
    n: usize,
    index: usize,
    base_seed: Seed,
) -> Result<TaskInstance, GenError> {
    let instance_seed = derive_instance_seed(base_seed, family, m, n, index);
    let payload = match family {
        Family::Astro => Payload::Astro(generate_astro(
            &ctx.catalog,
            m,
            n,
            instance_seed,
            ctx.swap_pattern,
        )?),
        Family::Collision => {
            Payload::Collision(generate_collision(m, n, instance_seed, &ctx.pool)?)
        }
    };
    Ok(TaskInstance {
        schema: SCHEMA_VERSION,
        family,
        m,
        n,
        index,
        instance_seed,
        payload,
    })
}
