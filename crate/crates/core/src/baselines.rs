//! Scripted solvers that stand in for a model endpoint.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::labels::OptionLetter;
use crate::seed::{mix_seeds, InstanceRng, Seed};
use crate::taskgen::{simulate_collisions, Payload, TaskInstance};

const FILLER: &str = "Let me keep tracking the updates one at a time. \
After the last step I am still not sure which candidate is right, so I will stop here.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Re-simulates the instance and answers correctly.
    Oracle,
    /// Uniform letter.
    Random,
    /// Answers as though no updates happened.
    Stateless,
    /// Wraps another solver and sometimes replies with non-JSON filler.
    FlakyFormat,
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(BaselineKind::Oracle),
            "random" => Ok(BaselineKind::Random),
            "stateless" => Ok(BaselineKind::Stateless),
            "flaky" | "flaky-format" => Ok(BaselineKind::FlakyFormat),
            other => Err(format!(
                "unknown baseline `{other}` (oracle, random, stateless, flaky)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<BaselineSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_rate: Option<f64>,
    pub rng_seed: Seed,
}

impl BaselineSpec {
    pub fn oracle() -> Self {
        BaselineSpec {
            kind: BaselineKind::Oracle,
            inner: None,
            fail_rate: None,
            rng_seed: Seed(0),
        }
    }

    pub fn random(rng_seed: Seed) -> Self {
        BaselineSpec {
            kind: BaselineKind::Random,
            inner: None,
            fail_rate: None,
            rng_seed,
        }
    }

    pub fn stateless() -> Self {
        BaselineSpec {
            kind: BaselineKind::Stateless,
            inner: None,
            fail_rate: None,
            rng_seed: Seed(0),
        }
    }

    pub fn flaky(inner: BaselineSpec, fail_rate: f64, rng_seed: Seed) -> Self {
        BaselineSpec {
            kind: BaselineKind::FlakyFormat,
            inner: Some(Box::new(inner)),
            fail_rate: Some(fail_rate),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let flaky = self.kind == BaselineKind::FlakyFormat;
        if flaky != self.fail_rate.is_some() || flaky != self.inner.is_some() {
            return Err(
                "fail_rate and inner are required for, and only for, the flaky baseline".into(),
            );
        }
        if let Some(p) = self.fail_rate {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("fail_rate {p} outside [0, 1]"));
            }
        }
        match &self.inner {
            Some(inner) => inner.validate(),
            None => Ok(()),
        }
    }
}

impl fmt::Display for BaselineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, &self.inner, self.fail_rate) {
            (BaselineKind::FlakyFormat, Some(inner), Some(p)) => write!(f, "flaky({inner}, p={p})"),
            (BaselineKind::Oracle, ..) => f.write_str("oracle"),
            (BaselineKind::Random, ..) => f.write_str("random"),
            (BaselineKind::Stateless, ..) => f.write_str("stateless"),
            (BaselineKind::FlakyFormat, ..) => f.write_str("flaky"),
        }
    }
}

fn answer_json(text: &str) -> String {
    serde_json::json!({ "answer": text }).to_string()
}

/// Letter of the option whose text equals `value`, else the bare value.
fn choose(task: &TaskInstance, value: &str) -> String {
    match task.option_texts().iter().position(|t| t == value) {
        Some(pos) => answer_json(&OptionLetter::from_position(pos).to_string()),
        None => answer_json(value),
    }
}

pub fn solve(task: &TaskInstance, spec: &BaselineSpec) -> String {
    match spec.kind {
        BaselineKind::Oracle => {
            let value = match &task.payload {
                Payload::Astro(a) => a.answer().to_string(),
                Payload::Collision(c) => {
                    let end = simulate_collisions(&c.velocities, &c.collisions)
                        .expect("generated collisions are valid");
                    end[&c.query_particle].to_string()
                }
            };
            choose(task, &value)
        }
        BaselineKind::Random => {
            let mut rng = InstanceRng::new(mix_seeds(spec.rng_seed, task.instance_seed, "random"));
            let count = task.option_letters().len();
            answer_json(&OptionLetter::from_position(rng.below(count)).to_string())
        }
        BaselineKind::Stateless => {
            let value = match &task.payload {
                Payload::Astro(a) => a.identity(a.binding[&a.query_var]).to_string(),
                Payload::Collision(c) => c.velocities[&c.query_particle].to_string(),
            };
            choose(task, &value)
        }
        BaselineKind::FlakyFormat => {
            let mut rng = InstanceRng::new(mix_seeds(spec.rng_seed, task.instance_seed, "flaky"));
            if rng.bernoulli(spec.fail_rate.unwrap_or(0.0)) {
                FILLER.to_string()
            } else {
                solve(
                    task,
                    spec.inner
                        .as_deref()
                        .expect("flaky baseline has an inner solver"),
                )
            }
        }
    }
}
