use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{GenError, SimError};
use crate::labels::{OptionLetter, ParticleLabel};
use crate::seed::{InstanceRng, Seed};

pub const COLLISION_OPTION_COUNT: usize = 4;

/// Inclusive range of integer velocities that initial values and distractors
/// are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VelocityPool {
    pub min: i64,
    pub max: i64,
}

impl Default for VelocityPool {
    fn default() -> Self {
        VelocityPool { min: 0, max: 99 }
    }
}

impl VelocityPool {
    pub fn size(&self) -> usize {
        if self.max < self.min {
            0
        } else {
            (self.max - self.min + 1) as usize
        }
    }

    pub fn value(&self, offset: usize) -> i64 {
        self.min + offset as i64
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionInstance {
    pub m: usize,
    pub n: usize,
    pub seed: Seed,
    pub velocities: BTreeMap<ParticleLabel, i64>,
    pub collisions: Vec<(ParticleLabel, ParticleLabel)>,
    pub query_particle: ParticleLabel,
    pub options: Vec<i64>,
    pub correct_letter: OptionLetter,
}

impl CollisionInstance {
    pub fn correct_value(&self) -> i64 {
        self.options[self.correct_letter.position()]
    }

    pub fn option_letters(&self) -> Vec<OptionLetter> {
        OptionLetter::first(self.options.len())
    }

    pub fn option_texts(&self) -> Vec<String> {
        self.options.iter().map(|v| v.to_string()).collect()
    }

    /// Checks every structural invariant and re-derives the answer.
    pub fn validate(&self, pool: &VelocityPool) -> Result<(), String> {
        if self.velocities.len() != self.m {
            return Err(format!(
                "{} velocities for m = {}",
                self.velocities.len(),
                self.m
            ));
        }
        if self.collisions.len() != self.n {
            return Err(format!(
                "{} collisions for n = {}",
                self.collisions.len(),
                self.n
            ));
        }
        let mut initial: Vec<i64> = self.velocities.values().copied().collect();
        initial.sort_unstable();
        if initial.windows(2).any(|w| w[0] == w[1]) || !initial.iter().all(|v| pool.contains(*v)) {
            return Err("initial velocities must be distinct pool values".into());
        }
        for w in self.collisions.windows(2) {
            if same_pair(&w[0], &w[1]) {
                return Err(format!(
                    "collision {}-{} immediately repeated",
                    w[1].0, w[1].1
                ));
            }
        }
        let mut opts = self.options.clone();
        opts.sort_unstable();
        opts.dedup();
        if self.options.len() != COLLISION_OPTION_COUNT || opts.len() != COLLISION_OPTION_COUNT {
            return Err("options must be 4 distinct values".into());
        }
        let final_state =
            simulate_collisions(&self.velocities, &self.collisions).map_err(|e| e.to_string())?;
        let answer = final_state
            .get(&self.query_particle)
            .ok_or_else(|| format!("unknown query particle {}", self.query_particle))?;
        let hits = self.options.iter().filter(|v| *v == answer).count();
        if hits != 1 || self.correct_value() != *answer {
            return Err("correct letter does not point at the simulated answer".into());
        }
        Ok(())
    }
}

fn same_pair(a: &(ParticleLabel, ParticleLabel), b: &(ParticleLabel, ParticleLabel)) -> bool {
    (a.0 == b.0 && a.1 == b.1) || (a.0 == b.1 && a.1 == b.0)
}

/// Each collision exchanges the two particles' current velocities.
pub fn simulate_collisions(
    velocities: &BTreeMap<ParticleLabel, i64>,
    collisions: &[(ParticleLabel, ParticleLabel)],
) -> Result<BTreeMap<ParticleLabel, i64>, SimError> {
    let mut state = velocities.clone();
    for (a, b) in collisions {
        if a == b {
            return Err(SimError::SelfCollision(a.to_string()));
        }
        let va = *state
            .get(a)
            .ok_or_else(|| SimError::UnknownParticle(a.to_string()))?;
        let vb = *state
            .get(b)
            .ok_or_else(|| SimError::UnknownParticle(b.to_string()))?;
        state.insert(a.clone(), vb);
        state.insert(b.clone(), va);
    }
    Ok(state)
}

/// Draw order: initial velocities, collision pairs, query particle,
/// distractors, option shuffle.
pub fn generate_collision(
    m: usize,
    n: usize,
    instance_seed: Seed,
    pool: &VelocityPool,
) -> Result<CollisionInstance, GenError> {
    if m < 2 {
        return Err(GenError::InvalidParameters(format!(
            "collision tasks need m >= 2, got {m}"
        )));
    }
    let needed = m + COLLISION_OPTION_COUNT - 1;
    if needed > pool.size() {
        return Err(GenError::PoolExhausted {
            needed,
            pool: pool.size(),
        });
    }
    if m == 2 && n >= 2 {
        return Err(GenError::DegenerateNoUndo { n });
    }
    let mut rng = InstanceRng::new(instance_seed);

    let offsets = rng.sample_indices(pool.size(), m);
    let velocities: BTreeMap<ParticleLabel, i64> = offsets
        .iter()
        .enumerate()
        .map(|(i, &off)| (ParticleLabel::from_index(i), pool.value(off)))
        .collect();

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n);
    while pairs.len() < n {
        let (i, j) = rng.distinct_pair(m);
        if let Some(&(pi, pj)) = pairs.last() {
            if (pi, pj) == (i, j) || (pi, pj) == (j, i) {
                continue;
            }
        }
        pairs.push((i, j));
    }
    let collisions: Vec<(ParticleLabel, ParticleLabel)> = pairs
        .iter()
        .map(|&(i, j)| (ParticleLabel::from_index(i), ParticleLabel::from_index(j)))
        .collect();

    let query_particle = ParticleLabel::from_index(rng.below(m));
    let final_state = simulate_collisions(&velocities, &collisions)?;
    let answer = final_state[&query_particle];

    let mut others: Vec<i64> = (0..pool.size())
        .map(|o| pool.value(o))
        .filter(|&v| v != answer)
        .collect();
    rng.partial_shuffle(&mut others, COLLISION_OPTION_COUNT - 1);
    let mut options = vec![answer];
    options.extend_from_slice(&others[..COLLISION_OPTION_COUNT - 1]);
    rng.shuffle(&mut options);
    let correct = options
        .iter()
        .position(|&v| v == answer)
        .expect("answer is an option");

    Ok(CollisionInstance {
        m,
        n,
        seed: instance_seed,
        velocities,
        collisions,
        query_particle,
        options,
        correct_letter: OptionLetter::from_position(correct),
    })
}
