//! Catalog ingestion, instance generation and the ground-truth simulators.

mod astro;
mod catalog;
mod collision;
mod instance;
mod swaps;

pub use astro::generate_astro;
pub use catalog::{
    load_catalog, Catalog, CatalogError, CatalogRow, BUNDLED_CATALOG_CSV, BUNDLED_RETRIEVE_COLUMN,
    BUNDLED_TARGET_COLUMN,
};
pub use collision::{generate_collision, simulate_collisions, CollisionInstance, VelocityPool};
pub use instance::{generate_task, Family, GenContext, Payload, TaskInstance, SCHEMA_VERSION};
pub use swaps::{simulate_swaps, SwapOp, SwapPattern};

pub use astro::AstroInstance;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("swap references unbound variable `{0}`")]
    UnknownVariable(String),
    #[error("collision references unknown particle `{0}`")]
    UnknownParticle(String),
    #[error("particle `{0}` cannot collide with itself")]
    SelfCollision(String),
    #[error("swap has a repeated name on one side: {0}")]
    RepeatedName(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("m = {m} exceeds the catalog's {rows} rows")]
    CatalogTooSmall { m: usize, rows: usize },
    #[error("catalog has only {available} distinct target values, need m = {m}")]
    NotEnoughDistinctTargets { m: usize, available: usize },
    #[error("m + 3 = {needed} exceeds the velocity pool size {pool}")]
    PoolExhausted { needed: usize, pool: usize },
    #[error(
        "m = 2 has a single particle pair, so n = {n} collisions cannot avoid immediate undos"
    )]
    DegenerateNoUndo { n: usize },
    #[error("invalid generation parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}
