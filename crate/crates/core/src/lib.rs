//! Procedural benchmarks for state-based recall.
//!
//! Two task families are generated from a seed: *Astro Recall*, where a table of
//! exoplanets is addressed through a chain of variable swaps, and *Collision
//! Simulator*, where equal-mass particles exchange velocities over a sequence of
//! collisions. Every instance carries its ground truth, computed by a
//! deterministic simulator. The rest of the crate turns instances into prompts,
//! talks to an OpenAI-compatible endpoint (or a scripted baseline), parses the
//! replies and aggregates raw and parsed-weighted accuracy per `(m, n)` bin.

pub mod answerparse;
pub mod baselines;
pub mod endpoint;
pub mod labels;
pub mod metrics;
pub mod promptrender;
pub mod runner;
pub mod seed;
pub mod selftest;
pub mod taskgen;

pub use answerparse::{parse_answer, ParseOutcome, ParseStatus, ParserConfig, UnparsedReason};
pub use baselines::{solve, BaselineKind, BaselineSpec};
pub use endpoint::{
    CompletionResult, EndpointClient, EndpointConfig, EndpointError, FinishReason, Variant,
};
pub use labels::{OptionLetter, ParticleLabel, VarName};
pub use metrics::{aggregate, parsed_weighted, BinMetrics, GridReport, MetricsError};
pub use promptrender::{
    render, render_astro, render_collision, PromptTemplateConfig, RenderedPrompt,
};
pub use runner::{
    execute_run, plan_run, resume_run, BaselineSolver, PlannedItem, RunConfig, RunError,
    RunOutcome, RunRecord, Solver, SolverSpec,
};
pub use seed::{derive_instance_seed, InstanceRng, Seed};
pub use taskgen::{
    generate_astro, generate_collision, generate_task, load_catalog, simulate_collisions,
    simulate_swaps, AstroInstance, Catalog, CatalogError, CollisionInstance, Family, GenContext,
    GenError, Payload, SimError, SwapOp, SwapPattern, TaskInstance, VelocityPool,
};
