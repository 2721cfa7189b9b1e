//! λ-RLM: a typed functional runtime for recursive long-context reasoning.
//!
//! The prompt lives outside the model as a [`doc::Document`]; a deterministic
//! [`planner`] picks a decomposition `(k*, τ*, d)` and a task pipeline; the
//! [`runtime`] executes that plan as a fixed recursive combinator program,
//! invoking a pluggable [`oracle`] only on bounded leaf sub-prompts; the
//! [`analysis`] module checks the runtime's termination, cost, and accuracy
//! behaviour against closed-form models by exact counting and Monte-Carlo
//! simulation. The [`lambda`] module is a self-contained λ-calculus
//! interpreter demonstrating the fixed-point machinery the executor encodes.

pub mod analysis;
pub mod answers;
pub mod doc;
pub mod lambda;
pub mod oracle;
pub mod planner;
pub mod runtime;
pub mod taskgen;
pub mod verify;

pub use doc::Document;
