//! Bayesian persuasion against credible, privately-typed agents.
//!
//! An [`Instance`] describes the game; a [`MechanismTree`] is a committed
//! multi-stage mechanism. [`agent`] computes exact best responses and
//! principal values, [`lp`] solves for optimal mechanisms and [`synthesis`]
//! turns LP solutions back into trees.

// Index loops mirror the LP notation and stay readable next to it.
#![allow(clippy::needless_range_loop)]

pub mod agent;
pub mod instances;
pub mod lp;
pub mod mechanism;
pub mod model;
pub mod synthesis;

pub use agent::{
    best_response, brute_force_response, check_multistage_ic, evaluate, AgentError, Choice, EvaluationReport,
    MultistageIcReport, ResponseProfile,
};
pub use instances::{
    example_instance, example_mechanism, max_independent_set, random_instance, random_mechanism, reduce_mis, ExampleId,
    ExampleParams,
    Graph, InstanceError, MechanismId,
};
pub use lp::{
    solve_lp, Backend, EnsesSolution, LinearProgram, LpError, LpStatus, Policies, SigmaMapping, SolveReport,
};
pub use mechanism::{annotate, depth, to_dot, validate_mechanism, MechanismTree, Node, NodeKind, TypeSet};
pub use model::{
    argmax_actions, bayes_update, validate_instance, Belief, Instance, ModelError, SignalStrategy, Tolerances,
    ValidationReport,
};
pub use synthesis::{enses_tree, ic_two_stage_tree, mis_policy_tree, SynthesisError, SynthesisOptions, ZeroBranchPolicy};
