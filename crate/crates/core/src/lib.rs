//! Exact solver and verifier for finite multi-agent constrained POMDPs.
//!
//! The crate enumerates decentralized histories, evaluates behavioral policy
//! profiles and product mixtures exactly, computes primal and dual values of
//! the constrained team problem, and certifies duality gap, saddle-point and
//! complementary-slackness residuals. A small matrix-game testbed with `+inf`
//! payoffs and an inf-convolution operator live in [`minimax`].

pub mod duality;
pub mod error;
pub mod evaluation;
pub mod history;
pub mod lp;
pub mod minimax;
pub mod model;
pub mod numfmt;
pub mod policy;

pub use error::{Error, Result};
pub use model::{cost_bounds, discounted_tail_bound, parse_model, random_instance, CostBounds, Dims, Model, ModelParts};
pub use duality::{certify, CertifyParams, DualityCertificate, Verdict};
pub use evaluation::{expected_costs, forward_pass, CostReport};
pub use history::{build_lattice, HistoryLattice};
pub use policy::{AgentPolicy, DeterministicProfile, PolicyProfile, ProductMixture};
