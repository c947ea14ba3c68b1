//! Graph feature-propagation preprocessing with hop-exact noise masking.
//!
//! The pipeline: build per-node exact-distance hop masks, compute
//! personalized-importance scores, run mask-filtered (optionally
//! importance-biased) random walks to estimate each hop's reach, multiply
//! the resulting row-stochastic walk matrices into the raw features, and
//! feed a combination of the hop matrices to a small node classifier.
//! Plain operator-power propagation is available as the baseline the walk
//! estimates replace, along with smoothness metrics that quantify the
//! representation collapse deep stacks suffer from.
//!
//! Determinism is a design rule throughout: fixed seeds give bit-identical
//! artifacts regardless of worker count.

pub mod classifier;
pub mod error;
pub mod features;
pub mod graph;
pub mod mask;
pub mod metrics;
pub mod ppr;
pub mod propagate;
pub mod rng;
pub mod synthetic;
pub mod walk;

pub use error::{Error, ErrorCategory, Result};
pub use features::{load_features, load_labeled_split, FeatureMatrix, LabeledSplit};
pub use graph::{load_edge_list, normalize, write_edge_list, Graph, NormalizedAdjacency};
pub use mask::{build_hop_mask, noise_report, HopMask, NoiseReport};
pub use metrics::{gsl, gsl_brute_force, nsl, SmoothnessResult};
pub use ppr::{ppr_all, ppr_exact, ppr_push, PprScores};
pub use propagate::{
    combine, propagate, stationary_matrix, CombineMethod, CombineSpec, HopFeatures,
    PropagationMode,
};
pub use walk::{rmask_features, single_walk, walk_matrix, BiasMode, WalkConfig, WalkMatrix};
