//! Working models for the non-null probabilities and the ordering policies
//! that use them.

mod em;
mod isotonic;
mod logistic;
mod policies;
mod spline;

pub use em::{e_step, em_fit, m_step, EStep, EmConfig, EmData, EmFit, MeanModel, Quad, Structure, TreeDirection, TwoGroupsModel};
pub use isotonic::tree_isotonic;
pub use logistic::{fit_logistic, LogisticFit};
pub use policies::{
    block_adaptive_threshold, grid_boundary_pick, online_tree_prior, single_posterior, tree_leaf_pick, EmPolicy, Evidence,
    GridPolicy, RefitSchedule, TreePolicy, ONLINE_TREE_KEEP,
};
pub use spline::{bspline_basis, SparseBasis, TensorSpline};
