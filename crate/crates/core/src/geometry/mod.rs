//! Constructive pieces of the regularization argument: the invariant cone of
//! the strictly two-convex region and the radial booster functions.

pub mod booster;
pub mod cone;

pub use booster::{
    booster_eigen_ratio, booster_profile, booster_uniform_decay, Booster, BoosterKind,
    BoosterProfile, DecayRow, GridSpec,
};
pub use cone::{cone_invariance_check, cone_invariance_check_with_tau, cone_slope, ConeSolution, InvarianceReport};
