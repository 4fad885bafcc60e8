//! Estimation of `h(y) = E[D*(0, y)]` and the norm `μ`, supporting linear
//! forms, `Q_x` membership, path skeletons and the GAP certificate.

mod gap;
mod htable;
mod mu;
mod norm;
mod qx;
mod sampling;
mod skeleton;

pub use gap::{gap_check, gap_check_with_ci, GapReport, GapRow};
pub use htable::{HEntry, HFunction, HTable};
pub use mu::{
    correction_term, estimate_mu, estimate_mu_from, fit_mu, MuEstimate, MuRow, DEFAULT_BOOTSTRAP, MIN_SCHEDULE,
};
pub use norm::{lattice_images, DirectionEstimate, NormEstimate, SupportFunctional};
pub use qx::{gap_allowance, Membership, QxSet, CLASSIFICATION_FACTOR};
pub use sampling::{
    estimate_h, estimate_h_ball, l1_ball, sample_direction, BoxPolicy, DirectionSamples, MAX_EXCLUSION, MIN_REPLICATES,
};
pub use skeleton::{classify_increments, extract_skeleton, Classification, Skeleton};

#[allow(unused_imports)]
pub(crate) use sampling::{check_exclusion, check_schedule, star_distances};
