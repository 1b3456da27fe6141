//! Segmentation losses over externally supplied probability maps: cross
//! entropy, class-weighted Dice, boundary-band Dice, the signed-distance
//! surface loss, and their scheduled combination.

mod gradients;
mod losses;
mod probmap;
pub mod sdm;

pub use gradients::{
    finite_difference_gradient, gradcheck, loss_gradients, max_relative_error, random_instance, GradcheckReport,
    LossKind,
};
pub use losses::{
    alpha_schedule, boundary_aware_loss, boundary_band, class_weights, combined_loss, cross_entropy, dice_loss,
    surface_loss, surface_loss_surrogate, surface_loss_surrogate_gradient, BoundaryLoss, ClassWeights, LossBreakdown,
    LossWeights, DEFAULT_EPSILON, LOG_CLAMP,
};
pub use probmap::ProbMap;
pub use sdm::{boundary_pixels, euclidean_distance_transform, signed_distance_map, SignedDistanceMap};
