//! Conditional VAE generator: architecture, objective, training, sampling,
//! and gradient verification.

mod gradcheck;
mod loss;
mod model;
pub mod tape;
mod train;

pub use gradcheck::{grad_check, CvaeLossProbe, GradCheckReport, LossProbe, QuadraticProbe};
pub use loss::{
    batch_loss_and_grads, batch_loss_value, kl_divergence, kl_graph, recon_loss, ItemNoise, LossBreakdown,
    TrainItem,
};
pub use model::{
    draw_standard_normal, frames_matrix, matrix_to_frames, reparameterize, Cvae, DiagonalGaussian, ModelConfig,
    FRAME_DIM,
};
pub use train::{
    generate, generate_mean, smoothed_recon_endpoints, train, EpochStats, Generated, TrainOptions, TrainState,
};
