//! Frame selection network: predicts, for each frame of a burst, the
//! probability that it is the best base frame.

mod config;
mod model;
mod train;

pub use config::{count_params, model_cost, FsnConfig, ModelCost};
pub use model::{argmax_first, frame_loss, model_grad_check, one_hot, Forward, FsnModel, ModelLoss};
pub use train::{
    agreement, dihedral, load_model, save_model, select_all, select_base, train, train_with, EpochRecord, Sample, TrainHistory,
};
