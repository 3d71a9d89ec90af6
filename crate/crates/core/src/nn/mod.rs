//! Small differentiable kernel: dense feed-forward nets with exact
//! reverse-mode gradients, losses, optimizers, and a finite-difference checker.

mod gradcheck;
mod loss;
mod matrix;
mod net;
mod optim;
mod serialize;

pub use gradcheck::{central_difference, finite_diff_check, max_relative_error};
pub use loss::{evaluate as evaluate_loss, softmax, softmax_cross_entropy, Loss};
pub use matrix::Matrix;
pub use net::{
    backward, forward, forward_backward, forward_tape, Activation, Dense, GradReport, LayerSpec, Mode, NetSpec,
    Params, Tape,
};
pub use optim::{apply_update, OptimizerConfig, OptimizerState, Scheme};
pub use serialize::{net_from_str, net_to_string, read_net, write_net};

/// Flat views over a parameter container, in a fixed order. Gradient
/// containers of the same type share that order.
pub trait ParamSlices<T> {
    fn slices(&self) -> Vec<&[T]>;
    fn slices_mut(&mut self) -> Vec<&mut [T]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}
