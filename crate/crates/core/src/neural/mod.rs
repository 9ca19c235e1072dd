//! Adversarial examples and certificates for two-layer ReLU networks.

mod attack;
mod batch;
mod net;
mod reduce;
mod sdp;

pub use attack::{attack_net, attack_net_with, nn_gamma, pgd_attack, pgd_attack_with, NetAttackConfig, PgdConfig};
pub use batch::{batch_attack_net, batch_pgd, format_table, paired_comparison, random_net, PairedRow};
pub use net::{target_second_best, BinaryNet, TwoLayerNet};
pub use reduce::{reduce_binary, reduce_net, NnOptInstance};
pub use sdp::{
    nn_scale, round_nn, round_nn_within, rounding_epsilon, solve_nn_sdp, solve_nn_sdp_with, NnFrame, NnRounding,
    NnSdpConfig, NnSdpSolution,
};
