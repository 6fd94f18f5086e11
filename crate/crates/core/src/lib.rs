pub mod bandwidths;
pub mod cond_cdf;
pub mod curve;
pub mod error;
pub mod kernels;
pub mod quadrature;
pub mod quantile_scale;
pub mod sample;
pub mod rearrangement;
pub mod residual_process;
pub mod rng;
pub mod bootstrap;
pub mod simulation;
pub mod asymptotics;
pub mod cli;
