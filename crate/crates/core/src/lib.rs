//! Runtime assurance for switching between an untrusted and a safe controller.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod interval;
pub mod lookahead;
pub mod plant;
pub mod plant_file;
pub mod qlearning;
pub mod scalar;
pub mod scenario;
pub mod shaping;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mdp64 = plant::Mdp<f64>;
pub type RewardStructure64 = plant::RewardStructure<f64>;
pub type ShapedReward64 = shaping::ShapedReward<f64>;
pub type ValueFunction64 = solver::ValueFunction<f64>;
pub type SynthesisResult64 = solver::SynthesisResult<f64>;
pub type MdpSynthesisResult64 = solver::MdpSynthesisResult<f64>;
pub type Gains64 = controllers::Gains<f64>;
pub type Quantizer64 = dynamics::Quantizer<f64>;
pub type TrackingReference64 = controllers::TrackingReference<f64>;
