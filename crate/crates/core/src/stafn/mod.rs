//! Spatio-temporal attention encoder-decoder.
//!
//! Representations are laid out `[.., T, N_l, d_model]`; any leading axes are batch axes.

mod config;
mod model;
mod params;
mod temporal;

pub use config::{Fusion, ModelConfig, ScoreScale};
pub(crate) use config::{activation_name, parse_activation};
pub use model::{random_input, AttentionWeights, Bound, DecoderBlock, EncoderBlock, Forward, ModelInput, StafnModel};
pub use params::{ParamId, ParamStore};
pub use temporal::{calendar_features, TimeStamps, CALENDAR_CHANNELS};
