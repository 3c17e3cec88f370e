//! Hand-built recurrent networks that generate bounded-depth Dyck languages,
//! a step-by-step saturating runtime, and exhaustive verification against the
//! depth-bounded bracket automaton.

pub mod dyck;
pub mod encoding;
pub mod error;
pub mod matrix;
pub mod network;
pub mod numerics;
pub mod runtime;
pub mod sampler;
pub mod verify;
pub mod weights;

pub use dyck::{DfaState, DyckParams, Token, TokenString};
pub use encoding::{Encoding, EncodingKind, StackArch};
pub use error::{Error, Result};
pub use network::{Architecture, Construction, Network};
pub use numerics::NumericConfig;
pub use runtime::{NetworkState, SlotView, StepTrace};
