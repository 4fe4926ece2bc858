//! Pronunciation scoring over WFST-compiled alignment graphs.
//!
//! The crate is organised bottom-up: [`lexicon`] and [`g2p`] handle
//! pronunciations, [`wfst`] holds the transducer core and graph builders,
//! [`acoustic`] extracts features and trains a monophone GMM-HMM, [`align`]
//! performs forced alignment, [`gop`] scores phones and [`pipeline`] ties it
//! together with the Offline, Online and Hybrid OOV strategies.

pub mod acoustic;
pub mod align;
pub mod g2p;
pub mod gop;
pub mod lexicon;
pub mod pipeline;
pub mod selftest;
pub mod synth;
pub mod wfst;
