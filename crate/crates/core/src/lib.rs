//! Radio frequency interference flagging with spiking neural networks.
//!
//! Spectrograms are cut into 32-channel patches, scaled, optionally
//! divisively normalised and encoded as spike trains. A feed-forward network
//! of leaky integrate-and-fire neurons, trained by backpropagation through
//! time with surrogate gradients, emits output spikes that decode to
//! per-pixel flags. Patches are stitched back into full spectrograms for
//! scoring.
//!
//! [`pipeline`] ties the stages together; the guide in `book/` walks through
//! each of them.

pub mod data;
pub mod deploy;
pub mod encoding;
pub mod error;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            mod $name {}
        };
    }
    chapter!(introduction, "introduction.md");
    chapter!(data, "data.md");
    chapter!(preprocessing, "preprocessing.md");
    chapter!(encoding, "encoding.md");
    chapter!(network, "network.md");
    chapter!(training, "training.md");
    chapter!(evaluation, "evaluation.md");
    chapter!(cli, "cli.md");
    chapter!(deployment, "deployment.md");
}
