//! Graph feature imputation with spectral wavelet autoencoders.

pub mod experiment;
pub mod frame;
pub mod graph;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod oracle;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/frames.md")]
    mod frames {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
