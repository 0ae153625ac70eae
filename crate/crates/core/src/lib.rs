//! Script identification of handwritten text-line images.
//!
//! A line image is smoothed, binarized with Otsu's threshold, and reduced to
//! a 54-value [`FeatureVector`]: 22 contour descriptors from Freeman chain
//! codes followed by 32 grid-DFT magnitude statistics. k-NN, Gaussian naive
//! Bayes and a one-vs-one SMO support vector machine classify the vectors,
//! and [`eval`] reports confusion matrices, per-class statistics and
//! cross-validation.
//!
//! ```
//! use scriptline::{extract_features, ExtractConfig, GrayImage, FEATURE_COUNT};
//!
//! // a dark 20x8 bar on light paper
//! let img = GrayImage::from_fn(40, 16, |x, y| {
//!     if (10..30).contains(&x) && (4..12).contains(&y) { 20 } else { 230 }
//! })?;
//! let fv = extract_features(&img, &ExtractConfig::default())?;
//! assert_eq!(fv.values().len(), FEATURE_COUNT);
//! # Ok::<(), scriptline::Error>(())
//! ```

pub mod cli;
pub mod contour;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod featureset;
pub mod learn;
pub mod raster;
pub mod spectral;

pub use contour::{contour_features, trace_boundaries, BoundarySet, ChainCode, ContourFeatures};
pub use corpus::{load_corpus, split_corpus, synth_corpus, Corpus, SynthSpec};
pub use error::{Error, Result};
pub use eval::{evaluate, kfold_cross_validate, ConfusionMatrix, EvaluationReport};
pub use featureset::{
    extract_features, read_features, write_features, ExtractConfig, FeatureVector, LabelSet, ScriptLabel, FEATURE_COUNT,
};
pub use learn::{ModelSpec, Prediction, SvmParams, TrainedModel};
pub use raster::{gaussian_smooth, otsu_binarize, BinaryImage, GrayImage, InkPolarity};
pub use spectral::{dft2, spectral_features, Matrix};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/chain-codes.md")]
    mod chain_codes {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/feature-vector.md")]
    mod feature_vector {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
