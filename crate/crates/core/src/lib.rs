//! Self-supervised cross-modal clustering of images and caption words.
//!
//! A convolutional image encoder and a count-based word encoder map their
//! inputs into the same set of `N` binary clusters. During training each
//! encoder's prediction supervises the other: image predictions update the
//! word-cluster counts, and caption predictions become the image encoder's
//! binary cross entropy targets.

pub mod clusters;
pub mod dataset;
pub mod eval;
pub mod grad;
pub mod text;
pub mod trainer;
pub mod visual;

pub use clusters::BinaryClusterVector;
