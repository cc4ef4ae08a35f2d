//! Timeline screening with relevance-stratified bag-of-words features.
//!
//! Publications are graded for mental-health relevance by a prompted
//! language model, the grades are propagated to the full corpus by a
//! lightweight labeler, and each user's timeline is turned into a
//! concatenation of per-relevance bag-of-words blocks plus a block of
//! relevance-label n-grams. A class-weighted logistic regression screens
//! the resulting vectors.

pub mod classifier;
pub mod corpus;
pub mod digest;
pub mod features;
pub mod propagation;
pub mod relevance;
pub mod sparse;

pub use corpus::{Corpus, Publication, Split, Timeline, UserClass};
pub use relevance::RelevanceLabel;
