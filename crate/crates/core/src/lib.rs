//! Zero-shot toxicity classification from language-model likelihoods.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that does not
//! touch a filesystem or a socket:
//!
//! - [`corpus`]: documents, datasets, demonstration pools and text normalization.
//! - [`backend`]: the [`LanguageModel`](backend::LanguageModel) provider trait and
//!   validated scoring calls built on it.
//! - [`mock`]: a table-driven provider used as an exact oracle in tests.
//! - [`prompting`]: generative instruction contexts and cloze prompts.
//! - [`classifiers`]: generative, demonstration-ensembled, cloze, lexicon,
//!   embedding and random classifiers sharing one [`Decision`](classifiers::Decision) type.
//! - [`evaluation`]: per-class F1, confusion tallies, reports and sweep tables.
//! - [`attribution`]: perturbation-based token attributions with a weighted ridge surrogate.
#![no_std]
#![warn(rust_2018_idioms, missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod backend;
pub mod classifiers;
pub mod corpus;
pub mod evaluation;
pub mod mock;
pub mod prompting;

pub use backend::{BackendError, LanguageModel};
pub use classifiers::{Decision, Method, MethodKind};
pub use corpus::{Dataset, Document, Label};
pub use evaluation::EvalReport;
