//! Spectral comparison of two embeddings of the same samples.
//!
//! Given two embeddings of one dataset and a kernel on each, the difference
//! of their normalized kernel matrices is analysed through an equivalent
//! `(d₁+d₂)`-square matrix whose cost is linear in the sample count. Its
//! eigenvectors identify samples grouped by one embedding but not the
//! other, and its spectral radius is a distance between embeddings.
//!
//! ```no_run
//! use embspec::io::{load_embedding_auto, pair};
//! use embspec::spec::{compare, SpecOptions};
//!
//! let a = load_embedding_auto("a.csv".as_ref())?;
//! let b = load_embedding_auto("b.csv".as_ref())?;
//! let result = compare(&pair(a, b)?, &SpecOptions::default())?;
//! println!("spec_diff = {}", result.spec_diff);
//! # Ok::<(), embspec::Error>(())
//! ```

pub mod align;
pub mod diagnostics;
mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod report;
pub mod spec;
pub mod synthetic;

pub use error::{Error, Result};
