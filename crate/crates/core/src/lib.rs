//! Algorithms for turning a document collection into a navigable 2D map.
//!
//! The crate is `no_std` and only needs an allocator. Everything here is a
//! pure function of its inputs (plus an explicit seed where randomness is
//! involved); file formats, PNG encoding, the HTTP server and the command
//! line live in the `cartomap` crate.
//!
//! Pipeline order, by module:
//!
//! 1. [`corpus`]: typed records, entity catalog, synthetic corpora.
//! 2. [`vectorize`]: tokens, n-grams, vocabulary, tf-idf and incidence matrices.
//! 3. [`embed`]: randomized truncated SVD (LSA) and latent vectors for every entity type.
//! 4. [`neighbors`]: exact and graph-based approximate k-nearest neighbors.
//! 5. [`project2d`]: fuzzy neighbor graph, stochastic layout, out-of-sample transform.
//! 6. [`landmarks`]: k-means levels in 2D and cluster naming.
//! 7. [`score`] and [`snapshot`]: entity importance and the exported map.
//! 8. [`raster`], [`facets`], [`labels`]: everything the map server queries.

#![no_std]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

mod error;
pub(crate) mod math;

pub mod corpus;
pub mod embed;
pub mod facets;
pub mod labels;
pub mod landmarks;
pub mod linalg;
pub mod metrics;
pub mod neighbors;
pub mod project2d;
pub mod raster;
pub mod score;
pub mod snapshot;
pub mod vectorize;

pub use corpus::{CorpusRecord, EntityCatalog, EntityType};
pub use error::{Error, Result};
