//! Triple-Helix synergy indicators over categorical micro-data.
//!
//! The crate builds sparse n-dimensional contingency tables from records
//! (firms, patents, ...) and computes Shannon entropies, multivariate
//! transmissions and the mutual redundancy `R_n = (-1)^(1+n) T_(1..n)` in bits.
//! On top of that sit a between/within group decomposition of the
//! transmission, per-period trajectories, a delimited-text loader with the
//! usual proxy transforms (postal-code prefixes, NACE truncation, size bins)
//! and a seeded generator of record sets whose information structure is known
//! analytically.
//!
//! ```
//! use trihelix::infomeasure::{mutual_redundancy, SubsetMask};
//! use trihelix::tableau::{build_table, DimensionSchema, Record};
//!
//! let schema = DimensionSchema::from_names(["x", "y", "z"]).unwrap();
//! let records: Vec<Record> = [("0", "0", "0"), ("0", "1", "1"), ("1", "0", "1"), ("1", "1", "0")]
//!     .iter()
//!     .map(|(a, b, c)| Record::new([*a, *b, *c]))
//!     .collect();
//! let table = build_table(&records, &schema).unwrap();
//! let all = SubsetMask::all(&schema);
//! assert!((mutual_redundancy(&table, &all).unwrap() + 1.0).abs() < 1e-12);
//! ```

pub mod decomp;
pub mod error;
pub mod infomeasure;
pub mod ingest;
pub mod mass;
pub mod sum;
pub mod synth;
pub mod tableau;

pub use error::{Error, ErrorCategory, Result};
