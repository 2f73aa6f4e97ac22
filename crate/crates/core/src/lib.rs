//! Snippet discovery and labeling for long time series.
//!
//! A snippet is a segment of the series that many windows resemble under
//! the MPdist measure. This crate finds the `K` most representative snippets
//! for a given length, picks the best length from a grid by how distinct the
//! resulting snippets are, spreads the grid over parallel workers, and
//! labels every point of the series with its best-matching snippet.
//!
//! ```
//! use tsnip::{select_snippets, MPdistParams, TimeSeries};
//!
//! let values: Vec<f64> = (0..256)
//!     .map(|i| if (i / 64) % 2 == 0 { (i as f64 * 0.4).sin() } else { ((i % 8) as f64) / 8.0 })
//!     .collect();
//! let ts = TimeSeries::new(values).unwrap();
//! let result = select_snippets(&ts, &MPdistParams::new(16, None).unwrap(), 2).unwrap();
//! assert_eq!(result.snippets.len(), 2);
//! ```

pub mod error;
pub mod labeling;
pub mod length_select;
pub mod mpdist;
pub mod scheduler;
pub mod series;
pub mod snippets;
pub mod zdist;

pub use error::{Error, Result};
pub use labeling::{evaluate, label_series, EvalReport, LabelSequence};
pub use length_select::{
    criterion_score, make_grid, select_length, GridRule, LengthReport, SubseqRule,
};
pub use mpdist::{mpdist_profile, MPdistParams, MPdistProfile};
pub use scheduler::{kk_partition, sweep, Schedule, SweepOptions, TrainingLog};
pub use series::{load_series, SlidingStats, TimeSeries};
pub use snippets::{select_snippets, select_snippets_with, Exec, SnippetResult};
pub use zdist::Kernel;

/// Version tag written into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;
