//! linkpulse tracks how visitors actually use the links inside a web
//! site and puts that signal to work: it maintains lifetime and
//! recent-window visit counters per link, derives each link's importance
//! relative to its own site, emits the ordered "top-left corner" slot
//! block as data, blends the local signal into a cross-site link-graph
//! ranking, and prunes extractive summaries down to the pages people
//! demonstrably visit. A deterministic traffic simulator exercises the
//! whole pipeline at desk scale.
//!
//! Inner loops (stationary scoring, similarity matrices, Monte-Carlo
//! estimates) run on rayon when the default `parallel` feature is on and
//! fall back to plain iterators without it; both paths produce
//! bit-identical results.

pub mod cli;
pub mod config;
pub mod counters;
pub mod graph;
pub mod ids;
pub mod popularity;
pub mod power;
pub mod ranker;
pub mod service;
pub mod simulator;
pub mod summarize;

pub use config::Config;
pub use counters::{ClickEvent, CounterSnapshot, CounterStore};
pub use ids::{LinkId, PageRef, SiteId};
