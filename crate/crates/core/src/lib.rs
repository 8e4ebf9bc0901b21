//! Forecasting converged network weights from early training trajectories.
//!
//! The crate generates weight-trajectory datasets by training small models
//! under common first-order optimizers, learns a time-dependent vector field
//! over weight space with conditional flow matching, and forecasts final
//! weights by integrating that field from an observed prefix. Simple
//! forecasting baselines and a seeded experiment harness are included for
//! comparison.
//!
//! Module map:
//!
//! - [`smallnet`]: dense networks with reverse-mode gradients.
//! - [`optim`]: SGD, momentum, Adam, AdamW, RMSProp, Adagrad.
//! - [`trajectory`]: regression tasks and recorded training runs.
//! - [`format`]: the `GFMT` dataset format and model checkpoints.
//! - [`gfm`]: path construction, training loss and forecasting.
//! - [`baselines`]: LFD-2, Introspection and DLinear forecasters.
//! - [`eval`]: splits, metrics, seed-repeated experiments and sweeps.
//! - [`plot`]: static SVG trajectory plots.
//! - [`cli`]: the `gfm-lab` command-line front end.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod eval;
pub mod format;
pub mod gfm;
pub mod optim;
pub mod plot;
pub mod rng;
pub mod smallnet;
pub mod trajectory;

pub use error::{Error, Result};
