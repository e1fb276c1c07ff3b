//! Limited-buffer flexible flow shop scheduling with multi-property setup
//! times.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: problem instances, validation and the setup-time function.
//! - [`instance_io`]: the JSON instance format, the bundled bus-plant
//!   instance and a seeded random-instance generator.
//! - [`decoder`]: launch sequence to feasible schedule, evaluation metrics
//!   and an independent feasibility verifier.
//! - [`encoding`]: random-key positions and their mapping to permutations.
//! - [`woa`]: the standard whale optimization algorithm.
//! - [`iwoa`]: the improved variant with Levy flight, opposition-based
//!   learning and simulated-annealing acceptance.
//! - [`oracle`]: brute-force reference simulation and exhaustive search.
//! - [`report`] and [`gantt`]: run reports, batch statistics, evolution
//!   curves and Gantt chart export.

pub mod decoder;
pub mod encoding;
pub mod gantt;
pub mod instance_io;
pub mod iwoa;
pub mod model;
pub mod oracle;
pub mod report;
pub mod woa;

pub use decoder::{compute_metrics, decode, verify_schedule, Metrics, Schedule, StageRecord};
pub use encoding::{Bounds, Position};
pub use instance_io::{bundled_bus_instance, load_instance, save_instance};
pub use iwoa::{run_iwoa, IwoaParams};
pub use model::{Instance, InstanceSpec, JobId, Time};
pub use report::{Algorithm, RunReport};
pub use woa::{run_woa, WoaParams};
