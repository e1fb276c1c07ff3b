//! Instance file format, the bundled bus-plant instance and a seeded
//! generator for small test instances.
//!
//! An instance file is a JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "example",
//!   "stage_count": 2,
//!   "machines_per_stage": [2, 1],
//!   "buffer_capacities": [1],
//!   "property_count": 1,
//!   "property_names": ["color"],
//!   "setup_params": [[3]],
//!   "jobs": [
//!     {"id": 1, "processing_times": [4, 2], "properties": ["red"]},
//!     {"id": 2, "processing_times": [3, 5], "properties": ["blue"]}
//!   ]
//! }
//! ```
//!
//! `setup_params` has one row per stage after the first and one column per
//! property. All durations are non-negative integers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, InstanceSpec, JobId, JobSpec, ModelError, Time, Violation};

pub const SCHEMA_VERSION: u32 = 1;

const BUS_INSTANCE: &str = include_str!("../data/bus.json");

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error(transparent)]
    Invalid(#[from] ModelError),
    #[error("invalid generator config: {0}")]
    Config(String),
}

impl InstanceIoError {
    /// Instance violations, when the error is a validation failure.
    pub fn violations(&self) -> Option<&[Violation]> {
        match self {
            InstanceIoError::Invalid(ModelError::Invalid(v)) => Some(v),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema_version: u32,
    #[serde(flatten)]
    spec: InstanceSpec,
}

/// Parses and validates an instance document.
pub fn load_instance(text: &str) -> Result<Instance, InstanceIoError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceIoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(InstanceIoError::UnsupportedVersion {
            found: file.schema_version,
        });
    }
    Ok(Instance::new(file.spec)?)
}

pub fn save_instance(inst: &Instance) -> String {
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        spec: inst.spec().clone(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("instance serializes");
    out.push('\n');
    out
}

/// The 15-bus, 4-stage welding and painting line.
///
/// Two setup properties (model, color). The setup table reads 3 for a model
/// change at stage 2 and 2 for every other stage/property combination.
pub fn bundled_bus_instance() -> Instance {
    load_instance(BUS_INSTANCE).expect("bundled bus instance is valid")
}

/// Raw text of the bundled bus instance file.
pub fn bundled_bus_instance_text() -> &'static str {
    BUS_INSTANCE
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySpec {
    /// Number of distinct labels the property may take.
    pub labels: usize,
    /// Inclusive range for the per-stage setup parameter.
    pub setup_range: (Time, Time),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomInstanceConfig {
    pub jobs: usize,
    pub machines_per_stage: Vec<usize>,
    pub buffer_capacities: Vec<usize>,
    /// Inclusive range for processing times.
    pub time_range: (Time, Time),
    pub properties: Vec<PropertySpec>,
}

fn check_range(what: &str, (lo, hi): (Time, Time)) -> Result<(), InstanceIoError> {
    if lo < 0 || lo > hi {
        return Err(InstanceIoError::Config(format!(
            "{what} range [{lo}, {hi}] is empty or negative"
        )));
    }
    Ok(())
}

/// Draws a random instance; identical `(config, seed)` pairs give identical
/// instances.
pub fn random_instance(
    config: &RandomInstanceConfig,
    seed: u64,
) -> Result<Instance, InstanceIoError> {
    check_range("processing time", config.time_range)?;
    for p in &config.properties {
        check_range("setup", p.setup_range)?;
        if p.labels == 0 {
            return Err(InstanceIoError::Config(
                "property needs at least one label".into(),
            ));
        }
    }
    let m = config.machines_per_stage.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let setup_params = (1..m)
        .map(|_| {
            config
                .properties
                .iter()
                .map(|p| rng.random_range(p.setup_range.0..=p.setup_range.1))
                .collect()
        })
        .collect();
    let (lo, hi) = config.time_range;
    let jobs = (0..config.jobs)
        .map(|i| JobSpec {
            id: JobId::from_index(i),
            processing_times: (0..m).map(|_| rng.random_range(lo..=hi)).collect(),
            properties: config
                .properties
                .iter()
                .map(|p| format!("v{}", rng.random_range(0..p.labels)))
                .collect(),
        })
        .collect();

    Ok(Instance::new(InstanceSpec {
        name: format!("random-n{}-m{}-s{}", config.jobs, m, seed),
        stage_count: m,
        machines_per_stage: config.machines_per_stage.clone(),
        buffer_capacities: config.buffer_capacities.clone(),
        property_count: config.properties.len(),
        property_names: vec![],
        setup_params,
        jobs,
    })?)
}

/// Converts a Carlier–Néron style hybrid flow shop file.
///
/// Expected layout, whitespace separated: `n m`, then `m` machine counts,
/// then `n` rows of `m` processing times. These benchmarks have no setups
/// and unlimited buffers, so every buffer gets `buffer_capacity` slots and
/// the instance carries no properties.
pub fn parse_carlier_neron(
    text: &str,
    name: &str,
    buffer_capacity: usize,
) -> Result<Instance, InstanceIoError> {
    let mut tokens = text.lines().enumerate().flat_map(|(l, line)| {
        line.split_whitespace().map(move |tok| {
            let column = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
            (l + 1, column, tok)
        })
    });
    let mut next = |what: &str| -> Result<Time, InstanceIoError> {
        match tokens.next() {
            Some((line, column, tok)) => tok.parse::<Time>().map_err(|e| InstanceIoError::Parse {
                line,
                column,
                message: format!("{what}: {e}"),
            }),
            None => Err(InstanceIoError::Parse {
                line: text.lines().count().max(1),
                column: 0,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    };
    let as_count = |v: Time, what: &str| -> Result<usize, InstanceIoError> {
        usize::try_from(v).map_err(|_| InstanceIoError::Config(format!("negative {what}")))
    };

    let n = as_count(next("job count")?, "job count")?;
    let m = as_count(next("stage count")?, "stage count")?;
    let machines = (0..m)
        .map(|_| as_count(next("machine count")?, "machine count"))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs = (0..n)
        .map(|i| {
            Ok(JobSpec {
                id: JobId::from_index(i),
                processing_times: (0..m)
                    .map(|_| next("processing time"))
                    .collect::<Result<_, _>>()?,
                properties: vec![],
            })
        })
        .collect::<Result<Vec<_>, InstanceIoError>>()?;

    Ok(Instance::new(InstanceSpec {
        name: name.to_string(),
        stage_count: m,
        machines_per_stage: machines,
        buffer_capacities: vec![buffer_capacity; m.saturating_sub(1)],
        property_count: 0,
        property_names: vec![],
        setup_params: vec![vec![]; m.saturating_sub(1)],
        jobs,
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bus_shape() {
        let bus = bundled_bus_instance();
        assert_eq!(bus.stage_count(), 4);
        assert_eq!(bus.spec().machines_per_stage, vec![3, 2, 2, 2]);
        assert_eq!(bus.spec().buffer_capacities, vec![2, 2, 1]);
        assert_eq!(bus.job_count(), 15);
        assert_eq!(bus.property_count(), 2);
        assert_eq!(bus.jobs()[0].processing_times, vec![28, 22, 14, 12]);
        assert_eq!(bus.jobs()[5].processing_times, vec![35, 21, 20, 33]);
        assert_eq!(bus.jobs()[12].properties, vec!["Type1", "Color1"]);
        assert_eq!(bus.jobs()[2].properties, vec!["Type2", "Color1"]);
        assert_eq!(bus.spec().setup_params, vec![vec![3, 2], vec![2, 2], vec![2, 2]]);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(
            load_instance(""),
            Err(InstanceIoError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_error_has_location() {
        let err = load_instance("{\n  \"schema_version\": 1,\n  \"name\": oops\n}").unwrap_err();
        match err {
            InstanceIoError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn three_times_on_four_stages_fails_validation() {
        let text = bundled_bus_instance_text().replace("[28, 22, 14, 12]", "[28, 22, 14]");
        let err = load_instance(&text).unwrap_err();
        let v = err.violations().expect("validation failure");
        assert_eq!(
            v,
            &[Violation::ProcessingTimeCount {
                job: JobId(1),
                expected: 4,
                found: 3
            }]
        );
    }

    #[test]
    fn wrong_schema_version() {
        let text = bundled_bus_instance_text().replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(
            load_instance(&text),
            Err(InstanceIoError::UnsupportedVersion { found: 7 })
        ));
    }

    #[test]
    fn round_trip_bus() {
        let bus = bundled_bus_instance();
        assert_eq!(load_instance(&save_instance(&bus)).unwrap(), bus);
    }

    fn config() -> RandomInstanceConfig {
        RandomInstanceConfig {
            jobs: 5,
            machines_per_stage: vec![2, 1, 2],
            buffer_capacities: vec![0, 1],
            time_range: (1, 9),
            properties: vec![PropertySpec {
                labels: 2,
                setup_range: (1, 3),
            }],
        }
    }

    #[test]
    fn random_instance_is_deterministic() {
        assert_eq!(random_instance(&config(), 3).unwrap(), random_instance(&config(), 3).unwrap());
        assert_ne!(random_instance(&config(), 3).unwrap(), random_instance(&config(), 4).unwrap());
    }

    #[test]
    fn degenerate_time_range() {
        let mut c = config();
        c.time_range = (5, 5);
        let inst = random_instance(&c, 1).unwrap();
        assert!(inst.jobs().iter().all(|j| j.processing_times.iter().all(|&t| t == 5)));
    }

    #[test]
    fn invalid_ranges_rejected() {
        let mut c = config();
        c.time_range = (6, 5);
        assert!(matches!(random_instance(&c, 1), Err(InstanceIoError::Config(_))));
        let mut c = config();
        c.properties[0].setup_range = (-1, 2);
        assert!(matches!(random_instance(&c, 1), Err(InstanceIoError::Config(_))));
        let mut c = config();
        c.buffer_capacities.pop();
        assert!(matches!(random_instance(&c, 1), Err(InstanceIoError::Invalid(_))));
    }

    #[test]
    fn carlier_neron_layout() {
        let text = "3 2\n2 1\n4 5\n6 7\n8 9\n";
        let inst = parse_carlier_neron(text, "tiny", 3).unwrap();
        assert_eq!(inst.job_count(), 3);
        assert_eq!(inst.spec().machines_per_stage, vec![2, 1]);
        assert_eq!(inst.spec().buffer_capacities, vec![3]);
        assert_eq!(inst.jobs()[2].processing_times, vec![8, 9]);
    }

    #[test]
    fn carlier_neron_errors_are_located() {
        match parse_carlier_neron("2 2\n1 1\n3 x\n", "bad", 1).unwrap_err() {
            InstanceIoError::Parse { line, column, .. } => assert_eq!((line, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_carlier_neron("2 2\n1 1\n3 4\n", "short", 1),
            Err(InstanceIoError::Parse { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn save_load_round_trip(seed in any::<u64>(), jobs in 1usize..7, k in 0usize..3) {
                let c = RandomInstanceConfig {
                    jobs,
                    machines_per_stage: vec![2, 1, 3],
                    buffer_capacities: vec![k, 1],
                    time_range: (0, 20),
                    properties: vec![
                        PropertySpec { labels: 3, setup_range: (0, 4) },
                        PropertySpec { labels: 2, setup_range: (1, 2) },
                    ],
                };
                let inst = random_instance(&c, seed).unwrap();
                prop_assert_eq!(load_instance(&save_instance(&inst)).unwrap(), inst);
            }
        }
    }
}
