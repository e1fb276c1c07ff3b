//! Problem instances and the setup-time function.
//!
//! Stages are indexed from 0 in code. Stage 0 is the first production stage:
//! it has no input buffer and never incurs setup. Every later stage `s` is
//! fed by a buffer of capacity `buffer_capacities[s - 1]` and uses the setup
//! parameter row `setup_params[s - 1]`.
//!
//! Human-facing text (violations, Gantt labels) numbers stages from 1.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Abstract integer time unit. Durations in a valid instance are never
/// negative; the signed type exists so that malformed input can be reported
/// instead of silently wrapping.
pub type Time = i64;

/// One-based job identifier, as printed in instance files and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u32);

impl JobId {
    /// Zero-based position of the job in [`Instance::jobs`].
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        JobId(index as u32 + 1)
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: JobId,
    /// One standard processing time per stage.
    pub processing_times: Vec<Time>,
    /// One opaque label per property dimension (e.g. model, color).
    pub properties: Vec<String>,
}

/// Raw, possibly invalid, instance data. [`Instance::new`] turns it into a
/// checked instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub name: String,
    pub stage_count: usize,
    pub machines_per_stage: Vec<usize>,
    /// Capacity of the buffer in front of stages 2..m (length m - 1).
    pub buffer_capacities: Vec<usize>,
    pub property_count: usize,
    /// Optional display names for the property dimensions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub property_names: Vec<String>,
    /// `setup_params[s - 1][x]`: setup added at stage `s` (0-based, `s >= 1`)
    /// when property `x` changes between consecutive jobs on a machine.
    pub setup_params: Vec<Vec<Time>>,
    pub jobs: Vec<JobSpec>,
}

/// A single broken invariant. Stage and property numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("instance has no stages")]
    NoStages,
    #[error("instance has no jobs")]
    NoJobs,
    #[error("machines_per_stage has {found} entries, expected {expected}")]
    MachineCountLength { expected: usize, found: usize },
    #[error("stage {stage} has no machines")]
    ZeroMachines { stage: usize },
    #[error("buffer_capacities has {found} entries, expected {expected}")]
    BufferCountLength { expected: usize, found: usize },
    #[error("property_names has {found} entries, expected {expected}")]
    PropertyNameCount { expected: usize, found: usize },
    #[error("setup_params has {found} stage rows, expected {expected}")]
    SetupRowCount { expected: usize, found: usize },
    #[error("setup_params row for stage {stage} has {found} entries, expected {expected}")]
    SetupColumnCount {
        stage: usize,
        expected: usize,
        found: usize,
    },
    #[error("negative setup parameter {value} at stage {stage}, property {property}")]
    NegativeSetup {
        stage: usize,
        property: usize,
        value: Time,
    },
    #[error("job {job} has {found} processing times, expected {expected}")]
    ProcessingTimeCount {
        job: JobId,
        expected: usize,
        found: usize,
    },
    #[error("job {job} has negative processing time {value} at stage {stage}")]
    NegativeProcessingTime { job: JobId, stage: usize, value: Time },
    #[error("job {job} has {found} property values, expected {expected}")]
    PropertyCount {
        job: JobId,
        expected: usize,
        found: usize,
    },
    #[error("job id {id} appears more than once")]
    DuplicateJobId { id: JobId },
    #[error("job id {id} is outside 1..={job_count}")]
    JobIdOutOfRange { id: JobId, job_count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("stage index {stage} out of range for {stage_count} stages")]
    StageOutOfRange { stage: usize, stage_count: usize },
    #[error("job {0} does not belong to the instance")]
    UnknownJob(JobId),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks every structural invariant and returns all violations found.
pub fn validate_instance(spec: &InstanceSpec) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let m = spec.stage_count;
    let n = spec.jobs.len();
    let x = spec.property_count;

    if m == 0 {
        out.push(Violation::NoStages);
    }
    if n == 0 {
        out.push(Violation::NoJobs);
    }
    if spec.machines_per_stage.len() != m {
        out.push(Violation::MachineCountLength {
            expected: m,
            found: spec.machines_per_stage.len(),
        });
    }
    for (s, &count) in spec.machines_per_stage.iter().enumerate() {
        if count == 0 {
            out.push(Violation::ZeroMachines { stage: s + 1 });
        }
    }
    let inner = m.saturating_sub(1);
    if spec.buffer_capacities.len() != inner {
        out.push(Violation::BufferCountLength {
            expected: inner,
            found: spec.buffer_capacities.len(),
        });
    }
    if !spec.property_names.is_empty() && spec.property_names.len() != x {
        out.push(Violation::PropertyNameCount {
            expected: x,
            found: spec.property_names.len(),
        });
    }
    if spec.setup_params.len() != inner {
        out.push(Violation::SetupRowCount {
            expected: inner,
            found: spec.setup_params.len(),
        });
    }
    for (row, params) in spec.setup_params.iter().enumerate() {
        if params.len() != x {
            out.push(Violation::SetupColumnCount {
                stage: row + 2,
                expected: x,
                found: params.len(),
            });
        }
        for (p, &value) in params.iter().enumerate() {
            if value < 0 {
                out.push(Violation::NegativeSetup {
                    stage: row + 2,
                    property: p + 1,
                    value,
                });
            }
        }
    }

    let mut seen = vec![false; n];
    for job in &spec.jobs {
        if job.id.0 == 0 || job.id.0 as usize > n {
            out.push(Violation::JobIdOutOfRange {
                id: job.id,
                job_count: n,
            });
        } else if std::mem::replace(&mut seen[job.id.index()], true) {
            out.push(Violation::DuplicateJobId { id: job.id });
        }
        if job.processing_times.len() != m {
            out.push(Violation::ProcessingTimeCount {
                job: job.id,
                expected: m,
                found: job.processing_times.len(),
            });
        }
        for (s, &value) in job.processing_times.iter().enumerate() {
            if value < 0 {
                out.push(Violation::NegativeProcessingTime {
                    job: job.id,
                    stage: s + 1,
                    value,
                });
            }
        }
        if job.properties.len() != x {
            out.push(Violation::PropertyCount {
                job: job.id,
                expected: x,
                found: job.properties.len(),
            });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// A validated, immutable problem instance.
///
/// Jobs are stored sorted by id so that `jobs()[id.index()]` is job `id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    spec: InstanceSpec,
    /// Property labels interned per dimension: `codes[job][x]`.
    codes: Vec<Vec<u32>>,
}

impl Instance {
    pub fn new(mut spec: InstanceSpec) -> Result<Self, ModelError> {
        validate_instance(&spec).map_err(ModelError::Invalid)?;
        spec.jobs.sort_by_key(|j| j.id);

        let mut tables: Vec<HashMap<&str, u32>> = vec![HashMap::new(); spec.property_count];
        let codes = spec
            .jobs
            .iter()
            .map(|job| {
                job.properties
                    .iter()
                    .zip(tables.iter_mut())
                    .map(|(label, table)| {
                        let next = table.len() as u32;
                        *table.entry(label.as_str()).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        Ok(Instance { spec, codes })
    }

    pub fn spec(&self) -> &InstanceSpec {
        &self.spec
    }

    pub fn into_spec(self) -> InstanceSpec {
        self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn stage_count(&self) -> usize {
        self.spec.stage_count
    }

    pub fn job_count(&self) -> usize {
        self.spec.jobs.len()
    }

    pub fn property_count(&self) -> usize {
        self.spec.property_count
    }

    pub fn jobs(&self) -> &[JobSpec] {
        &self.spec.jobs
    }

    pub fn job_ids(&self) -> impl DoubleEndedIterator<Item = JobId> + ExactSizeIterator + '_ {
        self.spec.jobs.iter().map(|j| j.id)
    }

    pub fn machines(&self, stage: usize) -> usize {
        self.spec.machines_per_stage[stage]
    }

    /// Capacity of the buffer feeding `stage`. Panics for stage 0, which has
    /// no input buffer.
    pub fn buffer_capacity(&self, stage: usize) -> usize {
        assert!(stage > 0, "stage 0 has no input buffer");
        self.spec.buffer_capacities[stage - 1]
    }

    #[inline]
    pub fn processing_time(&self, job: usize, stage: usize) -> Time {
        self.spec.jobs[job].processing_times[stage]
    }

    /// Setup incurred at `stage` when `next` follows `prev` on the same
    /// machine: the sum of the stage's parameters over every property whose
    /// label differs. No predecessor, or stage 0, means no setup.
    pub fn setup_time(
        &self,
        stage: usize,
        prev: Option<JobId>,
        next: JobId,
    ) -> Result<Time, ModelError> {
        if stage >= self.stage_count() {
            return Err(ModelError::StageOutOfRange {
                stage,
                stage_count: self.stage_count(),
            });
        }
        for id in prev.into_iter().chain(std::iter::once(next)) {
            if id.0 == 0 || id.index() >= self.job_count() {
                return Err(ModelError::UnknownJob(id));
            }
        }
        Ok(self.setup_between(stage, prev.map(JobId::index), next.index()))
    }

    /// Index-based setup lookup used on the decoder's hot path.
    #[inline]
    pub(crate) fn setup_between(&self, stage: usize, prev: Option<usize>, next: usize) -> Time {
        let Some(prev) = prev else { return 0 };
        if stage == 0 {
            return 0;
        }
        let params = &self.spec.setup_params[stage - 1];
        self.codes[prev]
            .iter()
            .zip(&self.codes[next])
            .zip(params)
            .filter(|((a, b), _)| a != b)
            .map(|(_, &p)| p)
            .sum()
    }
}
