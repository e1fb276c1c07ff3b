//! Launch sequence to schedule.
//!
//! The decoder is an event-driven list scheduler. Only the stage-0 launch
//! order comes from the caller; downstream stages serve their buffers FIFO.
//! The dispatch contract, shared with [`crate::oracle`]:
//!
//! - Time advances from event to event. At each instant the decoder
//!   *settles*: it repeats rounds until a round changes nothing. A round
//!   first completes every operation finishing at this instant (ordered by
//!   stage, then job id), then dispatches stages from the last one down to
//!   stage 1, then launches new jobs onto stage 0.
//! - A job finishing a non-final stage keeps holding its machine and joins
//!   the stage's upstream queue, ordered by (completion time, round, job id).
//! - Dispatching stage `s` repeats until stuck: an idle machine takes the
//!   buffer head; with an empty buffer it takes the upstream queue head
//!   directly (buffer entry and leave coincide); otherwise, while the buffer
//!   has room, the upstream queue head moves into it. Every move out of the
//!   upstream queue frees the job's previous machine.
//! - Idle machines are picked lowest index first.
//! - A job leaves the buffer when its setup begins. Setup and processing
//!   run back to back on the machine: `start = buffer_leave + setup`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, JobId, Time};

/// Timing of one job at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageRecord {
    pub job: JobId,
    /// 0-based stage index.
    pub stage: usize,
    /// 0-based machine index within the stage.
    pub machine: usize,
    /// Entry into the stage's input buffer; `None` at stage 0.
    pub buffer_entry: Option<Time>,
    pub buffer_leave: Option<Time>,
    pub setup: Time,
    pub start: Time,
    pub completion: Time,
    /// When the job physically leaves the machine. Later than `completion`
    /// when the job was blocked.
    pub machine_departure: Time,
}

impl StageRecord {
    /// Start of the machine's occupation: setup start, or processing start
    /// when there is no buffer in front.
    pub fn occupied_from(&self) -> Time {
        self.buffer_leave.unwrap_or(self.start)
    }

    pub fn blocking(&self) -> Time {
        self.machine_departure - self.completion
    }

    pub fn buffer_residence(&self) -> Time {
        match (self.buffer_entry, self.buffer_leave) {
            (Some(e), Some(l)) => l - e,
            _ => 0,
        }
    }

    fn placeholder(job: JobId, stage: usize) -> Self {
        StageRecord {
            job,
            stage,
            machine: 0,
            buffer_entry: None,
            buffer_leave: None,
            setup: 0,
            start: 0,
            completion: 0,
            machine_departure: 0,
        }
    }
}

/// A decoded schedule: one record per (job, stage), stored job-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub sequence: Vec<JobId>,
    pub stage_count: usize,
    pub records: Vec<StageRecord>,
}

impl Schedule {
    pub fn record(&self, job: JobId, stage: usize) -> &StageRecord {
        &self.records[job.index() * self.stage_count + stage]
    }

    pub fn job_records(&self, job: JobId) -> &[StageRecord] {
        let at = job.index() * self.stage_count;
        &self.records[at..at + self.stage_count]
    }

    pub fn makespan(&self) -> Time {
        self.records
            .iter()
            .filter(|r| r.stage + 1 == self.stage_count)
            .map(|r| r.completion)
            .max()
            .unwrap_or(0)
    }
}

/// The four evaluation indices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Metrics {
    /// Makespan.
    pub cmax: Time,
    /// Total inter-stage waiting: start minus previous-stage completion.
    pub twip: Time,
    /// Total setup time.
    pub ts: Time,
    /// Total blocking: buffer entry minus previous-stage completion.
    pub tpb: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("sequence has {found} jobs, instance has {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("sequence contains unknown job {0}")]
    UnknownJob(JobId),
    #[error("sequence contains {0} more than once")]
    Duplicate(JobId),
}

pub fn check_permutation(inst: &Instance, sequence: &[JobId]) -> Result<(), DecodeError> {
    let n = inst.job_count();
    if sequence.len() != n {
        return Err(DecodeError::WrongLength {
            expected: n,
            found: sequence.len(),
        });
    }
    let mut seen = vec![false; n];
    for &id in sequence {
        if id.0 == 0 || id.index() >= n {
            return Err(DecodeError::UnknownJob(id));
        }
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(DecodeError::Duplicate(id));
        }
    }
    Ok(())
}

/// Decodes a launch sequence into a feasible schedule. Deterministic.
pub fn decode(inst: &Instance, sequence: &[JobId]) -> Result<Schedule, DecodeError> {
    check_permutation(inst, sequence)?;
    let mut sim = Simulation::new(inst, sequence);
    sim.run();
    Ok(Schedule {
        sequence: sequence.to_vec(),
        stage_count: inst.stage_count(),
        records: sim.records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MachineState {
    Idle,
    Busy,
    Blocked,
}

#[derive(Debug, Clone, Copy)]
struct Machine {
    state: MachineState,
    last_job: Option<usize>,
}

struct Simulation<'a> {
    inst: &'a Instance,
    stages: usize,
    machines: Vec<Vec<Machine>>,
    /// Input buffer of each stage; empty and unused for stage 0.
    buffers: Vec<VecDeque<usize>>,
    /// Jobs done at `s - 1` that still hold their machine, awaiting stage `s`.
    upstream: Vec<VecDeque<usize>>,
    events: BinaryHeap<Reverse<(Time, usize, usize)>>,
    records: Vec<StageRecord>,
    launch: &'a [JobId],
    next_launch: usize,
}

impl<'a> Simulation<'a> {
    fn new(inst: &'a Instance, launch: &'a [JobId]) -> Self {
        let stages = inst.stage_count();
        let records = (0..inst.job_count())
            .flat_map(|j| (0..stages).map(move |s| StageRecord::placeholder(JobId::from_index(j), s)))
            .collect();
        Simulation {
            inst,
            stages,
            machines: (0..stages)
                .map(|s| {
                    vec![
                        Machine {
                            state: MachineState::Idle,
                            last_job: None,
                        };
                        inst.machines(s)
                    ]
                })
                .collect(),
            buffers: vec![VecDeque::new(); stages],
            upstream: vec![VecDeque::new(); stages],
            events: BinaryHeap::new(),
            records,
            launch,
            next_launch: 0,
        }
    }

    #[inline]
    fn rec(&mut self, job: usize, stage: usize) -> &mut StageRecord {
        &mut self.records[job * self.stages + stage]
    }

    fn run(&mut self) {
        let mut now = 0;
        loop {
            self.settle(now);
            match self.events.peek() {
                Some(Reverse((t, _, _))) => now = *t,
                None => break,
            }
        }
        debug_assert_eq!(self.next_launch, self.launch.len());
    }

    fn settle(&mut self, now: Time) {
        loop {
            let mut changed = false;
            while let Some(&Reverse((t, stage, job))) = self.events.peek() {
                if t != now {
                    break;
                }
                self.events.pop();
                self.complete(job, stage);
                changed = true;
            }
            for stage in (1..self.stages).rev() {
                changed |= self.dispatch(stage, now);
            }
            changed |= self.launch_first_stage(now);
            if !changed {
                break;
            }
        }
    }

    fn complete(&mut self, job: usize, stage: usize) {
        let machine = self.records[job * self.stages + stage].machine;
        if stage + 1 == self.stages {
            let r = self.rec(job, stage);
            r.machine_departure = r.completion;
            self.machines[stage][machine].state = MachineState::Idle;
        } else {
            self.machines[stage][machine].state = MachineState::Blocked;
            self.upstream[stage + 1].push_back(job);
        }
    }

    fn idle_machine(&self, stage: usize) -> Option<usize> {
        self.machines[stage]
            .iter()
            .position(|m| m.state == MachineState::Idle)
    }

    /// Pops the upstream queue head of `stage`, freeing its machine at the
    /// previous stage and recording its buffer entry.
    fn admit(&mut self, stage: usize, now: Time) -> Option<usize> {
        let job = self.upstream[stage].pop_front()?;
        let prev = self.rec(job, stage - 1);
        prev.machine_departure = now;
        let machine = prev.machine;
        self.machines[stage - 1][machine].state = MachineState::Idle;
        self.rec(job, stage).buffer_entry = Some(now);
        Some(job)
    }

    fn dispatch(&mut self, stage: usize, now: Time) -> bool {
        let capacity = self.inst.buffer_capacity(stage);
        let mut changed = false;
        loop {
            let idle = self.idle_machine(stage);
            if let Some(machine) = idle {
                let job = match self.buffers[stage].pop_front() {
                    Some(job) => Some(job),
                    None => self.admit(stage, now),
                };
                if let Some(job) = job {
                    self.start(job, stage, machine, now);
                    changed = true;
                    continue;
                }
            }
            if self.buffers[stage].len() < capacity {
                if let Some(job) = self.admit(stage, now) {
                    self.buffers[stage].push_back(job);
                    changed = true;
                    continue;
                }
            }
            return changed;
        }
    }

    fn launch_first_stage(&mut self, now: Time) -> bool {
        let mut changed = false;
        while self.next_launch < self.launch.len() {
            let Some(machine) = self.idle_machine(0) else {
                break;
            };
            let job = self.launch[self.next_launch].index();
            self.next_launch += 1;
            self.start(job, 0, machine, now);
            changed = true;
        }
        changed
    }

    fn start(&mut self, job: usize, stage: usize, machine: usize, now: Time) {
        let slot = &mut self.machines[stage][machine];
        let setup = self.inst.setup_between(stage, slot.last_job, job);
        slot.state = MachineState::Busy;
        slot.last_job = Some(job);

        let processing = self.inst.processing_time(job, stage);
        let r = self.rec(job, stage);
        r.machine = machine;
        if stage > 0 {
            r.buffer_leave = Some(now);
        }
        r.setup = setup;
        r.start = now + setup;
        r.completion = r.start + processing;
        let completion = r.completion;
        self.events.push(Reverse((completion, stage, job)));
    }
}

pub fn compute_metrics(sched: &Schedule) -> Metrics {
    let m = sched.stage_count;
    let mut metrics = Metrics {
        cmax: sched.makespan(),
        ..Metrics::default()
    };
    for job in sched.records.chunks(m) {
        for pair in job.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            metrics.twip += cur.start - prev.completion;
            metrics.tpb += cur.buffer_entry.unwrap_or(prev.completion) - prev.completion;
        }
        metrics.ts += job.iter().map(|r| r.setup).sum::<Time>();
    }
    metrics
}

/// A broken constraint found by [`verify_schedule`]. Stages are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleViolation {
    #[error("schedule has {found} records, expected {expected}")]
    RecordCount { expected: usize, found: usize },
    #[error("record slot for {job} stage {stage} holds a different operation")]
    MisplacedRecord { job: JobId, stage: usize },
    #[error("{job} stage {stage}: machine {machine} does not exist")]
    MachineOutOfRange {
        job: JobId,
        stage: usize,
        machine: usize,
    },
    #[error("{job} stage {stage}: completion is not start plus processing time")]
    ProcessingTime { job: JobId, stage: usize },
    #[error("{job} stage {stage}: starts before the previous stage completes")]
    Precedence { job: JobId, stage: usize },
    #[error("{job} stage {stage}: starts before previous completion plus setup")]
    SetupPrecedence { job: JobId, stage: usize },
    #[error("{job} stage {stage}: buffer times missing or present where they should not be")]
    BufferTimesShape { job: JobId, stage: usize },
    #[error("{job} stage {stage}: enters the buffer before finishing the previous stage")]
    EarlyBufferEntry { job: JobId, stage: usize },
    #[error("{job} stage {stage}: leaves the buffer before entering it")]
    BufferLeaveBeforeEntry { job: JobId, stage: usize },
    #[error("{job} stage {stage}: start is not buffer leave plus setup")]
    SetupPlacement { job: JobId, stage: usize },
    #[error("{job} stage {stage}: machine departure inconsistent with the next stage")]
    Departure { job: JobId, stage: usize },
    #[error("{job} stage {stage}: setup {found} but property changes require {expected}")]
    SetupMismatch {
        job: JobId,
        stage: usize,
        expected: Time,
        found: Time,
    },
    #[error("buffer of stage {stage} holds {occupancy} jobs at t={time}, capacity {capacity}")]
    BufferOverflow {
        stage: usize,
        time: Time,
        occupancy: usize,
        capacity: usize,
    },
    #[error("stage {stage} machine {machine}: {first} and {second} overlap")]
    MachineOverlap {
        stage: usize,
        machine: usize,
        first: JobId,
        second: JobId,
    },
}

/// Checks every timing, buffer, setup and machine constraint. An empty
/// result means the schedule is feasible.
pub fn verify_schedule(inst: &Instance, sched: &Schedule) -> Vec<ScheduleViolation> {
    use ScheduleViolation as V;
    let m = inst.stage_count();
    let n = inst.job_count();
    let mut out = Vec::new();
    if sched.stage_count != m || sched.records.len() != n * m {
        out.push(V::RecordCount {
            expected: n * m,
            found: sched.records.len(),
        });
        return out;
    }
    for (i, r) in sched.records.iter().enumerate() {
        let (job, stage) = (JobId::from_index(i / m), i % m);
        if r.job != job || r.stage != stage {
            out.push(V::MisplacedRecord { job, stage });
        }
    }
    if !out.is_empty() {
        return out;
    }

    let mut bad_machine = false;
    for r in &sched.records {
        let (job, stage) = (r.job, r.stage);
        if r.machine >= inst.machines(stage) {
            out.push(V::MachineOutOfRange {
                job,
                stage,
                machine: r.machine,
            });
            bad_machine = true;
        }
        if r.completion != r.start + inst.processing_time(job.index(), stage) {
            out.push(V::ProcessingTime { job, stage });
        }
        if r.machine_departure < r.completion {
            out.push(V::Departure { job, stage });
        }
        if stage + 1 == m {
            if r.machine_departure != r.completion {
                out.push(V::Departure { job, stage });
            }
        } else {
            let next = sched.record(job, stage + 1);
            if next.buffer_entry != Some(r.machine_departure) {
                out.push(V::Departure { job, stage });
            }
        }
        if stage == 0 {
            if r.buffer_entry.is_some() || r.buffer_leave.is_some() {
                out.push(V::BufferTimesShape { job, stage });
            }
            continue;
        }
        let prev = sched.record(job, stage - 1);
        if r.start < prev.completion {
            out.push(V::Precedence { job, stage });
        }
        if r.start < prev.completion + r.setup {
            out.push(V::SetupPrecedence { job, stage });
        }
        let (Some(entry), Some(leave)) = (r.buffer_entry, r.buffer_leave) else {
            out.push(V::BufferTimesShape { job, stage });
            continue;
        };
        if entry < prev.completion {
            out.push(V::EarlyBufferEntry { job, stage });
        }
        if leave < entry {
            out.push(V::BufferLeaveBeforeEntry { job, stage });
        }
        if leave + r.setup != r.start {
            out.push(V::SetupPlacement { job, stage });
        }
    }

    // Buffer occupancy peaks at entry instants; a job is resident on
    // [entry, leave).
    for stage in 1..m {
        let capacity = inst.buffer_capacity(stage);
        let stays: Vec<(Time, Time)> = sched
            .records
            .iter()
            .filter(|r| r.stage == stage)
            .filter_map(|r| Some((r.buffer_entry?, r.buffer_leave?)))
            .collect();
        let mut instants: Vec<Time> = stays.iter().map(|s| s.0).collect();
        instants.sort_unstable();
        instants.dedup();
        for t in instants {
            let occupancy = stays.iter().filter(|&&(e, l)| e <= t && t < l).count();
            if occupancy > capacity {
                out.push(V::BufferOverflow {
                    stage,
                    time: t,
                    occupancy,
                    capacity,
                });
            }
        }
    }

    if bad_machine {
        return out;
    }
    for stage in 0..m {
        for machine in 0..inst.machines(stage) {
            let mut ops: Vec<&StageRecord> = sched
                .records
                .iter()
                .filter(|r| r.stage == stage && r.machine == machine)
                .collect();
            ops.sort_by_key(|r| (r.occupied_from(), r.machine_departure, r.job));
            let mut prev: Option<&StageRecord> = None;
            for r in ops {
                if let Some(p) = prev {
                    if p.machine_departure > r.occupied_from() {
                        out.push(V::MachineOverlap {
                            stage,
                            machine,
                            first: p.job,
                            second: r.job,
                        });
                    }
                }
                let expected = inst.setup_between(stage, prev.map(|p| p.job.index()), r.job.index());
                if expected != r.setup {
                    out.push(V::SetupMismatch {
                        job: r.job,
                        stage,
                        expected,
                        found: r.setup,
                    });
                }
                prev = Some(r);
            }
        }
    }
    out
}
