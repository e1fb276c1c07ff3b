//! Brute-force reference for tiny instances.
//!
//! [`oracle_simulate`] re-derives the metrics of a launch sequence with a
//! unit time-step simulation that tracks the state of every job rather than
//! machine events. It follows the dispatch contract documented in
//! [`crate::decoder`] but shares no code with it; setup times are recomputed
//! from the raw property labels. [`exhaustive_best`] enumerates every
//! permutation.

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::decoder::{check_permutation, DecodeError, Metrics};
use crate::model::{Instance, JobId, Time};

pub const DEFAULT_ORACLE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance has {jobs} jobs, the oracle handles at most {limit}")]
    TooLarge { jobs: usize, limit: usize },
    #[error(transparent)]
    Sequence(#[from] DecodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Pending,
    Processing {
        stage: usize,
        machine: usize,
        until: Time,
    },
    /// Finished `stage` and still occupies its machine.
    Holding {
        stage: usize,
        machine: usize,
        since: Time,
        round: usize,
    },
    /// Waiting in the input buffer of `stage`.
    Buffered {
        stage: usize,
        key: (Time, Time, usize, usize),
    },
    Done,
}

struct Replay<'a> {
    inst: &'a Instance,
    m: usize,
    state: Vec<State>,
    /// Last job served by each machine.
    last: Vec<Vec<Option<usize>>>,
    // Per job and stage.
    start: Vec<Vec<Time>>,
    completion: Vec<Vec<Time>>,
    setup: Vec<Vec<Time>>,
    entry: Vec<Vec<Time>>,
}

impl<'a> Replay<'a> {
    fn new(inst: &'a Instance) -> Self {
        let (n, m) = (inst.job_count(), inst.stage_count());
        let grid = || vec![vec![0; m]; n];
        Replay {
            inst,
            m,
            state: vec![State::Pending; n],
            last: (0..m).map(|s| vec![None; inst.spec().machines_per_stage[s]]).collect(),
            start: grid(),
            completion: grid(),
            setup: grid(),
            entry: grid(),
        }
    }

    fn changeover(&self, stage: usize, prev: Option<usize>, next: usize) -> Time {
        let (Some(prev), true) = (prev, stage > 0) else {
            return 0;
        };
        let jobs = &self.inst.spec().jobs;
        let row = &self.inst.spec().setup_params[stage - 1];
        jobs[prev]
            .properties
            .iter()
            .zip(&jobs[next].properties)
            .zip(row)
            .filter(|((a, b), _)| a != b)
            .map(|(_, &t)| t)
            .sum()
    }

    fn machine_free(&self, stage: usize, machine: usize) -> bool {
        !self.state.iter().any(|s| match *s {
            State::Processing { stage: st, machine: mc, .. } | State::Holding { stage: st, machine: mc, .. } => {
                st == stage && mc == machine
            }
            _ => false,
        })
    }

    fn free_machine(&self, stage: usize) -> Option<usize> {
        (0..self.inst.spec().machines_per_stage[stage]).find(|&k| self.machine_free(stage, k))
    }

    fn begin(&mut self, job: usize, stage: usize, machine: usize, t: Time) {
        let setup = self.changeover(stage, self.last[stage][machine], job);
        self.last[stage][machine] = Some(job);
        self.setup[job][stage] = setup;
        self.start[job][stage] = t + setup;
        let until = t + setup + self.inst.spec().jobs[job].processing_times[stage];
        self.completion[job][stage] = until;
        self.state[job] = State::Processing { stage, machine, until };
    }

    /// Earliest-key job waiting to leave stage `stage - 1`.
    fn holding_head(&self, stage: usize) -> Option<usize> {
        (0..self.state.len())
            .filter_map(|j| match self.state[j] {
                State::Holding { stage: st, since, round, .. } if st + 1 == stage => Some(((since, round, j), j)),
                _ => None,
            })
            .min()
            .map(|(_, j)| j)
    }

    fn buffered(&self, stage: usize) -> Vec<((Time, Time, usize, usize), usize)> {
        let mut v: Vec<_> = (0..self.state.len())
            .filter_map(|j| match self.state[j] {
                State::Buffered { stage: st, key } if st == stage => Some((key, j)),
                _ => None,
            })
            .collect();
        v.sort_unstable();
        v
    }

    fn step_stage(&mut self, stage: usize, t: Time) -> bool {
        let capacity = self.inst.spec().buffer_capacities[stage - 1];
        let mut moved = false;
        loop {
            let waiting = self.buffered(stage);
            let head = self.holding_head(stage);
            if let Some(machine) = self.free_machine(stage) {
                if let Some(&(_, job)) = waiting.first() {
                    self.begin(job, stage, machine, t);
                    moved = true;
                    continue;
                }
                if let Some(job) = head {
                    self.entry[job][stage] = t;
                    self.begin(job, stage, machine, t);
                    moved = true;
                    continue;
                }
            }
            if let (true, Some(job)) = (waiting.len() < capacity, head) {
                let State::Holding { since, round, .. } = self.state[job] else {
                    unreachable!()
                };
                self.entry[job][stage] = t;
                self.state[job] = State::Buffered {
                    stage,
                    key: (t, since, round, job),
                };
                moved = true;
                continue;
            }
            return moved;
        }
    }

    fn run(&mut self, sequence: &[JobId]) {
        let mut queue = sequence.iter().map(|j| j.index()).peekable();
        let mut t = 0;
        while self.state.iter().any(|s| *s != State::Done) {
            let mut round = 0;
            loop {
                let mut moved = false;
                for stage in 0..self.m {
                    for job in 0..self.state.len() {
                        if let State::Processing { stage: st, machine, until } = self.state[job] {
                            if st == stage && until == t {
                                self.state[job] = if stage + 1 == self.m {
                                    State::Done
                                } else {
                                    State::Holding { stage, machine, since: t, round }
                                };
                                moved = true;
                            }
                        }
                    }
                }
                for stage in (1..self.m).rev() {
                    moved |= self.step_stage(stage, t);
                }
                while let (Some(&job), Some(machine)) = (queue.peek(), self.free_machine(0)) {
                    queue.next();
                    self.begin(job, 0, machine, t);
                    moved = true;
                }
                if !moved {
                    break;
                }
                round += 1;
            }
            t += 1;
        }
    }

    fn metrics(&self) -> Metrics {
        let last = self.m - 1;
        let mut out = Metrics {
            cmax: self.completion.iter().map(|c| c[last]).max().unwrap_or(0),
            ..Metrics::default()
        };
        for j in 0..self.state.len() {
            out.ts += self.setup[j].iter().sum::<Time>();
            for s in 1..self.m {
                out.twip += self.start[j][s] - self.completion[j][s - 1];
                out.tpb += self.entry[j][s] - self.completion[j][s - 1];
            }
        }
        out
    }
}

fn check_size(inst: &Instance, limit: usize) -> Result<(), OracleError> {
    let jobs = inst.job_count();
    if jobs > limit {
        return Err(OracleError::TooLarge { jobs, limit });
    }
    Ok(())
}

/// Metrics of `sequence` under the reference simulation, for instances of at
/// most [`DEFAULT_ORACLE_LIMIT`] jobs.
pub fn oracle_simulate(inst: &Instance, sequence: &[JobId]) -> Result<Metrics, OracleError> {
    oracle_simulate_with_limit(inst, sequence, DEFAULT_ORACLE_LIMIT)
}

pub fn oracle_simulate_with_limit(
    inst: &Instance,
    sequence: &[JobId],
    limit: usize,
) -> Result<Metrics, OracleError> {
    check_size(inst, limit)?;
    check_permutation(inst, sequence)?;
    let mut replay = Replay::new(inst);
    replay.run(sequence);
    Ok(replay.metrics())
}

/// The lexicographically smallest sequence of minimal makespan, found by
/// enumerating all permutations.
pub fn exhaustive_best(inst: &Instance) -> Result<(Vec<JobId>, Metrics), OracleError> {
    exhaustive_best_with_limit(inst, DEFAULT_ORACLE_LIMIT)
}

pub fn exhaustive_best_with_limit(
    inst: &Instance,
    limit: usize,
) -> Result<(Vec<JobId>, Metrics), OracleError> {
    check_size(inst, limit)?;
    let n = inst.job_count();
    let best = (0..n)
        .into_par_iter()
        .map(|first| {
            let rest: Vec<usize> = (0..n).filter(|&j| j != first).collect();
            let mut best: Option<(Time, Vec<JobId>, Metrics)> = None;
            // Permutations of a sorted list come out in lexicographic order,
            // so the first optimum seen is the smallest.
            for tail in rest.iter().copied().permutations(rest.len()) {
                let seq: Vec<JobId> = std::iter::once(first)
                    .chain(tail)
                    .map(JobId::from_index)
                    .collect();
                let metrics = oracle_simulate_with_limit(inst, &seq, limit)?;
                if best.as_ref().is_none_or(|b| metrics.cmax < b.0) {
                    best = Some((metrics.cmax, seq, metrics));
                }
            }
            Ok(best.expect("at least one permutation"))
        })
        .collect::<Result<Vec<_>, OracleError>>()?
        .into_iter()
        .min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)))
        .expect("instances have at least one job");
    Ok((best.1, best.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InstanceSpec, JobSpec};

    fn flat(times: &[&[Time]], machines: Vec<usize>, buffers: Vec<usize>) -> Instance {
        let m = times[0].len();
        Instance::new(InstanceSpec {
            name: "t".into(),
            stage_count: m,
            machines_per_stage: machines,
            buffer_capacities: buffers,
            property_count: 0,
            property_names: vec![],
            setup_params: vec![vec![]; m - 1],
            jobs: times
                .iter()
                .enumerate()
                .map(|(i, t)| JobSpec {
                    id: JobId(i as u32 + 1),
                    processing_times: t.to_vec(),
                    properties: vec![],
                })
                .collect(),
        })
        .unwrap()
    }

    fn ids(v: &[u32]) -> Vec<JobId> {
        v.iter().map(|&i| JobId(i)).collect()
    }

    #[test]
    fn buffered_hand_example() {
        let inst = flat(&[&[2, 3], &[2, 3]], vec![1, 1], vec![1]);
        let m = oracle_simulate(&inst, &ids(&[1, 2])).unwrap();
        assert_eq!(m, Metrics { cmax: 8, twip: 1, ts: 0, tpb: 0 });
    }

    #[test]
    fn blocking_hand_example() {
        let inst = flat(&[&[1, 5], &[1, 5]], vec![1, 1], vec![0]);
        let m = oracle_simulate(&inst, &ids(&[1, 2])).unwrap();
        assert_eq!(m, Metrics { cmax: 11, twip: 4, ts: 0, tpb: 4 });
    }

    #[test]
    fn one_job() {
        let inst = flat(&[&[3, 0, 4]], vec![1, 2, 1], vec![0, 1]);
        assert_eq!(oracle_simulate(&inst, &ids(&[1])).unwrap().cmax, 7);
        assert_eq!(exhaustive_best(&inst).unwrap().0, ids(&[1]));
    }

    #[test]
    fn identical_jobs_pick_identity() {
        let inst = flat(&[&[2, 2], &[2, 2]], vec![1, 1], vec![1]);
        assert_eq!(exhaustive_best(&inst).unwrap().0, ids(&[1, 2]));
    }

    #[test]
    fn exhaustive_finds_the_better_order() {
        // Short first stage for J2 lets both stages overlap.
        let inst = flat(&[&[5, 1], &[1, 5]], vec![1, 1], vec![1]);
        let (seq, m) = exhaustive_best(&inst).unwrap();
        assert_eq!(seq, ids(&[2, 1]));
        assert_eq!(m.cmax, 7);
        assert_eq!(oracle_simulate(&inst, &ids(&[1, 2])).unwrap().cmax, 11);
    }

    #[test]
    fn limits() {
        let rows: Vec<&[Time]> = vec![&[1, 1]; 9];
        let inst = flat(&rows, vec![1, 1], vec![1]);
        let seq: Vec<JobId> = (1..=9).map(JobId).collect();
        assert_eq!(
            oracle_simulate(&inst, &seq),
            Err(OracleError::TooLarge { jobs: 9, limit: 8 })
        );
        assert!(exhaustive_best(&inst).is_err());
        assert!(oracle_simulate_with_limit(&inst, &seq, 9).is_ok());
        let small = flat(&[&[1, 1], &[1, 1]], vec![1, 1], vec![1]);
        assert!(matches!(
            oracle_simulate(&small, &ids(&[1, 1])),
            Err(OracleError::Sequence(DecodeError::Duplicate(_)))
        ));
    }
}
