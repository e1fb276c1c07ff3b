#![allow(dead_code)]

use flowshop::instance_io::{random_instance, PropertySpec, RandomInstanceConfig};
use flowshop::{Instance, JobId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn small_instance(jobs: usize, machines: Vec<usize>, buffers: Vec<usize>, seed: u64) -> Instance {
    let config = RandomInstanceConfig {
        jobs,
        machines_per_stage: machines,
        buffer_capacities: buffers,
        time_range: (0, 9),
        properties: vec![
            PropertySpec { labels: 2, setup_range: (0, 3) },
            PropertySpec { labels: 3, setup_range: (1, 2) },
        ],
    };
    random_instance(&config, seed).unwrap()
}

pub fn shuffled(inst: &Instance, rng: &mut ChaCha8Rng) -> Vec<JobId> {
    let mut seq: Vec<JobId> = inst.job_ids().collect();
    seq.shuffle(rng);
    seq
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
