//! Standard whale optimization algorithm over random-key positions.
//!
//! Fitness is the makespan of the decoded schedule, so lower is better and
//! the "best" whale is the one with minimal fitness. `A` and `C` are drawn
//! per dimension; each dimension picks the search or encircle anchor from its
//! own `|A|`.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{compute_metrics, decode};
use crate::encoding::{keys_to_sequence, random_position, Bounds, Position};
use crate::model::Instance;
use crate::report::{Algorithm, AlgorithmParams, RunReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("population must be at least 2, got {0}")]
    Population(usize),
    #[error("max_generations must be at least 1")]
    Generations,
    #[error("generation {t} beyond max_generations {t_max}")]
    GenerationOutOfRange { t: usize, t_max: usize },
    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("position dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

pub(crate) fn check_range(
    name: &'static str,
    range: &'static str,
    value: f64,
    ok: bool,
) -> Result<(), ParamError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange { name, range, value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoaParams {
    pub population: usize,
    pub max_generations: usize,
    /// Probability of taking the shrinking-encircle/search branch rather than
    /// the spiral.
    pub spiral_choice_prob: f64,
    /// Logarithmic spiral shape constant `b`.
    pub spiral_shape: f64,
    pub bounds: Bounds,
}

impl Default for WoaParams {
    fn default() -> Self {
        WoaParams {
            population: 30,
            max_generations: 300,
            spiral_choice_prob: 0.5,
            spiral_shape: 1.0,
            bounds: Bounds::default(),
        }
    }
}

impl WoaParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.population < 2 {
            return Err(ParamError::Population(self.population));
        }
        if self.max_generations == 0 {
            return Err(ParamError::Generations);
        }
        let p = self.spiral_choice_prob;
        check_range("spiral_choice_prob", "[0, 1]", p, (0.0..=1.0).contains(&p))?;
        check_range("spiral_shape", "finite reals", self.spiral_shape, true)?;
        let b = self.bounds;
        check_range("bounds.min", "(-inf, bounds.max]", b.min, b.min <= b.max)?;
        check_range("bounds.max", "finite reals", b.max, true)
    }
}

/// Anything that scores a key vector; lower is better.
pub trait Objective: Sync {
    fn evaluate(&self, keys: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, keys: &[f64]) -> f64 {
        self(keys)
    }
}

/// Makespan of the schedule a key vector decodes to.
#[derive(Debug, Clone, Copy)]
pub struct MakespanObjective<'a> {
    pub instance: &'a Instance,
}

impl Objective for MakespanObjective<'_> {
    fn evaluate(&self, keys: &[f64]) -> f64 {
        let seq = keys_to_sequence(keys);
        decode(self.instance, &seq)
            .expect("random keys always decode to a permutation")
            .makespan() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub position: Position,
    pub fitness: f64,
}

impl Individual {
    pub fn evaluated<O: Objective + ?Sized>(position: Position, objective: &O) -> Self {
        let fitness = objective.evaluate(&position.keys);
        Individual { position, fitness }
    }
}

/// Linear schedule from 2 at `t = 0` down to 0 at `t = t_max`.
pub fn coefficient_a(t: usize, t_max: usize) -> Result<f64, ParamError> {
    if t_max == 0 {
        return Err(ParamError::Generations);
    }
    if t > t_max {
        return Err(ParamError::GenerationOutOfRange { t, t_max });
    }
    Ok(2.0 - 2.0 * t as f64 / t_max as f64)
}

/// Per-dimension `A` and `C` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl Coefficients {
    pub fn uniform(dim: usize, a: f64, c: f64) -> Self {
        Coefficients {
            a: vec![a; dim],
            c: vec![c; dim],
        }
    }
}

/// `A = 2a·r1 − a`, `C = 2·r2`, with fresh `r1, r2 ∈ (0, 1)` per dimension.
pub fn sample_coefficients<R: Rng + ?Sized>(a: f64, dim: usize, rng: &mut R) -> Coefficients {
    let mut out = Coefficients {
        a: Vec::with_capacity(dim),
        c: Vec::with_capacity(dim),
    };
    for _ in 0..dim {
        let r1: f64 = rng.sample(Open01);
        let r2: f64 = rng.sample(Open01);
        out.a.push(2.0 * a * r1 - a);
        out.c.push(2.0 * r2);
    }
    out
}

/// `anchor − step·A·|C·anchor − x|` for one dimension.
#[inline]
pub(crate) fn shrink(anchor: f64, x: f64, a: f64, c: f64, step: f64) -> f64 {
    let d = (c * anchor - x).abs();
    anchor - step * a * d
}

fn check_dims(x: &Position, other: &Position, coef: Option<&Coefficients>) -> Result<(), ParamError> {
    let n = x.dim();
    for len in [other.dim()]
        .into_iter()
        .chain(coef.into_iter().flat_map(|c| [c.a.len(), c.c.len()]))
    {
        if len != n {
            return Err(ParamError::DimensionMismatch(n, len));
        }
    }
    Ok(())
}

pub(crate) fn shrink_towards(
    x: &Position,
    anchor: &Position,
    coef: &Coefficients,
    step: f64,
) -> Result<Position, ParamError> {
    check_dims(x, anchor, Some(coef))?;
    let keys = (0..x.dim())
        .map(|j| shrink(anchor.keys[j], x.keys[j], coef.a[j], coef.c[j], step))
        .collect();
    Ok(Position::new(keys, x.bounds).clamp())
}

/// Encircling move towards the best whale.
pub fn encircle_update(
    x: &Position,
    best: &Position,
    coef: &Coefficients,
) -> Result<Position, ParamError> {
    shrink_towards(x, best, coef, 1.0)
}

/// Exploratory move relative to a randomly chosen whale.
pub fn search_update(
    x: &Position,
    rand_mate: &Position,
    coef: &Coefficients,
) -> Result<Position, ParamError> {
    shrink_towards(x, rand_mate, coef, 1.0)
}

/// Logarithmic spiral around the best whale:
/// `best + |best − x|·e^{b·l}·cos(2πl)`.
pub fn spiral_update(
    x: &Position,
    best: &Position,
    l: f64,
    shape: f64,
) -> Result<Position, ParamError> {
    check_dims(x, best, None)?;
    let factor = (shape * l).exp() * (2.0 * PI * l).cos();
    let keys = x
        .keys
        .iter()
        .zip(&best.keys)
        .map(|(&xi, &bi)| bi + (bi - xi).abs() * factor)
        .collect();
    Ok(Position::new(keys, x.bounds).clamp())
}

/// How a candidate position is formed from the current one.
pub(crate) struct MoveParams {
    pub spiral_choice_prob: f64,
    pub spiral_shape: f64,
    /// Extra multiplier on `A·D` (Levy step); 1 for the standard algorithm.
    pub step: f64,
    /// Take the absolute value of the whole shrinking update before
    /// clamping.
    pub outer_abs: bool,
}

/// Candidate for one whale given its branch draw `p`. Draws either `l` or
/// the coefficients and a random mate.
pub(crate) fn propose<R: Rng + ?Sized>(
    x: &Position,
    best: &Position,
    population: &[Individual],
    a: f64,
    p: f64,
    mv: &MoveParams,
    rng: &mut R,
) -> Position {
    if p >= mv.spiral_choice_prob {
        let l: f64 = rng.sample(Open01);
        return spiral_update(x, best, l, mv.spiral_shape).expect("population shares one dimension");
    }
    let coef = sample_coefficients(a, x.dim(), rng);
    let mate = &population[rng.random_range(0..population.len())].position;
    let keys = (0..x.dim())
        .map(|j| {
            let anchor = if coef.a[j].abs() >= 1.0 {
                mate.keys[j]
            } else {
                best.keys[j]
            };
            let v = shrink(anchor, x.keys[j], coef.a[j], coef.c[j], mv.step);
            if mv.outer_abs {
                v.abs()
            } else {
                v
            }
        })
        .collect();
    Position::new(keys, x.bounds).clamp()
}

/// One generation of the standard algorithm: every whale is replaced by its
/// re-evaluated candidate.
pub fn woa_step<R: Rng + ?Sized, O: Objective + ?Sized>(
    population: &[Individual],
    best: &Position,
    t: usize,
    params: &WoaParams,
    rng: &mut R,
    objective: &O,
) -> Result<Vec<Individual>, ParamError> {
    let a = coefficient_a(t, params.max_generations)?;
    let mv = MoveParams {
        spiral_choice_prob: params.spiral_choice_prob,
        spiral_shape: params.spiral_shape,
        step: 1.0,
        outer_abs: false,
    };
    let candidates: Vec<Position> = population
        .iter()
        .map(|w| {
            let p: f64 = rng.random();
            propose(&w.position, best, population, a, p, &mv, rng)
        })
        .collect();
    Ok(evaluate_all(candidates, objective))
}

pub(crate) fn evaluate_all<O: Objective + ?Sized>(
    positions: Vec<Position>,
    objective: &O,
) -> Vec<Individual> {
    positions
        .into_iter()
        .map(|p| Individual::evaluated(p, objective))
        .collect()
}

pub(crate) fn initial_population<R: Rng + ?Sized, O: Objective + ?Sized>(
    size: usize,
    dim: usize,
    bounds: Bounds,
    rng: &mut R,
    objective: &O,
) -> Vec<Individual> {
    let positions = (0..size).map(|_| random_position(dim, bounds, rng)).collect();
    evaluate_all(positions, objective)
}

/// Index of the minimal-fitness individual, first on ties.
pub(crate) fn best_index(population: &[Individual]) -> usize {
    population
        .iter()
        .enumerate()
        .fold(0, |best, (i, w)| {
            if w.fitness < population[best].fitness {
                i
            } else {
                best
            }
        })
}

/// Replaces `archive` when the population holds something strictly better.
pub(crate) fn update_archive(archive: &mut Individual, population: &[Individual]) {
    let i = best_index(population);
    if population[i].fitness < archive.fitness {
        *archive = population[i].clone();
    }
}

/// Result of one optimizer run over an abstract objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub best: Individual,
    /// Best-so-far fitness after each generation.
    pub curve: Vec<f64>,
    pub evaluations: usize,
    /// Generations in which opposition-based learning fired.
    pub obl_triggers: usize,
}

pub fn optimize_woa<O: Objective + ?Sized>(
    objective: &O,
    dim: usize,
    params: &WoaParams,
    seed: u64,
) -> Result<Trace, ParamError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut population = initial_population(params.population, dim, params.bounds, &mut rng, objective);
    let mut archive = population[best_index(&population)].clone();
    let mut curve = Vec::with_capacity(params.max_generations);
    let mut evaluations = population.len();

    for t in 0..params.max_generations {
        population = woa_step(&population, &archive.position, t, params, &mut rng, objective)?;
        evaluations += population.len();
        update_archive(&mut archive, &population);
        curve.push(archive.fitness);
    }
    Ok(Trace {
        best: archive,
        curve,
        evaluations,
        obl_triggers: 0,
    })
}

/// Runs the standard algorithm on a scheduling instance.
pub fn run_woa(inst: &Instance, params: &WoaParams, seed: u64) -> Result<RunReport, ParamError> {
    let trace = optimize_woa(&MakespanObjective { instance: inst }, inst.job_count(), params, seed)?;
    Ok(report_from_trace(
        inst,
        Algorithm::Woa,
        AlgorithmParams::Woa(params.clone()),
        seed,
        trace,
    ))
}

pub(crate) fn report_from_trace(
    inst: &Instance,
    algorithm: Algorithm,
    params: AlgorithmParams,
    seed: u64,
    trace: Trace,
) -> RunReport {
    let sequence = keys_to_sequence(&trace.best.position.keys);
    let schedule = decode(inst, &sequence).expect("random keys always decode to a permutation");
    let metrics = compute_metrics(&schedule);
    debug_assert_eq!(metrics.cmax as f64, trace.best.fitness);
    RunReport {
        algorithm,
        instance: inst.name().to_string(),
        seed,
        params,
        curve: trace.curve,
        evaluations: trace.evaluations,
        obl_triggers: trace.obl_triggers,
        best_sequence: sequence,
        metrics,
        schedule,
        wall_clock_ms: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_io::bundled_bus_instance;

    fn pos(k: &[f64]) -> Position {
        Position::new(k.to_vec(), Bounds::default())
    }

    #[test]
    fn a_schedule() {
        assert_eq!(coefficient_a(0, 300), Ok(2.0));
        assert_eq!(coefficient_a(300, 300), Ok(0.0));
        assert_eq!(coefficient_a(150, 300), Ok(1.0));
        assert_eq!(coefficient_a(1, 0), Err(ParamError::Generations));
        assert!(coefficient_a(301, 300).is_err());
    }

    #[test]
    fn coefficient_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(sample_coefficients(0.0, 50, &mut rng).a.iter().all(|&a| a == 0.0));
        let c = sample_coefficients(2.0, 100_000, &mut rng);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&c.a).abs() < 0.02);
        assert!((mean(&c.c) - 1.0).abs() < 0.02);
        assert!(c.a.iter().all(|a| (-2.0..=2.0).contains(a)));
        assert!(c.c.iter().all(|c| (0.0..=2.0).contains(c)));
        // Uniform on [-2, 2]: a quarter of the mass in each unit interval.
        let q = c.a.iter().filter(|&&a| a < -1.0).count() as f64 / 100_000.0;
        assert!((q - 0.25).abs() < 0.01, "{q}");
    }

    #[test]
    fn encircle_examples() {
        let best = pos(&[0.6, 0.3]);
        let x = pos(&[0.1, 0.9]);
        assert_eq!(encircle_update(&x, &best, &Coefficients::uniform(2, 0.0, 1.0)).unwrap(), best);
        assert_eq!(encircle_update(&best, &best, &Coefficients::uniform(2, 0.7, 1.0)).unwrap(), best);
        let r = encircle_update(&pos(&[0.2]), &pos(&[0.6]), &Coefficients::uniform(1, 0.5, 1.0)).unwrap();
        assert!((r.keys[0] - 0.4).abs() < 1e-12);
        assert!(matches!(
            encircle_update(&x, &pos(&[0.1]), &Coefficients::uniform(2, 0.0, 1.0)),
            Err(ParamError::DimensionMismatch(2, 1))
        ));
    }

    #[test]
    fn search_examples() {
        let mate = pos(&[0.5]);
        assert_eq!(search_update(&pos(&[0.9]), &mate, &Coefficients::uniform(1, 0.0, 1.3)).unwrap(), mate);
        assert_eq!(search_update(&mate, &mate, &Coefficients::uniform(1, 1.5, 1.0)).unwrap(), mate);
        // D = |2·0.5 − 0.1| = 0.9, 0.5 − 0.9 = −0.4, clamped.
        let r = search_update(&pos(&[0.1]), &mate, &Coefficients::uniform(1, 1.0, 2.0)).unwrap();
        assert_eq!(r.keys, vec![0.0]);
    }

    #[test]
    fn spiral_examples() {
        let best = pos(&[0.5, 0.2]);
        assert_eq!(spiral_update(&best, &best, 0.37, 1.0).unwrap(), best);
        let r = spiral_update(&pos(&[0.0, 0.9]), &best, 0.25, 1.0).unwrap();
        for (a, b) in r.keys.iter().zip(&best.keys) {
            assert!((a - b).abs() < 1e-12);
        }
        // Unclamped value 0.5 − 0.5·e^0.5 ≈ −0.3244.
        let wide = Position::new(vec![0.0], Bounds::new(-1.0, 1.0));
        let r = spiral_update(&wide, &Position::new(vec![0.5], wide.bounds), 0.5, 1.0).unwrap();
        assert!((r.keys[0] - (0.5 - 0.5 * 0.5f64.exp())).abs() < 1e-12);
        assert!((r.keys[0] + 0.3244).abs() < 1e-4);
        assert_eq!(spiral_update(&pos(&[0.0]), &pos(&[0.5]), 0.5, 1.0).unwrap().keys, vec![0.0]);
    }

    fn sphere(keys: &[f64]) -> f64 {
        keys.iter().map(|k| (k - 0.3) * (k - 0.3)).sum()
    }

    #[test]
    fn never_spiral_at_zero_a_collapses_onto_best() {
        let params = WoaParams {
            population: 6,
            max_generations: 10,
            spiral_choice_prob: 1.0,
            ..WoaParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = initial_population(6, 4, params.bounds, &mut rng, &sphere);
        let best = pop[best_index(&pop)].position.clone();
        let next = woa_step(&pop, &best, 10, &params, &mut rng, &sphere).unwrap();
        assert!(next.iter().all(|w| w.position == best));
    }

    #[test]
    fn step_is_seeded() {
        let params = WoaParams {
            population: 8,
            max_generations: 5,
            ..WoaParams::default()
        };
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = initial_population(8, 5, params.bounds, &mut rng, &sphere);
            let best = pop[best_index(&pop)].position.clone();
            woa_step(&pop, &best, 2, &params, &mut rng, &sphere).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn params_are_validated() {
        let bad = WoaParams {
            population: 1,
            ..WoaParams::default()
        };
        assert_eq!(bad.validate(), Err(ParamError::Population(1)));
        let bad = WoaParams {
            spiral_choice_prob: 1.5,
            ..WoaParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = WoaParams {
            max_generations: 0,
            ..WoaParams::default()
        };
        assert_eq!(bad.validate(), Err(ParamError::Generations));
    }

    #[test]
    fn woa_curve_is_monotone_and_positions_bounded() {
        let params = WoaParams {
            population: 10,
            max_generations: 40,
            ..WoaParams::default()
        };
        let trace = optimize_woa(&sphere, 6, &params, 11).unwrap();
        assert_eq!(trace.curve.len(), 40);
        assert!(trace.curve.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.best.position.in_bounds());
        assert_eq!(trace.evaluations, 10 * 41);
    }

    #[test]
    fn bus_run_is_reproducible() {
        let bus = bundled_bus_instance();
        let params = WoaParams {
            population: 8,
            max_generations: 15,
            ..WoaParams::default()
        };
        let a = run_woa(&bus, &params, 42).unwrap();
        assert_eq!(a, run_woa(&bus, &params, 42).unwrap());
        assert_eq!(a.metrics.cmax as f64, *a.curve.last().unwrap());
    }
}
