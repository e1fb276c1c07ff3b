//! Improved whale optimization: Levy-flight step scaling, congestion
//! triggered opposition-based learning and simulated-annealing acceptance.
//!
//! One generation:
//!
//! 1. For every whale draw the branch probability `p` and a Levy step `S`.
//! 2. `p >= P_i` takes the spiral move unchanged; otherwise the shrinking
//!    move `anchor − S·A·D`, anchored per dimension on a random mate when
//!    `|A| >= 1` and on the best whale otherwise.
//! 3. Each candidate replaces its incumbent under annealing acceptance at
//!    the current temperature.
//! 4. When the population's congestion degree falls below the threshold,
//!    every whale outside the elite is replaced by its opposite point.
//!
//! The best whale ever evaluated is archived separately, so the reported
//! curve is monotone even though annealing may accept worse incumbents.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoding::Position;
use crate::model::Instance;
use crate::report::{Algorithm, AlgorithmParams, RunReport};
use crate::woa::{
    best_index, check_range, coefficient_a, evaluate_all, initial_population, propose,
    report_from_trace, shrink_towards, update_archive, Coefficients, Individual,
    MakespanObjective, MoveParams, Objective, ParamError, Trace, WoaParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IwoaParams {
    pub woa: WoaParams,
    /// Levy exponent, valid on [0.3, 1.99].
    pub levy_gamma: f64,
    /// Opposition fires when the congestion degree is strictly below this.
    /// Zero disables it.
    pub congestion_threshold: f64,
    /// Share of the population kept untouched by opposition; at least one
    /// whale is always kept.
    pub elite_fraction: f64,
    /// Initial annealing temperature. `None` means a tenth of the initial
    /// best fitness.
    pub sa_initial_temp: Option<f64>,
    /// Geometric cooling factor applied once per generation.
    pub sa_cooling: f64,
    /// Wrap the whole Levy update in an absolute value before clamping.
    #[serde(default)]
    pub literal_abs: bool,
}

impl Default for IwoaParams {
    fn default() -> Self {
        IwoaParams {
            woa: WoaParams::default(),
            levy_gamma: 1.5,
            congestion_threshold: DEFAULT_CONGESTION_THRESHOLD,
            elite_fraction: 0.10,
            sa_initial_temp: None,
            sa_cooling: 0.97,
            literal_abs: false,
        }
    }
}

pub const DEFAULT_CONGESTION_THRESHOLD: f64 = 0.01;

impl IwoaParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.woa.validate()?;
        let g = self.levy_gamma;
        check_range("levy_gamma", "[0.3, 1.99]", g, (0.3..=1.99).contains(&g))?;
        let c = self.congestion_threshold;
        check_range("congestion_threshold", "[0, inf)", c, c >= 0.0)?;
        let e = self.elite_fraction;
        check_range("elite_fraction", "[0, 1]", e, (0.0..=1.0).contains(&e))?;
        if let Some(t0) = self.sa_initial_temp {
            check_range("sa_initial_temp", "(0, inf)", t0, t0 > 0.0)?;
        }
        let a = self.sa_cooling;
        check_range("sa_cooling", "(0, 1)", a, a > 0.0 && a < 1.0)
    }

    pub fn elite_count(&self) -> usize {
        elite_count(self.elite_fraction, self.woa.population)
    }
}

fn elite_count(fraction: f64, population: usize) -> usize {
    ((fraction * population as f64).ceil() as usize).clamp(1, population)
}

/// Mantegna's scale for the numerator of a Levy-stable step:
/// `[Γ(1+γ)·sin(πγ/2) / (Γ((1+γ)/2)·γ·2^{(γ−1)/2})]^{1/γ}`.
pub fn mantegna_sigma_u(gamma: f64) -> f64 {
    let num = libm::tgamma(1.0 + gamma) * (PI * gamma / 2.0).sin();
    let den = libm::tgamma((1.0 + gamma) / 2.0) * gamma * 2f64.powf((gamma - 1.0) / 2.0);
    (num / den).powf(1.0 / gamma)
}

/// `u / |v|^{1/γ}`.
#[inline]
pub fn levy_step_from(u: f64, v: f64, gamma: f64) -> f64 {
    u / v.abs().powf(1.0 / gamma)
}

/// Levy step sampler using Mantegna's algorithm: `u ~ N(0, σ_u²)`,
/// `v ~ N(0, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct LevyFlight {
    gamma: f64,
    numerator: Normal<f64>,
}

impl LevyFlight {
    pub fn new(gamma: f64) -> Result<Self, ParamError> {
        check_range("levy_gamma", "[0.3, 1.99]", gamma, (0.3..=1.99).contains(&gamma))?;
        let numerator = Normal::new(0.0, mantegna_sigma_u(gamma)).expect("sigma_u is finite and positive");
        Ok(LevyFlight { gamma, numerator })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma_u(&self) -> f64 {
        self.numerator.std_dev()
    }

    /// One draw of the numerator `u`.
    pub fn sample_u<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.numerator.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = self.sample_u(rng);
        let v: f64 = StandardNormal.sample(rng);
        levy_step_from(u, v, self.gamma)
    }
}

/// One Levy step for exponent `gamma`.
pub fn levy_step<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> Result<f64, ParamError> {
    Ok(LevyFlight::new(gamma)?.sample(rng))
}

/// Encircling move with the shrink scaled by a Levy step:
/// `best − S·A·|C·best − x|`, clamped.
pub fn levy_encircle_update(
    x: &Position,
    best: &Position,
    coef: &Coefficients,
    step: f64,
) -> Result<Position, ParamError> {
    shrink_towards(x, best, coef, step)
}

/// Search move with the shrink scaled by a Levy step:
/// `mate − S·A·|C·mate − x|`, clamped.
pub fn levy_search_update(
    x: &Position,
    rand_mate: &Position,
    coef: &Coefficients,
    step: f64,
) -> Result<Position, ParamError> {
    shrink_towards(x, rand_mate, coef, step)
}

/// Mean squared deviation from the average fitness, relative to the best
/// (minimal) fitness. A best fitness of zero falls back to an unscaled
/// denominator.
pub fn congestion(fitnesses: &[f64]) -> f64 {
    assert!(!fitnesses.is_empty(), "congestion of an empty population");
    let n = fitnesses.len() as f64;
    let avg = fitnesses.iter().sum::<f64>() / n;
    let best = fitnesses.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = if best == 0.0 { 1.0 } else { best };
    fitnesses
        .iter()
        .map(|f| ((f - avg) / scale).powi(2))
        .sum::<f64>()
        / n
}

/// Reflection through the centre of the bounds: `max + min − x`.
pub fn opposition(x: &Position) -> Position {
    let b = x.bounds;
    Position::new(x.keys.iter().map(|k| b.max + b.min - k).collect(), b)
}

/// Annealing acceptance for minimization: improvements and ties always
/// pass, a worsening by `Δ` passes with probability `exp(−Δ/T)`.
pub fn sa_accept<R: Rng + ?Sized>(
    current: f64,
    candidate: f64,
    temp: f64,
    rng: &mut R,
) -> Result<bool, ParamError> {
    check_range("temperature", "(0, inf)", temp, temp > 0.0)?;
    let delta = candidate - current;
    if delta <= 0.0 {
        return Ok(true);
    }
    Ok(rng.random::<f64>() < (-delta / temp).exp())
}

/// Replaces every whale outside the `elite_fraction` best by its opposite
/// point and re-evaluates it. Returns the elite indices.
pub fn apply_opposition<O: Objective + ?Sized>(
    population: &mut [Individual],
    elite_fraction: f64,
    objective: &O,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| population[a].fitness.total_cmp(&population[b].fitness));
    let keep = elite_count(elite_fraction, population.len());
    let (elite, rest) = order.split_at(keep);
    let opposed = evaluate_all(
        rest.iter().map(|&i| opposition(&population[i].position)).collect(),
        objective,
    );
    for (&i, w) in rest.iter().zip(opposed) {
        population[i] = w;
    }
    let mut elite = elite.to_vec();
    elite.sort_unstable();
    elite
}

pub fn optimize_iwoa<O: Objective + ?Sized>(
    objective: &O,
    dim: usize,
    params: &IwoaParams,
    seed: u64,
) -> Result<Trace, ParamError> {
    params.validate()?;
    let woa = &params.woa;
    let levy = LevyFlight::new(params.levy_gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut population = initial_population(woa.population, dim, woa.bounds, &mut rng, objective);
    let mut archive = population[best_index(&population)].clone();
    let mut evaluations = population.len();
    let initial_temp = params
        .sa_initial_temp
        .unwrap_or(0.1 * archive.fitness.abs());
    let mut curve = Vec::with_capacity(woa.max_generations);
    let mut obl_triggers = 0;

    for t in 0..woa.max_generations {
        let a = coefficient_a(t, woa.max_generations)?;
        let temp = (initial_temp * params.sa_cooling.powi(t as i32)).max(f64::MIN_POSITIVE);

        let candidates: Vec<Position> = population
            .iter()
            .map(|w| {
                let p: f64 = rng.random();
                let mv = MoveParams {
                    spiral_choice_prob: woa.spiral_choice_prob,
                    spiral_shape: woa.spiral_shape,
                    step: levy.sample(&mut rng),
                    outer_abs: params.literal_abs,
                };
                propose(&w.position, &archive.position, &population, a, p, &mv, &mut rng)
            })
            .collect();
        let candidates = evaluate_all(candidates, objective);
        evaluations += candidates.len();
        update_archive(&mut archive, &candidates);

        for (incumbent, candidate) in population.iter_mut().zip(candidates) {
            if sa_accept(incumbent.fitness, candidate.fitness, temp, &mut rng)? {
                *incumbent = candidate;
            }
        }

        let fitness: Vec<f64> = population.iter().map(|w| w.fitness).collect();
        if congestion(&fitness) < params.congestion_threshold {
            let elite = apply_opposition(&mut population, params.elite_fraction, objective);
            evaluations += population.len() - elite.len();
            obl_triggers += 1;
            update_archive(&mut archive, &population);
        }
        curve.push(archive.fitness);
    }

    Ok(Trace {
        best: archive,
        curve,
        evaluations,
        obl_triggers,
    })
}

/// Runs the improved algorithm on a scheduling instance.
pub fn run_iwoa(inst: &Instance, params: &IwoaParams, seed: u64) -> Result<RunReport, ParamError> {
    let trace = optimize_iwoa(&MakespanObjective { instance: inst }, inst.job_count(), params, seed)?;
    Ok(report_from_trace(
        inst,
        Algorithm::Iwoa,
        AlgorithmParams::Iwoa(params.clone()),
        seed,
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Bounds;
    use crate::woa::{encircle_update, search_update};

    fn pos(k: &[f64]) -> Position {
        Position::new(k.to_vec(), Bounds::default())
    }

    #[test]
    fn mantegna_scale_matches_reference() {
        // Closed form evaluated independently in double precision.
        assert!((mantegna_sigma_u(1.5) - 0.696_574_502_557_696_7).abs() < 1e-12);
        // γ = 1 reduces to σ_u = 1.
        assert!((mantegna_sigma_u(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_denominator() {
        for g in [0.3, 1.0, 1.5, 1.99] {
            assert_eq!(levy_step_from(0.5, 1.0, g), 0.5);
            assert_eq!(levy_step_from(0.5, -1.0, g), 0.5);
        }
    }

    #[test]
    fn numerator_variance_and_heavy_tail() {
        let levy = LevyFlight::new(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let var = (0..n).map(|_| levy.sample_u(&mut rng).powi(2)).sum::<f64>() / n as f64;
        let expected = mantegna_sigma_u(1.5).powi(2);
        assert!((var / expected - 1.0).abs() < 0.01, "variance {var} vs {expected}");

        // A Gaussian of the same scale essentially never exceeds 10.
        let big = (0..100_000).filter(|_| levy.sample(&mut rng).abs() > 10.0).count();
        assert!(big > 0);
    }

    #[test]
    fn gamma_range_enforced() {
        assert!(LevyFlight::new(0.29).is_err());
        assert!(LevyFlight::new(2.0).is_err());
        assert!(LevyFlight::new(0.3).is_ok());
    }

    #[test]
    fn levy_updates_examples() {
        let (x, best) = (pos(&[0.2]), pos(&[0.6]));
        let coef = Coefficients::uniform(1, 0.5, 1.0);
        assert_eq!(levy_encircle_update(&x, &best, &coef, 0.0).unwrap(), best);
        let r = levy_encircle_update(&x, &best, &coef, 2.0).unwrap();
        assert!((r.keys[0] - 0.2).abs() < 1e-12);

        let (x, mate) = (pos(&[0.1]), pos(&[0.5]));
        let coef = Coefficients::uniform(1, 1.0, 2.0);
        assert_eq!(levy_search_update(&x, &mate, &coef, 0.0).unwrap(), mate);
        let r = levy_search_update(&x, &mate, &coef, 0.5).unwrap();
        assert!((r.keys[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn unit_step_reduces_to_standard_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let x = crate::encoding::random_position(7, Bounds::default(), &mut rng);
            let y = crate::encoding::random_position(7, Bounds::default(), &mut rng);
            let coef = crate::woa::sample_coefficients(rng.random_range(0.0..2.0), 7, &mut rng);
            assert_eq!(levy_encircle_update(&x, &y, &coef, 1.0), encircle_update(&x, &y, &coef));
            assert_eq!(levy_search_update(&x, &y, &coef, 1.0), search_update(&x, &y, &coef));
        }
    }

    #[test]
    fn congestion_examples() {
        assert_eq!(congestion(&[4.0, 4.0, 4.0]), 0.0);
        assert_eq!(congestion(&[1.0, 2.0, 3.0]), 2.0 / 3.0);
        let base = [230.0, 241.0, 236.0, 250.0];
        let scaled: Vec<f64> = base.iter().map(|f| f * 4.0).collect();
        assert!((congestion(&base) - congestion(&scaled)).abs() < 1e-15);
        // Zero best fitness falls back to the raw variance.
        assert_eq!(congestion(&[0.0, 2.0]), 1.0);
    }

    #[test]
    fn opposition_examples() {
        assert!((opposition(&pos(&[0.3])).keys[0] - 0.7).abs() < 1e-15);
        assert_eq!(opposition(&pos(&[0.5])), pos(&[0.5]));
        let wide = Position::new(vec![-1.5, 0.25, 3.0], Bounds::new(-2.0, 3.0));
        assert_eq!(opposition(&opposition(&wide)), wide);
        assert!(opposition(&wide).in_bounds());
    }

    #[test]
    fn sa_acceptance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sa_accept(10.0, 8.0, 1e-9, &mut rng), Ok(true));
        assert!(sa_accept(8.0, 10.0, 0.0, &mut rng).is_err());
        assert!(sa_accept(8.0, 10.0, -1.0, &mut rng).is_err());
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| sa_accept(8.0, 10.0, 2.0, &mut rng).unwrap())
            .count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - (-1.0f64).exp()).abs() < 0.02, "rate {rate}");
        let cold = (0..10_000)
            .filter(|_| sa_accept(8.0, 10.0, 1e-3, &mut rng).unwrap())
            .count();
        assert_eq!(cold, 0);
    }

    fn sphere(keys: &[f64]) -> f64 {
        1.0 + keys.iter().map(|k| (k - 0.3) * (k - 0.3)).sum::<f64>()
    }

    #[test]
    fn elites_survive_opposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pop = initial_population(20, 5, Bounds::default(), &mut rng, &sphere);
        let before = pop.clone();
        let elite = apply_opposition(&mut pop, 0.1, &sphere);
        assert_eq!(elite.len(), 2);
        for i in 0..pop.len() {
            if elite.contains(&i) {
                assert_eq!(pop[i], before[i]);
            } else {
                assert_eq!(pop[i].position, opposition(&before[i].position));
                assert_eq!(pop[i].fitness, sphere(&pop[i].position.keys));
            }
        }
        let worst_elite = elite.iter().map(|&i| before[i].fitness).fold(0.0, f64::max);
        assert!(before
            .iter()
            .enumerate()
            .filter(|(i, _)| !elite.contains(i))
            .all(|(_, w)| w.fitness >= worst_elite));
    }

    #[test]
    fn elite_rounds_up_to_one() {
        assert_eq!(elite_count(0.1, 30), 3);
        assert_eq!(elite_count(0.1, 5), 1);
        assert_eq!(elite_count(0.0, 5), 1);
        assert_eq!(elite_count(1.0, 5), 5);
    }

    #[test]
    fn zero_threshold_disables_opposition() {
        let params = IwoaParams {
            woa: WoaParams {
                population: 10,
                max_generations: 60,
                ..WoaParams::default()
            },
            congestion_threshold: 0.0,
            ..IwoaParams::default()
        };
        let trace = optimize_iwoa(&sphere, 4, &params, 1).unwrap();
        assert_eq!(trace.obl_triggers, 0);
        assert_eq!(trace.evaluations, 10 * 61);

        let eager = IwoaParams {
            congestion_threshold: 1e9,
            ..params
        };
        assert_eq!(optimize_iwoa(&sphere, 4, &eager, 1).unwrap().obl_triggers, 60);
    }

    #[test]
    fn curve_is_monotone_and_seeded() {
        let params = IwoaParams {
            woa: WoaParams {
                population: 12,
                max_generations: 50,
                ..WoaParams::default()
            },
            ..IwoaParams::default()
        };
        let a = optimize_iwoa(&sphere, 6, &params, 9).unwrap();
        assert!(a.curve.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.best.position.in_bounds());
        assert_eq!(a, optimize_iwoa(&sphere, 6, &params, 9).unwrap());
    }

    #[test]
    fn literal_mode_folds_shrink_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bounds = Bounds::new(-1.0, 1.0);
        let pop = initial_population(8, 5, bounds, &mut rng, &sphere);
        let best = pop[best_index(&pop)].position.clone();
        let mv = MoveParams {
            spiral_choice_prob: 0.5,
            spiral_shape: 1.0,
            step: 3.0,
            outer_abs: true,
        };
        for w in &pop {
            let c = propose(&w.position, &best, &pop, 1.5, 0.0, &mv, &mut rng);
            assert!(c.keys.iter().all(|&k| (0.0..=1.0).contains(&k)));
        }
    }

    #[test]
    fn invalid_params() {
        let bad = [
            IwoaParams { sa_cooling: 1.0, ..IwoaParams::default() },
            IwoaParams { sa_initial_temp: Some(0.0), ..IwoaParams::default() },
            IwoaParams { elite_fraction: 1.2, ..IwoaParams::default() },
            IwoaParams { congestion_threshold: -0.1, ..IwoaParams::default() },
            IwoaParams { levy_gamma: 2.0, ..IwoaParams::default() },
        ];
        assert!(bad.iter().all(|p| p.validate().is_err()));
        assert!(IwoaParams::default().validate().is_ok());
    }
}
