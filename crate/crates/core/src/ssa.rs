//! Exact simulation of the Markov jump process by the direct method.
//!
//! The waiting time at state `X` is exponential with rate
//! `Λ(X) = Σ_r λ_r(X)`; the firing reaction is chosen with probability
//! `λ_r / Λ` by inverting the cumulative sum with a single uniform.

use crate::error::SimError;
use crate::kinetics::Kinetics;
use crate::network::SystemState;
use crate::rng::RngStream;
use crate::table::{check_grid, SampleTable};

pub const DEFAULT_MAX_JUMPS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub reaction: usize,
    pub state: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub species: Vec<String>,
    pub sample_times: Vec<f64>,
    samples: Vec<i64>,
    pub jumps: Option<Vec<JumpRecord>>,
    pub jump_count: u64,
    pub rng_seed: u64,
}

impl Trajectory {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn sample(&self, i: usize) -> &[i64] {
        let m = self.n_species();
        &self.samples[i * m..(i + 1) * m]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[i64]> {
        self.samples.chunks_exact(self.n_species().max(1))
    }

    pub fn to_table(&self) -> SampleTable {
        SampleTable {
            columns: self.species.clone(),
            times: self.sample_times.clone(),
            values: self.samples.iter().map(|&c| c as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Fired { time: f64, reaction: usize },
    Absorbed,
}

#[derive(Debug, Clone, Copy)]
pub struct SsaOptions {
    pub record_jumps: bool,
    pub max_jumps: u64,
}

impl Default for SsaOptions {
    fn default() -> Self {
        SsaOptions {
            record_jumps: false,
            max_jumps: DEFAULT_MAX_JUMPS,
        }
    }
}

/// Draws the next event without applying it. `rates` is scratch space of
/// length `n_reactions`.
#[inline]
fn draw(
    kinetics: &Kinetics,
    counts: &[i64],
    t: f64,
    rng: &mut RngStream,
    rates: &mut [f64],
) -> StepOutcome {
    let total = kinetics.propensities(counts, rates);
    if total <= 0.0 {
        return StepOutcome::Absorbed;
    }
    let time = t + rng.exp1() / total;
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for (r, &a) in rates.iter().enumerate() {
        if a > 0.0 {
            acc += a;
            chosen = Some(r);
            if target < acc {
                break;
            }
        }
    }
    StepOutcome::Fired {
        time,
        reaction: chosen.expect("positive total rate has a positive term"),
    }
}

/// One step of the direct method, applied to `counts` in place.
pub fn ssa_step(
    kinetics: &Kinetics,
    counts: &mut [i64],
    t: f64,
    rng: &mut RngStream,
    rates: &mut [f64],
) -> Result<StepOutcome, SimError> {
    let outcome = draw(kinetics, counts, t, rng, rates);
    if let StepOutcome::Fired { reaction, .. } = outcome {
        kinetics.apply(reaction, counts)?;
    }
    Ok(outcome)
}

/// Simulates one trajectory on `[0, t_max]`, sampled on `grid` by zero-order
/// hold: the sample at `t` is the state after the last jump at or before `t`.
pub fn simulate_ssa(
    kinetics: &Kinetics,
    init: &SystemState,
    t_max: f64,
    seed: u64,
    grid: &[f64],
    options: SsaOptions,
) -> Result<Trajectory, SimError> {
    check_grid(grid, t_max)?;
    if init.len() != kinetics.n_species() {
        return Err(SimError::Precondition(format!(
            "initial state has {} entries, network has {} species",
            init.len(),
            kinetics.n_species()
        )));
    }
    let m = kinetics.n_species();
    let mut rng = RngStream::new(seed);
    let mut counts = init.counts().to_vec();
    let mut rates = vec![0.0; kinetics.n_reactions()];
    let mut samples = Vec::with_capacity(grid.len() * m);
    let mut jumps = options.record_jumps.then(Vec::new);
    let mut jump_count = 0u64;
    let mut next_sample = 0;
    let mut t = 0.0;

    loop {
        let outcome = draw(kinetics, &counts, t, &mut rng, &mut rates);
        let (t_next, reaction) = match outcome {
            StepOutcome::Fired { time, reaction } if time <= t_max => (time, reaction),
            _ => break,
        };
        while next_sample < grid.len() && grid[next_sample] < t_next {
            samples.extend_from_slice(&counts);
            next_sample += 1;
        }
        kinetics.apply(reaction, &mut counts)?;
        jump_count += 1;
        if jump_count > options.max_jumps {
            return Err(SimError::Runaway(options.max_jumps));
        }
        t = t_next;
        if let Some(j) = jumps.as_mut() {
            j.push(JumpRecord {
                time: t,
                reaction,
                state: counts.clone(),
            });
        }
    }
    while next_sample < grid.len() {
        samples.extend_from_slice(&counts);
        next_sample += 1;
    }

    Ok(Trajectory {
        species: (0..m).map(|i| species_name(kinetics, i)).collect(),
        sample_times: grid.to_vec(),
        samples,
        jumps,
        jump_count,
        rng_seed: seed,
    })
}

fn species_name(kinetics: &Kinetics, i: usize) -> String {
    kinetics.species_name(i).to_string()
}

/// Monte Carlo estimate of `(E[f(X_h)] - f(x)) / h` next to the analytic
/// generator value `Af(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorCheck {
    pub estimate: f64,
    pub analytic: f64,
    pub standard_error: f64,
    /// `Λ(x)^2 h max|Δf|`, a bound on the first-order bias of the estimate.
    pub bias_bound: f64,
}

impl GeneratorCheck {
    /// Agreement within three standard errors plus the bias bound.
    pub fn agrees(&self) -> bool {
        (self.estimate - self.analytic).abs() <= 3.0 * self.standard_error + self.bias_bound
    }
}

/// The generator `Af(x) = Σ_r [f(x + γ_r) - f(x)] λ_r(x)` evaluated with the
/// compiled kinetics.
pub fn generator<F>(kinetics: &Kinetics, f: &F, state: &[i64]) -> Result<f64, SimError>
where
    F: Fn(&[i64]) -> f64,
{
    let here = f(state);
    let mut acc = 0.0;
    let mut next = state.to_vec();
    for r in 0..kinetics.n_reactions() {
        let a = kinetics.propensity(r, state);
        if a == 0.0 {
            continue;
        }
        next.copy_from_slice(state);
        kinetics.apply(r, &mut next)?;
        acc += (f(&next) - here) * a;
    }
    Ok(acc)
}

pub fn generator_consistency_check<F>(
    kinetics: &Kinetics,
    f: F,
    state: &SystemState,
    h: f64,
    replicates: usize,
    seed: u64,
) -> Result<GeneratorCheck, SimError>
where
    F: Fn(&[i64]) -> f64,
{
    if !(h > 0.0) || replicates < 2 {
        return Err(SimError::Precondition(
            "generator check needs h > 0 and at least two replicates".into(),
        ));
    }
    let x0 = state.counts();
    let f0 = f(x0);
    let analytic = generator(kinetics, &f, x0)?;

    let total = kinetics.total_propensity(x0);
    let mut max_df: f64 = 0.0;
    let mut next = x0.to_vec();
    for r in 0..kinetics.n_reactions() {
        if kinetics.propensity(r, x0) > 0.0 {
            next.copy_from_slice(x0);
            kinetics.apply(r, &mut next)?;
            max_df = max_df.max((f(&next) - f0).abs());
        }
    }

    let mut rng = RngStream::new(seed);
    let mut rates = vec![0.0; kinetics.n_reactions()];
    let mut counts = x0.to_vec();
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..replicates {
        counts.copy_from_slice(x0);
        let mut t = 0.0;
        while let StepOutcome::Fired { time, reaction } =
            draw(kinetics, &counts, t, &mut rng, &mut rates)
        {
            if time > h {
                break;
            }
            kinetics.apply(reaction, &mut counts)?;
            t = time;
        }
        let d = (f(&counts) - f0) / h;
        let delta = d - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (d - mean);
    }
    let var = m2 / (replicates - 1) as f64;
    Ok(GeneratorCheck {
        estimate: mean,
        analytic,
        standard_error: (var / replicates as f64).sqrt(),
        bias_bound: total * total * h * max_df,
    })
}
