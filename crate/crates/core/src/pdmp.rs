//! Piecewise-deterministic simulation of a partitioned network.
//!
//! Continuous species follow the flow of the reactions that leave the
//! discrete state unchanged; every other reaction is a discrete jump. Jump
//! times are found by integrated-hazard inversion: with `E ~ Exp(1)`, the
//! next jump fires at the first `t*` where `H(t) = ∫ Λ_jump(x_C(s), X_D) ds`
//! reaches `E`. When no jump intensity reads a continuous species the hazard
//! is constant between jumps and `t* = t + E / Λ` exactly.

use crate::error::{ModelError, SimError};
use crate::kinetics::ScaledNetwork;
use crate::network::{ReactionNetwork, SystemState};
use crate::ode::{FlowField, IntegratorConfig, Stepper, VectorField};
use crate::partition::Partition;
use crate::rng::RngStream;
use crate::ssa::DEFAULT_MAX_JUMPS;
use crate::table::{check_grid, SampleTable};

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdmpConfig {
    pub ode: IntegratorConfig,
    /// Displace `x_C` by `γ_r^C / N` when a jump reaction fires.
    pub displacement: bool,
    pub record_jumps: bool,
    pub max_jumps: u64,
}

impl Default for PdmpConfig {
    fn default() -> Self {
        PdmpConfig {
            ode: IntegratorConfig::default(),
            displacement: true,
            record_jumps: false,
            max_jumps: DEFAULT_MAX_JUMPS,
        }
    }
}

/// A partitioned network split into flow and jump reactions.
#[derive(Debug, Clone)]
pub struct HybridModel {
    scaled: ScaledNetwork,
    flow: Vec<usize>,
    jumps: Vec<usize>,
    state_dependent_hazard: bool,
    continuous_names: Vec<String>,
    discrete_names: Vec<String>,
}

impl HybridModel {
    pub fn new(network: &ReactionNetwork, partition: &Partition) -> Result<Self, ModelError> {
        let scaled = ScaledNetwork::new(network, partition)?;
        let flow = scaled.flow_reactions();
        let jumps = scaled.jump_reactions();
        let state_dependent_hazard = jumps.iter().any(|&r| scaled.reads_continuous(r));
        let name = |&s: &usize| network.species()[s].name.clone();
        Ok(HybridModel {
            continuous_names: partition.continuous().iter().map(name).collect(),
            discrete_names: partition.discrete().iter().map(name).collect(),
            scaled,
            flow,
            jumps,
            state_dependent_hazard,
        })
    }

    pub fn scaled(&self) -> &ScaledNetwork {
        &self.scaled
    }

    pub fn partition(&self) -> &Partition {
        self.scaled.partition()
    }

    pub fn flow_reactions(&self) -> &[usize] {
        &self.flow
    }

    pub fn jump_reactions(&self) -> &[usize] {
        &self.jumps
    }

    /// True when some jump intensity depends on the continuous state, so the
    /// hazard has to be integrated along the flow.
    pub fn has_state_dependent_hazard(&self) -> bool {
        self.state_dependent_hazard
    }

    pub fn continuous_names(&self) -> &[String] {
        &self.continuous_names
    }

    pub fn discrete_names(&self) -> &[String] {
        &self.discrete_names
    }

    /// Total jump intensity `Λ_jump`; `rates[i]` receives the intensity of
    /// `jump_reactions()[i]`.
    pub fn jump_intensity(&self, x_c: &[f64], x_d: &[i64], rates: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (slot, &r) in rates.iter_mut().zip(&self.jumps) {
            *slot = self.scaled.intensity(r, x_c, x_d);
            total += *slot;
        }
        total
    }

    /// Applies jump reaction `reaction` (a network reaction index) in place.
    pub fn apply_hybrid_jump(
        &self,
        x_c: &mut [f64],
        x_d: &mut [i64],
        reaction: usize,
        displacement: bool,
    ) -> Result<(), ModelError> {
        let dj = self.scaled.discrete_jump(reaction);
        if let Some(&(i, _)) = dj.iter().find(|&&(i, d)| x_d[i] + d < 0) {
            return Err(ModelError::InfeasibleJump {
                reaction: self.scaled.reaction_name(reaction).to_string(),
                species: self.discrete_names[i].clone(),
            });
        }
        for &(i, d) in dj {
            x_d[i] += d;
        }
        if displacement {
            for &(i, g) in self.scaled.concentration_jump(reaction) {
                x_c[i] = (x_c[i] + g).max(0.0);
            }
        }
        Ok(())
    }

    fn select(&self, x_c: &[f64], x_d: &[i64], rates: &mut [f64], u: f64) -> Option<usize> {
        let total = self.jump_intensity(x_c, x_d, rates);
        if total <= 0.0 {
            return None;
        }
        let target = u * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (k, &a) in rates.iter().enumerate() {
            if a > 0.0 {
                acc += a;
                chosen = Some(self.jumps[k]);
                if target < acc {
                    break;
                }
            }
        }
        chosen
    }
}

/// Flow plus the hazard `H` as an extra last component.
struct HazardField<'a> {
    flow: FlowField<'a>,
    model: &'a HybridModel,
    x_d: Vec<i64>,
}

impl VectorField for HazardField<'_> {
    fn dim(&self) -> usize {
        self.flow.dim() + 1
    }

    fn eval(&self, x: &[f64], dxdt: &mut [f64]) {
        let n = self.flow.dim();
        self.flow.eval(&x[..n], &mut dxdt[..n]);
        dxdt[n] = self
            .model
            .jumps
            .iter()
            .map(|&r| self.model.scaled.intensity(r, &x[..n], &self.x_d))
            .sum();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Jump {
        time: f64,
        reaction: usize,
        hazard_gap: f64,
    },
    /// The hazard crossed its threshold where every intensity vanished.
    Null { time: f64 },
    NoJumpBefore,
}

/// Output sink for grid samples.
struct Samples<'g> {
    grid: &'g [f64],
    cursor: usize,
    x_c: Vec<f64>,
    x_d: Vec<i64>,
}

impl Samples<'_> {
    fn push_until(&mut self, limit: f64, strict: bool, x_d: &[i64], mut value: impl FnMut(f64, &mut [f64]), n_c: usize) {
        while self.cursor < self.grid.len() {
            let g = self.grid[self.cursor];
            if g > limit || (strict && g >= limit) {
                break;
            }
            let start = self.x_c.len();
            self.x_c.resize(start + n_c, 0.0);
            value(g, &mut self.x_c[start..]);
            self.x_d.extend_from_slice(x_d);
            self.cursor += 1;
        }
    }
}

impl HybridModel {
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        x_c: &mut [f64],
        x_d: &[i64],
        t: f64,
        t_max: f64,
        rng: &mut RngStream,
        cfg: &IntegratorConfig,
        samples: &mut Samples<'_>,
        rates: &mut [f64],
    ) -> Result<Segment, SimError> {
        let n_c = x_c.len();
        let threshold = rng.exp1();

        if !self.state_dependent_hazard {
            let total = self.jump_intensity(x_c, x_d, rates);
            let t_jump = if total > 0.0 {
                t + threshold / total
            } else {
                f64::INFINITY
            };
            let jumps = t_jump <= t_max;
            let end = if jumps { t_jump } else { t_max };
            if n_c == 0 {
                samples.push_until(end, jumps, x_d, |_, _| {}, 0);
            } else {
                let flow = FlowField::new(&self.scaled, x_d);
                let mut stepper = Stepper::new(&flow, x_c, t, end, *cfg)?;
                samples.push_until(t, jumps && t >= end, x_d, |g, o| stepper.interpolate(g, o), n_c);
                while !stepper.done() {
                    stepper.step()?;
                    samples.push_until(stepper.t(), jumps, x_d, |g, o| stepper.interpolate(g, o), n_c);
                }
                x_c.copy_from_slice(stepper.state());
            }
            if !jumps {
                return Ok(Segment::NoJumpBefore);
            }
            let u = rng.uniform();
            return Ok(match self.select(x_c, x_d, rates, u) {
                Some(reaction) => Segment::Jump {
                    time: t_jump,
                    reaction,
                    hazard_gap: (total * (t_jump - t) - threshold).abs(),
                },
                None => Segment::Null { time: t_jump },
            });
        }

        let field = HazardField {
            flow: FlowField::new(&self.scaled, x_d),
            model: self,
            x_d: x_d.to_vec(),
        };
        let mut y0 = x_c.to_vec();
        y0.push(0.0);
        let mut stepper = Stepper::new(&field, &y0, t, t_max, *cfg)?;
        let mut buf = vec![0.0; n_c + 1];
        samples.push_until(
            t,
            false,
            x_d,
            |_, o| o.copy_from_slice(x_c),
            n_c,
        );
        let tol = 1e-9 * (1.0 + threshold);
        while !stepper.done() {
            stepper.step()?;
            let h_end = stepper.state()[n_c];
            if h_end < threshold {
                samples.push_until(
                    stepper.t(),
                    false,
                    x_d,
                    |g, o| {
                        stepper.interpolate(g, &mut buf);
                        o.copy_from_slice(&buf[..n_c]);
                    },
                    n_c,
                );
                continue;
            }
            // Bisection with genuine steps from the start of the accepted
            // step, so x_C(t*) carries the integrator's accuracy.
            let t0 = stepper.t_prev();
            let (mut lo, mut hi) = (t0, stepper.t());
            let mut t_star = hi;
            let mut gap = (h_end - threshold).abs();
            let mut y_star = stepper.state().to_vec();
            if gap > tol {
                for _ in 0..MAX_BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    stepper.step_from_prev(mid - t0, &mut buf);
                    t_star = mid;
                    y_star.copy_from_slice(&buf);
                    gap = (buf[n_c] - threshold).abs();
                    if gap <= tol || mid <= lo || mid >= hi {
                        break;
                    }
                    if buf[n_c] < threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            samples.push_until(
                t_star,
                true,
                x_d,
                |g, o| {
                    stepper.interpolate(g, &mut buf);
                    o.copy_from_slice(&buf[..n_c]);
                },
                n_c,
            );
            for (x, &v) in x_c.iter_mut().zip(&y_star[..n_c]) {
                *x = v.max(0.0);
            }
            let u = rng.uniform();
            return Ok(match self.select(x_c, x_d, rates, u) {
                Some(reaction) => Segment::Jump {
                    time: t_star,
                    reaction,
                    hazard_gap: gap,
                },
                None => Segment::Null { time: t_star },
            });
        }
        x_c.copy_from_slice(&stepper.state()[..n_c]);
        Ok(Segment::NoJumpBefore)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextJump {
    Jump {
        time: f64,
        reaction: usize,
        /// Continuous state just before the jump.
        x_c: Vec<f64>,
    },
    NoJumpBefore(f64),
}

/// Samples the next jump from `(x_C, X_D)` at time `t`.
pub fn next_jump(
    model: &HybridModel,
    x_c: &[f64],
    x_d: &[i64],
    t: f64,
    t_max: f64,
    rng: &mut RngStream,
    cfg: &IntegratorConfig,
) -> Result<NextJump, SimError> {
    if !(t < t_max) {
        return Err(SimError::Precondition(format!(
            "next_jump needs t < t_max, got {t} >= {t_max}"
        )));
    }
    let mut rates = vec![0.0; model.jumps.len()];
    let mut x = x_c.to_vec();
    let mut t = t;
    loop {
        let mut samples = Samples {
            grid: &[],
            cursor: 0,
            x_c: Vec::new(),
            x_d: Vec::new(),
        };
        match model.advance(&mut x, x_d, t, t_max, rng, cfg, &mut samples, &mut rates)? {
            Segment::Jump { time, reaction, .. } => {
                return Ok(NextJump::Jump {
                    time,
                    reaction,
                    x_c: x,
                })
            }
            Segment::Null { time } => t = time,
            Segment::NoJumpBefore => return Ok(NextJump::NoJumpBefore(t_max)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridJumpRecord {
    pub time: f64,
    pub reaction: usize,
    pub x_c_before: Vec<f64>,
    pub x_c_after: Vec<f64>,
    pub x_d_after: Vec<i64>,
    /// `|H(t*) - E|` at the firing time.
    pub hazard_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub continuous_species: Vec<String>,
    pub discrete_species: Vec<String>,
    pub scale: f64,
    pub sample_times: Vec<f64>,
    x_c: Vec<f64>,
    x_d: Vec<i64>,
    pub jumps: Option<Vec<HybridJumpRecord>>,
    pub jump_count: u64,
    pub rng_seed: u64,
}

impl HybridTrajectory {
    /// Concentrations `x_C` at grid point `i`.
    pub fn continuous(&self, i: usize) -> &[f64] {
        let n = self.continuous_species.len();
        &self.x_c[i * n..(i + 1) * n]
    }

    pub fn discrete(&self, i: usize) -> &[i64] {
        let n = self.discrete_species.len();
        &self.x_d[i * n..(i + 1) * n]
    }

    /// Raw concentration samples, row-major.
    pub fn continuous_values(&self) -> &[f64] {
        &self.x_c
    }

    /// Continuous species as real-valued counts `N x_C`, then discrete
    /// counts.
    pub fn to_table(&self) -> SampleTable {
        let mut values = Vec::with_capacity(
            self.sample_times.len() * (self.continuous_species.len() + self.discrete_species.len()),
        );
        for i in 0..self.sample_times.len() {
            values.extend(self.continuous(i).iter().map(|x| x * self.scale));
            values.extend(self.discrete(i).iter().map(|&c| c as f64));
        }
        SampleTable {
            columns: self
                .continuous_species
                .iter()
                .chain(&self.discrete_species)
                .cloned()
                .collect(),
            times: self.sample_times.clone(),
            values,
        }
    }
}

pub fn simulate_pdmp(
    model: &HybridModel,
    init: &SystemState,
    t_max: f64,
    seed: u64,
    config: &PdmpConfig,
    grid: &[f64],
) -> Result<HybridTrajectory, SimError> {
    check_grid(grid, t_max)?;
    config.ode.validate()?;
    let partition = model.partition();
    if init.len() != partition.n_species() {
        return Err(SimError::Precondition(format!(
            "initial state has {} entries, model has {} species",
            init.len(),
            partition.n_species()
        )));
    }
    let start = partition.to_hybrid(init.counts());
    let (mut x_c, mut x_d) = (start.x_c, start.x_d);
    let mut rng = RngStream::new(seed);
    let mut rates = vec![0.0; model.jumps.len()];
    let mut samples = Samples {
        grid,
        cursor: 0,
        x_c: Vec::with_capacity(grid.len() * x_c.len()),
        x_d: Vec::with_capacity(grid.len() * x_d.len()),
    };
    let mut jumps = config.record_jumps.then(Vec::new);
    let mut jump_count = 0u64;
    let mut t = 0.0;
    loop {
        let before = config.record_jumps.then(|| x_c.clone());
        match model.advance(
            &mut x_c,
            &x_d,
            t,
            t_max,
            &mut rng,
            &config.ode,
            &mut samples,
            &mut rates,
        )? {
            Segment::NoJumpBefore => break,
            Segment::Null { time } => t = time,
            Segment::Jump {
                time,
                reaction,
                hazard_gap,
            } => {
                let pre = before.map(|_| x_c.clone());
                model.apply_hybrid_jump(&mut x_c, &mut x_d, reaction, config.displacement)?;
                jump_count += 1;
                if jump_count > config.max_jumps {
                    return Err(SimError::Runaway(config.max_jumps));
                }
                t = time;
                if let (Some(j), Some(pre)) = (jumps.as_mut(), pre) {
                    j.push(HybridJumpRecord {
                        time,
                        reaction,
                        x_c_before: pre,
                        x_c_after: x_c.clone(),
                        x_d_after: x_d.clone(),
                        hazard_gap,
                    });
                }
            }
        }
    }
    let n_c = x_c.len();
    let final_c = x_c.clone();
    samples.push_until(t_max, false, &x_d, |_, o| o.copy_from_slice(&final_c), n_c);

    Ok(HybridTrajectory {
        continuous_species: model.continuous_names.clone(),
        discrete_species: model.discrete_names.clone(),
        scale: partition.scale(),
        sample_times: grid.to_vec(),
        x_c: samples.x_c,
        x_d: samples.x_d,
        jumps,
        jump_count,
        rng_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkBuilder, ReactionSpec};

    fn cook(k1: f64, km1: f64) -> (ReactionNetwork, Partition) {
        let mut b = NetworkBuilder::new();
        for s in ["G", "G*", "P"] {
            b.species(s).unwrap();
        }
        for (k, v) in [("k1", k1), ("km1", km1), ("k2", 4000.0), ("k3", 1.0)] {
            b.param(k, v).unwrap();
        }
        b.reaction(ReactionSpec::mass_action("on", &[("G", 1)], &[("G*", 1)], "k1"))
            .unwrap();
        b.reaction(ReactionSpec::mass_action("off", &[("G*", 1)], &[("G", 1)], "km1"))
            .unwrap();
        b.reaction(ReactionSpec::mass_action(
            "prod",
            &[("G*", 1)],
            &[("G*", 1), ("P", 1)],
            "k2",
        ))
        .unwrap();
        b.reaction(ReactionSpec::mass_action("deg", &[("P", 1)], &[], "k3"))
            .unwrap();
        let net = b.build().unwrap();
        let p = Partition::from_names(&net, &["P"], &["G", "G*"], 1.0).unwrap();
        (net, p)
    }

    #[test]
    fn telegraph_intensities() {
        let (net, p) = cook(20.0, 10.0);
        let m = HybridModel::new(&net, &p).unwrap();
        assert_eq!(m.jump_reactions(), &[0, 1]);
        assert_eq!(m.flow_reactions(), &[2, 3]);
        let mut rates = vec![0.0; 2];
        assert_eq!(m.jump_intensity(&[0.0], &[1, 0], &mut rates), 20.0);
        assert_eq!(m.jump_intensity(&[0.0], &[0, 1], &mut rates), 10.0);
        assert!(!m.has_state_dependent_hazard());
    }

    #[test]
    fn no_jump_reactions_means_zero_intensity() {
        let (net, _) = cook(20.0, 10.0);
        let p = Partition::all_continuous(3, 1.0).unwrap();
        let m = HybridModel::new(&net, &p).unwrap();
        assert!(m.jump_reactions().is_empty());
        assert_eq!(m.jump_intensity(&[1.0, 0.0, 0.0], &[], &mut []), 0.0);
        let mut rng = RngStream::new(1);
        let out = next_jump(&m, &[1.0, 0.0, 0.0], &[], 0.0, 5.0, &mut rng, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(out, NextJump::NoJumpBefore(5.0));
    }

    #[test]
    fn gene_switch_leaves_protein_unchanged() {
        let (net, p) = cook(20.0, 10.0);
        let m = HybridModel::new(&net, &p).unwrap();
        let mut x_c = vec![123.0];
        let mut x_d = vec![1, 0];
        m.apply_hybrid_jump(&mut x_c, &mut x_d, 0, true).unwrap();
        assert_eq!(x_c, vec![123.0]);
        assert_eq!(x_d, vec![0, 1]);
        assert!(m.apply_hybrid_jump(&mut x_c, &mut x_d, 0, true).is_err());
    }

    #[test]
    fn constant_hazard_waiting_times() {
        let (net, p) = cook(20.0, 10.0);
        let m = HybridModel::new(&net, &p).unwrap();
        let mut rng = RngStream::new(17);
        let cfg = IntegratorConfig::default();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            match next_jump(&m, &[0.0], &[1, 0], 0.0, 1e6, &mut rng, &cfg).unwrap() {
                NextJump::Jump { time, reaction, .. } => {
                    assert_eq!(reaction, 0);
                    sum += time;
                }
                NextJump::NoJumpBefore(_) => panic!("hazard 20 must fire"),
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 0.05).abs() < 0.01 * 0.05, "mean {mean}");
    }

    #[test]
    fn flow_between_jumps_matches_cook_solution() {
        // G* on, no switching: P(t) = 4000 (1 - e^-t).
        let (net, p) = cook(0.0, 0.0);
        let m = HybridModel::new(&net, &p).unwrap();
        let init = SystemState::new(vec![0, 1, 0]).unwrap();
        let grid = [0.0, 0.5, 1.0];
        let tr = simulate_pdmp(&m, &init, 1.0, 3, &PdmpConfig::default(), &grid).unwrap();
        assert_eq!(tr.jump_count, 0);
        let exact = 4000.0 * (1.0 - (-1.0f64).exp());
        assert!(((tr.continuous(2)[0] - exact) / exact).abs() < 1e-3);
        assert_eq!(tr.discrete(1), &[0, 1]);
    }

    fn clock() -> (ReactionNetwork, Partition) {
        // x_T(t) = t drives the hazard of the D -> E switch.
        let mut b = NetworkBuilder::new();
        for s in ["T", "D", "E"] {
            b.species(s).unwrap();
        }
        b.param("one", 1.0).unwrap();
        b.reaction(ReactionSpec::mass_action("tick", &[], &[("T", 1)], "one"))
            .unwrap();
        b.reaction(ReactionSpec::mass_action(
            "fire",
            &[("T", 1), ("D", 1)],
            &[("T", 1), ("E", 1)],
            "one",
        ))
        .unwrap();
        let net = b.build().unwrap();
        let p = Partition::from_names(&net, &["T"], &["D", "E"], 1.0).unwrap();
        (net, p)
    }

    #[test]
    fn linear_hazard_median() {
        let (net, p) = clock();
        let m = HybridModel::new(&net, &p).unwrap();
        assert!(m.has_state_dependent_hazard());
        let mut rng = RngStream::new(5);
        let cfg = IntegratorConfig::default();
        let mut times: Vec<f64> = (0..100_000)
            .map(|_| match next_jump(&m, &[0.0], &[1, 0], 0.0, 100.0, &mut rng, &cfg).unwrap() {
                NextJump::Jump { time, .. } => time,
                NextJump::NoJumpBefore(_) => panic!("hazard t must fire"),
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let median = 0.5 * (times[49_999] + times[50_000]);
        let exact = (2.0 * 2f64.ln()).sqrt();
        assert!(((median - exact) / exact).abs() < 0.01, "median {median}");
    }

    #[test]
    fn hazard_localized_at_every_jump() {
        let (net, p) = clock();
        let m = HybridModel::new(&net, &p).unwrap();
        let cfg = PdmpConfig {
            record_jumps: true,
            ..PdmpConfig::default()
        };
        let init = SystemState::new(vec![0, 1, 0]).unwrap();
        for seed in 0..200 {
            let tr = simulate_pdmp(&m, &init, 20.0, seed, &cfg, &[20.0]).unwrap();
            let jumps = tr.jumps.as_ref().unwrap();
            assert_eq!(jumps.len(), 1);
            let j = &jumps[0];
            // The clock is integrated exactly, so H(t*) = t*^2 / 2.
            assert!((j.x_c_before[0] - j.time).abs() < 1e-9);
            assert!(j.hazard_gap <= 1e-9 * (1.0 + 0.5 * j.time * j.time) + 1e-12);
            assert_eq!(tr.discrete(0), &[0, 1]);
        }
    }
}
