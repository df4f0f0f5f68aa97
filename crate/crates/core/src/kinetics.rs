//! Compiled rate evaluation.
//!
//! [`Kinetics`] is the jump process at system size `N`: a mass-action
//! constant `k` of total order `q` yields the propensity
//! `k N^(1-q) Π C(n_i, m_i)`. With `N = 1` this is the plain stochastic
//! convention used by [`ReactionNetwork::propensity`].
//!
//! [`ScaledNetwork`] is the same family seen through a [`Partition`]:
//! continuous species enter as concentrations `x = X / N` through plain
//! monomials `x^m / m!`, discrete species keep their falling factorials.
//! For a reaction with `q_D` discrete reactants,
//! `λ̃_r(x_C, X_D) = k N^(-q_D) Π x^m/m! Π C(X_D, m)`, and the intensity of
//! the same reaction in events per unit time is `N λ̃_r`.

use crate::error::ModelError;
use crate::network::{combinations, table_rate, RateLaw, ReactionNetwork};
use crate::partition::{classify_reactions, Partition, ReactionClass, Slot};

#[derive(Debug, Clone)]
enum Law {
    MassAction {
        coeff: f64,
        reactants: Vec<(usize, u32)>,
    },
    Table {
        species: Vec<usize>,
        entries: Vec<(Vec<i64>, f64)>,
    },
}

#[derive(Debug, Clone)]
struct CompiledReaction {
    law: Law,
    jump: Vec<(usize, i64)>,
}

/// Jump-process propensities at a fixed system size, with parameters
/// resolved once.
#[derive(Debug, Clone)]
pub struct Kinetics {
    names: Vec<String>,
    species: Vec<String>,
    scale: f64,
    reactions: Vec<CompiledReaction>,
}

impl Kinetics {
    pub fn new(network: &ReactionNetwork, scale: f64) -> Result<Self, ModelError> {
        let params = network.parameters();
        let reactions = network
            .reactions()
            .iter()
            .map(|r| {
                let law = match &r.rate {
                    RateLaw::MassAction(k) => Law::MassAction {
                        coeff: k.resolve(params)? * scale.powi(1 - r.order() as i32),
                        reactants: r.reactants.clone(),
                    },
                    RateLaw::StateTable { species, entries } => Law::Table {
                        species: species.clone(),
                        entries: entries.clone(),
                    },
                };
                let jump = r
                    .jump()
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d != 0)
                    .map(|(i, &d)| (i, d))
                    .collect();
                Ok(CompiledReaction { law, jump })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Kinetics {
            names: network.reactions().iter().map(|r| r.name.clone()).collect(),
            species: network.species().iter().map(|s| s.name.clone()).collect(),
            scale,
            reactions,
        })
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn reaction_name(&self, r: usize) -> &str {
        &self.names[r]
    }

    pub fn species_name(&self, i: usize) -> &str {
        &self.species[i]
    }

    pub fn propensity(&self, r: usize, counts: &[i64]) -> f64 {
        match &self.reactions[r].law {
            Law::MassAction { coeff, reactants } => {
                let mut a = *coeff;
                for &(s, m) in reactants {
                    a *= match m {
                        1 => counts[s] as f64,
                        _ => combinations(counts[s], m),
                    };
                }
                a.max(0.0)
            }
            Law::Table { species, entries } => table_rate(species, entries, counts),
        }
    }

    /// Fills `out` with every propensity and returns their sum.
    pub fn propensities(&self, counts: &[i64], out: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (r, slot) in out.iter_mut().enumerate() {
            *slot = self.propensity(r, counts);
            total += *slot;
        }
        total
    }

    pub fn total_propensity(&self, counts: &[i64]) -> f64 {
        (0..self.n_reactions()).map(|r| self.propensity(r, counts)).sum()
    }

    /// Applies `γ_r` in place. On an infeasible jump the state is left
    /// untouched.
    pub fn apply(&self, r: usize, counts: &mut [i64]) -> Result<(), ModelError> {
        let jump = &self.reactions[r].jump;
        if let Some(&(s, _)) = jump.iter().find(|&&(s, d)| counts[s] + d < 0) {
            return Err(ModelError::InfeasibleJump {
                reaction: self.names[r].clone(),
                species: self.species[s].clone(),
            });
        }
        for &(s, d) in jump {
            counts[s] += d;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ScaledReaction {
    /// `N · k · N^(-q_D) / Π_C m!`, so that the intensity is
    /// `coeff · Π_C x^m · Π_D C(X, m)`.
    coeff: f64,
    continuous: Vec<(usize, u32)>,
    discrete: Vec<(usize, u32)>,
    table: Option<(Vec<usize>, Vec<(Vec<i64>, f64)>)>,
    gamma_c: Vec<(usize, f64)>,
    gamma_d: Vec<(usize, i64)>,
    reads_continuous: bool,
    class: ReactionClass,
}

/// Scaled view of a network under a partition.
#[derive(Debug, Clone)]
pub struct ScaledNetwork {
    partition: Partition,
    names: Vec<String>,
    species: Vec<String>,
    reactions: Vec<ScaledReaction>,
}

impl ScaledNetwork {
    pub fn new(network: &ReactionNetwork, partition: &Partition) -> Result<Self, ModelError> {
        if partition.n_species() != network.n_species() {
            return Err(ModelError::InvalidPartition(format!(
                "partition covers {} species, network has {}",
                partition.n_species(),
                network.n_species()
            )));
        }
        let n = partition.scale();
        let classes = classify_reactions(network, partition);
        let params = network.parameters();
        let mut reactions = Vec::with_capacity(classes.len());
        for (r, class) in network.reactions().iter().zip(classes) {
            let mut continuous = Vec::new();
            let mut discrete = Vec::new();
            let mut table = None;
            let mut coeff = n;
            match &r.rate {
                RateLaw::MassAction(k) => {
                    coeff *= k.resolve(params)?;
                    for &(s, m) in &r.reactants {
                        match partition.slot(s) {
                            Slot::Continuous(i) => {
                                continuous.push((i, m));
                                coeff /= factorial(m);
                            }
                            Slot::Discrete(i) => {
                                discrete.push((i, m));
                                coeff /= n.powi(m as i32);
                            }
                        }
                    }
                }
                RateLaw::StateTable { species, entries } => {
                    let slots = species
                        .iter()
                        .map(|&s| match partition.slot(s) {
                            Slot::Discrete(i) => Ok(i),
                            Slot::Continuous(_) => Err(ModelError::InvalidPartition(format!(
                                "rate table of `{}` reads continuous species `{}`",
                                r.name,
                                network.species()[s].name
                            ))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    table = Some((slots, entries.clone()));
                }
            }
            let mut gamma_c = Vec::new();
            let mut gamma_d = Vec::new();
            for s in r.touches() {
                let d = r.jump()[s];
                match partition.slot(s) {
                    Slot::Continuous(i) => gamma_c.push((i, d as f64 / n)),
                    Slot::Discrete(i) => gamma_d.push((i, d)),
                }
            }
            reactions.push(ScaledReaction {
                coeff,
                reads_continuous: !continuous.is_empty(),
                continuous,
                discrete,
                table,
                gamma_c,
                gamma_d,
                class,
            });
        }
        Ok(ScaledNetwork {
            partition: partition.clone(),
            names: network.reactions().iter().map(|r| r.name.clone()).collect(),
            species: network.species().iter().map(|s| s.name.clone()).collect(),
            reactions,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn scale(&self) -> f64 {
        self.partition.scale()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn n_continuous(&self) -> usize {
        self.partition.continuous().len()
    }

    pub fn n_discrete(&self) -> usize {
        self.partition.discrete().len()
    }

    pub fn reaction_name(&self, r: usize) -> &str {
        &self.names[r]
    }

    pub fn class(&self, r: usize) -> ReactionClass {
        self.reactions[r].class
    }

    /// Events per unit time, `N λ̃_r(x_C, X_D)`.
    pub fn intensity(&self, r: usize, x_c: &[f64], x_d: &[i64]) -> f64 {
        let rx = &self.reactions[r];
        if let Some((species, entries)) = &rx.table {
            let key_matches = |key: &[i64]| key.iter().zip(species).all(|(&v, &s)| x_d[s] == v);
            return entries
                .iter()
                .find(|(key, _)| key_matches(key))
                .map_or(0.0, |&(_, rate)| rate);
        }
        let mut a = rx.coeff;
        for &(i, m) in &rx.continuous {
            a *= match m {
                1 => x_c[i],
                _ => x_c[i].powi(m as i32),
            };
        }
        for &(i, m) in &rx.discrete {
            a *= combinations(x_d[i], m);
        }
        a.max(0.0)
    }

    /// `λ̃_r = intensity / N`.
    pub fn scaled_rate(&self, r: usize, x_c: &[f64], x_d: &[i64]) -> f64 {
        self.intensity(r, x_c, x_d) / self.scale()
    }

    /// Displacement of `x_C` when reaction `r` fires, `γ_r^C / N`.
    pub fn concentration_jump(&self, r: usize) -> &[(usize, f64)] {
        &self.reactions[r].gamma_c
    }

    /// Change of `X_D` when reaction `r` fires, `γ_r^D`.
    pub fn discrete_jump(&self, r: usize) -> &[(usize, i64)] {
        &self.reactions[r].gamma_d
    }

    /// Reactions that leave `X_D` unchanged. They move only continuous
    /// species and drive the flow between discrete jumps.
    pub fn is_flow(&self, r: usize) -> bool {
        self.reactions[r].gamma_d.is_empty()
    }

    pub fn reads_continuous(&self, r: usize) -> bool {
        self.reactions[r].reads_continuous
    }

    pub fn flow_reactions(&self) -> Vec<usize> {
        (0..self.n_reactions()).filter(|&r| self.is_flow(r)).collect()
    }

    pub fn jump_reactions(&self) -> Vec<usize> {
        (0..self.n_reactions()).filter(|&r| !self.is_flow(r)).collect()
    }

    /// `dx_C/dt = Σ_r (γ_r^C / N) · N λ̃_r` over `reactions`, with `X_D` frozen.
    pub fn drift(&self, reactions: &[usize], x_c: &[f64], x_d: &[i64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &r in reactions {
            let a = self.intensity(r, x_c, x_d);
            if a == 0.0 {
                continue;
            }
            for &(i, g) in &self.reactions[r].gamma_c {
                out[i] += g * a;
            }
        }
    }

    /// Converts concentrations back to (real-valued) counts.
    pub fn counts_of(&self, x_c: &[f64]) -> Vec<f64> {
        x_c.iter().map(|x| x * self.scale()).collect()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species
    }
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkBuilder, ReactionSpec};

    fn dimer_network() -> ReactionNetwork {
        let mut b = NetworkBuilder::new();
        b.species("C").unwrap();
        b.species("C2").unwrap();
        b.param("k1", 0.1).unwrap();
        b.param("k5", 0.01).unwrap();
        b.reaction(ReactionSpec::mass_action("dim", &[("C", 2)], &[("C2", 1)], "k1"))
            .unwrap();
        b.reaction(ReactionSpec::mass_action("deg", &[("C", 1)], &[], "k5"))
            .unwrap();
        b.build().unwrap()
    }

    #[test]
    fn first_order_scaled_rate_is_scale_free() {
        let net = dimer_network();
        let p = Partition::all_continuous(2, 1000.0).unwrap();
        let s = ScaledNetwork::new(&net, &p).unwrap();
        assert!((s.scaled_rate(1, &[0.5, 0.0], &[]) - 0.01 * 0.5).abs() < 1e-15);
        assert_eq!(s.scaled_rate(0, &[0.0, 1.0], &[]), 0.0);
    }

    #[test]
    fn dimerization_uses_monomial() {
        let net = dimer_network();
        for n in [1.0, 1e3] {
            let p = Partition::all_continuous(2, n).unwrap();
            let s = ScaledNetwork::new(&net, &p).unwrap();
            let want = 0.1 * 0.2 * 0.2 / 2.0;
            assert!((s.scaled_rate(0, &[0.2, 0.0], &[]) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn kinetics_matches_network_at_unit_scale() {
        let net = dimer_network();
        let k = Kinetics::new(&net, 1.0).unwrap();
        let state = crate::network::SystemState::new(vec![10, 3]).unwrap();
        for r in 0..2 {
            assert_eq!(
                k.propensity(r, state.counts()),
                net.propensity(r, &state).unwrap()
            );
        }
    }

    #[test]
    fn kinetics_apply_checks_feasibility() {
        let net = dimer_network();
        let k = Kinetics::new(&net, 1.0).unwrap();
        let mut counts = vec![1, 0];
        assert!(k.apply(0, &mut counts).is_err());
        assert_eq!(counts, vec![1, 0]);
        k.apply(1, &mut counts).unwrap();
        assert_eq!(counts, vec![0, 0]);
    }
}
