//! Reaction networks: species, reactions, rate laws and the jump process
//! primitives (propensities, jumps and the Markov generator).
//!
//! Rate constants follow the stochastic convention. Mass-action propensities
//! count distinct reactant tuples, so a reactant of multiplicity `m` with count
//! `n` contributes `n (n-1) ... (n-m+1) / m!`.

use indexmap::IndexMap;

use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub name: String,
    pub index: usize,
}

/// Multiplier on a product term. Bursty production such as `D1 -> D1 + n C`
/// keeps the burst size as a named parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Literal(u32),
    Param(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub species: usize,
    pub coefficient: Coefficient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateConstant {
    Param(String),
    Value(f64),
}

impl RateConstant {
    pub fn param(name: impl Into<String>) -> Self {
        RateConstant::Param(name.into())
    }

    pub fn resolve(&self, params: &IndexMap<String, f64>) -> Result<f64, ModelError> {
        match self {
            RateConstant::Value(v) => Ok(*v),
            RateConstant::Param(name) => params
                .get(name)
                .copied()
                .ok_or_else(|| ModelError::UnknownParameter(name.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateLaw {
    /// Rate constant times the number of distinct reactant tuples.
    MassAction(RateConstant),
    /// Explicit rate per configuration of a few discrete species. States
    /// missing from the table have rate zero.
    StateTable {
        species: Vec<usize>,
        entries: Vec<(Vec<i64>, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub name: String,
    /// Reactant multiset as `(species, multiplicity)`.
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<Product>,
    pub rate: RateLaw,
    jump: Vec<i64>,
}

impl Reaction {
    /// Net stoichiometric change `γ_r`, one entry per species.
    pub fn jump(&self) -> &[i64] {
        &self.jump
    }

    /// Species whose counts the rate law depends on.
    pub fn reads(&self) -> Vec<usize> {
        match &self.rate {
            RateLaw::MassAction(_) => self.reactants.iter().map(|&(s, _)| s).collect(),
            RateLaw::StateTable { species, .. } => species.clone(),
        }
    }

    /// Species whose counts change when the reaction fires.
    pub fn touches(&self) -> impl Iterator<Item = usize> + '_ {
        self.jump
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0)
            .map(|(i, _)| i)
    }

    /// Total reactant multiplicity (the mass-action order).
    pub fn order(&self) -> u32 {
        self.reactants.iter().map(|&(_, m)| m).sum()
    }

    /// Propensity `λ_r(X)` at unit system size.
    pub fn propensity(
        &self,
        state: &SystemState,
        params: &IndexMap<String, f64>,
    ) -> Result<f64, ModelError> {
        self.propensity_at_scale(state.counts(), params, 1.0)
    }

    /// Propensity of the density-dependent jump process at system size
    /// `scale`: a mass-action constant of order `q` is divided by
    /// `scale^(q-1)`.
    pub fn propensity_at_scale(
        &self,
        counts: &[i64],
        params: &IndexMap<String, f64>,
        scale: f64,
    ) -> Result<f64, ModelError> {
        match &self.rate {
            RateLaw::MassAction(k) => {
                let k = k.resolve(params)?;
                let mut a = k * scale.powi(1 - self.order() as i32);
                for &(s, m) in &self.reactants {
                    let c = combinations(counts[s], m);
                    if c == 0.0 {
                        return Ok(0.0);
                    }
                    a *= c;
                }
                Ok(a)
            }
            RateLaw::StateTable { species, entries } => Ok(table_rate(species, entries, counts)),
        }
    }
}

/// `n (n-1) ... (n-m+1) / m!`, zero when `n < m`.
pub fn combinations(n: i64, m: u32) -> f64 {
    if n < m as i64 {
        return 0.0;
    }
    let mut c = 1.0;
    for j in 0..m as i64 {
        c *= (n - j) as f64 / (j + 1) as f64;
    }
    c
}

pub(crate) fn table_rate(species: &[usize], entries: &[(Vec<i64>, f64)], counts: &[i64]) -> f64 {
    entries
        .iter()
        .find(|(key, _)| key.iter().zip(species).all(|(&v, &s)| counts[s] == v))
        .map_or(0.0, |&(_, rate)| rate)
}

/// Molecule counts `X = (n_1, ..., n_M)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemState(Vec<i64>);

impl SystemState {
    pub fn new(counts: Vec<i64>) -> Result<Self, ModelError> {
        if let Some(i) = counts.iter().position(|&c| c < 0) {
            return Err(ModelError::InvalidState(format!(
                "negative count {} at index {i}",
                counts[i]
            )));
        }
        Ok(SystemState(counts))
    }

    pub fn zeros(n: usize) -> Self {
        SystemState(vec![0; n])
    }

    pub fn counts(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }
}

/// Source-level description of one reaction, resolved by [`NetworkBuilder`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionSpec {
    pub name: String,
    pub reactants: Vec<(String, u32)>,
    pub products: Vec<(String, Coefficient)>,
    pub rate: RateSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateSpec {
    MassAction(RateConstant),
    StateTable {
        species: Vec<String>,
        entries: Vec<(Vec<i64>, f64)>,
    },
}

impl ReactionSpec {
    pub fn mass_action(
        name: &str,
        reactants: &[(&str, u32)],
        products: &[(&str, u32)],
        constant: &str,
    ) -> Self {
        ReactionSpec {
            name: name.to_string(),
            reactants: reactants.iter().map(|&(s, m)| (s.to_string(), m)).collect(),
            products: products
                .iter()
                .map(|&(s, m)| (s.to_string(), Coefficient::Literal(m)))
                .collect(),
            rate: RateSpec::MassAction(RateConstant::param(constant)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    species: Vec<Species>,
    parameters: IndexMap<String, f64>,
    reactions: Vec<ReactionSpec>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn species(&mut self, name: &str) -> Result<usize, ModelError> {
        if self.species.iter().any(|s| s.name == name) {
            return Err(ModelError::DuplicateSpecies(name.to_string()));
        }
        let index = self.species.len();
        self.species.push(Species {
            name: name.to_string(),
            index,
        });
        Ok(index)
    }

    pub fn has_species(&self, name: &str) -> bool {
        self.species.iter().any(|s| s.name == name)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn param(&mut self, name: &str, value: f64) -> Result<(), ModelError> {
        if !value.is_finite() {
            return Err(ModelError::NonFiniteParameter(name.to_string()));
        }
        if self.parameters.insert(name.to_string(), value).is_some() {
            return Err(ModelError::DuplicateParameter(name.to_string()));
        }
        Ok(())
    }

    pub fn reaction(&mut self, spec: ReactionSpec) -> Result<(), ModelError> {
        if self.reactions.iter().any(|r| r.name == spec.name) {
            return Err(ModelError::DuplicateReaction(spec.name));
        }
        self.reactions.push(spec);
        Ok(())
    }

    pub fn build(self) -> Result<ReactionNetwork, ModelError> {
        let index_of = |name: &str| {
            self.species
                .iter()
                .find(|s| s.name == name)
                .map(|s| s.index)
                .ok_or_else(|| ModelError::UnknownSpecies(name.to_string()))
        };
        let m = self.species.len();
        let mut reactions = Vec::with_capacity(self.reactions.len());
        for spec in &self.reactions {
            let mut jump = vec![0i64; m];
            let mut reactants: Vec<(usize, u32)> = Vec::new();
            for (name, mult) in &spec.reactants {
                if *mult < 1 {
                    return Err(ModelError::BadCoefficient {
                        reaction: spec.name.clone(),
                        value: f64::from(*mult),
                    });
                }
                let s = index_of(name)?;
                jump[s] -= i64::from(*mult);
                match reactants.iter_mut().find(|(r, _)| *r == s) {
                    Some((_, m)) => *m += mult,
                    None => reactants.push((s, *mult)),
                }
            }
            let mut products = Vec::new();
            for (name, coefficient) in &spec.products {
                let s = index_of(name)?;
                let n = match coefficient {
                    Coefficient::Literal(n) => f64::from(*n),
                    Coefficient::Param(p) => *self
                        .parameters
                        .get(p)
                        .ok_or_else(|| ModelError::UnknownParameter(p.clone()))?,
                };
                if n < 1.0 || n.fract() != 0.0 || n > f64::from(u32::MAX) {
                    return Err(ModelError::BadCoefficient {
                        reaction: spec.name.clone(),
                        value: n,
                    });
                }
                jump[s] += n as i64;
                products.push(Product {
                    species: s,
                    coefficient: coefficient.clone(),
                });
            }
            if jump.iter().all(|&d| d == 0) {
                return Err(ModelError::EmptyJump(spec.name.clone()));
            }
            let rate = match &spec.rate {
                RateSpec::MassAction(k) => {
                    let value = k.resolve(&self.parameters)?;
                    if value < 0.0 {
                        return Err(ModelError::NegativeRate {
                            reaction: spec.name.clone(),
                            value,
                        });
                    }
                    RateLaw::MassAction(k.clone())
                }
                RateSpec::StateTable { species, entries } => {
                    let species = species
                        .iter()
                        .map(|s| index_of(s))
                        .collect::<Result<Vec<_>, _>>()?;
                    for (key, rate) in entries {
                        if key.len() != species.len() {
                            return Err(ModelError::InvalidState(format!(
                                "rate table of `{}` has a key of length {} for {} species",
                                spec.name,
                                key.len(),
                                species.len()
                            )));
                        }
                        if *rate < 0.0 || !rate.is_finite() {
                            return Err(ModelError::NegativeRate {
                                reaction: spec.name.clone(),
                                value: *rate,
                            });
                        }
                    }
                    RateLaw::StateTable {
                        species,
                        entries: entries.clone(),
                    }
                }
            };
            reactions.push(Reaction {
                name: spec.name.clone(),
                reactants,
                products,
                rate,
                jump,
            });
        }
        Ok(ReactionNetwork {
            species: self.species,
            reactions,
            parameters: self.parameters,
        })
    }
}

/// An immutable set of species and reactions with named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    parameters: IndexMap<String, f64>,
}

impl ReactionNetwork {
    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn parameters(&self) -> &IndexMap<String, f64> {
        &self.parameters
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn species_names(&self) -> Vec<&str> {
        self.species.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn propensity(&self, reaction: usize, state: &SystemState) -> Result<f64, ModelError> {
        self.reactions[reaction].propensity(state, &self.parameters)
    }

    pub fn total_propensity(&self, state: &SystemState) -> Result<f64, ModelError> {
        self.reactions
            .iter()
            .map(|r| r.propensity(state, &self.parameters))
            .sum()
    }

    /// `X + γ_r`, rejecting jumps that leave the nonnegative orthant.
    pub fn apply_jump(
        &self,
        state: &SystemState,
        reaction: usize,
    ) -> Result<SystemState, ModelError> {
        let r = &self.reactions[reaction];
        let mut next = state.counts().to_vec();
        for (i, (&x, &d)) in state.counts().iter().zip(r.jump()).enumerate() {
            next[i] = x + d;
            if next[i] < 0 {
                return Err(ModelError::InfeasibleJump {
                    reaction: r.name.clone(),
                    species: self.species[i].name.clone(),
                });
            }
        }
        Ok(SystemState(next))
    }

    /// The jump-process generator `Af(X) = Σ_r [f(X + γ_r) - f(X)] λ_r(X)`.
    ///
    /// Reactions with zero propensity are skipped, so `f` is only evaluated on
    /// states reachable in one jump.
    pub fn apply_generator<F>(&self, f: F, state: &SystemState) -> Result<f64, ModelError>
    where
        F: Fn(&SystemState) -> f64,
    {
        let here = f(state);
        let mut acc = 0.0;
        for (r, reaction) in self.reactions.iter().enumerate() {
            let rate = reaction.propensity(state, &self.parameters)?;
            if rate == 0.0 {
                continue;
            }
            let next = self.apply_jump(state, r)?;
            acc += (f(&next) - here) * rate;
        }
        Ok(acc)
    }

    /// Stoichiometric matrix, `M` rows by `|R|` columns.
    pub fn stoichiometric_matrix(&self) -> Vec<Vec<i64>> {
        (0..self.n_species())
            .map(|i| self.reactions.iter().map(|r| r.jump[i]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phage_fragment() -> ReactionNetwork {
        let mut b = NetworkBuilder::new();
        for s in ["C", "C2", "D", "D1", "D2"] {
            b.species(s).unwrap();
        }
        b.param("k1", 0.1).unwrap();
        b.param("k2", 0.1).unwrap();
        b.param("k5", 0.01).unwrap();
        b.reaction(ReactionSpec::mass_action("dim", &[("C", 2)], &[("C2", 1)], "k1"))
            .unwrap();
        b.reaction(ReactionSpec::mass_action(
            "bind",
            &[("D", 1), ("C2", 1)],
            &[("D1", 1)],
            "k2",
        ))
        .unwrap();
        b.reaction(ReactionSpec::mass_action("deg", &[("C", 1)], &[], "k5"))
            .unwrap();
        b.build().unwrap()
    }

    #[test]
    fn dimerization_counts_unordered_pairs() {
        let net = phage_fragment();
        let state = SystemState::new(vec![10, 0, 0, 0, 0]).unwrap();
        // 10 molecules form 45 distinct pairs.
        let mut pairs = 0;
        for i in 0..10 {
            for j in 0..10 {
                if i < j {
                    pairs += 1;
                }
            }
        }
        assert_eq!(pairs, 45);
        let a = net.propensity(0, &state).unwrap();
        assert!((a - 0.1 * pairs as f64).abs() < 1e-12);
    }

    #[test]
    fn heterodimer_and_boundary_propensities() {
        let net = phage_fragment();
        let s = SystemState::new(vec![0, 50, 1, 0, 0]).unwrap();
        assert!((net.propensity(1, &s).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(net.propensity(2, &s).unwrap(), 0.0);
    }

    #[test]
    fn jump_application() {
        let net = phage_fragment();
        let s = SystemState::new(vec![0, 5, 1, 0, 0]).unwrap();
        let next = net.apply_jump(&s, 1).unwrap();
        assert_eq!(next.counts(), &[0, 4, 0, 1, 0]);
        let err = net.apply_jump(&s, 2).unwrap_err();
        assert!(matches!(err, ModelError::InfeasibleJump { .. }));
    }

    #[test]
    fn builder_rejects_bad_models() {
        let mut b = NetworkBuilder::new();
        b.species("A").unwrap();
        assert!(matches!(
            b.species("A"),
            Err(ModelError::DuplicateSpecies(_))
        ));
        b.reaction(ReactionSpec::mass_action("r", &[("A", 1)], &[], "missing"))
            .unwrap();
        assert!(matches!(
            b.build(),
            Err(ModelError::UnknownParameter(_))
        ));

        let mut b = NetworkBuilder::new();
        b.species("A").unwrap();
        b.param("k", -1.0).unwrap();
        b.reaction(ReactionSpec::mass_action("r", &[("A", 1)], &[], "k"))
            .unwrap();
        assert!(matches!(b.build(), Err(ModelError::NegativeRate { .. })));

        let mut b = NetworkBuilder::new();
        b.species("A").unwrap();
        b.param("k", 1.0).unwrap();
        b.reaction(ReactionSpec::mass_action("r", &[("A", 1)], &[("A", 1)], "k"))
            .unwrap();
        assert!(matches!(b.build(), Err(ModelError::EmptyJump(_))));
    }

    #[test]
    fn burst_coefficient_from_parameter() {
        let mut b = NetworkBuilder::new();
        b.species("D1").unwrap();
        b.species("C").unwrap();
        b.param("k4", 0.3).unwrap();
        b.param("n_burst", 3.0).unwrap();
        b.reaction(ReactionSpec {
            name: "prod".into(),
            reactants: vec![("D1".into(), 1)],
            products: vec![
                ("D1".into(), Coefficient::Literal(1)),
                ("C".into(), Coefficient::Param("n_burst".into())),
            ],
            rate: RateSpec::MassAction(RateConstant::param("k4")),
        })
        .unwrap();
        let net = b.build().unwrap();
        assert_eq!(net.reactions()[0].jump(), &[0, 3]);
    }

    #[test]
    fn state_table_rate() {
        let mut b = NetworkBuilder::new();
        b.species("G").unwrap();
        b.species("Ga").unwrap();
        b.reaction(ReactionSpec {
            name: "switch".into(),
            reactants: vec![("G".into(), 1)],
            products: vec![("Ga".into(), Coefficient::Literal(1))],
            rate: RateSpec::StateTable {
                species: vec!["Ga".into()],
                entries: vec![(vec![0], 20.0)],
            },
        })
        .unwrap();
        let net = b.build().unwrap();
        let on = SystemState::new(vec![1, 0]).unwrap();
        let off = SystemState::new(vec![0, 1]).unwrap();
        assert_eq!(net.propensity(0, &on).unwrap(), 20.0);
        assert_eq!(net.propensity(0, &off).unwrap(), 0.0);
        assert_eq!(net.reactions()[0].reads(), vec![1]);
    }

    #[test]
    fn empty_network_has_zero_total_rate() {
        let mut b = NetworkBuilder::new();
        b.species("A").unwrap();
        let net = b.build().unwrap();
        let s = SystemState::new(vec![3]).unwrap();
        assert_eq!(net.total_propensity(&s).unwrap(), 0.0);
        assert_eq!(net.apply_generator(|x| x.counts()[0] as f64, &s).unwrap(), 0.0);
    }

    #[test]
    fn negative_state_is_rejected() {
        assert!(SystemState::new(vec![1, -1]).is_err());
    }
}
