//! Multiscale split of species into abundant (continuous) and rare
//! (discrete) sets, and the induced classification of reactions.

use std::fmt;

use crate::error::ModelError;
use crate::network::ReactionNetwork;

/// Assignment of every species to the continuous set `C` (counts of order
/// `N`, tracked as concentrations `x = X / N`) or the discrete set `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    continuous: Vec<usize>,
    discrete: Vec<usize>,
    scale: f64,
}

impl Partition {
    pub fn new(
        n_species: usize,
        continuous: Vec<usize>,
        discrete: Vec<usize>,
        scale: f64,
    ) -> Result<Self, ModelError> {
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(ModelError::InvalidPartition(format!(
                "scale must be a finite number >= 1, got {scale}"
            )));
        }
        let mut seen = vec![false; n_species];
        for &s in continuous.iter().chain(&discrete) {
            if s >= n_species {
                return Err(ModelError::InvalidPartition(format!(
                    "species index {s} out of range"
                )));
            }
            if seen[s] {
                return Err(ModelError::InvalidPartition(format!(
                    "species index {s} assigned twice"
                )));
            }
            seen[s] = true;
        }
        if let Some(missing) = seen.iter().position(|&b| !b) {
            return Err(ModelError::InvalidPartition(format!(
                "species index {missing} is in neither set"
            )));
        }
        let mut continuous = continuous;
        let mut discrete = discrete;
        continuous.sort_unstable();
        discrete.sort_unstable();
        Ok(Partition {
            continuous,
            discrete,
            scale,
        })
    }

    /// Builds a partition from species names.
    pub fn from_names(
        network: &ReactionNetwork,
        continuous: &[&str],
        discrete: &[&str],
        scale: f64,
    ) -> Result<Self, ModelError> {
        let lookup = |names: &[&str]| {
            names
                .iter()
                .map(|n| {
                    network
                        .species_index(n)
                        .ok_or_else(|| ModelError::UnknownSpecies(n.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Partition::new(
            network.n_species(),
            lookup(continuous)?,
            lookup(discrete)?,
            scale,
        )
    }

    pub fn all_continuous(n_species: usize, scale: f64) -> Result<Self, ModelError> {
        Partition::new(n_species, (0..n_species).collect(), Vec::new(), scale)
    }

    pub fn all_discrete(n_species: usize) -> Self {
        Partition {
            continuous: Vec::new(),
            discrete: (0..n_species).collect(),
            scale: 1.0,
        }
    }

    /// Species indices in `C`, ascending.
    pub fn continuous(&self) -> &[usize] {
        &self.continuous
    }

    /// Species indices in `D`, ascending.
    pub fn discrete(&self) -> &[usize] {
        &self.discrete
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn n_species(&self) -> usize {
        self.continuous.len() + self.discrete.len()
    }

    pub fn is_continuous(&self, species: usize) -> bool {
        self.continuous.binary_search(&species).is_ok()
    }

    /// Position of a species inside the `C` or `D` sub-vector.
    pub fn slot(&self, species: usize) -> Slot {
        match self.continuous.binary_search(&species) {
            Ok(i) => Slot::Continuous(i),
            Err(_) => Slot::Discrete(
                self.discrete
                    .binary_search(&species)
                    .expect("partition covers every species"),
            ),
        }
    }

    /// Splits integer counts into `(x_C, X_D)` with `x_C = X_C / N`.
    pub fn to_hybrid(&self, counts: &[i64]) -> HybridState {
        HybridState {
            x_c: self
                .continuous
                .iter()
                .map(|&s| counts[s] as f64 / self.scale)
                .collect(),
            x_d: self.discrete.iter().map(|&s| counts[s]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Continuous(usize),
    Discrete(usize),
}

/// Hybrid state `x = (x_C, X_D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub x_c: Vec<f64>,
    pub x_d: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReactionClass {
    /// Reads and writes only continuous species.
    Rc,
    /// Reads and writes only discrete species.
    Rd,
    /// Everything else.
    Rdc,
}

impl fmt::Display for ReactionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReactionClass::Rc => "RC",
            ReactionClass::Rd => "RD",
            ReactionClass::Rdc => "RDC",
        })
    }
}

pub fn classify_reactions(network: &ReactionNetwork, partition: &Partition) -> Vec<ReactionClass> {
    network
        .reactions()
        .iter()
        .map(|r| {
            let involved: Vec<usize> = r.touches().chain(r.reads()).collect();
            if involved.iter().all(|&s| partition.is_continuous(s)) {
                ReactionClass::Rc
            } else if involved.iter().all(|&s| !partition.is_continuous(s)) {
                ReactionClass::Rd
            } else {
                ReactionClass::Rdc
            }
        })
        .collect()
}

/// Number of reactions in each class, as `(RC, RD, RDC)`.
pub fn class_counts(classes: &[ReactionClass]) -> (usize, usize, usize) {
    classes.iter().fold((0, 0, 0), |(c, d, dc), class| match class {
        ReactionClass::Rc => (c + 1, d, dc),
        ReactionClass::Rd => (c, d + 1, dc),
        ReactionClass::Rdc => (c, d, dc + 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_must_cover_species_exactly_once() {
        assert!(Partition::new(3, vec![0], vec![1, 2], 10.0).is_ok());
        assert!(Partition::new(3, vec![0], vec![1], 10.0).is_err());
        assert!(Partition::new(2, vec![0, 1], vec![1], 10.0).is_err());
        assert!(Partition::new(2, vec![0, 1], vec![], 0.5).is_err());
    }

    #[test]
    fn slots_and_hybrid_split() {
        let p = Partition::new(3, vec![2], vec![0, 1], 100.0).unwrap();
        assert_eq!(p.slot(2), Slot::Continuous(0));
        assert_eq!(p.slot(1), Slot::Discrete(1));
        let h = p.to_hybrid(&[1, 0, 250]);
        assert_eq!(h.x_c, vec![2.5]);
        assert_eq!(h.x_d, vec![1, 0]);
    }
}
