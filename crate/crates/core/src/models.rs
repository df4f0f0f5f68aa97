//! The two reference systems: a λ-phage repressor circuit and the Cook gene
//! switch.

use crate::dsl::{parse_model, ModelDocument};
use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhageVariant {
    /// Everything abundant; the full deterministic limit applies.
    A,
    /// A single operator site: D, D1, D2 stay discrete.
    B,
}

/// Rates for
/// `2C <-> C2`, `D + C2 <-> D1`, `D1 + C2 <-> D2`, `D1 -> D1 + n C`, `C -> 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhageParams {
    pub variant: PhageVariant,
    pub k1f: f64,
    pub k1r: f64,
    pub k2f: f64,
    pub k2r: f64,
    pub k3f: f64,
    pub k3r: f64,
    pub k4: f64,
    pub k5: f64,
    /// Monomers released per production event. Not fixed by the biology;
    /// 1 is the smallest choice.
    pub n_burst: u32,
    pub scale: f64,
    /// Initial counts of C, C2, D, D1, D2.
    pub init: [i64; 5],
}

impl PhageParams {
    pub fn variant_a() -> Self {
        PhageParams {
            variant: PhageVariant::A,
            k1f: 0.1,
            k1r: 0.1,
            k2f: 0.1,
            k2r: 0.1,
            k3f: 0.1,
            k3r: 0.1,
            k4: 0.006,
            k5: 0.01,
            n_burst: 1,
            scale: 1000.0,
            init: [1000, 0, 1000, 0, 0],
        }
    }

    /// `k2±` is taken equal to `k1±` and `k3±`.
    pub fn variant_b() -> Self {
        PhageParams {
            variant: PhageVariant::B,
            k1f: 0.01,
            k1r: 0.01,
            k2f: 0.01,
            k2r: 0.01,
            k3f: 0.01,
            k3r: 0.01,
            k4: 0.3,
            k5: 0.005,
            n_burst: 1,
            scale: 10.0,
            init: [0, 100, 1, 0, 0],
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        let rates = [
            ("k1f", self.k1f),
            ("k1r", self.k1r),
            ("k2f", self.k2f),
            ("k2r", self.k2r),
            ("k3f", self.k3f),
            ("k3r", self.k3r),
            ("k4", self.k4),
            ("k5", self.k5),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::NegativeRate {
                    reaction: name.to_string(),
                    value: v,
                });
            }
        }
        if self.n_burst < 1 {
            return Err(ModelError::BadCoefficient {
                reaction: "production".into(),
                value: 0.0,
            });
        }
        if self.init.iter().any(|&c| c < 0) {
            return Err(ModelError::InvalidState("negative initial count".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CookParams {
    pub k1: f64,
    pub km1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Gene copies, `G + G*`.
    pub g0: i64,
}

impl Default for CookParams {
    fn default() -> Self {
        CookParams {
            k1: 20.0,
            km1: 10.0,
            k2: 4000.0,
            k3: 1.0,
            g0: 1,
        }
    }
}

fn from_text(text: &str) -> ModelDocument {
    match parse_model(text) {
        Ok(doc) => doc,
        Err(d) => unreachable!("builtin model text is invalid: {d:?}"),
    }
}

pub fn lambda_phage_model(p: &PhageParams) -> Result<ModelDocument, ModelError> {
    p.check()?;
    if !(p.scale >= 1.0 && p.scale.is_finite()) {
        return Err(ModelError::InvalidPartition(format!(
            "scale must be >= 1, got {}",
            p.scale
        )));
    }
    let (tag, partition) = match p.variant {
        PhageVariant::A => ("a", "CONTINUOUS C C2 D D1 D2 DISCRETE"),
        PhageVariant::B => ("b", "CONTINUOUS C C2 DISCRETE D D1 D2"),
    };
    let [c, c2, d, d1, d2] = p.init;
    let text = format!(
        "MODEL lambda_phage_{tag}
DESCRIPTION Repressor dimerization and binding at two operator sites
SPECIES C C2 D D1 D2
PARAMS k1f={:?} k1r={:?} k2f={:?} k2r={:?} k3f={:?} k3r={:?} k4={:?} k5={:?} n_burst={}
PARTITION {partition} SCALE {:?}
INIT C={c} C2={c2} D={d} D1={d1} D2={d2}
RXN dimerization: 2 C <-> C2 @ k1f, k1r
RXN bind1: D + C2 <-> D1 @ k2f, k2r
RXN bind2: D1 + C2 <-> D2 @ k3f, k3r
RXN production: D1 -> D1 + n_burst C @ k4
RXN degradation: C -> @ k5
",
        p.k1f, p.k1r, p.k2f, p.k2r, p.k3f, p.k3r, p.k4, p.k5, p.n_burst, p.scale
    );
    Ok(from_text(&text))
}

pub fn cook_model(p: &CookParams) -> Result<ModelDocument, ModelError> {
    for (name, v) in [("k1", p.k1), ("km1", p.km1), ("k2", p.k2), ("k3", p.k3)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ModelError::NegativeRate {
                reaction: name.to_string(),
                value: v,
            });
        }
    }
    if p.g0 < 1 {
        return Err(ModelError::InvalidState(format!(
            "need at least one gene copy, got {}",
            p.g0
        )));
    }
    let text = format!(
        "MODEL cook
DESCRIPTION Gene switching between inactive G and active G*, protein P
SPECIES G G* P
PARAMS k1={:?} km1={:?} k2={:?} k3={:?}
PARTITION CONTINUOUS P DISCRETE G G* SCALE 1.0
INIT G={} G*=0 P=0
RXN switch: G <-> G* @ k1, km1
RXN production: G* -> G* + P @ k2
RXN degradation: P -> @ k3
",
        p.k1, p.km1, p.k2, p.k3, p.g0
    );
    Ok(from_text(&text))
}

/// Long-run mean of `P`: `G0 (k2 / k3) k1 / (k1 + k-1)`.
pub fn cook_stationary_mean(p: &CookParams) -> Result<f64, ModelError> {
    if !(p.k3 > 0.0) {
        return Err(ModelError::InvalidState(
            "no stationary mean without degradation (k3 = 0)".into(),
        ));
    }
    if p.k1 == 0.0 {
        return Ok(0.0);
    }
    Ok(p.g0 as f64 * p.k2 / p.k3 * p.k1 / (p.k1 + p.km1))
}

pub const BUILTIN_NAMES: [&str; 3] = ["cook", "lambda_phage_a", "lambda_phage_b"];

/// Builtin model by name, with default parameters.
pub fn builtin(name: &str) -> Option<ModelDocument> {
    match name {
        "cook" => cook_model(&CookParams::default()).ok(),
        "lambda_phage_a" | "phage_a" => lambda_phage_model(&PhageParams::variant_a()).ok(),
        "lambda_phage_b" | "phage_b" => lambda_phage_model(&PhageParams::variant_b()).ok(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conservation::detect_conservation_laws;
    use crate::dsl::{serialize_model, validate_model};
    use crate::partition::{class_counts, classify_reactions};
    use crate::pdmp::HybridModel;

    #[test]
    fn phage_structure() {
        for p in [PhageParams::variant_a(), PhageParams::variant_b()] {
            let doc = lambda_phage_model(&p).unwrap();
            assert_eq!(doc.network.n_species(), 5);
            assert_eq!(doc.network.reactions().len(), 8);
            let laws = detect_conservation_laws(&doc.network);
            assert!(laws.contains(&vec![0, 0, 1, 1, 1]), "{laws:?}");
            assert!(validate_model(&doc, true).is_empty());
        }
        let a = lambda_phage_model(&PhageParams::variant_a()).unwrap();
        assert_eq!(a.network.parameters()["k4"], 0.006);
        assert_eq!(a.network.parameters()["k5"], 0.01);
        assert_eq!(a.partition.unwrap().scale(), 1000.0);
        let b = lambda_phage_model(&PhageParams::variant_b()).unwrap();
        assert_eq!(b.network.parameters()["k4"], 0.3);
        assert_eq!(b.network.parameters()["k5"], 0.005);
        assert_eq!(&b.initial.counts()[2..], &[1, 0, 0]);
    }

    #[test]
    fn phage_b_classes() {
        let doc = builtin("lambda_phage_b").unwrap();
        let classes = classify_reactions(&doc.network, doc.partition.as_ref().unwrap());
        // 2C <-> C2 and C -> 0 never touch the operator.
        assert_eq!(class_counts(&classes), (3, 0, 5));
    }

    #[test]
    fn cook_structure() {
        let doc = builtin("cook").unwrap();
        assert_eq!(doc.network.n_species(), 3);
        assert_eq!(doc.network.reactions().len(), 4);
        assert!(detect_conservation_laws(&doc.network).contains(&vec![1, 1, 0]));
        assert_eq!(doc.initial.counts(), &[1, 0, 0]);
        let classes = classify_reactions(&doc.network, doc.partition.as_ref().unwrap());
        assert_eq!(class_counts(&classes), (1, 2, 1));
        assert!(validate_model(&doc, true).is_empty());
        let again = crate::dsl::parse_model(&serialize_model(&doc)).unwrap();
        assert_eq!(again.network.reactions().len(), 4);
        assert_eq!(again.network.n_species(), 3);
    }

    #[test]
    fn stationary_mean() {
        let p = CookParams::default();
        assert!((cook_stationary_mean(&p).unwrap() - 8000.0 / 3.0).abs() < 1e-9);
        let sym = CookParams {
            k1: 7.0,
            km1: 7.0,
            ..p.clone()
        };
        assert_eq!(cook_stationary_mean(&sym).unwrap(), 2000.0);
        let off = CookParams { k1: 0.0, ..p.clone() };
        assert_eq!(cook_stationary_mean(&off).unwrap(), 0.0);
        let no_decay = CookParams { k3: 0.0, ..p };
        assert!(cook_stationary_mean(&no_decay).is_err());
    }

    #[test]
    fn binding_displaces_dimer_by_one_over_n() {
        let p = PhageParams {
            scale: 100.0,
            ..PhageParams::variant_b()
        };
        let doc = lambda_phage_model(&p).unwrap();
        let m = HybridModel::new(&doc.network, doc.partition.as_ref().unwrap()).unwrap();
        let bind = doc
            .network
            .reactions()
            .iter()
            .position(|r| r.name == "bind1_fwd")
            .unwrap();
        let mut x_c = vec![0.0, 0.50];
        let mut x_d = vec![1, 0, 0];
        m.apply_hybrid_jump(&mut x_c, &mut x_d, bind, true).unwrap();
        assert_eq!(x_d, vec![0, 1, 0]);
        assert!((x_c[1] - 0.49).abs() < 1e-15);

        let mut x_c = vec![0.0, 0.50];
        let mut x_d = vec![1, 0, 0];
        m.apply_hybrid_jump(&mut x_c, &mut x_d, bind, false).unwrap();
        assert_eq!(x_c, vec![0.0, 0.50]);
    }

    #[test]
    fn shipped_files_match_builtins() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models");
        for name in BUILTIN_NAMES {
            let shipped = std::fs::read_to_string(format!("{dir}/{name}.rxn")).unwrap();
            assert_eq!(shipped, serialize_model(&builtin(name).unwrap()), "{name}");
        }
    }
}
