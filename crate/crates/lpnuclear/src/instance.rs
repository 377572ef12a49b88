//! Declarative JSON descriptions of operator instances.
//!
//! An instance file names a measure space, a transformation, a weight, and
//! the exponent pair, plus optional analysis options and an expected outcome
//! for regression use. Parsing is strict: unknown keys are rejected, and
//! structural defects surface with the offending atom or block named.
//!
//! Defaults are two simple rules. A missing `phi` is the identity; inside a
//! given `phi`, a missing `atoms` list is the identity on explicit atoms and
//! a missing `blocks` list leaves every block in place. A missing `u` is the
//! constant weight 1; inside a given `u`, every part left unnamed is zero.

use crate::error::{Error, Result};
use crate::measure::{Block, BlockId, MeasureSpace, SimpleFunction};
use crate::nuclearity::Verdict;
use crate::operator::WeightedCompOp;
use crate::series::{ClosedFormFamily, TailValues};
use crate::transform::{TailMap, Transformation};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<WeightSpec>,
    pub p: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<AnalysisOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<ExpectedOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<ClosedFormFamily>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub id: u32,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub id: u32,
    pub mass: f64,
    /// Ordered fragment partition; omitted means the single-fragment
    /// partition of the whole block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragments: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    /// Source-target id pairs, one per explicit atom. Omitted = identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(u32, u32)>>,
    /// Source-target block id pairs; unnamed blocks stay in place.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<(u32, u32)>>,
    /// Required exactly when the space has a tail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailMap>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    /// Values aligned with the space's atom list. Omitted = zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<f64>>,
    /// Per-block fragment values; unnamed blocks carry zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockValuesSpec>,
    /// Closed-form values on the tail. Omitted = zero. The coefficient may be
    /// negative; weights are signed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<ClosedFormFamily>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockValuesSpec {
    pub id: u32,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Recorded outcome for regression instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedOutcome {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Parses an instance file. Syntax errors carry the line and column.
pub fn parse_spec(text: &str) -> Result<InstanceSpec> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn serialize_spec(spec: &InstanceSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("spec serializes");
    s.push('\n');
    s
}

impl InstanceSpec {
    pub fn build_space(&self) -> Result<MeasureSpace> {
        let atoms = self.space.atoms.iter().map(|a| (a.id, a.mass)).collect::<Vec<_>>();
        let mut space = MeasureSpace::atomic(&atoms);
        for b in &self.space.blocks {
            let block = match &b.fragments {
                Some(f) => Block::with_fragments(b.id, b.mass, f.clone()),
                None => Block::new(b.id, b.mass),
            };
            space = space.with_block(block);
        }
        if let Some(fam) = &self.space.tail {
            space = space.with_tail(fam.clone());
        }
        space.validated()
    }

    /// Builds the full operator, applying the documented defaults.
    pub fn build(&self) -> Result<WeightedCompOp> {
        let space = self.build_space()?;
        let phi = match &self.phi {
            None => Transformation::identity(&space),
            Some(ps) => {
                let atom_pairs = match &ps.atoms {
                    Some(pairs) => pairs.clone(),
                    None => self.space.atoms.iter().map(|a| (a.id, a.id)).collect(),
                };
                let block_pairs = ps.blocks.clone().unwrap_or_default();
                Transformation::new(&space, &atom_pairs, &block_pairs, ps.tail)?
            }
        };
        let u = match &self.u {
            None => SimpleFunction::constant(&space, 1.0),
            Some(ws) => {
                let mut u = match &ws.atoms {
                    Some(vals) => SimpleFunction::from_atom_values(&space, vals.clone())?,
                    None => SimpleFunction::zero(&space),
                };
                for bv in &ws.blocks {
                    u = u.with_block_values(&space, BlockId(bv.id), bv.values.clone())?;
                }
                if let Some(fam) = &ws.tail {
                    if !space.has_tail() {
                        return Err(Error::Validation(
                            "weight has tail values but the space has no tail".into(),
                        ));
                    }
                    u = u.with_tail(TailValues::from_family(fam));
                }
                u
            }
        };
        WeightedCompOp::new(space, phi, u, self.p, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuclearity::check_nuclear;

    #[test]
    fn minimal_spec_defaults_to_the_identity_embedding() {
        let spec = parse_spec(r#"{"space":{"atoms":[{"id":1,"mass":1.0}]},"p":1.0,"q":1.0}"#)
            .unwrap();
        let op = spec.build().unwrap();
        assert!(op.phi().is_identity(op.space()));
        assert_eq!(op.weight().atom_values(), &[1.0]);
    }

    #[test]
    fn zero_mass_is_rejected_naming_the_atom() {
        let spec = parse_spec(r#"{"space":{"atoms":[{"id":7,"mass":0.0}]},"p":1.0,"q":1.0}"#)
            .unwrap();
        match spec.build() {
            Err(Error::Validation(msg)) => assert!(msg.contains('7'), "message: {msg}"),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        match parse_spec("{\n  \"space\": nonsense\n}") {
            Err(Error::Parse(msg)) => assert!(msg.contains("line 2"), "message: {msg}"),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"space":{"atoms":[{"id":1,"mass":1.0}]},"p":1.0,"q":1.0,"bogus":3}"#;
        assert!(matches!(parse_spec(text), Err(Error::Parse(_))));
    }

    #[test]
    fn fan_in_spec_analyzes_to_the_hand_computed_bound() {
        let text = r#"{
            "name": "fan-in",
            "space": {"atoms": [
                {"id": 1, "mass": 1.0},
                {"id": 2, "mass": 2.0},
                {"id": 3, "mass": 0.5}
            ]},
            "phi": {"atoms": [[1, 1], [2, 1], [3, 2]]},
            "u": {"atoms": [1.0, 1.0, 2.0]},
            "p": 1.0,
            "q": 1.0
        }"#;
        let spec = parse_spec(text).unwrap();
        let op = spec.build().unwrap();
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.nuclear_bound(), Some(3.5));
    }

    #[test]
    fn specs_round_trip_through_serialization() {
        let text = r#"{
            "name": "full-featured",
            "space": {
                "atoms": [{"id": 1, "mass": 1.0}, {"id": 2, "mass": 2.0}],
                "blocks": [{"id": 1, "mass": 0.5, "fragments": [0.25, 0.25]},
                           {"id": 2, "mass": 1.0, "fragments": [0.5, 0.5]}],
                "tail": {"kind": "geometric", "coeff": 1.0, "base": 0.5}
            },
            "phi": {
                "atoms": [[1, 2], [2, 2]],
                "blocks": [[1, 2]],
                "tail": {"kind": "shift_by", "k": 2}
            },
            "u": {
                "atoms": [0.5, -1.0],
                "blocks": [{"id": 2, "values": [1.0, 0.0]}],
                "tail": {"kind": "power_geometric", "coeff": -2.0, "base": 0.75, "decay": 1.0}
            },
            "p": 2.0,
            "q": 3.0,
            "options": {"truncation": 32, "oracle": true, "samples": 4, "seed": 11},
            "expected": {"verdict": "not_nuclear"}
        }"#;
        let spec = parse_spec(text).unwrap();
        spec.build().unwrap();
        let round = parse_spec(&serialize_spec(&spec)).unwrap();
        assert_eq!(round, spec);
    }

    #[test]
    fn weight_defaults_are_zero_inside_an_explicit_u() {
        let text = r#"{
            "space": {
                "atoms": [{"id": 1, "mass": 1.0}],
                "blocks": [{"id": 1, "mass": 1.0}],
                "tail": {"kind": "geometric", "coeff": 1.0, "base": 0.5}
            },
            "phi": {"tail": {"kind": "identity"}},
            "u": {"atoms": [3.0]},
            "p": 1.0,
            "q": 1.0
        }"#;
        let op = parse_spec(text).unwrap().build().unwrap();
        assert_eq!(op.weight().atom_values(), &[3.0]);
        assert_eq!(op.weight().block_values()[0], vec![0.0]);
        assert!(op.weight().tail().is_none());
    }

    #[test]
    fn weight_tail_without_a_space_tail_is_rejected() {
        let text = r#"{
            "space": {"atoms": [{"id": 1, "mass": 1.0}]},
            "u": {"atoms": [1.0], "tail": {"kind": "constant", "value": 1.0}},
            "p": 1.0,
            "q": 1.0
        }"#;
        assert!(matches!(parse_spec(text).unwrap().build(), Err(Error::Validation(_))));
    }
}
