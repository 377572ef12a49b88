//! Nuclearity criteria for weighted composition operators.
//!
//! The decision always has two ingredients: the weight must vanish on the
//! preimage of the non-atomic part, and an atom series built from the density
//! J must converge. The series shape depends on how p and q compare; the
//! exponent bookkeeping lives in [`ExponentRegime`].

use crate::error::{Error, Result};
use crate::measure::{MeasureSpace, SimpleFunction};
use crate::operator::WeightedCompOp;
use crate::series::{
    series_judge, JudgeOptions, SeriesVerdict, SumTolerance, TailValues, TermSequence,
};
use crate::transform::{j_function, radon_nikodym};
use serde::{Deserialize, Serialize};

/// Mass tolerance below which the weight counts as vanishing on the
/// non-atomic part.
pub const NONATOMIC_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeCase {
    /// p = q: terms J_p(A_n)^(1/p).
    Equal,
    /// q < p: terms J_q(A_n)^(1/q) * mu(A_n)^(1/r) with 1/r = 1/q - 1/p.
    QLessP,
    /// p < q: terms J_q(A_n)^(1/q) / mu(A_n)^(1/s) with 1/s = 1/p - 1/q.
    PLessQ,
}

/// Exponent bookkeeping for one (p, q) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRegime {
    pub p: f64,
    pub q: f64,
    pub case: RegimeCase,
    /// Defined for q < p.
    pub r: Option<f64>,
    /// Defined for p < q.
    pub s: Option<f64>,
    /// 1/p' = 1 - 1/p. Zero when p = 1 (the conjugate exponent is infinity).
    pub inv_p_conj: f64,
    /// 1/q' = 1 - 1/q.
    pub inv_q_conj: f64,
}

pub fn regime(p: f64, q: f64) -> ExponentRegime {
    let case = if p == q {
        RegimeCase::Equal
    } else if q < p {
        RegimeCase::QLessP
    } else {
        RegimeCase::PLessQ
    };
    let r = (q < p).then(|| 1.0 / (1.0 / q - 1.0 / p));
    let s = (p < q).then(|| 1.0 / (1.0 / p - 1.0 / q));
    ExponentRegime { p, q, case, r, s, inv_p_conj: 1.0 - 1.0 / p, inv_q_conj: 1.0 - 1.0 / q }
}

impl ExponentRegime {
    /// Exponent of mu(A_n) in the criterion term, equal to 1/p' - 1/q'.
    /// Evaluates to 0 (p = q), 1/r (q < p), or -1/s (p < q).
    pub fn mass_exponent(&self) -> f64 {
        self.inv_p_conj - self.inv_q_conj
    }

    /// Criterion term for one atom with density value `j` and mass `mass`,
    /// written in the regime's literal form.
    pub fn term(&self, j: f64, mass: f64) -> f64 {
        match self.case {
            RegimeCase::Equal => j.powf(1.0 / self.p),
            RegimeCase::QLessP => j.powf(1.0 / self.q) * mass.powf(1.0 / self.r.unwrap()),
            RegimeCase::PLessQ => j.powf(1.0 / self.q) / mass.powf(1.0 / self.s.unwrap()),
        }
    }

    /// Criterion terms along the tail, as a closed-form sequence.
    pub fn tail_terms(&self, j_tail: &TailValues, masses: &TailValues) -> TailValues {
        let jq = j_tail.abs_powf(1.0 / self.q);
        match self.case {
            RegimeCase::Equal => jq,
            RegimeCase::QLessP => jq.mul(&masses.abs_powf(1.0 / self.r.unwrap())),
            RegimeCase::PLessQ => jq.mul(&masses.abs_powf(-1.0 / self.s.unwrap())),
        }
    }
}

/// The criterion term sequence of an operator: one value per explicit atom in
/// listing order, then a closed-form tail.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionTerms {
    pub regime: ExponentRegime,
    pub explicit: Vec<f64>,
    pub tail: Option<TailValues>,
}

impl CriterionTerms {
    pub fn sequence(&self) -> TermSequence {
        match &self.tail {
            Some(t) if !t.is_zero() => {
                TermSequence::WithTail { prefix: self.explicit.clone(), tail: t.clone() }
            }
            _ => TermSequence::Finite(self.explicit.clone()),
        }
    }

    /// First k terms across the explicit prefix and the tail.
    pub fn preview(&self, k: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self.explicit.iter().copied().take(k).collect();
        let mut n = 1u64;
        while out.len() < k {
            match &self.tail {
                Some(t) => out.push(t.value(n)),
                None => break,
            }
            n += 1;
        }
        out
    }
}

/// Criterion terms computed from the general density J_q.
pub fn criterion_terms(op: &WeightedCompOp) -> Result<CriterionTerms> {
    let reg = regime(op.p(), op.q());
    let j = j_function(op.space(), op.phi(), op.weight(), op.q())?;
    terms_from_density(op.space(), &j, &reg, 1.0)
}

/// Shared assembly: terms from a target-side density, with `power` applied to
/// the density first (1 for J itself, q for a base like |u| or h that enters
/// as base^q).
fn terms_from_density(
    space: &MeasureSpace,
    density: &SimpleFunction,
    reg: &ExponentRegime,
    power: f64,
) -> Result<CriterionTerms> {
    let explicit = space
        .atoms()
        .iter()
        .zip(density.atom_values())
        .map(|(a, &d)| reg.term(d.abs().powf(power), a.mass))
        .collect();
    let tail = match (space.tail_masses(), density.tail()) {
        (Some(masses), Some(dt)) => Some(reg.tail_terms(&dt.abs_powf(power), &masses)),
        _ => None,
    };
    Ok(CriterionTerms { regime: *reg, explicit, tail })
}

/// Total mass of the preimage of the non-atomic part intersected with the
/// support of the weight. Nuclearity (and compactness) require this to vanish.
/// Blocks only ever map to blocks here, so this is the weight's support mass
/// on the block fragments.
pub fn nonatomic_offending_mass(op: &WeightedCompOp) -> f64 {
    let mut total = 0.0f64;
    for (b, vals) in op.space().blocks().iter().zip(op.weight().block_values()) {
        for (&m, &v) in b.fragments.iter().zip(vals) {
            if v != 0.0 {
                total += m;
            }
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Nuclear,
    NotNuclear,
    Inconclusive,
}

/// Full nuclearity decision for one operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NuclearityReport {
    pub regime: ExponentRegime,
    pub nonatomic_offending_mass: f64,
    pub series: SeriesVerdict,
    pub verdict: Verdict,
    pub terms_preview: Vec<f64>,
}

impl NuclearityReport {
    /// Certified nuclear norm bound, present exactly when the verdict is
    /// Nuclear.
    pub fn nuclear_bound(&self) -> Option<f64> {
        if self.verdict == Verdict::Nuclear {
            self.series.bound()
        } else {
            None
        }
    }
}

fn verdict_from(mass: f64, series: &SeriesVerdict) -> Verdict {
    if mass > NONATOMIC_TOL {
        return Verdict::NotNuclear;
    }
    match series {
        SeriesVerdict::Converges { .. } => Verdict::Nuclear,
        SeriesVerdict::Diverges { .. } => Verdict::NotNuclear,
        SeriesVerdict::Inconclusive { .. } => Verdict::Inconclusive,
    }
}

pub fn check_nuclear(op: &WeightedCompOp) -> Result<NuclearityReport> {
    let terms = criterion_terms(op)?;
    let series = series_judge(&terms.sequence(), &JudgeOptions::default())?;
    let mass = nonatomic_offending_mass(op);
    let verdict = verdict_from(mass, &series);
    Ok(NuclearityReport {
        regime: terms.regime,
        nonatomic_offending_mass: mass,
        series,
        verdict,
        terms_preview: terms.preview(8),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialKind {
    /// phi is the identity: W = M_u, and the criterion reads off |u| directly.
    Multiplication,
    /// u is identically 1: W = C_phi, and the criterion reads off the
    /// Radon-Nikodym derivative h.
    Composition,
}

/// Nuclearity decided through the specialized formulas, with the deviation
/// from the general density route recorded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecialCaseReport {
    pub kind: SpecialKind,
    pub report: NuclearityReport,
    /// Max relative gap between specialized and general criterion terms over
    /// all explicit atoms and a leading tail window.
    pub max_term_deviation: f64,
}

fn weight_is_unit(op: &WeightedCompOp) -> bool {
    let u = op.weight();
    u.atom_values().iter().all(|&v| v == 1.0)
        && u.block_values().iter().all(|vs| vs.iter().all(|&v| v == 1.0))
        && (!op.space().has_tail() || u.tail().and_then(|t| t.as_constant()) == Some(1.0))
}

pub fn check_special_cases(op: &WeightedCompOp) -> Result<SpecialCaseReport> {
    let is_mult = op.phi().is_identity(op.space());
    let is_comp = weight_is_unit(op);
    if !is_mult && !is_comp {
        return Err(Error::NotSpecialCase);
    }
    let reg = regime(op.p(), op.q());
    // Multiplication: J_q = |u|^q, so the density base is |u| raised to q.
    // Composition: J_q = h exactly, entering with power 1.
    let (kind, specialized) = if is_mult {
        (SpecialKind::Multiplication, terms_from_density(op.space(), op.weight(), &reg, op.q())?)
    } else {
        let h = radon_nikodym(op.space(), op.phi())?;
        (SpecialKind::Composition, terms_from_density(op.space(), &h, &reg, 1.0)?)
    };
    let general = criterion_terms(op)?;

    let mut dev = 0.0f64;
    for (a, b) in specialized.explicit.iter().zip(&general.explicit) {
        dev = dev.max(rel_gap(*a, *b));
    }
    for n in 1..=64u64 {
        let a = specialized.tail.as_ref().map_or(0.0, |t| t.value(n));
        let b = general.tail.as_ref().map_or(0.0, |t| t.value(n));
        dev = dev.max(rel_gap(a, b));
    }

    let series = series_judge(&specialized.sequence(), &JudgeOptions::default())?;
    let mass = nonatomic_offending_mass(op);
    let verdict = verdict_from(mass, &series);
    Ok(SpecialCaseReport {
        kind,
        report: NuclearityReport {
            regime: reg,
            nonatomic_offending_mass: mass,
            series,
            verdict,
            terms_preview: specialized.preview(8),
        },
        max_term_deviation: dev,
    })
}

fn rel_gap(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// A necessary compactness condition in the operator's regime, evaluated on
/// the closed-form data. Nuclear operators must pass it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub case: RegimeCase,
    pub statement: String,
    pub value: f64,
    pub status: ConditionStatus,
}

pub fn compactness_limits(op: &WeightedCompOp) -> Result<CompactnessReport> {
    let reg = regime(op.p(), op.q());
    let j = j_function(op.space(), op.phi(), op.weight(), op.q())?;
    match reg.case {
        RegimeCase::Equal => {
            let limit = j.tail().map_or(0.0, |t| t.limit());
            let status = if limit == 0.0 { ConditionStatus::Pass } else { ConditionStatus::Fail };
            Ok(CompactnessReport {
                case: reg.case,
                statement: "J_p(A_n) -> 0 along the atom tail".into(),
                value: limit,
                status,
            })
        }
        RegimeCase::QLessP => {
            let rq = reg.r.unwrap() / reg.q;
            let mut head = 0.0f64;
            for (a, &jv) in op.space().atoms().iter().zip(j.atom_values()) {
                head += jv.abs().powf(rq) * a.mass;
            }
            let tail = match (op.space().tail_masses(), j.tail()) {
                (Some(masses), Some(jt)) => Some(jt.abs_powf(rq).mul(&masses)),
                _ => None,
            };
            let statement = "sum of J_q(A_n)^(r/q) mu(A_n) is finite".to_string();
            match tail {
                Some(t) if !t.is_zero() => match t.sum(&SumTolerance::default()) {
                    Ok(s) => Ok(CompactnessReport {
                        case: reg.case,
                        statement,
                        value: head + s.upper,
                        status: ConditionStatus::Pass,
                    }),
                    Err(Error::DivergentTail(_)) => Ok(CompactnessReport {
                        case: reg.case,
                        statement,
                        value: f64::INFINITY,
                        status: ConditionStatus::Fail,
                    }),
                    Err(e) => Err(e),
                },
                _ => Ok(CompactnessReport {
                    case: reg.case,
                    statement,
                    value: head,
                    status: ConditionStatus::Pass,
                }),
            }
        }
        RegimeCase::PLessQ => {
            let qs = reg.q / reg.s.unwrap();
            let limit = match (op.space().tail_masses(), j.tail()) {
                (Some(masses), Some(jt)) => jt.mul(&masses.abs_powf(-qs)).limit(),
                _ => 0.0,
            };
            let status = if limit == 0.0 { ConditionStatus::Pass } else { ConditionStatus::Fail };
            Ok(CompactnessReport {
                case: reg.case,
                statement: "J_q(A_n) / mu(A_n)^(q/s) -> 0 along the atom tail".into(),
                value: limit,
                status,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Block;
    use crate::series::ClosedFormFamily;
    use crate::transform::{TailMap, Transformation};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    fn tail_space(base: f64) -> MeasureSpace {
        MeasureSpace::new(vec![], vec![], Some(ClosedFormFamily::Geometric { coeff: 1.0, base }))
    }

    fn identity_op(space: MeasureSpace, u: SimpleFunction, p: f64, q: f64) -> WeightedCompOp {
        WeightedCompOp::multiplication(space, u, p, q).unwrap()
    }

    #[test]
    fn regime_exponent_algebra() {
        let r32 = regime(3.0, 2.0);
        assert_eq!(r32.case, RegimeCase::QLessP);
        assert!(close(r32.r.unwrap(), 6.0, 1e-15));
        assert!(close(r32.mass_exponent(), 1.0 / 6.0, 1e-15));

        let r23 = regime(2.0, 3.0);
        assert_eq!(r23.case, RegimeCase::PLessQ);
        assert!(close(r23.s.unwrap(), 6.0, 1e-15));
        assert!(close(r23.mass_exponent(), -1.0 / 6.0, 1e-15));

        let r11 = regime(1.0, 1.0);
        assert_eq!(r11.case, RegimeCase::Equal);
        assert_eq!(r11.inv_p_conj, 0.0);
        assert_eq!(r11.mass_exponent(), 0.0);
    }

    #[test]
    fn finite_atomic_instance_is_nuclear_with_exact_bound() {
        let space = MeasureSpace::atomic(&[(1, 1.0), (2, 2.0), (3, 0.5)]);
        let phi = Transformation::new(&space, &[(1, 1), (2, 1), (3, 2)], &[], None).unwrap();
        let u = SimpleFunction::from_atom_values(&space, vec![1.0, 1.0, 2.0]).unwrap();
        let op = WeightedCompOp::new(space, phi, u, 1.0, 1.0).unwrap();
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.verdict, Verdict::Nuclear);
        // J_1 = (3, 0.5, 0): the bound is the plain sum 3.5.
        assert_eq!(report.nuclear_bound(), Some(3.5));
        assert_eq!(report.terms_preview, vec![3.0, 0.5, 0.0]);
    }

    #[test]
    fn constant_density_on_a_countable_tail_is_not_nuclear() {
        let space = tail_space(0.5);
        let u = SimpleFunction::constant(&space, 1.0);
        let op = identity_op(space, u, 2.0, 2.0);
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.verdict, Verdict::NotNuclear);
        assert!(matches!(report.series, SeriesVerdict::Diverges { .. }));
        // Not even compact: the density does not vanish along the tail.
        let comp = compactness_limits(&op).unwrap();
        assert_eq!(comp.status, ConditionStatus::Fail);
        assert_eq!(comp.value, 1.0);
    }

    #[test]
    fn q_less_p_terms_carry_the_mass_exponent() {
        // Masses 2^-n, u = 1, phi = identity, p = 3, q = 2: r = 6 and the
        // terms are 2^(-n/6), summing to 1 / (2^(1/6) - 1).
        let space = tail_space(0.5);
        let u = SimpleFunction::constant(&space, 1.0);
        let op = identity_op(space, u, 3.0, 2.0);
        let terms = criterion_terms(&op).unwrap();
        let t = terms.tail.as_ref().unwrap();
        assert!(close(t.value(2), 0.5f64.powf(2.0 / 6.0), 1e-14));
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.verdict, Verdict::Nuclear);
        let expected = 1.0 / (2.0f64.powf(1.0 / 6.0) - 1.0);
        assert!(close(report.nuclear_bound().unwrap(), expected, 1e-12));
        // The compactness limit series sum J^(r/q) mu = sum 2^-n = 1.
        let comp = compactness_limits(&op).unwrap();
        assert_eq!(comp.status, ConditionStatus::Pass);
        assert!(close(comp.value, 1.0, 1e-12));
    }

    #[test]
    fn p_less_q_terms_divide_by_the_mass_power() {
        // Masses 2^-n, u(n) = 2^-n, identity, p = 2, q = 3: s = 6 and the
        // terms are 2^-n * 2^(n/6) = 2^(-5n/6).
        let space = tail_space(0.5);
        let u = SimpleFunction::zero(&space)
            .with_tail(TailValues::from_family(&ClosedFormFamily::Geometric {
                coeff: 1.0,
                base: 0.5,
            }));
        let op = identity_op(space, u, 2.0, 3.0);
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.verdict, Verdict::Nuclear);
        let b = 0.5f64.powf(5.0 / 6.0);
        assert!(close(report.nuclear_bound().unwrap(), b / (1.0 - b), 1e-12));
        let comp = compactness_limits(&op).unwrap();
        assert_eq!(comp.status, ConditionStatus::Pass);
    }

    #[test]
    fn weight_on_the_nonatomic_part_blocks_nuclearity() {
        let space = MeasureSpace::atomic(&[(1, 1.0)]).with_block(Block::new(1, 0.25));
        let u = SimpleFunction::from_atom_values(&space, vec![0.5])
            .unwrap()
            .with_block_values(&space, crate::measure::BlockId(1), vec![2.0])
            .unwrap();
        let op = identity_op(space, u, 2.0, 2.0);
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.verdict, Verdict::NotNuclear);
        assert!(close(report.nonatomic_offending_mass, 0.25, 1e-15));
        // The series itself converges; the obstruction is purely non-atomic.
        assert!(report.series.is_convergent());
    }

    #[test]
    fn zero_weight_gives_the_zero_operator_with_bound_zero() {
        let space = MeasureSpace::atomic(&[(1, 1.0), (2, 1.0)]).with_block(Block::new(1, 1.0));
        let u = SimpleFunction::zero(&space);
        let op = identity_op(space, u, 2.0, 2.0);
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.verdict, Verdict::Nuclear);
        assert_eq!(report.nuclear_bound(), Some(0.0));
        assert_eq!(report.nonatomic_offending_mass, 0.0);
    }

    #[test]
    fn multiplication_special_case_reads_off_the_weight() {
        // Masses 2^-n, u(n) = 3^-n, p = q = 2: terms are exactly 3^-n.
        let space = tail_space(0.5);
        let u = SimpleFunction::zero(&space)
            .with_tail(TailValues::from_family(&ClosedFormFamily::Geometric {
                coeff: 1.0,
                base: 1.0 / 3.0,
            }));
        let op = identity_op(space, u, 2.0, 2.0);
        let sc = check_special_cases(&op).unwrap();
        assert_eq!(sc.kind, SpecialKind::Multiplication);
        assert_eq!(sc.report.verdict, Verdict::Nuclear);
        assert!(close(sc.report.nuclear_bound().unwrap(), 0.5, 1e-12));
        assert!(sc.max_term_deviation < 1e-12, "deviation {}", sc.max_term_deviation);
    }

    #[test]
    fn composition_special_case_reads_off_the_derivative() {
        // Two unit atoms, tail 2^-n collapsing onto atom 1, u = 1, p = q = 2:
        // h = (2, 1) on the atoms, 0 on the tail, bound sqrt(2) + 1.
        let space = MeasureSpace::atomic(&[(1, 1.0), (2, 1.0)])
            .with_tail(ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 });
        let phi = Transformation::new(
            &space,
            &[(1, 1), (2, 2)],
            &[],
            Some(TailMap::CollapseTo { atom: crate::measure::AtomId(1) }),
        )
        .unwrap();
        let op = WeightedCompOp::composition(space, phi, 2.0, 2.0).unwrap();
        let sc = check_special_cases(&op).unwrap();
        assert_eq!(sc.kind, SpecialKind::Composition);
        assert_eq!(sc.report.verdict, Verdict::Nuclear);
        assert!(close(sc.report.nuclear_bound().unwrap(), 2.0f64.sqrt() + 1.0, 1e-12));
        assert!(sc.max_term_deviation < 1e-12);
    }

    #[test]
    fn general_operators_are_not_special_cases() {
        let space = MeasureSpace::atomic(&[(1, 1.0), (2, 2.0)]);
        let phi = Transformation::new(&space, &[(1, 1), (2, 1)], &[], None).unwrap();
        let u = SimpleFunction::from_atom_values(&space, vec![2.0, 1.0]).unwrap();
        let op = WeightedCompOp::new(space, phi, u, 2.0, 2.0).unwrap();
        assert!(matches!(check_special_cases(&op), Err(Error::NotSpecialCase)));
    }

    #[test]
    fn nuclear_implies_the_compactness_condition() {
        // Shift by 1 on masses 2^-n with geometric weight: nuclear, and the
        // equal-case limit condition holds.
        let space = tail_space(0.5);
        let phi = Transformation::new(&space, &[], &[], Some(TailMap::ShiftBy { k: 1 })).unwrap();
        let u = SimpleFunction::zero(&space)
            .with_tail(TailValues::from_family(&ClosedFormFamily::Geometric {
                coeff: 1.0,
                base: 0.5,
            }));
        let op = WeightedCompOp::new(space, phi, u, 2.0, 2.0).unwrap();
        let report = check_nuclear(&op).unwrap();
        assert_eq!(report.verdict, Verdict::Nuclear);
        let comp = compactness_limits(&op).unwrap();
        assert_eq!(comp.status, ConditionStatus::Pass);
        assert_eq!(comp.value, 0.0);
    }

    #[test]
    fn preview_spans_prefix_and_tail() {
        let space = MeasureSpace::atomic(&[(1, 4.0)])
            .with_tail(ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 });
        let u = SimpleFunction::from_atom_values(&space, vec![2.0])
            .unwrap()
            .with_tail(TailValues::constant(1.0));
        let op = identity_op(space, u, 1.0, 1.0);
        let terms = criterion_terms(&op).unwrap();
        let preview = terms.preview(4);
        // J_1 = |u|: atom term 2, then tail terms 1, 1, 1.
        assert_eq!(preview, vec![2.0, 1.0, 1.0, 1.0]);
    }
}
