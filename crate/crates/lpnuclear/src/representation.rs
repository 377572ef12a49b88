//! Explicit rank-one representations of nuclear operators, their
//! verification, and block-refinement witnesses for non-compactness.
//!
//! For a nuclear instance the operator factors through the atoms: the n-th
//! piece pairs the averaging functional f -> integral of f over A_n with the
//! vector g_n = u * indicator(phi^-1(A_n)) / mu(A_n). Summing the first N
//! pieces reconstructs W exactly on functions supported on the first N atoms,
//! which is what makes the truncation error certifiable.

use crate::error::{Error, Result};
use crate::measure::{
    lp_norm, witness_sequence, AtomRef, BlockId, MeasureSpace, SimpleFunction, WitnessSet,
};
use crate::nuclearity::{check_nuclear, regime, ExponentRegime, Verdict};
use crate::operator::WeightedCompOp;
use crate::series::{SumTolerance, TailValues};
use crate::transform::{fiber, j_function, TailFiber, TailMap};
use serde::{Deserialize, Serialize};

/// One rank-one piece of the representation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationTerm {
    pub atom: AtomRef,
    /// Norm bound of the averaging functional, mu(A_n)^(1 - 1/p).
    pub functional_bound: f64,
    /// Exact norm of g_n, J_q(A_n)^(1/q) * mu(A_n)^(1/q - 1).
    pub vector_norm: f64,
    /// functional_bound * vector_norm; coincides with the criterion term.
    pub product: f64,
}

/// A truncated representation with a certified bound on what was cut.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NuclearRepresentation {
    /// Nonzero terms among the first `truncation` atoms, in atom order.
    pub terms: Vec<RepresentationTerm>,
    pub truncation: u64,
    /// Sum of the retained term products.
    pub partial_bound: f64,
    /// Certified upper bound on the sum of all omitted term products.
    pub tail_bound: f64,
    /// partial_bound + tail_bound, an upper bound on the nuclear norm.
    pub nuclear_norm_bound: f64,
}

fn term_parts(j: f64, mass: f64, reg: &ExponentRegime) -> (f64, f64) {
    let functional = mass.powf(reg.inv_p_conj);
    let vector = j.powf(1.0 / reg.q) * mass.powf(-reg.inv_q_conj);
    (functional, vector)
}

/// Builds the representation for a certified-nuclear operator. The first
/// `truncation` atoms (explicit atoms first, then the tail in index order)
/// become explicit terms; the rest is bounded by a certified series tail.
/// When the space has a countable tail, `truncation` must cover at least the
/// explicit atoms so the cut is a clean tail suffix.
pub fn build_nuclear_representation(
    op: &WeightedCompOp,
    truncation: u64,
) -> Result<NuclearRepresentation> {
    if truncation == 0 {
        return Err(Error::TruncationTooSmall(0));
    }
    let report = check_nuclear(op)?;
    if report.verdict != Verdict::Nuclear {
        let reason = if report.nonatomic_offending_mass > crate::nuclearity::NONATOMIC_TOL {
            format!(
                "the weight carries mass {:.3e} on the non-atomic part",
                report.nonatomic_offending_mass
            )
        } else if report.verdict == Verdict::NotNuclear {
            "the criterion series diverges".to_string()
        } else {
            "the criterion series could not be certified".to_string()
        };
        return Err(Error::NotNuclearInstance(reason));
    }

    let space = op.space();
    let explicit_count = space.atoms().len() as u64;
    if space.has_tail() && truncation < explicit_count {
        return Err(Error::TruncationTooSmall(truncation));
    }
    let reg = regime(op.p(), op.q());
    let j = j_function(space, op.phi(), op.weight(), op.q())?;

    let mut terms = Vec::new();
    let mut partial = 0.0f64;
    for (i, (a, &jv)) in space.atoms().iter().zip(j.atom_values()).enumerate() {
        if (i as u64) >= truncation {
            break;
        }
        if jv == 0.0 {
            continue;
        }
        let (functional, vector) = term_parts(jv, a.mass, &reg);
        partial += functional * vector;
        terms.push(RepresentationTerm {
            atom: AtomRef::Explicit { id: a.id },
            functional_bound: functional,
            vector_norm: vector,
            product: functional * vector,
        });
    }

    let mut tail_bound = 0.0f64;
    if space.has_tail() {
        let masses = space.tail_masses().expect("tail present");
        let j_tail = j.tail().cloned().unwrap_or_else(TailValues::zero);
        for m in 1..=(truncation - explicit_count) {
            let jv = j_tail.value(m);
            if jv == 0.0 {
                continue;
            }
            let (functional, vector) = term_parts(jv, masses.value(m), &reg);
            partial += functional * vector;
            terms.push(RepresentationTerm {
                atom: AtomRef::Tail { n: m },
                functional_bound: functional,
                vector_norm: vector,
                product: functional * vector,
            });
        }
        let products = masses
            .abs_powf(reg.inv_p_conj)
            .mul(&j_tail.abs_powf(1.0 / reg.q).mul(&masses.abs_powf(-reg.inv_q_conj)));
        if !products.is_zero() {
            let cut = products
                .sum_from(truncation - explicit_count + 1, &SumTolerance::default())?;
            tail_bound = cut.upper;
        }
    } else {
        // No countable tail: atoms beyond the truncation contribute exactly.
        for (a, &jv) in space.atoms().iter().zip(j.atom_values()).skip(truncation as usize) {
            if jv == 0.0 {
                continue;
            }
            let (functional, vector) = term_parts(jv, a.mass, &reg);
            tail_bound += functional * vector;
        }
    }

    Ok(NuclearRepresentation {
        terms,
        truncation,
        partial_bound: partial,
        tail_bound,
        nuclear_norm_bound: partial + tail_bound,
    })
}

/// Materializes g_n = u * indicator(phi^-1(A_n)) / mu(A_n) as a simple
/// function. A single tail atom inside the fiber cannot be isolated by a
/// closed form, so that case is rejected; whole-tail collapses work.
pub fn materialize_vector(op: &WeightedCompOp, at: AtomRef) -> Result<SimpleFunction> {
    let space = op.space();
    let mass = space.atom_mass(at)?;
    let fib = fiber(space, op.phi(), at)?;
    let mut atom_vals = vec![0.0; space.atoms().len()];
    for id in &fib.atoms {
        let i = space.atom_index(*id).expect("fiber atoms exist");
        atom_vals[i] = op.weight().atom_values()[i] / mass;
    }
    let tail = match fib.tail {
        TailFiber::Empty => None,
        TailFiber::Single { .. } => {
            return Err(Error::Validation(
                "a lone tail atom in the fiber has no closed-form indicator".into(),
            ))
        }
        TailFiber::All => Some(
            op.weight().tail().cloned().unwrap_or_else(TailValues::zero).scale(1.0 / mass),
        ),
    };
    let blocks = space.blocks().iter().map(|b| vec![0.0; b.fragments.len()]).collect();
    SimpleFunction::from_parts(space, atom_vals, blocks, tail)
}

/// The averaging functional: integral of f over the atom.
pub fn functional_value(space: &MeasureSpace, at: AtomRef, f: &SimpleFunction) -> Result<f64> {
    Ok(f.value_at(space, at)? * space.atom_mass(at)?)
}

/// Residuals between W f and the truncated representation on sample inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub residuals: Vec<f64>,
    pub sample_norms: Vec<f64>,
    pub max_residual: f64,
    /// Max over samples of residual - tail_bound * ||f||_p. A positive value
    /// beyond roundoff means the certified cut bound was violated.
    pub max_excess: f64,
}

pub fn verify_representation(
    op: &WeightedCompOp,
    rep: &NuclearRepresentation,
    samples: &[SimpleFunction],
) -> Result<VerificationReport> {
    let space = op.space();
    if space.has_tail() && rep.truncation < space.atoms().len() as u64 {
        return Err(Error::TruncationTooSmall(rep.truncation));
    }
    let mut residuals = Vec::with_capacity(samples.len());
    let mut sample_norms = Vec::with_capacity(samples.len());
    for f in samples {
        f.check_alignment(space)?;
        let r = if space.has_tail() {
            remainder_residual(op, rep, f)?
        } else {
            reconstruction_residual(op, rep, f)?
        };
        residuals.push(r);
        sample_norms.push(lp_norm(space, f, op.p())?);
    }
    let max_residual = residuals.iter().copied().fold(0.0f64, f64::max);
    let max_excess = residuals
        .iter()
        .zip(&sample_norms)
        .map(|(r, n)| r - rep.tail_bound * n)
        .fold(f64::NEG_INFINITY, f64::max)
        .min(max_residual);
    Ok(VerificationReport { residuals, sample_norms, max_residual, max_excess })
}

/// Finite-atomic route: materialize every retained piece, sum them, and
/// measure ||W f - sum phi_n(f) g_n||_q directly.
fn reconstruction_residual(
    op: &WeightedCompOp,
    rep: &NuclearRepresentation,
    f: &SimpleFunction,
) -> Result<f64> {
    let space = op.space();
    let mut rec = SimpleFunction::zero(space);
    for term in &rep.terms {
        let g = materialize_vector(op, term.atom)?;
        let weight = functional_value(space, term.atom, f)?;
        rec = rec.sub(&g.scale(-weight))?;
    }
    let wf = op.apply(f)?;
    lp_norm(space, &wf.sub(&rec)?, op.q())
}

/// Countable route: the retained pieces reconstruct W exactly on sources
/// mapping into the first `truncation` atoms, so the residual is the norm of
/// W f over the remaining sources, summed in closed form.
fn remainder_residual(
    op: &WeightedCompOp,
    rep: &NuclearRepresentation,
    f: &SimpleFunction,
) -> Result<f64> {
    let space = op.space();
    let q = op.q();
    let wq = op.apply(f)?.abs_powf(q);
    let mut pow = 0.0f64;
    for (b, vals) in space.blocks().iter().zip(wq.block_values()) {
        for (&m, &v) in b.fragments.iter().zip(vals) {
            pow += v * m;
        }
    }
    let cutoff = rep.truncation - space.atoms().len() as u64;
    if let Some(wqt) = wq.tail() {
        let source_start = match op.phi().tail_map() {
            Some(TailMap::Identity) => Some(cutoff + 1),
            Some(TailMap::ShiftBy { k }) => Some(cutoff.saturating_sub(*k) + 1),
            Some(TailMap::CollapseTo { .. }) | None => None,
        };
        if let Some(start) = source_start {
            let masses = space.tail_masses().expect("tail present");
            pow += wqt.mul(&masses).sum_from(start, &SumTolerance::default())?.upper;
        }
    }
    Ok(pow.powf(1.0 / q))
}

/// A nested family of normalized indicators exhibiting non-compactness when
/// the weight survives on the non-atomic part.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoncompactWitness {
    /// Target-side block hosting the sets.
    pub block: BlockId,
    pub sets: Vec<WitnessSet>,
    /// ||W f_k||_p / ||f_k||_p for f_k the normalized indicator of sets[k].
    pub ratios: Vec<f64>,
    /// Certified floor for every ratio: (min J_p over the block)^(1/p).
    pub lower_bound: f64,
}

/// Builds the witness family by refining the target block of the first
/// weight-carrying source block. Every block tied to it through map edges is
/// refined with the same relative cuts so the transformation stays valid.
pub fn noncompact_witness(op: &WeightedCompOp, levels: u32) -> Result<NoncompactWitness> {
    if op.p() != op.q() {
        return Err(Error::WrongRegime);
    }
    let space0 = op.space();
    let src = space0
        .blocks()
        .iter()
        .zip(op.weight().block_values())
        .position(|(b, vals)| b.fragments.iter().zip(vals).any(|(&m, &v)| m > 0.0 && v != 0.0));
    let Some(src_idx) = src else {
        return Err(Error::NoNonatomicSupport);
    };
    let target = op.phi().block_target(space0, space0.blocks()[src_idx].id)?;

    // Refining one block forces refining its whole connected component under
    // the undirected source-target edges, or the map loses its fragment
    // alignment.
    let n = space0.blocks().len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, b) in space0.blocks().iter().enumerate() {
        let t = op.phi().block_target(space0, b.id)?;
        let ti = space0.block_index(t).expect("target block exists");
        if ti != i {
            adj[i].push(ti);
            adj[ti].push(i);
        }
    }
    let start = space0.block_index(target).expect("target block exists");
    let mut in_comp = vec![false; n];
    let mut queue = vec![start];
    in_comp[start] = true;
    while let Some(i) = queue.pop() {
        for &j in &adj[i] {
            if !in_comp[j] {
                in_comp[j] = true;
                queue.push(j);
            }
        }
    }
    let comp_ids: Vec<BlockId> = space0
        .blocks()
        .iter()
        .enumerate()
        .filter(|(i, _)| in_comp[*i])
        .map(|(_, b)| b.id)
        .collect();

    let mut space = space0.clone();
    let mut u = op.weight().clone();
    let mut sets: Option<Vec<WitnessSet>> = None;
    for id in comp_ids {
        let w = witness_sequence(&space, id, levels)?;
        u = u.refined(&w.refinement, &w.space)?;
        if id == target {
            sets = Some(w.sets);
        }
        space = w.space;
    }
    let sets = sets.expect("target belongs to its own component");
    let phi = op.phi().rebind(&space)?;
    let refined = WeightedCompOp::new(space, phi, u, op.p(), op.q())?;
    let space = refined.space();

    let j = j_function(space, refined.phi(), refined.weight(), refined.q())?;
    let ti = space.block_index(target).expect("target block exists");
    let j_vals = &j.block_values()[ti];
    let min_j = j_vals.iter().copied().fold(f64::INFINITY, f64::min);
    let lower_bound =
        if j_vals.is_empty() { 0.0 } else { min_j.powf(1.0 / refined.p()) };

    let frag_count = space.blocks()[ti].fragments.len();
    let mut ratios = Vec::with_capacity(sets.len());
    for set in &sets {
        let mut vals = vec![0.0; frag_count];
        let height = set.mass.powf(-1.0 / refined.p());
        for v in &mut vals[set.start..] {
            *v = height;
        }
        let f = SimpleFunction::zero(space).with_block_values(space, target, vals)?;
        let num = refined.image_norm(&f)?;
        let den = lp_norm(space, &f, refined.p())?;
        ratios.push(num / den);
    }

    Ok(NoncompactWitness { block: target, sets, ratios, lower_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AtomId, Block};
    use crate::series::ClosedFormFamily;
    use crate::transform::Transformation;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    fn fan_in_op(p: f64, q: f64) -> WeightedCompOp {
        let space = MeasureSpace::atomic(&[(1, 1.0), (2, 2.0), (3, 0.5)]);
        let phi = Transformation::new(&space, &[(1, 1), (2, 1), (3, 2)], &[], None).unwrap();
        let u = SimpleFunction::from_atom_values(&space, vec![1.0, 1.0, 2.0]).unwrap();
        WeightedCompOp::new(space, phi, u, p, q).unwrap()
    }

    #[test]
    fn finite_representation_reconstructs_exactly() {
        let op = fan_in_op(1.0, 1.0);
        let rep = build_nuclear_representation(&op, 64).unwrap();
        // J_1 = (3, 0.5, 0): two nonzero terms, products 3 and 0.5.
        assert_eq!(rep.terms.len(), 2);
        assert_eq!(rep.tail_bound, 0.0);
        assert!(close(rep.nuclear_norm_bound, 3.5, 1e-15));

        let space = op.space();
        let samples = vec![
            SimpleFunction::from_atom_values(space, vec![1.0, 1.0, 1.0]).unwrap(),
            SimpleFunction::from_atom_values(space, vec![0.3, -2.0, 5.0]).unwrap(),
        ];
        let report = verify_representation(&op, &rep, &samples).unwrap();
        assert!(report.max_residual <= 1e-12, "residual {}", report.max_residual);
    }

    #[test]
    fn term_norms_match_materialized_pieces() {
        let op = fan_in_op(1.0, 1.0);
        let rep = build_nuclear_representation(&op, 64).unwrap();
        let space = op.space();
        for term in &rep.terms {
            let g = materialize_vector(&op, term.atom).unwrap();
            let gn = lp_norm(space, &g, op.q()).unwrap();
            assert!(close(gn, term.vector_norm, 1e-13), "{gn} vs {}", term.vector_norm);
            // The functional bound is attained at the atom's own indicator.
            let i = match term.atom {
                AtomRef::Explicit { id } => space.atom_index(id).unwrap(),
                _ => unreachable!("finite space"),
            };
            let mut vals = vec![0.0; space.atoms().len()];
            vals[i] = 1.0;
            let ind = SimpleFunction::from_atom_values(space, vals).unwrap();
            let attained = functional_value(space, term.atom, &ind).unwrap().abs()
                / lp_norm(space, &ind, op.p()).unwrap();
            assert!(close(attained, term.functional_bound, 1e-13));
        }
    }

    #[test]
    fn hilbert_case_bound_equals_the_trace_norm() {
        let op = fan_in_op(2.0, 2.0);
        let rep = build_nuclear_representation(&op, 64).unwrap();
        assert!(close(rep.nuclear_norm_bound, 3.0f64.sqrt() + 1.0, 1e-13));
        let trace = op.matrix_realization().unwrap().trace_norm().unwrap();
        assert!(
            (rep.nuclear_norm_bound - trace).abs() <= 1e-8,
            "bound {} vs trace {}",
            rep.nuclear_norm_bound,
            trace
        );
    }

    #[test]
    fn countable_representation_certifies_the_cut() {
        // Masses 2^-n, u(n) = 3^-n, identity, p = q = 2: term products are
        // exactly 3^-n, so ten terms plus the cut rebuild the bound 1/2.
        let space = MeasureSpace::new(
            vec![],
            vec![],
            Some(ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 }),
        );
        let u = SimpleFunction::zero(&space).with_tail(TailValues::from_family(
            &ClosedFormFamily::Geometric { coeff: 1.0, base: 1.0 / 3.0 },
        ));
        let op = WeightedCompOp::multiplication(space, u, 2.0, 2.0).unwrap();
        let rep = build_nuclear_representation(&op, 10).unwrap();
        assert_eq!(rep.terms.len(), 10);
        let exact_partial = 0.5 * (1.0 - 3.0f64.powi(-10));
        assert!(close(rep.partial_bound, exact_partial, 1e-13));
        assert!(close(rep.tail_bound, 0.5 * 3.0f64.powi(-10), 1e-12));
        assert!(close(rep.nuclear_norm_bound, 0.5, 1e-13));

        let f = SimpleFunction::zero(op.space()).with_tail(TailValues::constant(1.0));
        let report = verify_representation(&op, &rep, &[f]).unwrap();
        // ||f||_2 = 1, so the residual must stay under the certified cut.
        assert!(close(report.sample_norms[0], 1.0, 1e-13));
        assert!(report.max_excess <= 1e-12, "excess {}", report.max_excess);
        assert!(report.max_residual > 0.0 && report.max_residual < rep.tail_bound);
    }

    #[test]
    fn collapse_representation_has_zero_remainder_once_atoms_are_covered() {
        let space = MeasureSpace::atomic(&[(1, 1.0), (2, 1.0)])
            .with_tail(ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 });
        let phi = Transformation::new(
            &space,
            &[(1, 1), (2, 2)],
            &[],
            Some(TailMap::CollapseTo { atom: AtomId(1) }),
        )
        .unwrap();
        let op = WeightedCompOp::composition(space, phi, 2.0, 2.0).unwrap();
        let rep = build_nuclear_representation(&op, 2).unwrap();
        assert_eq!(rep.tail_bound, 0.0);
        assert!(close(rep.nuclear_norm_bound, 2.0f64.sqrt() + 1.0, 1e-13));

        // g_1 covers atom 1 and the whole collapsing tail.
        let g1 = materialize_vector(&op, AtomRef::Explicit { id: AtomId(1) }).unwrap();
        let norm = lp_norm(op.space(), &g1, 2.0).unwrap();
        assert!(close(norm, 2.0f64.sqrt(), 1e-13));

        let f = SimpleFunction::constant(op.space(), 1.0);
        let report = verify_representation(&op, &rep, &[f]).unwrap();
        assert!(report.max_residual <= 1e-15);

        // Cutting below the explicit atoms is rejected.
        assert!(matches!(
            build_nuclear_representation(&op, 1),
            Err(Error::TruncationTooSmall(1))
        ));
    }

    #[test]
    fn non_nuclear_instances_are_refused() {
        let space = MeasureSpace::new(
            vec![],
            vec![],
            Some(ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 }),
        );
        let u = SimpleFunction::constant(&space, 1.0);
        let op = WeightedCompOp::multiplication(space, u, 2.0, 2.0).unwrap();
        assert!(matches!(
            build_nuclear_representation(&op, 64),
            Err(Error::NotNuclearInstance(_))
        ));
        assert!(matches!(
            build_nuclear_representation(&op, 0),
            Err(Error::TruncationTooSmall(0))
        ));
    }

    #[test]
    fn block_weight_yields_a_noncompact_witness() {
        let space = MeasureSpace::atomic(&[(1, 1.0)]).with_block(Block::new(1, 1.0));
        let u = SimpleFunction::from_atom_values(&space, vec![0.0])
            .unwrap()
            .with_block_values(&space, BlockId(1), vec![2.0])
            .unwrap();
        let op = WeightedCompOp::multiplication(space, u, 2.0, 2.0).unwrap();
        let w = noncompact_witness(&op, 4).unwrap();
        assert_eq!(w.sets.len(), 4);
        assert!(close(w.lower_bound, 2.0, 1e-12));
        for (k, (set, ratio)) in w.sets.iter().zip(&w.ratios).enumerate() {
            assert!(close(set.mass, 0.5f64.powi(k as i32 + 1), 1e-12));
            assert!(close(*ratio, 2.0, 1e-10), "ratio {ratio}");
            assert!(*ratio >= w.lower_bound - 1e-12);
        }
    }

    #[test]
    fn witness_refines_the_whole_mapped_component() {
        // Block 1 (mass 0.5) maps onto block 2 (mass 1.0); both carry weight.
        // J_1 on block 2 is 3 + 0.5 = 3.5, and the ratios hit it exactly.
        let space = MeasureSpace::new(
            vec![],
            vec![Block::new(1, 0.5), Block::new(2, 1.0)],
            None,
        );
        let phi = Transformation::new(&space, &[], &[(1, 2)], None).unwrap();
        let u = SimpleFunction::zero(&space)
            .with_block_values(&space, BlockId(1), vec![1.0])
            .unwrap()
            .with_block_values(&space, BlockId(2), vec![3.0])
            .unwrap();
        let op = WeightedCompOp::new(space, phi, u, 1.0, 1.0).unwrap();
        let w = noncompact_witness(&op, 3).unwrap();
        assert_eq!(w.block, BlockId(2));
        assert!(close(w.lower_bound, 3.5, 1e-12));
        for ratio in &w.ratios {
            assert!(close(*ratio, 3.5, 1e-10));
            assert!(*ratio >= w.lower_bound - 1e-12);
        }
    }

    #[test]
    fn witness_preconditions_are_enforced() {
        let space = MeasureSpace::atomic(&[(1, 1.0)]).with_block(Block::new(1, 1.0));
        let u = SimpleFunction::from_atom_values(&space, vec![1.0])
            .unwrap()
            .with_block_values(&space, BlockId(1), vec![2.0])
            .unwrap();
        let mixed = WeightedCompOp::multiplication(space.clone(), u.clone(), 1.0, 2.0).unwrap();
        assert!(matches!(noncompact_witness(&mixed, 2), Err(Error::WrongRegime)));

        let silent = SimpleFunction::from_atom_values(&space, vec![1.0]).unwrap();
        let op = WeightedCompOp::multiplication(space, silent, 2.0, 2.0).unwrap();
        assert!(matches!(noncompact_witness(&op, 2), Err(Error::NoNonatomicSupport)));
    }
}
