//! Measurable point transformations and the derived objects a weighted
//! composition operator needs: fibers, the Radon-Nikodym derivative of the
//! image measure, conditional expectation onto the preimage algebra, and the
//! local density J_q.
//!
//! A transformation sends explicit atoms to explicit atoms, tail atoms along
//! one of three shapes (identity, forward shift, collapse onto an explicit
//! atom), and blocks to fragment-compatible blocks. Targets always have
//! positive mass, so the image measure is automatically absolutely continuous
//! with respect to the base measure.

use crate::error::{Error, Result};
use crate::measure::{
    AtomId, AtomRef, BlockId, MeasurableSet, MeasureSpace, SimpleFunction, STRUCTURAL_TOL,
};
use crate::series::{CertifiedSum, SumTolerance, TailValues};
use serde::{Deserialize, Serialize};

/// Where the countable tail goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailMap {
    /// Tail atom n stays at n.
    Identity,
    /// Tail atom n moves to n + k. The first k target fibers are empty.
    ShiftBy { k: u64 },
    /// Every tail atom lands on one explicit atom.
    CollapseTo { atom: AtomId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transformation {
    /// Target of each explicit atom, aligned with the space's atom list.
    atom_targets: Vec<AtomId>,
    /// Target of each block, aligned with the space's block list. Blocks not
    /// named in the input map default to themselves.
    block_targets: Vec<BlockId>,
    tail: Option<TailMap>,
}

impl Transformation {
    /// Builds and validates a transformation over `space`.
    ///
    /// `atom_map` must name every explicit atom exactly once; explicit atoms
    /// cannot map into the tail. `block_map` may be partial; unmapped blocks
    /// stay in place. A mapped block must be fragment-compatible with its
    /// target: same fragment count, proportional fragment masses.
    pub fn new(
        space: &MeasureSpace,
        atom_map: &[(u32, u32)],
        block_map: &[(u32, u32)],
        tail: Option<TailMap>,
    ) -> Result<Self> {
        let mut atom_targets: Vec<Option<AtomId>> = vec![None; space.atoms().len()];
        for &(src, dst) in atom_map {
            let si = space
                .atom_index(AtomId(src))
                .ok_or_else(|| Error::unknown_atom(AtomId(src)))?;
            if space.atom_index(AtomId(dst)).is_none() {
                return Err(Error::unknown_atom(AtomId(dst)));
            }
            if atom_targets[si].is_some() {
                return Err(Error::Validation(format!("atom {src} mapped twice")));
            }
            atom_targets[si] = Some(AtomId(dst));
        }
        let atom_targets: Vec<AtomId> = atom_targets
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.ok_or_else(|| {
                    Error::Validation(format!(
                        "atom {} has no image under the map",
                        space.atoms()[i].id.0
                    ))
                })
            })
            .collect::<Result<_>>()?;

        let mut block_targets: Vec<BlockId> = space.blocks().iter().map(|b| b.id).collect();
        for &(src, dst) in block_map {
            let si = space.block_index(BlockId(src)).ok_or(Error::UnknownBlock(BlockId(src)))?;
            if space.block_index(BlockId(dst)).is_none() {
                return Err(Error::UnknownBlock(BlockId(dst)));
            }
            block_targets[si] = BlockId(dst);
        }
        for (si, tgt) in block_targets.iter().enumerate() {
            let ti = space.block_index(*tgt).unwrap();
            let sb = &space.blocks()[si];
            let tb = &space.blocks()[ti];
            if sb.fragments.len() != tb.fragments.len() {
                return Err(Error::Validation(format!(
                    "block {} has {} fragments, its target {} has {}",
                    sb.id.0,
                    sb.fragments.len(),
                    tb.id.0,
                    tb.fragments.len()
                )));
            }
            let ratio = sb.mass / tb.mass;
            for (j, (&fs, &ft)) in sb.fragments.iter().zip(&tb.fragments).enumerate() {
                if (fs - ratio * ft).abs() > STRUCTURAL_TOL * fs.abs().max(1.0) {
                    return Err(Error::Validation(format!(
                        "block {} fragment {} is not proportional to its target",
                        sb.id.0, j
                    )));
                }
            }
        }

        match (&tail, space.has_tail()) {
            (Some(_), false) => {
                return Err(Error::Validation("tail map given for a space without a tail".into()))
            }
            (None, true) => {
                return Err(Error::Validation("space has a tail but no tail map was given".into()))
            }
            (Some(TailMap::CollapseTo { atom }), true) => {
                if space.atom_index(*atom).is_none() {
                    return Err(Error::unknown_atom(*atom));
                }
            }
            _ => {}
        }

        Ok(Transformation { atom_targets, block_targets, tail })
    }

    /// Identity transformation on `space`.
    pub fn identity(space: &MeasureSpace) -> Self {
        Transformation {
            atom_targets: space.atoms().iter().map(|a| a.id).collect(),
            block_targets: space.blocks().iter().map(|b| b.id).collect(),
            tail: space.has_tail().then_some(TailMap::Identity),
        }
    }

    pub fn tail_map(&self) -> Option<&TailMap> {
        self.tail.as_ref()
    }

    pub fn atom_target(&self, space: &MeasureSpace, id: AtomId) -> Result<AtomId> {
        let i = space.atom_index(id).ok_or_else(|| Error::unknown_atom(id))?;
        Ok(self.atom_targets[i])
    }

    pub fn block_target(&self, space: &MeasureSpace, id: BlockId) -> Result<BlockId> {
        let i = space.block_index(id).ok_or(Error::UnknownBlock(id))?;
        Ok(self.block_targets[i])
    }

    pub fn target_of(&self, space: &MeasureSpace, at: AtomRef) -> Result<AtomRef> {
        match at {
            AtomRef::Explicit { id } => Ok(AtomRef::Explicit { id: self.atom_target(space, id)? }),
            AtomRef::Tail { n } => {
                if n == 0 || !space.has_tail() {
                    return Err(Error::unknown_tail_atom(n));
                }
                match self.tail {
                    Some(TailMap::Identity) => Ok(AtomRef::Tail { n }),
                    Some(TailMap::ShiftBy { k }) => Ok(AtomRef::Tail { n: n + k }),
                    Some(TailMap::CollapseTo { atom }) => Ok(AtomRef::Explicit { id: atom }),
                    None => Err(Error::unknown_tail_atom(n)),
                }
            }
        }
    }

    pub fn is_identity(&self, space: &MeasureSpace) -> bool {
        self.atom_targets.iter().zip(space.atoms()).all(|(t, a)| *t == a.id)
            && self.block_targets.iter().zip(space.blocks()).all(|(t, b)| *t == b.id)
            && matches!(self.tail, None | Some(TailMap::Identity) | Some(TailMap::ShiftBy { k: 0 }))
    }

    /// Rebinds the transformation to a space with the same ids (for example a
    /// refined one). Fragment compatibility is revalidated.
    pub fn rebind(&self, space: &MeasureSpace) -> Result<Transformation> {
        let atom_map: Vec<(u32, u32)> = space
            .atoms()
            .iter()
            .zip(&self.atom_targets)
            .map(|(a, t)| (a.id.0, t.0))
            .collect();
        let block_map: Vec<(u32, u32)> = space
            .blocks()
            .iter()
            .zip(&self.block_targets)
            .map(|(b, t)| (b.id.0, t.0))
            .collect();
        Transformation::new(space, &atom_map, &block_map, self.tail)
    }
}

/// Preimage of one target atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    /// Explicit atoms mapping onto the target.
    pub atoms: Vec<AtomId>,
    pub tail: TailFiber,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailFiber {
    Empty,
    /// Exactly one tail atom maps here.
    Single { n: u64 },
    /// The whole tail collapses here.
    All,
}

pub fn fiber(space: &MeasureSpace, phi: &Transformation, target: AtomRef) -> Result<Fiber> {
    match target {
        AtomRef::Explicit { id } => {
            if space.atom_index(id).is_none() {
                return Err(Error::unknown_atom(id));
            }
            let atoms = space
                .atoms()
                .iter()
                .zip(&phi.atom_targets)
                .filter(|(_, t)| **t == id)
                .map(|(a, _)| a.id)
                .collect();
            let tail = match phi.tail {
                Some(TailMap::CollapseTo { atom }) if atom == id => TailFiber::All,
                _ => TailFiber::Empty,
            };
            Ok(Fiber { atoms, tail })
        }
        AtomRef::Tail { n } => {
            if n == 0 || !space.has_tail() {
                return Err(Error::unknown_tail_atom(n));
            }
            let tail = match phi.tail {
                Some(TailMap::Identity) => TailFiber::Single { n },
                Some(TailMap::ShiftBy { k }) => {
                    if n > k {
                        TailFiber::Single { n: n - k }
                    } else {
                        TailFiber::Empty
                    }
                }
                Some(TailMap::CollapseTo { .. }) | None => TailFiber::Empty,
            };
            Ok(Fiber { atoms: Vec::new(), tail })
        }
    }
}

/// Mass of a fiber; certified when the whole tail is involved.
pub fn fiber_mass(space: &MeasureSpace, fib: &Fiber) -> Result<CertifiedSum> {
    let mut head = 0.0f64;
    for id in &fib.atoms {
        head += space.atom_mass(AtomRef::Explicit { id: *id })?;
    }
    let mut total = CertifiedSum::exact(head);
    match fib.tail {
        TailFiber::Empty => {}
        TailFiber::Single { n } => {
            total = total.add_exact(space.atom_mass(AtomRef::Tail { n })?);
        }
        TailFiber::All => {
            let masses = space
                .tail_masses()
                .ok_or_else(|| Error::unknown_tail_atom(1))?;
            total = total.add(&masses.sum(&SumTolerance::default())?);
        }
    }
    Ok(total)
}

/// Radon-Nikodym derivative h = d(mu compose phi^-1) / d(mu), a target-side
/// simple function. On an atom: fiber mass over atom mass. On a block
/// fragment: the mass ratio of the sources landing there.
pub fn radon_nikodym(space: &MeasureSpace, phi: &Transformation) -> Result<SimpleFunction> {
    let mut atom_values = Vec::with_capacity(space.atoms().len());
    for a in space.atoms() {
        let fib = fiber(space, phi, AtomRef::Explicit { id: a.id })?;
        let m = fiber_mass(space, &fib)?;
        atom_values.push(m.value() / a.mass);
    }

    let mut block_values: Vec<Vec<f64>> =
        space.blocks().iter().map(|b| vec![0.0; b.fragments.len()]).collect();
    for (si, sb) in space.blocks().iter().enumerate() {
        let ti = space.block_index(phi.block_targets[si]).unwrap();
        for (j, &fs) in sb.fragments.iter().enumerate() {
            block_values[ti][j] += fs;
        }
    }
    for (ti, tb) in space.blocks().iter().enumerate() {
        for (j, &ft) in tb.fragments.iter().enumerate() {
            block_values[ti][j] /= ft;
        }
    }

    let tail = match phi.tail {
        Some(TailMap::Identity) => Some(TailValues::constant(1.0)),
        Some(TailMap::ShiftBy { k }) if k == 0 => Some(TailValues::constant(1.0)),
        Some(TailMap::ShiftBy { k }) => {
            let masses = space.tail_masses().unwrap();
            let shifted = masses.shift(-(k as i64));
            let form = shifted.form().mul(&masses.form().recip());
            Some(TailValues::new(form, k + 1))
        }
        Some(TailMap::CollapseTo { .. }) => None,
        None => None,
    };

    SimpleFunction::from_parts(space, atom_values, block_values, tail)
}

/// Fibers with no sources, where the conditional expectation is reported as 0
/// by convention.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectationGaps {
    pub atoms: Vec<AtomId>,
    pub blocks: Vec<BlockId>,
    pub tail: TailGaps,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailGaps {
    #[default]
    None,
    /// Tail atoms 1..=k have empty fibers (forward shift).
    FirstK(u64),
    /// Every tail fiber is empty (collapse).
    All,
}

impl ExpectationGaps {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.blocks.is_empty() && self.tail == TailGaps::None
    }
}

/// Conditional expectation of f onto the preimage algebra of phi, carried as
/// the target-side function g with E(f | phi^-1 Sigma) = g compose phi.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalExpectation {
    g: SimpleFunction,
    pub gaps: ExpectationGaps,
}

impl ConditionalExpectation {
    /// The target-side density g.
    pub fn target_side(&self) -> &SimpleFunction {
        &self.g
    }

    /// E(f | phi^-1 Sigma) itself, a source-side function g compose phi.
    pub fn source_side(
        &self,
        space: &MeasureSpace,
        phi: &Transformation,
    ) -> Result<SimpleFunction> {
        compose_with(space, phi, &self.g)
    }
}

/// g compose phi for a target-side simple function g.
pub fn compose_with(
    space: &MeasureSpace,
    phi: &Transformation,
    g: &SimpleFunction,
) -> Result<SimpleFunction> {
    g.check_alignment(space)?;
    let mut atom_values = Vec::with_capacity(space.atoms().len());
    for t in &phi.atom_targets {
        atom_values.push(g.value_at(space, AtomRef::Explicit { id: *t })?);
    }
    let mut block_values: Vec<Vec<f64>> = Vec::with_capacity(space.blocks().len());
    for (si, sb) in space.blocks().iter().enumerate() {
        let ti = space.block_index(phi.block_targets[si]).unwrap();
        let vals = (0..sb.fragments.len()).map(|j| g.block_values()[ti][j]).collect();
        block_values.push(vals);
    }
    let tail = match phi.tail {
        Some(TailMap::Identity) => g.tail().cloned(),
        Some(TailMap::ShiftBy { k }) => g.tail().map(|t| t.shift(k as i64)),
        Some(TailMap::CollapseTo { atom }) => {
            let v = g.value_at(space, AtomRef::Explicit { id: atom })?;
            if v == 0.0 {
                None
            } else {
                Some(TailValues::constant(v))
            }
        }
        None => None,
    };
    SimpleFunction::from_parts(space, atom_values, block_values, tail)
}

pub fn conditional_expectation(
    space: &MeasureSpace,
    phi: &Transformation,
    f: &SimpleFunction,
) -> Result<ConditionalExpectation> {
    f.check_alignment(space)?;
    let tol = SumTolerance::default();
    let mut gaps = ExpectationGaps::default();

    let mut atom_values = Vec::with_capacity(space.atoms().len());
    for a in space.atoms() {
        let fib = fiber(space, phi, AtomRef::Explicit { id: a.id })?;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for src in &fib.atoms {
            let si = space.atom_index(*src).unwrap();
            num += f.atom_values()[si] * space.atoms()[si].mass;
            den += space.atoms()[si].mass;
        }
        if fib.tail == TailFiber::All {
            let masses = space.tail_masses().unwrap();
            den += masses.sum(&tol)?.value();
            if let Some(ft) = f.tail() {
                num += ft.mul(&masses).sum(&tol)?.value();
            }
        }
        if den == 0.0 {
            gaps.atoms.push(a.id);
            atom_values.push(0.0);
        } else {
            atom_values.push(num / den);
        }
    }

    let mut num_blocks: Vec<Vec<f64>> =
        space.blocks().iter().map(|b| vec![0.0; b.fragments.len()]).collect();
    let mut den_blocks = num_blocks.clone();
    for (si, sb) in space.blocks().iter().enumerate() {
        let ti = space.block_index(phi.block_targets[si]).unwrap();
        for (j, &fs) in sb.fragments.iter().enumerate() {
            num_blocks[ti][j] += f.block_values()[si][j] * fs;
            den_blocks[ti][j] += fs;
        }
    }
    let mut block_values: Vec<Vec<f64>> = Vec::with_capacity(space.blocks().len());
    for (ti, tb) in space.blocks().iter().enumerate() {
        if den_blocks[ti].iter().all(|&d| d == 0.0) && !tb.fragments.is_empty() {
            gaps.blocks.push(tb.id);
        }
        let vals = num_blocks[ti]
            .iter()
            .zip(&den_blocks[ti])
            .map(|(&n, &d)| if d == 0.0 { 0.0 } else { n / d })
            .collect();
        block_values.push(vals);
    }

    let tail = match phi.tail {
        Some(TailMap::Identity) => f.tail().cloned(),
        Some(TailMap::ShiftBy { k }) if k == 0 => f.tail().cloned(),
        Some(TailMap::ShiftBy { k }) => {
            gaps.tail = TailGaps::FirstK(k);
            f.tail().map(|t| t.shift(-(k as i64)))
        }
        Some(TailMap::CollapseTo { .. }) => {
            gaps.tail = TailGaps::All;
            None
        }
        None => None,
    };

    let g = SimpleFunction::from_parts(space, atom_values, block_values, tail)?;
    Ok(ConditionalExpectation { g, gaps })
}

/// The weighted image measure mu_q(E) = integral over phi^-1(E) of |u|^q,
/// evaluated on a finite union of atoms and fragments.
pub fn mu_q(
    space: &MeasureSpace,
    phi: &Transformation,
    u: &SimpleFunction,
    q: f64,
    set: &MeasurableSet,
) -> Result<f64> {
    u.check_alignment(space)?;
    let tol = SumTolerance::default();
    let mut total = 0.0f64;
    for &at in &set.atoms {
        let fib = fiber(space, phi, at)?;
        for src in &fib.atoms {
            let si = space.atom_index(*src).unwrap();
            total += u.atom_values()[si].abs().powf(q) * space.atoms()[si].mass;
        }
        match fib.tail {
            TailFiber::Empty => {}
            TailFiber::Single { n } => {
                let uv = u.tail().map_or(0.0, |t| t.value(n));
                total += uv.abs().powf(q) * space.atom_mass(AtomRef::Tail { n })?;
            }
            TailFiber::All => {
                if let Some(ut) = u.tail() {
                    let masses = space.tail_masses().unwrap();
                    total += ut.abs_powf(q).mul(&masses).sum(&tol)?.value();
                }
            }
        }
    }
    for &(block, j) in &set.fragments {
        let ti = space.block_index(block).ok_or(Error::UnknownBlock(block))?;
        if j >= space.blocks()[ti].fragments.len() {
            return Err(Error::IndexMismatch(format!(
                "fragment {j} of block {} out of range",
                block.0
            )));
        }
        for (si, sb) in space.blocks().iter().enumerate() {
            if phi.block_targets[si] == block {
                total += u.block_values()[si][j].abs().powf(q) * sb.fragments[j];
            }
        }
    }
    Ok(total)
}

/// Local density J_q = d(mu_q) / d(mu) on the target side, computed directly
/// from fibers.
pub fn j_function(
    space: &MeasureSpace,
    phi: &Transformation,
    u: &SimpleFunction,
    q: f64,
) -> Result<SimpleFunction> {
    u.check_alignment(space)?;
    let mut atom_values = Vec::with_capacity(space.atoms().len());
    for a in space.atoms() {
        let num = mu_q(space, phi, u, q, &MeasurableSet::atom(AtomRef::Explicit { id: a.id }))?;
        atom_values.push(num / a.mass);
    }

    let mut block_values: Vec<Vec<f64>> =
        space.blocks().iter().map(|b| vec![0.0; b.fragments.len()]).collect();
    for (si, sb) in space.blocks().iter().enumerate() {
        let ti = space.block_index(phi.block_targets[si]).unwrap();
        for (j, &fs) in sb.fragments.iter().enumerate() {
            block_values[ti][j] += u.block_values()[si][j].abs().powf(q) * fs;
        }
    }
    for (ti, tb) in space.blocks().iter().enumerate() {
        for (j, &ft) in tb.fragments.iter().enumerate() {
            block_values[ti][j] /= ft;
        }
    }

    let tail = match (phi.tail, u.tail()) {
        (Some(TailMap::Identity), Some(ut)) => {
            let t = ut.abs_powf(q);
            if t.is_zero() { None } else { Some(t) }
        }
        (Some(TailMap::ShiftBy { k }), Some(ut)) if k == 0 => {
            let t = ut.abs_powf(q);
            if t.is_zero() { None } else { Some(t) }
        }
        (Some(TailMap::ShiftBy { k }), Some(ut)) => {
            let masses = space.tail_masses().unwrap();
            let numer = ut.abs_powf(q).mul(&masses).shift(-(k as i64));
            if numer.is_zero() {
                None
            } else {
                let form = numer.form().mul(&masses.form().recip());
                Some(TailValues::new(form, numer.start().max(k + 1)))
            }
        }
        _ => None,
    };

    SimpleFunction::from_parts(space, atom_values, block_values, tail)
}

/// Same density through the factorization J_q = h * E(|u|^q) pulled back to
/// the target side. Kept as an independent route for cross-checking.
pub fn j_function_via_expectation(
    space: &MeasureSpace,
    phi: &Transformation,
    u: &SimpleFunction,
    q: f64,
) -> Result<SimpleFunction> {
    let h = radon_nikodym(space, phi)?;
    let e = conditional_expectation(space, phi, &u.abs_powf(q))?;
    Ok(h.mul(e.target_side()))
}
