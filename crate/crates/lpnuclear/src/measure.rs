//! Sigma-finite measure spaces with countably many atoms and a finitely
//! subdivided non-atomic part, plus the simple functions living on them.
//!
//! A space has three layers: finitely many explicit atoms, finitely many
//! non-atomic blocks (each carried as an ordered fragment partition), and an
//! optional countable atom tail whose masses follow a closed-form family.
//! Simple functions are constant on each atom, fragment, and tail entry.

use crate::error::{Error, Result};
use crate::series::{CertifiedSum, ClosedFormFamily, SumTolerance, TailValues};
use serde::{Deserialize, Serialize};

/// Identifier of an explicit atom. Stable under every operation here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomId(pub u32);

/// Identifier of a non-atomic block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u32);

/// Reference to any atom: explicit by id, or the n-th tail atom (n >= 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtomRef {
    Explicit { id: AtomId },
    Tail { n: u64 },
}

impl AtomRef {
    pub fn explicit(id: u32) -> Self {
        AtomRef::Explicit { id: AtomId(id) }
    }

    pub fn tail(n: u64) -> Self {
        AtomRef::Tail { n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: AtomId,
    pub mass: f64,
}

/// Non-atomic block of finite positive mass, carried as an ordered partition
/// into fragments. Fragments are the resolution at which simple functions and
/// transformations see the block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub mass: f64,
    pub fragments: Vec<f64>,
}

impl Block {
    /// Block with the trivial one-fragment partition.
    pub fn new(id: u32, mass: f64) -> Self {
        Block { id: BlockId(id), mass, fragments: vec![mass] }
    }

    pub fn with_fragments(id: u32, mass: f64, fragments: Vec<f64>) -> Self {
        Block { id: BlockId(id), mass, fragments }
    }
}

/// Structural problems reported by [`MeasureSpace::violations`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonpositiveAtomMass { atom: AtomId, mass: f64 },
    DuplicateAtomId { atom: AtomId },
    NonpositiveBlockMass { block: BlockId, mass: f64 },
    DuplicateBlockId { block: BlockId },
    NonpositiveFragment { block: BlockId, index: usize, mass: f64 },
    FragmentSumMismatch { block: BlockId, expected: f64, actual: f64 },
    InvalidTail { reason: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonpositiveAtomMass { atom, mass } => {
                write!(f, "atom {} has nonpositive mass {}", atom.0, mass)
            }
            Violation::DuplicateAtomId { atom } => write!(f, "duplicate atom id {}", atom.0),
            Violation::NonpositiveBlockMass { block, mass } => {
                write!(f, "block {} has nonpositive mass {}", block.0, mass)
            }
            Violation::DuplicateBlockId { block } => write!(f, "duplicate block id {}", block.0),
            Violation::NonpositiveFragment { block, index, mass } => {
                write!(f, "block {} fragment {} has nonpositive mass {}", block.0, index, mass)
            }
            Violation::FragmentSumMismatch { block, expected, actual } => {
                write!(
                    f,
                    "block {} fragments sum to {} instead of its mass {}",
                    block.0, expected, actual
                )
            }
            Violation::InvalidTail { reason } => write!(f, "invalid tail family: {reason}"),
        }
    }
}

/// Relative tolerance for fragment-sum and related structural checks.
pub const STRUCTURAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    atoms: Vec<Atom>,
    blocks: Vec<Block>,
    tail: Option<ClosedFormFamily>,
}

impl MeasureSpace {
    pub fn new(atoms: Vec<Atom>, blocks: Vec<Block>, tail: Option<ClosedFormFamily>) -> Self {
        MeasureSpace { atoms, blocks, tail }
    }

    /// Purely atomic space from (id, mass) pairs.
    pub fn atomic(masses: &[(u32, f64)]) -> Self {
        let atoms = masses.iter().map(|&(id, mass)| Atom { id: AtomId(id), mass }).collect();
        MeasureSpace::new(atoms, Vec::new(), None)
    }

    pub fn with_tail(mut self, family: ClosedFormFamily) -> Self {
        self.tail = Some(family);
        self
    }

    pub fn with_block(mut self, block: Block) -> Self {
        self.blocks.push(block);
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tail_family(&self) -> Option<&ClosedFormFamily> {
        self.tail.as_ref()
    }

    /// Tail masses as a term sequence (mass(n) for n >= 1).
    pub fn tail_masses(&self) -> Option<TailValues> {
        self.tail.as_ref().map(TailValues::from_family)
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    pub fn atom_index(&self, id: AtomId) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == id)
    }

    pub fn block_index(&self, id: BlockId) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn atom_mass(&self, at: AtomRef) -> Result<f64> {
        match at {
            AtomRef::Explicit { id } => self
                .atom_index(id)
                .map(|i| self.atoms[i].mass)
                .ok_or_else(|| Error::unknown_atom(id)),
            AtomRef::Tail { n } => {
                if n == 0 {
                    return Err(Error::unknown_tail_atom(0));
                }
                match &self.tail {
                    Some(fam) => Ok(fam.term(n)),
                    None => Err(Error::unknown_tail_atom(n)),
                }
            }
        }
    }

    /// Checks every structural invariant and returns the violations found.
    /// An empty list means the space is well formed.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            if !(a.mass > 0.0) || !a.mass.is_finite() {
                out.push(Violation::NonpositiveAtomMass { atom: a.id, mass: a.mass });
            }
            if self.atoms[..i].iter().any(|b| b.id == a.id) {
                out.push(Violation::DuplicateAtomId { atom: a.id });
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if !(b.mass > 0.0) || !b.mass.is_finite() {
                out.push(Violation::NonpositiveBlockMass { block: b.id, mass: b.mass });
            }
            if self.blocks[..i].iter().any(|c| c.id == b.id) {
                out.push(Violation::DuplicateBlockId { block: b.id });
            }
            for (j, &f) in b.fragments.iter().enumerate() {
                if !(f > 0.0) || !f.is_finite() {
                    out.push(Violation::NonpositiveFragment { block: b.id, index: j, mass: f });
                }
            }
            let sum: f64 = b.fragments.iter().sum();
            if (sum - b.mass).abs() > STRUCTURAL_TOL * b.mass.abs().max(1.0) {
                out.push(Violation::FragmentSumMismatch {
                    block: b.id,
                    expected: b.mass,
                    actual: sum,
                });
            }
        }
        if let Some(fam) = &self.tail {
            if let Err(e) = fam.validate() {
                out.push(Violation::InvalidTail { reason: e.to_string() });
            } else {
                let form = fam.form();
                if form.coeff() <= 0.0 {
                    out.push(Violation::InvalidTail {
                        reason: "tail masses must be strictly positive".into(),
                    });
                } else {
                    // Eventual monotone decrease, checked on a window past the
                    // polynomial transient. Overflow to infinity would make
                    // the comparison vacuous, so finiteness is checked first.
                    let w0 = 1u64 << 10;
                    let slack = 1.0 + 1e-9;
                    let finite = (w0..=w0 + 32).all(|n| form.term(n).is_finite());
                    let decreasing = finite
                        && (w0..w0 + 32).all(|n| form.term(n + 1) <= form.term(n) * slack);
                    if !decreasing {
                        out.push(Violation::InvalidTail {
                            reason: "tail masses are not eventually decreasing".into(),
                        });
                    }
                }
            }
        }
        out
    }

    /// `new` + empty-violations check in one step.
    pub fn validated(self) -> Result<Self> {
        let vs = self.violations();
        if vs.is_empty() {
            Ok(self)
        } else {
            let msgs: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            Err(Error::Validation(msgs.join("; ")))
        }
    }
}

/// Finite union of atoms and block fragments, the measurable sets that
/// set-indexed quantities accept.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurableSet {
    pub atoms: Vec<AtomRef>,
    pub fragments: Vec<(BlockId, usize)>,
}

impl MeasurableSet {
    pub fn atom(at: AtomRef) -> Self {
        MeasurableSet { atoms: vec![at], fragments: Vec::new() }
    }
}

/// Simple function: one value per explicit atom, per block fragment, and a
/// closed-form value sequence on the tail (absent means zero there).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    atom_values: Vec<f64>,
    block_values: Vec<Vec<f64>>,
    tail: Option<TailValues>,
}

impl SimpleFunction {
    pub fn zero(space: &MeasureSpace) -> Self {
        SimpleFunction {
            atom_values: vec![0.0; space.atoms.len()],
            block_values: space.blocks.iter().map(|b| vec![0.0; b.fragments.len()]).collect(),
            tail: None,
        }
    }

    pub fn constant(space: &MeasureSpace, c: f64) -> Self {
        SimpleFunction {
            atom_values: vec![c; space.atoms.len()],
            block_values: space.blocks.iter().map(|b| vec![c; b.fragments.len()]).collect(),
            tail: space.tail.as_ref().map(|_| TailValues::constant(c)),
        }
    }

    pub fn from_parts(
        space: &MeasureSpace,
        atom_values: Vec<f64>,
        block_values: Vec<Vec<f64>>,
        tail: Option<TailValues>,
    ) -> Result<Self> {
        let f = SimpleFunction { atom_values, block_values, tail };
        f.check_alignment(space)?;
        Ok(f)
    }

    /// Atom values only; zero on blocks and tail.
    pub fn from_atom_values(space: &MeasureSpace, atom_values: Vec<f64>) -> Result<Self> {
        let mut f = SimpleFunction::zero(space);
        if atom_values.len() != space.atoms.len() {
            return Err(Error::IndexMismatch(format!(
                "{} atom values for {} atoms",
                atom_values.len(),
                space.atoms.len()
            )));
        }
        f.atom_values = atom_values;
        Ok(f)
    }

    pub fn with_tail(mut self, tail: TailValues) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn with_block_values(mut self, space: &MeasureSpace, id: BlockId, values: Vec<f64>) -> Result<Self> {
        let bi = space.block_index(id).ok_or(Error::UnknownBlock(id))?;
        if values.len() != space.blocks[bi].fragments.len() {
            return Err(Error::IndexMismatch(format!(
                "{} fragment values for {} fragments of block {}",
                values.len(),
                space.blocks[bi].fragments.len(),
                id.0
            )));
        }
        self.block_values[bi] = values;
        Ok(self)
    }

    pub fn check_alignment(&self, space: &MeasureSpace) -> Result<()> {
        if self.atom_values.len() != space.atoms.len() {
            return Err(Error::IndexMismatch(format!(
                "function has {} atom values, space has {} atoms",
                self.atom_values.len(),
                space.atoms.len()
            )));
        }
        if self.block_values.len() != space.blocks.len() {
            return Err(Error::IndexMismatch(format!(
                "function has {} block value lists, space has {} blocks",
                self.block_values.len(),
                space.blocks.len()
            )));
        }
        for (b, vals) in space.blocks.iter().zip(&self.block_values) {
            if vals.len() != b.fragments.len() {
                return Err(Error::IndexMismatch(format!(
                    "block {} has {} fragments but {} values",
                    b.id.0,
                    b.fragments.len(),
                    vals.len()
                )));
            }
        }
        if self.tail.is_some() && !space.has_tail() {
            return Err(Error::IndexMismatch(
                "function has tail values but the space has no tail".into(),
            ));
        }
        Ok(())
    }

    pub fn atom_values(&self) -> &[f64] {
        &self.atom_values
    }

    pub fn block_values(&self) -> &[Vec<f64>] {
        &self.block_values
    }

    pub fn tail(&self) -> Option<&TailValues> {
        self.tail.as_ref()
    }

    pub fn value_at(&self, space: &MeasureSpace, at: AtomRef) -> Result<f64> {
        match at {
            AtomRef::Explicit { id } => space
                .atom_index(id)
                .map(|i| self.atom_values[i])
                .ok_or_else(|| Error::unknown_atom(id)),
            AtomRef::Tail { n } => {
                if n == 0 || !space.has_tail() {
                    return Err(Error::unknown_tail_atom(n));
                }
                Ok(self.tail.as_ref().map_or(0.0, |t| t.value(n)))
            }
        }
    }

    pub fn fragment_value(&self, space: &MeasureSpace, id: BlockId, index: usize) -> Result<f64> {
        let bi = space.block_index(id).ok_or(Error::UnknownBlock(id))?;
        self.block_values[bi]
            .get(index)
            .copied()
            .ok_or_else(|| Error::IndexMismatch(format!("fragment {index} of block {}", id.0)))
    }

    /// Pointwise |f|^t.
    pub fn abs_powf(&self, t: f64) -> SimpleFunction {
        SimpleFunction {
            atom_values: self.atom_values.iter().map(|v| v.abs().powf(t)).collect(),
            block_values: self
                .block_values
                .iter()
                .map(|vs| vs.iter().map(|v| v.abs().powf(t)).collect())
                .collect(),
            tail: self.tail.as_ref().map(|t_| t_.abs_powf(t)),
        }
    }

    /// Pointwise product. Both functions must align with the same space.
    pub fn mul(&self, other: &SimpleFunction) -> SimpleFunction {
        let tail = match (&self.tail, &other.tail) {
            (Some(a), Some(b)) => {
                let prod = a.mul(b);
                if prod.is_zero() { None } else { Some(prod) }
            }
            _ => None,
        };
        SimpleFunction {
            atom_values: self
                .atom_values
                .iter()
                .zip(&other.atom_values)
                .map(|(a, b)| a * b)
                .collect(),
            block_values: self
                .block_values
                .iter()
                .zip(&other.block_values)
                .map(|(xs, ys)| xs.iter().zip(ys).map(|(a, b)| a * b).collect())
                .collect(),
            tail,
        }
    }

    pub fn scale(&self, c: f64) -> SimpleFunction {
        SimpleFunction {
            atom_values: self.atom_values.iter().map(|v| c * v).collect(),
            block_values: self
                .block_values
                .iter()
                .map(|vs| vs.iter().map(|v| c * v).collect())
                .collect(),
            tail: self.tail.as_ref().map(|t| t.scale(c)),
        }
    }

    /// Pointwise difference. Fails when both tails are present with
    /// incompatible closed forms (closed forms are not closed under sums).
    pub fn sub(&self, other: &SimpleFunction) -> Result<SimpleFunction> {
        let tail = match (&self.tail, &other.tail) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.scale(-1.0)),
            (Some(a), Some(b)) => {
                if a == b {
                    None
                } else if a.start() == b.start() && a.form().is_zero() {
                    Some(b.scale(-1.0))
                } else if a.start() == b.start() && b.form().is_zero() {
                    Some(a.clone())
                } else {
                    return Err(Error::IndexMismatch(
                        "tail closed forms are not closed under subtraction".into(),
                    ));
                }
            }
        };
        Ok(SimpleFunction {
            atom_values: self
                .atom_values
                .iter()
                .zip(&other.atom_values)
                .map(|(a, b)| a - b)
                .collect(),
            block_values: self
                .block_values
                .iter()
                .zip(&other.block_values)
                .map(|(xs, ys)| xs.iter().zip(ys).map(|(a, b)| a - b).collect())
                .collect(),
            tail,
        })
    }

    /// Carries values onto a refinement of one block: each new fragment takes
    /// the value of its parent fragment.
    pub fn refined(&self, refinement: &BlockRefinement, space_after: &MeasureSpace) -> Result<SimpleFunction> {
        let bi = space_after
            .block_index(refinement.block)
            .ok_or(Error::UnknownBlock(refinement.block))?;
        let mut block_values = self.block_values.clone();
        let old = &self.block_values[bi];
        let mut new_vals = Vec::with_capacity(refinement.parents.len());
        for &p in &refinement.parents {
            let v = old.get(p).copied().ok_or_else(|| {
                Error::IndexMismatch(format!("refinement parent {p} out of range"))
            })?;
            new_vals.push(v);
        }
        block_values[bi] = new_vals;
        Ok(SimpleFunction { atom_values: self.atom_values.clone(), block_values, tail: self.tail.clone() })
    }
}

/// Integral of a simple function, with a certified enclosure when the tail
/// contributes an infinite series. Errors when that series diverges.
pub fn integrate(space: &MeasureSpace, f: &SimpleFunction) -> Result<CertifiedSum> {
    f.check_alignment(space)?;
    let mut head = 0.0f64;
    for (a, &v) in space.atoms.iter().zip(&f.atom_values) {
        head += v * a.mass;
    }
    for (b, vals) in space.blocks.iter().zip(&f.block_values) {
        for (&m, &v) in b.fragments.iter().zip(vals) {
            head += v * m;
        }
    }
    let mut total = CertifiedSum::exact(head);
    if let (Some(masses), Some(values)) = (space.tail_masses(), &f.tail) {
        if !values.is_zero() {
            let tail_sum = values.mul(&masses).sum(&SumTolerance::default())?;
            total = total.add(&tail_sum);
        }
    }
    Ok(total)
}

/// Midpoint of [`integrate`], for callers that want a single number.
pub fn integrate_value(space: &MeasureSpace, f: &SimpleFunction) -> Result<f64> {
    integrate(space, f).map(|s| s.value())
}

/// L^p norm of a simple function, p in [1, inf]. The essential sup equals the
/// plain sup here because every atom and fragment has positive mass.
pub fn lp_norm(space: &MeasureSpace, f: &SimpleFunction, p: f64) -> Result<f64> {
    f.check_alignment(space)?;
    if p == f64::INFINITY {
        let mut sup = 0.0f64;
        for &v in &f.atom_values {
            sup = sup.max(v.abs());
        }
        for vals in &f.block_values {
            for &v in vals {
                sup = sup.max(v.abs());
            }
        }
        if space.has_tail() {
            if let Some(tail) = &f.tail {
                match tail.sup() {
                    Some(s) => sup = sup.max(s),
                    None => {
                        return Err(Error::DivergentTail(
                            "tail values are essentially unbounded".into(),
                        ))
                    }
                }
            }
        }
        return Ok(sup);
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Validation(format!("exponent {p} outside [1, inf]")));
    }
    let power = integrate(space, &f.abs_powf(p))?;
    Ok(power.value().max(0.0).powf(1.0 / p))
}

/// How one block was refined: new fragment i came from old fragment
/// parents[i]. Every other block is untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRefinement {
    pub block: BlockId,
    pub parents: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubdivisionMode {
    /// Each fragment f becomes [f/2, f/4, ..., f*2^-c, f*2^-c]. Every split is
    /// a bitwise-exact halving.
    Halving,
    /// Each fragment becomes `count` near-equal pieces; the last piece absorbs
    /// the rounding residue so the piece sums reproduce the fragment exactly.
    Equal,
}

const MAX_HALVING_DEPTH: u32 = 40;
const MAX_EQUAL_PARTS: u32 = 4096;

fn split_halving(f: f64, depth: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(depth as usize + 1);
    let mut rest = f;
    for _ in 0..depth {
        let half = rest * 0.5;
        out.push(half);
        rest -= half;
    }
    out.push(rest);
    out
}

fn split_equal(f: f64, count: u32) -> Vec<f64> {
    if count <= 1 {
        return vec![f];
    }
    let piece = f / count as f64;
    let mut out = vec![piece; count as usize - 1];
    let mut acc = 0.0f64;
    for &p in &out {
        acc += p;
    }
    // f - acc is exact by Sterbenz since acc is within a factor 2 of f, so the
    // running sum of all pieces lands on f bit for bit.
    out.push(f - acc);
    out
}

/// Refines the partition of one block; all masses, ids, and the rest of the
/// space are unchanged. Returns the refined space and the parent mapping.
pub fn subdivide_block_mapped(
    space: &MeasureSpace,
    id: BlockId,
    count: u32,
    mode: SubdivisionMode,
) -> Result<(MeasureSpace, BlockRefinement)> {
    let bi = space.block_index(id).ok_or(Error::UnknownBlock(id))?;
    match mode {
        SubdivisionMode::Halving if count > MAX_HALVING_DEPTH => {
            return Err(Error::RefinementLimitExceeded { requested: count, max: MAX_HALVING_DEPTH })
        }
        SubdivisionMode::Equal if count > MAX_EQUAL_PARTS => {
            return Err(Error::RefinementLimitExceeded { requested: count, max: MAX_EQUAL_PARTS })
        }
        _ => {}
    }
    let mut new_fragments = Vec::new();
    let mut parents = Vec::new();
    for (j, &f) in space.blocks[bi].fragments.iter().enumerate() {
        let pieces = match mode {
            SubdivisionMode::Halving => split_halving(f, count),
            SubdivisionMode::Equal => split_equal(f, count),
        };
        parents.extend(std::iter::repeat(j).take(pieces.len()));
        new_fragments.extend(pieces);
    }
    let mut blocks = space.blocks.clone();
    blocks[bi].fragments = new_fragments;
    let refined = MeasureSpace { atoms: space.atoms.clone(), blocks, tail: space.tail.clone() };
    Ok((refined, BlockRefinement { block: id, parents }))
}

pub fn subdivide_block(
    space: &MeasureSpace,
    id: BlockId,
    count: u32,
    mode: SubdivisionMode,
) -> Result<MeasureSpace> {
    subdivide_block_mapped(space, id, count, mode).map(|(s, _)| s)
}

/// A nested decreasing family E_1 ⊃ E_2 ⊃ ... inside one block, each set a
/// suffix of the refined fragment list with mass(E_n) = block mass * 2^-n.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessSequence {
    pub space: MeasureSpace,
    pub refinement: BlockRefinement,
    pub block: BlockId,
    /// sets[k] is the fragment-index range [start, fragment_count) for E_{k+1}.
    pub sets: Vec<WitnessSet>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSet {
    pub start: usize,
    pub mass: f64,
}

/// Builds the halving witness family inside `id` by refining its partition so
/// every dyadic suffix cut exists. With `levels` = 0 the space is returned
/// unchanged with no sets.
pub fn witness_sequence(space: &MeasureSpace, id: BlockId, levels: u32) -> Result<WitnessSequence> {
    let bi = space.block_index(id).ok_or(Error::UnknownBlock(id))?;
    if levels > MAX_HALVING_DEPTH {
        return Err(Error::RefinementLimitExceeded { requested: levels, max: MAX_HALVING_DEPTH });
    }
    let block = &space.blocks[bi];
    let mut frags = block.fragments.clone();
    let mut parents: Vec<usize> = (0..frags.len()).collect();

    // Phase 1: ensure a cut exists at suffix mass m * 2^-n for each level,
    // splitting at most one fragment per level. Largest target first keeps the
    // trivial-partition case a chain of exact halvings.
    for n in 1..=levels {
        let target = block.mass * 0.5f64.powi(n as i32);
        let mut acc = 0.0f64;
        let mut i = frags.len();
        loop {
            if close_rel(acc, target) {
                break;
            }
            if i == 0 {
                return Err(Error::Validation(format!(
                    "block {} fragments cannot reach suffix mass {target}",
                    id.0
                )));
            }
            let f = frags[i - 1];
            let next = acc + f;
            if close_rel(next, target) {
                break;
            }
            if next < target {
                acc = next;
                i -= 1;
                continue;
            }
            let need = target - acc;
            let head = f - need;
            let tail_piece = f - head;
            frags[i - 1] = head;
            frags.insert(i, tail_piece);
            parents.insert(i, parents[i - 1]);
            break;
        }
    }

    // Phase 2: locate the cut index for each level in the final partition.
    let mut sets = Vec::with_capacity(levels as usize);
    for n in 1..=levels {
        let target = block.mass * 0.5f64.powi(n as i32);
        let mut acc = 0.0f64;
        let mut i = frags.len();
        while i > 0 && !close_rel(acc, target) {
            acc += frags[i - 1];
            i -= 1;
        }
        if !close_rel(acc, target) {
            return Err(Error::Validation(format!(
                "no suffix cut at mass {target} after refinement of block {}",
                id.0
            )));
        }
        sets.push(WitnessSet { start: i, mass: acc });
    }

    let mut blocks = space.blocks.clone();
    blocks[bi].fragments = frags;
    let refined = MeasureSpace { atoms: space.atoms.clone(), blocks, tail: space.tail.clone() };
    Ok(WitnessSequence {
        space: refined,
        refinement: BlockRefinement { block: id, parents },
        block: id,
        sets,
    })
}

fn close_rel(a: f64, b: f64) -> bool {
    (a - b).abs() <= STRUCTURAL_TOL * a.abs().max(b.abs()).max(1e-300)
}
