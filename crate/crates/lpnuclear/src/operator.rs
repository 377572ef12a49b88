//! The weighted composition operator W f = u * (f compose phi) between
//! L^p(mu) and L^q(mu), its exact action on simple functions, the norm
//! identity through the density J, finite matrix realizations, and
//! independent brute-force norm oracles.

use crate::error::{Error, Result};
use crate::measure::{
    integrate, lp_norm, AtomId, MeasureSpace, SimpleFunction,
};
use crate::series::{CertifiedSum, TailValues};
use crate::transform::{compose_with, j_function, Transformation};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest dimension the brute-force norm oracles accept.
pub const BRUTEFORCE_DIM_CAP: usize = 64;

/// Largest vector family the sign-enumeration estimate accepts.
pub const SUMMING_FAMILY_CAP: usize = 12;

#[derive(Clone, Debug)]
pub struct WeightedCompOp {
    space: MeasureSpace,
    phi: Transformation,
    u: SimpleFunction,
    /// Optional phase angles (radians) turning the real weight into a complex
    /// one u * e^(i theta). Norms and all nuclearity quantities depend on |u|
    /// only, so the phase enters nothing but [`WeightedCompOp::apply_with_phase`].
    phase: Option<SimpleFunction>,
    p: f64,
    q: f64,
}

impl WeightedCompOp {
    pub fn new(
        space: MeasureSpace,
        phi: Transformation,
        u: SimpleFunction,
        p: f64,
        q: f64,
    ) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() || !(q >= 1.0) || !q.is_finite() {
            return Err(Error::Validation(format!(
                "exponents must lie in [1, inf), got p = {p}, q = {q}"
            )));
        }
        let space = space.validated()?;
        u.check_alignment(&space)?;
        Ok(WeightedCompOp { space, phi, u, phase: None, p, q })
    }

    /// Multiplication operator M_u: phi is the identity.
    pub fn multiplication(space: MeasureSpace, u: SimpleFunction, p: f64, q: f64) -> Result<Self> {
        let phi = Transformation::identity(&space);
        WeightedCompOp::new(space, phi, u, p, q)
    }

    /// Composition operator C_phi: the weight is identically 1.
    pub fn composition(space: MeasureSpace, phi: Transformation, p: f64, q: f64) -> Result<Self> {
        let u = SimpleFunction::constant(&space, 1.0);
        WeightedCompOp::new(space, phi, u, p, q)
    }

    pub fn with_phase(mut self, phase: SimpleFunction) -> Result<Self> {
        phase.check_alignment(&self.space)?;
        if let Some(t) = phase.tail() {
            if t.as_constant().is_none() {
                return Err(Error::Validation(
                    "tail phase must be constant so the twisted weight stays closed-form".into(),
                ));
            }
        }
        self.phase = Some(phase);
        Ok(self)
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn phi(&self) -> &Transformation {
        &self.phi
    }

    pub fn weight(&self) -> &SimpleFunction {
        &self.u
    }

    pub fn phase(&self) -> Option<&SimpleFunction> {
        self.phase.as_ref()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// W f = u * (f compose phi), exact on simple functions.
    pub fn apply(&self, f: &SimpleFunction) -> Result<SimpleFunction> {
        let pulled = compose_with(&self.space, &self.phi, f)?;
        Ok(self.u.mul(&pulled))
    }

    /// Real and imaginary parts of (u e^(i theta)) * (f compose phi) for a
    /// real input f. Without a stored phase the imaginary part is zero.
    pub fn apply_with_phase(&self, f: &SimpleFunction) -> Result<(SimpleFunction, SimpleFunction)> {
        let w = self.apply(f)?;
        let Some(phase) = &self.phase else {
            let im = SimpleFunction::zero(&self.space);
            return Ok((w, im));
        };
        let cos = map_phase(&self.space, phase, f64::cos)?;
        let sin = map_phase(&self.space, phase, f64::sin)?;
        Ok((w.mul(&cos), w.mul(&sin)))
    }

    /// Both sides of the pushforward identity
    /// ||W f||_q^q = integral of J_q |f|^q d mu,
    /// computed along independent routes.
    pub fn pushforward_norm_identity(&self, f: &SimpleFunction) -> Result<PushforwardCheck> {
        let wf = self.apply(f)?;
        let via_operator = integrate(&self.space, &wf.abs_powf(self.q))?;
        let j = j_function(&self.space, &self.phi, &self.u, self.q)?;
        let via_density = integrate(&self.space, &j.mul(&f.abs_powf(self.q)))?;
        Ok(PushforwardCheck { via_operator, via_density })
    }

    /// Operator norm through the density: ||W|| = (ess sup J_p)^(1/p) on
    /// L^p -> L^p. Defined for p = q only.
    pub fn norm_via_j(&self) -> Result<JNormReport> {
        if self.p != self.q {
            return Err(Error::WrongRegime);
        }
        let j = j_function(&self.space, &self.phi, &self.u, self.p)?;
        let mut sup = 0.0f64;
        for &v in j.atom_values() {
            sup = sup.max(v);
        }
        for vals in j.block_values() {
            for &v in vals {
                sup = sup.max(v);
            }
        }
        if let Some(t) = j.tail() {
            match t.sup() {
                Some(s) => sup = sup.max(s),
                None => return Err(Error::UnboundedJ(self.p)),
            }
        }
        Ok(JNormReport { j_sup: sup, operator_norm: sup.powf(1.0 / self.p) })
    }

    /// Coefficient matrix of W in the normalized indicator bases
    /// e_k = 1_{A_k} / mu(A_k)^(1/p) (source) and the q-normalized analogue
    /// (target), built by evaluating W on each basis vector. Finite atomic
    /// spaces only.
    pub fn matrix_realization(&self) -> Result<MatrixRealization> {
        if !self.space.blocks().is_empty() || self.space.has_tail() {
            return Err(Error::NotFiniteAtomic);
        }
        let n = self.space.atoms().len();
        let masses: Vec<f64> = self.space.atoms().iter().map(|a| a.mass).collect();
        let atom_ids: Vec<AtomId> = self.space.atoms().iter().map(|a| a.id).collect();
        let mut entries = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let mut coords = vec![0.0; n];
            coords[k] = masses[k].powf(-1.0 / self.p);
            let basis = SimpleFunction::from_atom_values(&self.space, coords)?;
            let image = self.apply(&basis)?;
            for m in 0..n {
                entries[(m, k)] = image.atom_values()[m] * masses[m].powf(1.0 / self.q);
            }
        }
        Ok(MatrixRealization { entries, p: self.p, q: self.q, masses, atom_ids })
    }

    /// ||W f||_q directly.
    pub fn image_norm(&self, f: &SimpleFunction) -> Result<f64> {
        let wf = self.apply(f)?;
        lp_norm(&self.space, &wf, self.q)
    }
}

fn map_phase(
    space: &MeasureSpace,
    phase: &SimpleFunction,
    f: fn(f64) -> f64,
) -> Result<SimpleFunction> {
    let atom_values = phase.atom_values().iter().map(|&v| f(v)).collect();
    let block_values = phase
        .block_values()
        .iter()
        .map(|vs| vs.iter().map(|&v| f(v)).collect())
        .collect();
    let tail = match phase.tail() {
        Some(t) => Some(TailValues::constant(f(t.as_constant().ok_or_else(|| {
            Error::Validation("tail phase must be constant".into())
        })?))),
        None => {
            if space.has_tail() {
                // Absent phase means angle 0 everywhere on the tail.
                Some(TailValues::constant(f(0.0)))
            } else {
                None
            }
        }
    };
    SimpleFunction::from_parts(space, atom_values, block_values, tail)
}

/// The two sides of the pushforward identity, with enclosures.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PushforwardCheck {
    pub via_operator: CertifiedSum,
    pub via_density: CertifiedSum,
}

impl PushforwardCheck {
    /// Relative gap between the midpoints.
    pub fn relative_gap(&self) -> f64 {
        let a = self.via_operator.value();
        let b = self.via_density.value();
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    /// Whether the certified enclosures overlap up to `tol` relative slack.
    pub fn consistent(&self, tol: f64) -> bool {
        let slack = tol * self.via_operator.upper.abs().max(self.via_density.upper.abs()).max(1.0);
        self.via_operator.lower - slack <= self.via_density.upper
            && self.via_density.lower - slack <= self.via_operator.upper
    }
}

/// Essential sup of J_p and the operator norm it induces.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JNormReport {
    pub j_sup: f64,
    pub operator_norm: f64,
}

/// Dense coefficient matrix of a finite-atomic operator in normalized
/// indicator bases. With these bases, coordinate sequences carry exactly the
/// standard l^p and l^q norms, so matrix norms equal operator norms.
#[derive(Clone, Debug)]
pub struct MatrixRealization {
    pub entries: DMatrix<f64>,
    pub p: f64,
    pub q: f64,
    pub masses: Vec<f64>,
    pub atom_ids: Vec<AtomId>,
}

impl MatrixRealization {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of nonzero entries in each row. A weighted composition operator
    /// always yields at most one, since row m only sees the basis vector of
    /// phi(A_m).
    pub fn nonzeros_per_row(&self) -> Vec<usize> {
        (0..self.entries.nrows())
            .map(|m| (0..self.entries.ncols()).filter(|&k| self.entries[(m, k)] != 0.0).count())
            .collect()
    }

    /// Brute-force operator norm l^p -> l^q: exact singular value
    /// decomposition when p = q = 2, seeded multistart projected ascent
    /// otherwise. Independent of every density formula.
    pub fn bruteforce_norm(&self, seed: u64) -> Result<f64> {
        if self.dim() > BRUTEFORCE_DIM_CAP {
            return Err(Error::DimensionTooLarge(self.dim(), BRUTEFORCE_DIM_CAP));
        }
        if self.p == 2.0 && self.q == 2.0 {
            return Ok(operator_norm_dense(&self.entries));
        }
        Ok(ascent_norm(&self.entries, self.p, self.q, seed))
    }

    /// Trace norm (sum of singular values), the nuclear norm of the Hilbert
    /// space case. Only meaningful for p = q = 2.
    pub fn trace_norm(&self) -> Result<f64> {
        if self.p != 2.0 || self.q != 2.0 {
            return Err(Error::NotHilbertCase);
        }
        if self.dim() > BRUTEFORCE_DIM_CAP {
            return Err(Error::DimensionTooLarge(self.dim(), BRUTEFORCE_DIM_CAP));
        }
        Ok(trace_norm_dense(&self.entries))
    }

    /// Lower estimate of the absolutely summing constant over a finite vector
    /// family: sum of image norms over the best unconditional combination,
    /// with the inner sup taken exactly over all sign patterns.
    pub fn summing_estimate(&self, family: &[DVector<f64>]) -> Result<f64> {
        if family.len() > SUMMING_FAMILY_CAP {
            return Err(Error::FamilyTooLarge(family.len(), SUMMING_FAMILY_CAP));
        }
        for x in family {
            if x.len() != self.dim() {
                return Err(Error::IndexMismatch(format!(
                    "family vector of length {} against dimension {}",
                    x.len(),
                    self.dim()
                )));
            }
        }
        if family.is_empty() {
            return Ok(0.0);
        }
        let numerator: f64 =
            family.iter().map(|x| lp_vec(&(&self.entries * x), self.q)).sum();
        let mut denom = 0.0f64;
        for mask in 0u32..(1u32 << family.len()) {
            let mut combo = DVector::<f64>::zeros(self.dim());
            for (i, x) in family.iter().enumerate() {
                let sign = if mask & (1 << i) != 0 { -1.0 } else { 1.0 };
                combo += x * sign;
            }
            denom = denom.max(lp_vec(&combo, self.p));
        }
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(numerator / denom)
    }
}

/// Spectral norm of a dense matrix (largest singular value).
pub fn operator_norm_dense(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Trace norm of a dense matrix (sum of singular values).
pub fn trace_norm_dense(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().iter().sum()
}

fn lp_vec(x: &DVector<f64>, p: f64) -> f64 {
    if p == f64::INFINITY {
        return x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    }
    x.iter().map(|&v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn normalize_lp(x: &mut DVector<f64>, p: f64) -> bool {
    let n = lp_vec(x, p);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    *x /= n;
    true
}

/// Maximizes ||A x||_q over the unit l^p sphere by projected gradient ascent
/// with backtracking, restarted from every coordinate vertex and a batch of
/// seeded random directions. Deterministic for a fixed seed.
fn ascent_norm(a: &DMatrix<f64>, p: f64, q: f64, seed: u64) -> f64 {
    let n = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(n + 33);
    for k in 0..n {
        let mut e = DVector::<f64>::zeros(n);
        e[k] = 1.0;
        starts.push(e);
    }
    starts.push(DVector::<f64>::from_element(n, 1.0));
    for _ in 0..32 {
        let v = DVector::<f64>::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0));
        starts.push(v);
    }
    let mut best = 0.0f64;
    for mut x in starts {
        if !normalize_lp(&mut x, p) {
            continue;
        }
        best = best.max(ascend_from(a, x, p, q));
    }
    best
}

fn ascend_from(a: &DMatrix<f64>, mut x: DVector<f64>, p: f64, q: f64) -> f64 {
    let mut obj = lp_vec(&(a * &x), q);
    let mut step = 0.5f64;
    for _ in 0..10_000 {
        let y = a * &x;
        let ny = lp_vec(&y, q);
        if ny == 0.0 {
            break;
        }
        // Gradient of ||A x||_q at x.
        let weights =
            DVector::<f64>::from_fn(y.len(), |i, _| y[i].abs().powf(q - 1.0) * y[i].signum());
        let mut grad = a.transpose() * weights;
        grad /= ny.powf(q - 1.0);
        let gn = lp_vec(&grad, 2.0);
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        let mut advanced = false;
        while step >= 1e-12 {
            let mut cand = &x + &grad * (step / gn);
            if !normalize_lp(&mut cand, p) {
                step *= 0.5;
                continue;
            }
            let cobj = lp_vec(&(a * &cand), q);
            if cobj > obj * (1.0 + 1e-14) {
                x = cand;
                obj = cobj;
                step = (step * 1.5).min(1.0);
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    obj
}
