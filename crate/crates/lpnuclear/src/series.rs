//! Closed-form term sequences and certified series verdicts.
//!
//! Every convergence decision in this crate flows through [`series_judge`] or
//! the certified summation on [`TermForm`]. A `Converges` verdict always
//! carries a rigorous upper bound (partial sum plus a certified tail bound),
//! and a `Diverges` verdict always carries a checkable lower-bound witness.
//! Raw partial sums alone never decide anything.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hard cap on explicit summation work inside one certified sum.
const MAX_SUMMATION_TERMS: u64 = 1 << 22;

/// Window length used when certifying "eventually decreasing" numerically.
const MONOTONE_WINDOW: usize = 32;

/// User-facing closed-form families for tail data: masses, weights, values.
///
/// `term(n) = coeff * base^n * n^(-decay)` in the most general variant; the
/// simpler variants fix one of the two parts. Indexing starts at n = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedFormFamily {
    /// term(n) = value for every n.
    Constant { value: f64 },
    /// term(n) = coeff * base^n with 0 < base.
    Geometric { coeff: f64, base: f64 },
    /// term(n) = coeff * n^(-decay).
    Power { coeff: f64, decay: f64 },
    /// term(n) = coeff * n^(-decay) * base^n.
    PowerGeometric { coeff: f64, base: f64, decay: f64 },
}

impl ClosedFormFamily {
    pub fn term(&self, n: u64) -> f64 {
        self.form().term(n)
    }

    /// Lower the family to the internal term-form engine.
    pub fn form(&self) -> TermForm {
        match *self {
            ClosedFormFamily::Constant { value } => TermForm::constant(value),
            ClosedFormFamily::Geometric { coeff, base } => TermForm::geometric(coeff, base),
            ClosedFormFamily::Power { coeff, decay } => TermForm::power(coeff, -decay),
            ClosedFormFamily::PowerGeometric { coeff, base, decay } => {
                TermForm::geometric(coeff, base).mul(&TermForm::power(1.0, -decay))
            }
        }
    }

    /// Checks the family is usable as tail data: finite parameters, positive
    /// base, and strictly positive terms on a leading window.
    pub fn validate(&self) -> Result<()> {
        let (coeff, base) = match *self {
            ClosedFormFamily::Constant { value } => (value, 1.0),
            ClosedFormFamily::Geometric { coeff, base } => (coeff, base),
            ClosedFormFamily::Power { coeff, decay } => {
                if !decay.is_finite() {
                    return Err(Error::Validation("power decay must be finite".into()));
                }
                (coeff, 1.0)
            }
            ClosedFormFamily::PowerGeometric { coeff, base, decay } => {
                if !decay.is_finite() {
                    return Err(Error::Validation("power decay must be finite".into()));
                }
                (coeff, base)
            }
        };
        if !coeff.is_finite() || !base.is_finite() {
            return Err(Error::Validation("family parameters must be finite".into()));
        }
        if base <= 0.0 {
            return Err(Error::Validation(format!("base must be positive, got {base}")));
        }
        Ok(())
    }
}

/// Internal closed-form term engine.
///
/// term(n) = coeff * base^n * prod_i (n + offset_i)^exponent_i, defined for
/// n >= min_index(). The representation is closed under products, real
/// powers of nonnegative forms, and argument shifts, which is exactly what
/// the density and criterion formulas need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermForm {
    coeff: f64,
    base: f64,
    /// (offset, exponent) pairs, sorted by offset, merged, no zero exponents.
    factors: Vec<(i64, f64)>,
}

impl TermForm {
    pub fn constant(c: f64) -> Self {
        TermForm { coeff: c, base: 1.0, factors: Vec::new() }.normalized()
    }

    pub fn geometric(c: f64, base: f64) -> Self {
        assert!(base > 0.0, "geometric base must be positive");
        TermForm { coeff: c, base, factors: Vec::new() }.normalized()
    }

    /// coeff * n^exponent (signed exponent).
    pub fn power(c: f64, exponent: f64) -> Self {
        TermForm { coeff: c, base: 1.0, factors: vec![(0, exponent)] }.normalized()
    }

    fn normalized(mut self) -> Self {
        if self.coeff == 0.0 {
            return TermForm { coeff: 0.0, base: 1.0, factors: Vec::new() };
        }
        self.factors.sort_by_key(|&(off, _)| off);
        let mut merged: Vec<(i64, f64)> = Vec::with_capacity(self.factors.len());
        for (off, exp) in self.factors.drain(..) {
            match merged.last_mut() {
                Some((o, e)) if *o == off => *e += exp,
                _ => merged.push((off, exp)),
            }
        }
        merged.retain(|&(_, e)| e != 0.0);
        self.factors = merged;
        self
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0.0
    }

    /// The constant value when the form has no n-dependence.
    pub fn as_constant(&self) -> Option<f64> {
        (self.factors.is_empty() && self.base == 1.0).then_some(self.coeff)
    }

    /// Smallest index at which every factor base n + offset is >= 1.
    pub fn min_index(&self) -> u64 {
        let mut min = 1i64;
        for &(off, _) in &self.factors {
            min = min.max(1 - off);
        }
        min as u64
    }

    /// Sum of factor exponents; the polynomial growth order at base 1.
    pub fn total_exponent(&self) -> f64 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    pub fn term(&self, n: u64) -> f64 {
        if self.coeff == 0.0 {
            return 0.0;
        }
        debug_assert!(n >= self.min_index(), "term index below domain start");
        let mut value = self.coeff * self.base.powf(n as f64);
        for &(off, exp) in &self.factors {
            let x = n as i64 + off;
            debug_assert!(x >= 1);
            value *= (x as f64).powf(exp);
        }
        value
    }

    pub fn mul(&self, other: &TermForm) -> TermForm {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        TermForm { coeff: self.coeff * other.coeff, base: self.base * other.base, factors }
            .normalized()
    }

    pub fn scale(&self, c: f64) -> TermForm {
        TermForm { coeff: self.coeff * c, base: self.base, factors: self.factors.clone() }
            .normalized()
    }

    /// Pointwise power; requires a nonnegative coefficient.
    pub fn powf(&self, t: f64) -> TermForm {
        assert!(self.coeff >= 0.0, "powf needs a nonnegative coefficient");
        if self.coeff == 0.0 {
            return TermForm::constant(0.0);
        }
        TermForm {
            coeff: self.coeff.powf(t),
            base: self.base.powf(t),
            factors: self.factors.iter().map(|&(off, e)| (off, e * t)).collect(),
        }
        .normalized()
    }

    /// Pointwise reciprocal on the domain where terms are nonzero.
    pub fn recip(&self) -> TermForm {
        assert!(self.coeff != 0.0, "reciprocal of the zero form");
        TermForm {
            coeff: 1.0 / self.coeff,
            base: 1.0 / self.base,
            factors: self.factors.iter().map(|&(off, e)| (off, -e)).collect(),
        }
        .normalized()
    }

    pub fn abs(&self) -> TermForm {
        TermForm { coeff: self.coeff.abs(), base: self.base, factors: self.factors.clone() }
    }

    /// Reindex by k: the returned form satisfies new.term(n) = self.term(n + k)
    /// wherever both sides are defined.
    pub fn shift_arg(&self, k: i64) -> TermForm {
        if self.coeff == 0.0 {
            return self.clone();
        }
        TermForm {
            coeff: self.coeff * self.base.powi(k as i32),
            base: self.base,
            factors: self.factors.iter().map(|&(off, e)| (off + k, e)).collect(),
        }
        .normalized()
    }

    /// Certified upper bound on term(m + 1) / term(m) over all m >= n.
    /// Requires a positive coefficient and n >= min_index().
    fn ratio_sup_from(&self, n: u64) -> f64 {
        debug_assert!(self.coeff > 0.0 && n >= self.min_index());
        let mut ratio = self.base;
        for &(off, exp) in &self.factors {
            if exp > 0.0 {
                let x = (n as i64 + off) as f64;
                ratio *= ((x + 1.0) / x).powf(exp);
            }
            // exp < 0 factors have ratio below 1; bounding by 1 keeps the sup valid.
        }
        ratio
    }

    /// Certified enclosure [kappa_low, kappa_high] of prod_i ((n + off_i)/n)^exp_i
    /// over all n >= from, with from >= min_index(). Both bounds are exact
    /// monotone endpoints of each factor.
    fn offset_distortion(&self, from: u64) -> (f64, f64) {
        let n0 = from as f64;
        let mut low = 1.0;
        let mut high = 1.0;
        for &(off, exp) in &self.factors {
            if off == 0 {
                continue;
            }
            let endpoint = ((n0 + off as f64) / n0).powf(exp);
            // (1 + off/n)^exp is monotone in n with limit 1, so the range over
            // [from, inf) is the interval between the endpoint value and 1.
            low *= endpoint.min(1.0);
            high *= endpoint.max(1.0);
        }
        (low, high)
    }

    /// Convergence class of sum_{n >= start} term(n) for a nonnegative form.
    pub fn classify(&self) -> ConvergenceClass {
        if self.coeff == 0.0 {
            return ConvergenceClass::Convergent;
        }
        debug_assert!(self.coeff > 0.0);
        if self.base < 1.0 {
            ConvergenceClass::Convergent
        } else if self.base > 1.0 {
            ConvergenceClass::Divergent
        } else if self.total_exponent() < -1.0 {
            ConvergenceClass::Convergent
        } else {
            ConvergenceClass::Divergent
        }
    }

    /// Certified enclosure of sum_{n >= start} term(n) for a nonnegative form.
    ///
    /// Exact for pure geometric forms. Otherwise partial summation with a
    /// ratio-test tail bound (base < 1) or an integral-test enclosure with
    /// offset-distortion corrections (base = 1).
    pub fn sum_from(&self, start: u64, tol: &SumTolerance) -> Result<CertifiedSum> {
        if self.coeff == 0.0 {
            return Ok(CertifiedSum::exact(0.0));
        }
        if self.coeff < 0.0 {
            return self.abs().sum_from(start, tol).map(CertifiedSum::neg);
        }
        let start = start.max(self.min_index());
        match self.classify() {
            ConvergenceClass::Divergent => Err(Error::DivergentTail(format!(
                "sum of {self:?} from {start} diverges"
            ))),
            ConvergenceClass::Convergent if self.factors.is_empty() => {
                // Pure geometric: closed form coeff * base^start / (1 - base).
                let s = self.coeff * self.base.powf(start as f64) / (1.0 - self.base);
                Ok(CertifiedSum::exact(s))
            }
            ConvergenceClass::Convergent if self.base < 1.0 => self.sum_ratio_test(start, tol),
            ConvergenceClass::Convergent => self.sum_integral_test(start, tol),
        }
    }

    fn sum_ratio_test(&self, start: u64, tol: &SumTolerance) -> Result<CertifiedSum> {
        let mut partial = 0.0f64;
        let mut n = start;
        let mut seen = 0u64;
        loop {
            let t = self.term(n);
            partial += t;
            seen += 1;
            let rho = self.ratio_sup_from(n);
            if rho < 1.0 {
                let tail = t * rho / (1.0 - rho);
                if tail <= tol.absolute + tol.relative * partial.abs() {
                    return Ok(CertifiedSum { lower: partial, upper: partial + tail });
                }
                if seen >= MAX_SUMMATION_TERMS {
                    // Still a valid enclosure, just wider than requested.
                    return Ok(CertifiedSum { lower: partial, upper: partial + tail });
                }
            } else if seen >= MAX_SUMMATION_TERMS {
                return Err(Error::DivergentTail(format!(
                    "ratio certification did not engage within {MAX_SUMMATION_TERMS} terms"
                )));
            }
            n += 1;
        }
    }

    fn sum_integral_test(&self, start: u64, tol: &SumTolerance) -> Result<CertifiedSum> {
        let gamma = self.total_exponent();
        debug_assert!(self.base == 1.0 && gamma < -1.0);
        let mut cut = start;
        let mut partial = 0.0f64;
        let mut enclosure;
        loop {
            let next_cut = (cut * 2).max(start + 16).min(start + MAX_SUMMATION_TERMS);
            for n in cut..next_cut {
                partial += self.term(n);
            }
            cut = next_cut;
            // Tail over n >= cut. Compare term(n) with coeff * n^gamma through
            // the certified offset distortion on [cut, inf).
            let (lo_k, hi_k) = self.offset_distortion(cut);
            let denom = -gamma - 1.0;
            let upper_int = (cut as f64 - 1.0).max(1.0).powf(gamma + 1.0) / denom;
            let lower_int = (cut as f64).powf(gamma + 1.0) / denom;
            let tail_hi = self.coeff * hi_k * upper_int;
            let tail_lo = self.coeff * lo_k * lower_int;
            enclosure = CertifiedSum { lower: partial + tail_lo, upper: partial + tail_hi };
            if enclosure.width() <= tol.absolute + tol.relative * enclosure.upper.abs()
                || cut >= start + MAX_SUMMATION_TERMS
            {
                return Ok(enclosure);
            }
        }
    }

    /// Certified upper bound on sup_{n >= start} term(n) for a nonnegative
    /// form; `None` means the form is unbounded.
    pub fn sup_from(&self, start: u64) -> Option<f64> {
        if self.coeff == 0.0 {
            return Some(0.0);
        }
        debug_assert!(self.coeff > 0.0);
        let start = start.max(self.min_index());
        if self.base > 1.0 {
            return None;
        }
        if self.base == 1.0 && self.total_exponent() > 0.0 {
            return None;
        }
        // Terms tend to a finite limit (0 or coeff); bound the head by direct
        // evaluation and the tail beyond the window by a distortion bound.
        let window_end = start + 4096;
        let mut best = 0.0f64;
        for n in start..window_end {
            best = best.max(self.term(n));
        }
        let tail_bound = if self.base < 1.0 {
            // Past a ratio certification point terms only decrease; extend the
            // window if certification has not engaged yet.
            let mut n = window_end;
            let mut extra_best = best;
            while self.ratio_sup_from(n) >= 1.0 {
                extra_best = extra_best.max(self.term(n));
                n += 1;
                if n > window_end + MAX_SUMMATION_TERMS {
                    return None;
                }
            }
            extra_best.max(self.term(n))
        } else {
            let (_, hi_k) = self.offset_distortion(window_end);
            self.coeff * hi_k * (window_end as f64).powf(self.total_exponent()).min(1.0)
        };
        Some(best.max(tail_bound))
    }

    /// Limit of term(n) as n grows, for a nonnegative form. Infinite when the
    /// terms are unbounded.
    pub fn limit(&self) -> f64 {
        if self.coeff == 0.0 {
            return 0.0;
        }
        if self.base < 1.0 {
            0.0
        } else if self.base > 1.0 {
            f64::INFINITY
        } else {
            let gamma = self.total_exponent();
            if gamma < 0.0 {
                0.0
            } else if gamma == 0.0 {
                self.coeff
            } else {
                f64::INFINITY
            }
        }
    }

    /// Divergence witness for a nonnegative form whose series diverges:
    /// term(n) >= coeff * n^exponent for all n >= from, with exponent >= -1.
    pub fn divergence_witness(&self, start: u64) -> Result<DivergenceWitness> {
        if self.classify() != ConvergenceClass::Divergent {
            return Err(Error::Validation("witness requested for a convergent form".into()));
        }
        let start = start.max(self.min_index());
        if self.base > 1.0 {
            // Past the point where the certified ratio infimum reaches 1 the
            // terms are nondecreasing, so they stay above term(from).
            let mut n = start;
            loop {
                let mut ratio_inf = self.base;
                for &(off, exp) in &self.factors {
                    if exp < 0.0 {
                        let x = (n as i64 + off) as f64;
                        ratio_inf *= ((x + 1.0) / x).powf(exp);
                    }
                }
                if ratio_inf >= 1.0 {
                    return Ok(DivergenceWitness { coeff: self.term(n), exponent: 0.0, from: n });
                }
                n += 1;
            }
        } else {
            // base == 1, gamma >= -1: term(n) = coeff * distortion * n^gamma.
            let gamma = self.total_exponent();
            let (lo_k, _) = self.offset_distortion(start);
            Ok(DivergenceWitness { coeff: self.coeff * lo_k, exponent: gamma, from: start })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergenceClass {
    Convergent,
    Divergent,
}

/// Tolerances steering adaptive certified summation.
#[derive(Clone, Debug)]
pub struct SumTolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for SumTolerance {
    fn default() -> Self {
        SumTolerance { absolute: 1e-14, relative: 1e-12 }
    }
}

/// Two-sided enclosure of a series value. `upper` is always a valid bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSum {
    pub lower: f64,
    pub upper: f64,
}

impl CertifiedSum {
    pub fn exact(v: f64) -> Self {
        CertifiedSum { lower: v, upper: v }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Midpoint, the best single-number estimate.
    pub fn value(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn add(&self, other: &CertifiedSum) -> CertifiedSum {
        CertifiedSum { lower: self.lower + other.lower, upper: self.upper + other.upper }
    }

    pub fn add_exact(&self, v: f64) -> CertifiedSum {
        CertifiedSum { lower: self.lower + v, upper: self.upper + v }
    }

    fn neg(self) -> CertifiedSum {
        CertifiedSum { lower: -self.upper, upper: -self.lower }
    }
}

/// A closed-form value sequence attached to tail atoms: value(n) = form.term(n)
/// for n >= start and 0 below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailValues {
    start: u64,
    form: TermForm,
}

impl TailValues {
    pub fn new(form: TermForm, start: u64) -> Self {
        let start = start.max(form.min_index());
        TailValues { start, form }
    }

    pub fn from_family(family: &ClosedFormFamily) -> Self {
        TailValues::new(family.form(), 1)
    }

    pub fn constant(value: f64) -> Self {
        TailValues::new(TermForm::constant(value), 1)
    }

    pub fn zero() -> Self {
        TailValues::new(TermForm::constant(0.0), 1)
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn form(&self) -> &TermForm {
        &self.form
    }

    pub fn is_zero(&self) -> bool {
        self.form.is_zero()
    }

    /// The constant value when the sequence is constant over all n >= 1.
    pub fn as_constant(&self) -> Option<f64> {
        if self.form.is_zero() {
            Some(0.0)
        } else if self.start == 1 {
            self.form.as_constant()
        } else {
            None
        }
    }

    pub fn value(&self, n: u64) -> f64 {
        if n < self.start {
            0.0
        } else {
            self.form.term(n)
        }
    }

    /// Pointwise product, defined where both sequences are.
    pub fn mul(&self, other: &TailValues) -> TailValues {
        if self.is_zero() || other.is_zero() {
            return TailValues::zero();
        }
        TailValues::new(self.form.mul(&other.form), self.start.max(other.start))
    }

    pub fn abs_powf(&self, t: f64) -> TailValues {
        if self.is_zero() {
            return TailValues::zero();
        }
        TailValues::new(self.form.abs().powf(t), self.start)
    }

    pub fn scale(&self, c: f64) -> TailValues {
        TailValues::new(self.form.scale(c), self.start)
    }

    /// Reindexed sequence value(n + k); entries pulled from below the original
    /// start vanish, which the start adjustment encodes.
    pub fn shift(&self, k: i64) -> TailValues {
        if self.is_zero() {
            return TailValues::zero();
        }
        let new_start = (self.start as i64 - k).max(1) as u64;
        TailValues::new(self.form.shift_arg(k), new_start)
    }

    /// Certified enclosure of sum_{n >= from} |value(n)| sign-adjusted; errors
    /// when the tail diverges.
    pub fn sum_from(&self, from: u64, tol: &SumTolerance) -> Result<CertifiedSum> {
        let from = from.max(self.start);
        self.form.sum_from(from, tol)
    }

    pub fn sum(&self, tol: &SumTolerance) -> Result<CertifiedSum> {
        self.sum_from(self.start, tol)
    }

    /// Certified upper bound on sup |value(n)|; `None` when unbounded.
    pub fn sup(&self) -> Option<f64> {
        self.form.abs().sup_from(self.start)
    }

    pub fn limit(&self) -> f64 {
        self.form.abs().limit()
    }

    pub fn classify(&self) -> ConvergenceClass {
        self.form.abs().classify()
    }
}

/// Checkable divergence certificate: term(n) >= coeff * n^exponent for all
/// n >= from, with exponent >= -1 and coeff > 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub coeff: f64,
    pub exponent: f64,
    pub from: u64,
}

impl DivergenceWitness {
    /// Index M such that the partial sum through M of the witness lower bound
    /// provably exceeds `threshold`. Saturates at u64::MAX.
    pub fn index_exceeding(&self, threshold: f64) -> u64 {
        if threshold <= 0.0 {
            return self.from;
        }
        let c = self.coeff;
        let g = self.exponent;
        let n0 = self.from as f64;
        let m = if g >= 0.0 {
            // Each term from n0 on is at least c * n0^gamma.
            n0 + (threshold / (c * n0.powf(g))).ceil()
        } else if g == -1.0 {
            // sum >= c * ln((M + 1) / n0).
            n0 * (threshold / c).exp()
        } else {
            // sum >= c * ((M + 1)^(g+1) - n0^(g+1)) / (g + 1).
            let target = threshold * (g + 1.0) / c + n0.powf(g + 1.0);
            target.powf(1.0 / (g + 1.0))
        };
        if !m.is_finite() || m >= u64::MAX as f64 {
            u64::MAX
        } else {
            (m.ceil() as u64).max(self.from)
        }
    }

    /// Verifies the lower bound against directly evaluated terms.
    pub fn check_against<F: Fn(u64) -> f64>(&self, term: F, count: u64) -> bool {
        let slack = 1.0 + 1e-9;
        (self.from..self.from + count)
            .all(|n| term(n) * slack >= self.coeff * (n as f64).powf(self.exponent))
    }
}

/// Outcome of judging a nonnegative series.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converges {
        /// Certified enclosure of the full sum; `sum.upper` is the bound.
        sum: CertifiedSum,
    },
    Diverges {
        witness: DivergenceWitness,
    },
    Inconclusive {
        diagnostic: String,
    },
}

impl SeriesVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self, SeriesVerdict::Converges { .. })
    }

    pub fn bound(&self) -> Option<f64> {
        match self {
            SeriesVerdict::Converges { sum } => Some(sum.upper),
            _ => None,
        }
    }
}

/// Term sequences the judge understands.
#[derive(Clone, Debug)]
pub enum TermSequence {
    /// Finitely many terms; the series is their exact sum.
    Finite(Vec<f64>),
    /// Explicit leading terms followed by a closed-form tail.
    WithTail { prefix: Vec<f64>, tail: TailValues },
    /// Terms only known on an evaluated window (1-based), optionally dominated
    /// pointwise by a certified closed-form sequence.
    Empirical { window: Vec<f64>, dominator: Option<TailValues> },
}

/// Options for [`series_judge`].
#[derive(Clone, Debug)]
pub struct JudgeOptions {
    pub tolerance: SumTolerance,
}

impl Default for JudgeOptions {
    fn default() -> Self {
        JudgeOptions { tolerance: SumTolerance::default() }
    }
}

fn check_nonnegative(terms: &[f64]) -> Result<()> {
    for (i, &t) in terms.iter().enumerate() {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::NegativeTerm(i));
        }
    }
    Ok(())
}

/// Decides convergence of a nonnegative series with a certificate either way.
///
/// Finite inputs sum exactly. Closed-form tails classify exactly and carry
/// either a certified tail bound or a divergence witness. Empirical windows
/// convert to a verdict only through a domination certificate; otherwise the
/// verdict is `Inconclusive` with a diagnostic.
pub fn series_judge(terms: &TermSequence, opts: &JudgeOptions) -> Result<SeriesVerdict> {
    match terms {
        TermSequence::Finite(values) => {
            check_nonnegative(values)?;
            let sum: f64 = values.iter().sum();
            Ok(SeriesVerdict::Converges { sum: CertifiedSum::exact(sum) })
        }
        TermSequence::WithTail { prefix, tail } => {
            check_nonnegative(prefix)?;
            if tail.form().coeff() < 0.0 {
                return Err(Error::NegativeTerm(prefix.len()));
            }
            let head: f64 = prefix.iter().sum();
            match tail.classify() {
                ConvergenceClass::Convergent => {
                    let tail_sum = tail.sum(&opts.tolerance)?;
                    Ok(SeriesVerdict::Converges { sum: tail_sum.add_exact(head) })
                }
                ConvergenceClass::Divergent => {
                    let witness = tail.form().divergence_witness(tail.start())?;
                    Ok(SeriesVerdict::Diverges { witness })
                }
            }
        }
        TermSequence::Empirical { window, dominator } => {
            check_nonnegative(window)?;
            let Some(dom) = dominator else {
                return Ok(SeriesVerdict::Inconclusive {
                    diagnostic: "no domination certificate; raw partial sums prove nothing"
                        .into(),
                });
            };
            if dom.classify() == ConvergenceClass::Divergent {
                return Ok(SeriesVerdict::Inconclusive {
                    diagnostic: "dominating sequence diverges, so domination is uninformative"
                        .into(),
                });
            }
            let slack = 1.0 + 1e-12;
            for (i, &t) in window.iter().enumerate() {
                let n = i as u64 + 1;
                if t > dom.value(n) * slack + 1e-300 {
                    return Ok(SeriesVerdict::Inconclusive {
                        diagnostic: format!(
                            "domination fails at n = {n}: term {t} exceeds bound {}",
                            dom.value(n)
                        ),
                    });
                }
            }
            let check = window.len().min(MONOTONE_WINDOW);
            let recent = &window[window.len() - check..];
            if recent.windows(2).any(|w| w[1] > w[0] * slack) {
                return Ok(SeriesVerdict::Inconclusive {
                    diagnostic: "window is not eventually nonincreasing".into(),
                });
            }
            let head: f64 = window.iter().sum();
            let tail = dom.sum_from(window.len() as u64 + 1, &opts.tolerance)?;
            Ok(SeriesVerdict::Converges {
                sum: CertifiedSum { lower: head, upper: head + tail.upper },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judge(t: &TermSequence) -> SeriesVerdict {
        series_judge(t, &JudgeOptions::default()).unwrap()
    }

    #[test]
    fn geometric_tail_sums_exactly() {
        // sum_{n>=1} 2^-n = 1, in closed form with zero enclosure width.
        let tail = TailValues::from_family(&ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 });
        let v = judge(&TermSequence::WithTail { prefix: vec![], tail });
        match v {
            SeriesVerdict::Converges { sum } => {
                assert_eq!(sum.width(), 0.0);
                assert!((sum.upper - 1.0).abs() < 1e-15);
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn constant_tail_diverges_with_usable_witness() {
        let tail = TailValues::constant(1.0);
        let v = judge(&TermSequence::WithTail { prefix: vec![], tail: tail.clone() });
        match v {
            SeriesVerdict::Diverges { witness } => {
                assert!(witness.check_against(|n| tail.value(n), 64));
                let m = witness.index_exceeding(1000.0);
                assert!(m >= 1000 && m < 1100);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn harmonic_diverges_with_log_rate_witness() {
        let tail = TailValues::from_family(&ClosedFormFamily::Power { coeff: 1.0, decay: 1.0 });
        let v = judge(&TermSequence::WithTail { prefix: vec![], tail: tail.clone() });
        match v {
            SeriesVerdict::Diverges { witness } => {
                assert_eq!(witness.exponent, -1.0);
                assert!(witness.check_against(|n| tail.value(n), 256));
                // Partial sums of 1/n pass 10 around n ~ e^10 ~ 22026.
                let m = witness.index_exceeding(10.0);
                assert!(m > 20_000 && m < 25_000, "index {m}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn basel_series_encloses_pi_squared_over_six() {
        let tail = TailValues::from_family(&ClosedFormFamily::Power { coeff: 1.0, decay: 2.0 });
        let v = judge(&TermSequence::WithTail { prefix: vec![], tail });
        let target = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        match v {
            SeriesVerdict::Converges { sum } => {
                assert!(sum.lower <= target && target <= sum.upper);
                assert!(sum.width() < 1e-9, "width {}", sum.width());
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn power_geometric_converges_despite_growing_polynomial() {
        // n^3 * 0.9^n: ratio certification engages once the polynomial part
        // stops dominating.
        let fam = ClosedFormFamily::PowerGeometric { coeff: 1.0, base: 0.9, decay: -3.0 };
        let tail = TailValues::from_family(&fam);
        let v = judge(&TermSequence::WithTail { prefix: vec![], tail });
        // Exact value of sum n^3 x^n at x = 0.9: x(1+4x+x^2)/(1-x)^4.
        let x: f64 = 0.9;
        let exact = x * (1.0 + 4.0 * x + x * x) / (1.0 - x).powi(4);
        match v {
            SeriesVerdict::Converges { sum } => {
                assert!(sum.lower <= exact + 1e-9 && exact <= sum.upper + 1e-9);
                assert!((sum.value() - exact).abs() < 1e-6 * exact);
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn finite_sequences_sum_exactly_and_reject_negatives() {
        let v = judge(&TermSequence::Finite(vec![1.0, 2.0, 3.5]));
        assert_eq!(v.bound(), Some(6.5));
        let err = series_judge(
            &TermSequence::Finite(vec![1.0, -0.5]),
            &JudgeOptions::default(),
        );
        assert!(matches!(err, Err(Error::NegativeTerm(1))));
    }

    #[test]
    fn empirical_window_needs_domination_certificate() {
        let window: Vec<f64> = (1..=64).map(|n| 0.5f64.powi(n)).collect();
        let v = judge(&TermSequence::Empirical { window: window.clone(), dominator: None });
        assert!(matches!(v, SeriesVerdict::Inconclusive { .. }));

        let dom = TailValues::from_family(&ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 });
        let v = judge(&TermSequence::Empirical { window, dominator: Some(dom) });
        match v {
            SeriesVerdict::Converges { sum } => {
                assert!((sum.upper - 1.0).abs() < 1e-12);
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn empirical_domination_failure_is_reported() {
        let window = vec![0.5, 0.25, 0.6];
        let dom = TailValues::from_family(&ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 });
        let v = judge(&TermSequence::Empirical { window, dominator: Some(dom) });
        match v {
            SeriesVerdict::Inconclusive { diagnostic } => {
                assert!(diagnostic.contains("domination fails at n = 3"));
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn shift_reindexes_terms() {
        let form = TermForm::geometric(3.0, 0.5).mul(&TermForm::power(1.0, -2.0));
        let shifted = form.shift_arg(4);
        for n in 1..40 {
            let a = shifted.term(n);
            let b = form.term(n + 4);
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300), "n={n} {a} vs {b}");
        }
    }

    #[test]
    fn product_and_power_track_pointwise_values() {
        let a = TermForm::power(2.0, -1.5);
        let b = TermForm::geometric(0.5, 0.8);
        let prod = a.mul(&b);
        let pow = prod.powf(0.5);
        for n in 1..50 {
            let expect = a.term(n) * b.term(n);
            assert!((prod.term(n) - expect).abs() < 1e-14 * expect.abs().max(1e-300));
            assert!((pow.term(n) - expect.sqrt()).abs() < 1e-13 * expect.sqrt().max(1e-300));
        }
    }

    #[test]
    fn sup_and_limit_cover_the_three_base_cases() {
        // Hump shape: n^2 * 0.5^n peaks at n = 2..3.
        let hump = TermForm::geometric(1.0, 0.5).mul(&TermForm::power(1.0, 2.0));
        let sup = hump.sup_from(1).unwrap();
        let peak = (1..200).map(|n| hump.term(n)).fold(0.0f64, f64::max);
        assert!(sup >= peak && sup <= peak * (1.0 + 1e-9));
        assert_eq!(hump.limit(), 0.0);

        assert_eq!(TermForm::constant(2.5).limit(), 2.5);
        assert_eq!(TermForm::constant(2.5).sup_from(7), Some(2.5));

        assert_eq!(TermForm::geometric(1.0, 1.25).sup_from(1), None);
        assert_eq!(TermForm::power(1.0, 0.25).sup_from(1), None);
        assert_eq!(TermForm::power(1.0, 0.25).limit(), f64::INFINITY);
    }

    #[test]
    fn tail_values_respect_start_offsets() {
        let tail = TailValues::new(TermForm::geometric(1.0, 0.5), 3);
        assert_eq!(tail.value(1), 0.0);
        assert_eq!(tail.value(2), 0.0);
        assert!((tail.value(3) - 0.125).abs() < 1e-15);
        // Sum from the start: 2^-3 + 2^-4 + ... = 0.25.
        let s = tail.sum(&SumTolerance::default()).unwrap();
        assert!((s.upper - 0.25).abs() < 1e-15);
        // Shift by 2: new value(n) = old value(n + 2), so new start is 1.
        let sh = tail.shift(2);
        assert_eq!(sh.start(), 1);
        assert!((sh.value(1) - 0.125).abs() < 1e-15);
        // Shift by -2 the other way: values delayed to start 5.
        let back = tail.shift(-2);
        assert_eq!(back.start(), 5);
        assert_eq!(back.value(4), 0.0);
        assert!((back.value(5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn integral_tail_bound_shrinks_with_more_terms() {
        let form = TermForm::power(1.0, -1.1);
        // Slow decay: enclosure still certified though wide at small budgets.
        let tol = SumTolerance { absolute: 0.0, relative: 1e-6 };
        let sum = form.sum_from(1, &tol).unwrap();
        assert!(sum.lower > 10.0 && sum.upper < 11.0, "{sum:?}");
        assert!(sum.width() <= 1e-6 * sum.upper + 1e-9);
    }
}
