//! One-call analysis of an instance into a serializable report.
//!
//! The report is deterministic for a fixed seed: one seed drives the oracle
//! multistarts and the random sample functions, and every field serializes
//! with a stable key order, so equal-seed runs are byte-identical.

use crate::error::{Error, Result};
use crate::instance::InstanceSpec;
use crate::measure::{MeasureSpace, SimpleFunction};
use crate::nuclearity::{
    check_nuclear, check_special_cases, compactness_limits, CompactnessReport, NuclearityReport,
    SpecialCaseReport, Verdict, NONATOMIC_TOL,
};
use crate::operator::WeightedCompOp;
use crate::representation::{
    build_nuclear_representation, noncompact_witness, verify_representation, NoncompactWitness,
    NuclearRepresentation, RepresentationTerm,
};
use crate::series::{ClosedFormFamily, SeriesVerdict, TailValues};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TRUNCATION: u64 = 64;
pub const DEFAULT_SAMPLES: usize = 8;
pub const DEFAULT_SEED: u64 = 7;
/// Overrides the built-in default truncation when set.
pub const TRUNCATION_ENV: &str = "LPNUCLEAR_TRUNCATION";
/// Refinement depth of the witness family embedded in a report.
const REPORT_WITNESS_LEVELS: u32 = 6;
/// Terms echoed into the representation summary.
const LEADING_TERMS: usize = 8;

/// Option values after resolution. Order per knob: explicit override, the
/// spec's own options, the environment (truncation only), built-in default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOptions {
    pub truncation: u64,
    pub oracle: bool,
    pub samples: usize,
    pub seed: u64,
}

/// Knobs a caller (the command line) may force.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub truncation: Option<u64>,
    pub oracle: Option<bool>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl ResolvedOptions {
    pub fn resolve(spec: &InstanceSpec, over: &Overrides) -> Result<ResolvedOptions> {
        let file = spec.options.as_ref();
        let env_truncation = match std::env::var(TRUNCATION_ENV) {
            Ok(s) => Some(s.parse::<u64>().map_err(|_| {
                Error::Validation(format!("{TRUNCATION_ENV} must be a nonnegative integer, got {s:?}"))
            })?),
            Err(_) => None,
        };
        Ok(ResolvedOptions {
            truncation: over
                .truncation
                .or(file.and_then(|o| o.truncation))
                .or(env_truncation)
                .unwrap_or(DEFAULT_TRUNCATION),
            oracle: over.oracle.or(file.and_then(|o| o.oracle)).unwrap_or(false),
            samples: over.samples.or(file.and_then(|o| o.samples)).unwrap_or(DEFAULT_SAMPLES),
            seed: over.seed.or(file.and_then(|o| o.seed)).unwrap_or(DEFAULT_SEED),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationSummary {
    pub nuclear_norm_bound: f64,
    pub partial_bound: f64,
    pub tail_bound: f64,
    pub truncation: u64,
    pub term_count: usize,
    pub leading_terms: Vec<RepresentationTerm>,
}

impl RepresentationSummary {
    fn from_rep(rep: &NuclearRepresentation) -> Self {
        RepresentationSummary {
            nuclear_norm_bound: rep.nuclear_norm_bound,
            partial_bound: rep.partial_bound,
            tail_bound: rep.tail_bound,
            truncation: rep.truncation,
            term_count: rep.terms.len(),
            leading_terms: rep.terms.iter().take(LEADING_TERMS).cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSection {
    pub seed: u64,
    pub samples: usize,
    /// Max relative gap of ||Wf||_q^q against the density integral.
    pub pushforward_max_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_sup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_norm_via_density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_norm_bruteforce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation_max_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation_max_excess: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub instance: InstanceSpec,
    pub options: ResolvedOptions,
    pub verdict: Verdict,
    pub nuclearity: NuclearityReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special_case: Option<SpecialCaseReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepresentationSummary>,
    pub compactness: CompactnessReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<NoncompactWitness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    pub warnings: Vec<String>,
}

pub fn analyze(spec: &InstanceSpec, opts: &ResolvedOptions) -> Result<Report> {
    let op = spec.build()?;
    let nuclearity = check_nuclear(&op)?;
    let special_case = match check_special_cases(&op) {
        Ok(r) => Some(r),
        Err(Error::NotSpecialCase) => None,
        Err(e) => return Err(e),
    };
    let compactness = compactness_limits(&op)?;
    let mut warnings = Vec::new();

    if op.p() == op.q() {
        match op.norm_via_j() {
            Ok(n) => warnings.push(format!(
                "operator norm uses the powered form sup(J_p)^(1/p) = {:.12e}; the bare sup(J_p) is {:.12e}",
                n.operator_norm, n.j_sup
            )),
            Err(Error::UnboundedJ(v)) => warnings.push(format!(
                "the density J_p is unbounded along the tail (diverges like {v:.3e}); the operator is unbounded"
            )),
            Err(e) => return Err(e),
        }
    }
    if let SeriesVerdict::Inconclusive { diagnostic } = &nuclearity.series {
        warnings.push(format!("criterion series inconclusive: {diagnostic}"));
    }
    if let Some(sc) = &special_case {
        if sc.report.verdict != nuclearity.verdict {
            warnings.push(
                "special-case route disagrees with the general criterion; inspect the terms"
                    .to_string(),
            );
        }
    }

    let representation = if nuclearity.verdict == Verdict::Nuclear {
        let rep = build_nuclear_representation(&op, opts.truncation)?;
        Some(rep)
    } else {
        None
    };

    let witness = if nuclearity.verdict == Verdict::NotNuclear
        && nuclearity.nonatomic_offending_mass > NONATOMIC_TOL
    {
        if op.p() == op.q() {
            Some(noncompact_witness(&op, REPORT_WITNESS_LEVELS)?)
        } else {
            warnings.push(
                "the weight survives on the non-atomic part, but the witness construction covers only p = q"
                    .to_string(),
            );
            None
        }
    } else {
        None
    };

    let oracle = if opts.oracle {
        Some(run_oracles(&op, representation.as_ref(), opts)?)
    } else {
        None
    };

    Ok(Report {
        instance: spec.clone(),
        options: opts.clone(),
        verdict: nuclearity.verdict,
        nuclearity,
        special_case,
        representation: representation.as_ref().map(RepresentationSummary::from_rep),
        compactness,
        witness,
        oracle,
        warnings,
    })
}

/// Deterministic sample functions: uniform values on atoms and fragments, a
/// decaying geometric closed form on the tail.
pub fn random_samples(space: &MeasureSpace, count: usize, rng: &mut ChaCha8Rng) -> Vec<SimpleFunction> {
    (0..count)
        .map(|_| {
            let atom_values: Vec<f64> =
                space.atoms().iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
            let block_values: Vec<Vec<f64>> = space
                .blocks()
                .iter()
                .map(|b| b.fragments.iter().map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let mut f = SimpleFunction::from_parts(space, atom_values, block_values, None)
                .expect("aligned by construction");
            if space.has_tail() {
                let coeff = rng.gen_range(0.2..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let base = rng.gen_range(0.3..0.7);
                f = f.with_tail(TailValues::from_family(&ClosedFormFamily::Geometric {
                    coeff,
                    base,
                }));
            }
            f
        })
        .collect()
}

fn run_oracles(
    op: &WeightedCompOp,
    rep: Option<&NuclearRepresentation>,
    opts: &ResolvedOptions,
) -> Result<OracleSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples = random_samples(op.space(), opts.samples, &mut rng);

    let mut pushforward_max_gap = 0.0f64;
    for f in &samples {
        let check = op.pushforward_norm_identity(f)?;
        pushforward_max_gap = pushforward_max_gap.max(check.relative_gap());
    }

    let (j_sup, operator_norm_via_density) = if op.p() == op.q() {
        match op.norm_via_j() {
            Ok(n) => (Some(n.j_sup), Some(n.operator_norm)),
            Err(Error::UnboundedJ(_)) => (None, None),
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };

    let (operator_norm_bruteforce, trace_norm) = match op.matrix_realization() {
        Ok(m) => match m.bruteforce_norm(opts.seed) {
            Ok(bf) => {
                let tn =
                    if op.p() == 2.0 && op.q() == 2.0 { Some(m.trace_norm()?) } else { None };
                (Some(bf), tn)
            }
            Err(Error::DimensionTooLarge(..)) => (None, None),
            Err(e) => return Err(e),
        },
        Err(Error::NotFiniteAtomic) => (None, None),
        Err(e) => return Err(e),
    };

    let (representation_max_residual, representation_max_excess) = match rep {
        Some(r) => {
            let v = verify_representation(op, r, &samples)?;
            (Some(v.max_residual), Some(v.max_excess))
        }
        None => (None, None),
    };

    Ok(OracleSection {
        seed: opts.seed,
        samples: samples.len(),
        pushforward_max_gap,
        j_sup,
        operator_norm_via_density,
        operator_norm_bruteforce,
        trace_norm,
        representation_max_residual,
        representation_max_excess,
    })
}

pub fn render_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Fixed-layout human rendering. Everything numeric prints with enough digits
/// to be quotable.
pub fn render_text(report: &Report) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let name = report.instance.name.as_deref().unwrap_or("(unnamed)");
    let _ = writeln!(out, "instance       {name}");
    let reg = &report.nuclearity.regime;
    let case = match reg.case {
        crate::nuclearity::RegimeCase::Equal => "p = q",
        crate::nuclearity::RegimeCase::QLessP => "q < p",
        crate::nuclearity::RegimeCase::PLessQ => "p < q",
    };
    let _ = writeln!(out, "exponents      p = {}, q = {} ({case})", reg.p, reg.q);
    let _ = writeln!(out, "verdict        {:?}", report.verdict);
    match &report.nuclearity.series {
        SeriesVerdict::Converges { sum } => {
            let _ = writeln!(out, "series         converges; certified bound {:.15e}", sum.upper);
        }
        SeriesVerdict::Diverges { .. } => {
            let _ = writeln!(out, "series         diverges (witness recorded)");
        }
        SeriesVerdict::Inconclusive { diagnostic } => {
            let _ = writeln!(out, "series         inconclusive: {diagnostic}");
        }
    }
    let _ = writeln!(
        out,
        "nonatomic mass {:.3e}",
        report.nuclearity.nonatomic_offending_mass
    );
    let terms: Vec<String> =
        report.nuclearity.terms_preview.iter().map(|t| format!("{t:.6e}")).collect();
    let _ = writeln!(out, "leading terms  [{}]", terms.join(", "));
    if let Some(sc) = &report.special_case {
        let _ = writeln!(
            out,
            "special case   {:?}; max term deviation {:.3e}",
            sc.kind, sc.max_term_deviation
        );
    }
    if let Some(rep) = &report.representation {
        let _ = writeln!(
            out,
            "representation bound {:.15e} = partial {:.15e} + tail {:.3e} ({} terms, truncation {})",
            rep.nuclear_norm_bound, rep.partial_bound, rep.tail_bound, rep.term_count, rep.truncation
        );
    }
    let _ = writeln!(
        out,
        "compactness    {:?}: {} (value {:.6e})",
        report.compactness.status, report.compactness.statement, report.compactness.value
    );
    if let Some(w) = &report.witness {
        let ratios: Vec<String> = w.ratios.iter().map(|r| format!("{r:.6}")).collect();
        let _ = writeln!(
            out,
            "witness        block {}; ratios [{}] all >= {:.6}",
            w.block.0,
            ratios.join(", "),
            w.lower_bound
        );
    }
    if let Some(o) = &report.oracle {
        let _ = writeln!(
            out,
            "oracle         seed {}; {} samples; pushforward gap {:.3e}",
            o.seed, o.samples, o.pushforward_max_gap
        );
        if let (Some(d), Some(b)) = (o.operator_norm_via_density, o.operator_norm_bruteforce) {
            let _ = writeln!(out, "               norm via density {d:.12e} vs brute force {b:.12e}");
        } else if let Some(b) = o.operator_norm_bruteforce {
            let _ = writeln!(out, "               brute-force norm {b:.12e}");
        }
        if let Some(t) = o.trace_norm {
            let _ = writeln!(out, "               trace norm {t:.12e}");
        }
        if let Some(r) = o.representation_max_residual {
            let _ = writeln!(out, "               max representation residual {r:.3e}");
        }
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning        {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_spec;

    fn fan_in_text() -> &'static str {
        r#"{
            "name": "fan-in",
            "space": {"atoms": [
                {"id": 1, "mass": 1.0},
                {"id": 2, "mass": 2.0},
                {"id": 3, "mass": 0.5}
            ]},
            "phi": {"atoms": [[1, 1], [2, 1], [3, 2]]},
            "u": {"atoms": [1.0, 1.0, 2.0]},
            "p": 1.0,
            "q": 1.0,
            "options": {"oracle": true, "samples": 6, "seed": 13}
        }"#
    }

    #[test]
    fn analysis_is_deterministic_for_a_fixed_seed() {
        let spec = parse_spec(fan_in_text()).unwrap();
        let opts = ResolvedOptions::resolve(&spec, &Overrides::default()).unwrap();
        let a = render_json(&analyze(&spec, &opts).unwrap());
        let b = render_json(&analyze(&spec, &opts).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn fan_in_report_carries_the_exact_bound_and_oracles() {
        let spec = parse_spec(fan_in_text()).unwrap();
        let opts = ResolvedOptions::resolve(&spec, &Overrides::default()).unwrap();
        assert!(opts.oracle);
        assert_eq!(opts.seed, 13);
        let report = analyze(&spec, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::Nuclear);
        let rep = report.representation.as_ref().unwrap();
        assert!((rep.nuclear_norm_bound - 3.5).abs() < 1e-14);
        let oracle = report.oracle.as_ref().unwrap();
        assert!(oracle.pushforward_max_gap <= 1e-12);
        assert!(oracle.representation_max_residual.unwrap() <= 1e-12);
        // p = q = 1: brute force ascends to the density norm 3 within 1e-4.
        let bf = oracle.operator_norm_bruteforce.unwrap();
        let dn = oracle.operator_norm_via_density.unwrap();
        assert!((bf - dn).abs() <= 1e-4 * dn, "{bf} vs {dn}");
        // The powered-form note is always present for p = q.
        assert!(report.warnings.iter().any(|w| w.contains("powered form")));
        let text = render_text(&report);
        assert!(text.contains("verdict        Nuclear"));
    }

    #[test]
    fn override_resolution_prefers_explicit_values() {
        let spec = parse_spec(fan_in_text()).unwrap();
        let over = Overrides { truncation: Some(16), seed: Some(99), ..Default::default() };
        let opts = ResolvedOptions::resolve(&spec, &over).unwrap();
        assert_eq!(opts.truncation, 16);
        assert_eq!(opts.seed, 99);
        assert_eq!(opts.samples, 6);
        assert!(opts.oracle);
    }
}
