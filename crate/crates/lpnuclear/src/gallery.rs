//! Built-in instance gallery.
//!
//! Each entry is a complete instance file embedded at compile time, covering
//! every regime and structural feature once: convergent and divergent
//! criterion series in all three exponent orderings, multiplication and
//! composition specializations, power-law tails, a compact-but-not-nuclear
//! instance, the zero operator, and weights surviving on the non-atomic part.
//! Every entry records its expected outcome, so the gallery doubles as a
//! regression suite: [`check_entry`] re-analyzes an entry from scratch and
//! compares against the recorded verdict and bound.

use crate::error::{Error, Result};
use crate::instance::{parse_spec, ExpectedOutcome, InstanceSpec};
use crate::report::{analyze, Overrides, Report, ResolvedOptions};

/// A named instance with its source text.
#[derive(Clone, Copy, Debug)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub source: &'static str,
}

macro_rules! entry {
    ($name:literal) => {
        GalleryEntry { name: $name, source: include_str!(concat!("../gallery/", $name, ".json")) }
    };
}

/// All entries, ordered from the basic regime examples to the edge cases.
pub const GALLERY: &[GalleryEntry] = &[
    entry!("equal-diverge"),
    entry!("equal-shift"),
    entry!("qlessp-geometric"),
    entry!("plessq-diverge"),
    entry!("plessq-summable"),
    entry!("power-tail-zeta"),
    entry!("mult-summable"),
    entry!("mult-diverge"),
    entry!("mult-qlessp"),
    entry!("mult-plessq"),
    entry!("comp-collapse"),
    entry!("comp-shift-qlessp"),
    entry!("comp-plessq"),
    entry!("compact-not-nuclear"),
    entry!("mixed-fan-shift"),
    entry!("zero-op"),
    entry!("nonatomic-block"),
    entry!("nonatomic-mapped-blocks"),
];

pub fn find_entry(name: &str) -> Option<&'static GalleryEntry> {
    GALLERY.iter().find(|e| e.name == name)
}

/// Default tolerance for bound comparison when an entry does not pin one.
const DEFAULT_BOUND_TOL: f64 = 1e-9;

/// Outcome of re-analyzing one entry against its recorded expectation.
#[derive(Clone, Debug)]
pub struct GalleryCheck {
    pub name: String,
    pub expected: ExpectedOutcome,
    pub report: Report,
    pub passed: bool,
    /// One-line human summary of the comparison.
    pub detail: String,
}

/// Parses, analyzes, and compares one entry. Errors only on structural
/// failures (unparseable entry, missing expectation); a wrong verdict or bound
/// comes back as `passed == false`.
pub fn check_entry(entry: &GalleryEntry) -> Result<GalleryCheck> {
    let spec = parse_spec(entry.source)?;
    let expected = spec
        .expected
        .clone()
        .ok_or_else(|| Error::Validation(format!("entry {} records no expected outcome", entry.name)))?;
    let opts = ResolvedOptions::resolve(&spec, &Overrides::default())?;
    let report = analyze(&spec, &opts)?;
    Ok(build_check(entry.name, &spec, expected, report))
}

fn build_check(
    name: &str,
    spec: &InstanceSpec,
    expected: ExpectedOutcome,
    report: Report,
) -> GalleryCheck {
    let mut passed = report.verdict == expected.verdict;
    let mut detail = format!("verdict {:?} (expected {:?})", report.verdict, expected.verdict);
    if let Some(want) = expected.bound {
        let tol = expected.tolerance.unwrap_or(DEFAULT_BOUND_TOL);
        match report.nuclearity.nuclear_bound() {
            Some(got) => {
                let gap = (got - want).abs();
                if gap > tol {
                    passed = false;
                }
                detail = format!("{detail}; bound {got:.15e} vs {want:.15e} (gap {gap:.3e}, tol {tol:.1e})");
            }
            None => {
                passed = false;
                detail = format!("{detail}; expected bound {want:.15e} but none was produced");
            }
        }
    }
    GalleryCheck {
        name: spec.name.clone().unwrap_or_else(|| name.to_string()),
        expected,
        report,
        passed,
        detail,
    }
}

/// Checks every entry, in gallery order.
pub fn check_all() -> Result<Vec<GalleryCheck>> {
    GALLERY.iter().map(check_entry).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuclearity::Verdict;
    use crate::instance::serialize_spec;

    #[test]
    fn entries_parse_round_trip_and_name_themselves() {
        for entry in GALLERY {
            let spec = parse_spec(entry.source)
                .unwrap_or_else(|e| panic!("{} does not parse: {e}", entry.name));
            assert_eq!(spec.name.as_deref(), Some(entry.name), "{}", entry.name);
            assert!(spec.expected.is_some(), "{} records no expectation", entry.name);
            let round = parse_spec(&serialize_spec(&spec)).unwrap();
            assert_eq!(round, spec, "{} fails to round-trip", entry.name);
            spec.build().unwrap_or_else(|e| panic!("{} does not build: {e}", entry.name));
        }
    }

    #[test]
    fn names_are_unique_and_lookup_works() {
        for (i, e) in GALLERY.iter().enumerate() {
            assert!(
                GALLERY[..i].iter().all(|o| o.name != e.name),
                "duplicate name {}",
                e.name
            );
        }
        assert!(find_entry("zero-op").is_some());
        assert!(find_entry("no-such-entry").is_none());
    }

    #[test]
    fn every_entry_matches_its_recorded_outcome() {
        let checks = check_all().unwrap();
        assert_eq!(checks.len(), GALLERY.len());
        let failures: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        assert!(failures.is_empty(), "gallery regressions:\n{}", failures.join("\n"));
    }

    #[test]
    fn expected_verdicts_cover_both_outcomes_and_all_regimes() {
        use crate::nuclearity::{regime, RegimeCase};
        let mut nuclear = 0;
        let mut not_nuclear = 0;
        let mut cases = [false; 3];
        for entry in GALLERY {
            let spec = parse_spec(entry.source).unwrap();
            match spec.expected.as_ref().unwrap().verdict {
                Verdict::Nuclear => nuclear += 1,
                Verdict::NotNuclear => not_nuclear += 1,
                Verdict::Inconclusive => {}
            }
            match regime(spec.p, spec.q).case {
                RegimeCase::Equal => cases[0] = true,
                RegimeCase::QLessP => cases[1] = true,
                RegimeCase::PLessQ => cases[2] = true,
            }
        }
        assert!(nuclear >= 6, "only {nuclear} nuclear entries");
        assert!(not_nuclear >= 5, "only {not_nuclear} non-nuclear entries");
        assert!(cases.iter().all(|&c| c), "some exponent regime is never exercised");
    }
}
