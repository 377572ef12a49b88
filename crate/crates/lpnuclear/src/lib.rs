//! Nuclearity of weighted composition operators between L^p spaces.
//!
//! A weighted composition operator sends f to u * (f o phi). On a sigma-finite
//! measure space made of explicit atoms, non-atomic blocks, and an optional
//! countable atom tail with closed-form masses, this crate decides whether
//! such an operator from L^p into L^q is nuclear, and when it is, builds the
//! rank-one representation together with a certified bound on the nuclear
//! norm. Every series that enters a verdict is summed with an enclosure or
//! refuted with a divergence witness; nothing is decided from bare partial
//! sums.
//!
//! The pieces:
//!
//! * [`measure`]: spaces, simple functions, integration, block refinement.
//! * [`series`]: closed-form term sequences with certified sums and
//!   divergence witnesses.
//! * [`transform`]: measurable self-maps, fibers, the Radon-Nikodym
//!   derivative, conditional expectation, and the local density J.
//! * [`operator`]: the operator itself, norm identities, and brute-force
//!   matrix oracles it can be checked against.
//! * [`nuclearity`]: the regime-dependent criterion series and the verdict.
//! * [`representation`]: explicit rank-one pieces, residual verification, and
//!   block-refinement witnesses for non-compactness.
//! * [`instance`]: declarative JSON instance files with strict parsing.
//! * [`report`]: one-call analysis of an instance into a serializable report,
//!   deterministic for a fixed seed.
//! * [`gallery`]: built-in instances with recorded outcomes, usable as a
//!   regression suite.
//!
//! The `examples/` directory walks through each capability on small concrete
//! spaces; `cargo run --example nuclearity_regimes` is a good starting point.

pub mod error;
pub mod gallery;
pub mod instance;
pub mod measure;
pub mod nuclearity;
pub mod operator;
pub mod report;
pub mod representation;
pub mod series;
pub mod transform;

pub use error::{Error, Result};
pub use gallery::{check_all, check_entry, find_entry, GalleryCheck, GalleryEntry, GALLERY};
pub use instance::{
    parse_spec, serialize_spec, AnalysisOptions, AtomSpec, BlockSpec, BlockValuesSpec,
    ExpectedOutcome, InstanceSpec, PhiSpec, SpaceSpec, WeightSpec,
};
pub use measure::{
    integrate, integrate_value, lp_norm, witness_sequence, Atom, AtomId, AtomRef, Block, BlockId,
    MeasurableSet, MeasureSpace, SimpleFunction,
};
pub use nuclearity::{
    check_nuclear, check_special_cases, compactness_limits, criterion_terms,
    nonatomic_offending_mass, regime, CompactnessReport, ConditionStatus, CriterionTerms,
    ExponentRegime, NuclearityReport, RegimeCase, SpecialCaseReport, SpecialKind, Verdict,
};
pub use operator::{MatrixRealization, WeightedCompOp};
pub use report::{
    analyze, random_samples, render_json, render_text, OracleSection, Overrides, Report,
    RepresentationSummary, ResolvedOptions, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TRUNCATION,
    TRUNCATION_ENV,
};
pub use representation::{
    build_nuclear_representation, materialize_vector, noncompact_witness, verify_representation,
    NoncompactWitness, NuclearRepresentation, RepresentationTerm, VerificationReport,
};
pub use series::{
    series_judge, CertifiedSum, ClosedFormFamily, DivergenceWitness, JudgeOptions, SeriesVerdict,
    SumTolerance, TailValues, TermForm, TermSequence,
};
pub use transform::{
    compose_with, conditional_expectation, fiber, j_function, j_function_via_expectation, mu_q,
    radon_nikodym, ConditionalExpectation, Fiber, TailMap, Transformation,
};
