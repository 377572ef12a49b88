//! Random instance generators shared by the integration suites. Everything is
//! seeded; a failure reproduces from the seed alone.

// Each suite compiles this module separately and uses a different subset.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use lpnuclear::{MeasureSpace, Result, SimpleFunction, Transformation, WeightedCompOp};

/// Finite atomic space with ids 1..=n and masses in [0.1, 10].
pub fn random_space(rng: &mut ChaCha8Rng, max_atoms: usize) -> MeasureSpace {
    let n = rng.gen_range(1..=max_atoms);
    let masses: Vec<(u32, f64)> =
        (1..=n as u32).map(|id| (id, rng.gen_range(0.1..10.0))).collect();
    MeasureSpace::atomic(&masses).validated().expect("positive masses")
}

/// Transformation with an arbitrary fiber structure: every atom picks its
/// target uniformly, so folds and unreachable atoms both occur.
pub fn random_phi(rng: &mut ChaCha8Rng, space: &MeasureSpace) -> Transformation {
    let n = space.atoms().len() as u32;
    let map: Vec<(u32, u32)> = (1..=n).map(|id| (id, rng.gen_range(1..=n))).collect();
    Transformation::new(space, &map, &[], None).expect("targets exist")
}

/// Weight with |u| in [0, 4] and random signs; zeros are allowed.
pub fn random_weight(rng: &mut ChaCha8Rng, space: &MeasureSpace) -> SimpleFunction {
    let values: Vec<f64> = space
        .atoms()
        .iter()
        .map(|_| {
            let mag = rng.gen_range(0.0..4.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    SimpleFunction::from_atom_values(space, values).expect("aligned")
}

/// Random finite atomic operator with the given exponents.
pub fn random_operator(rng: &mut ChaCha8Rng, max_atoms: usize, p: f64, q: f64) -> Result<WeightedCompOp> {
    let space = random_space(rng, max_atoms);
    let phi = random_phi(rng, &space);
    let u = random_weight(rng, &space);
    WeightedCompOp::new(space, phi, u, p, q)
}
