//! Cross-check the operator's analytic formulas against brute force on a
//! finite atomic space, where everything can be realized as a dense matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lpnuclear::{
    check_nuclear, random_samples, MeasureSpace, Result, SimpleFunction, Transformation,
    WeightedCompOp,
};

fn main() -> Result<()> {
    // Five atoms, a fold 5 -> 1, and an uneven weight.
    let space = MeasureSpace::atomic(&[(1, 1.0), (2, 0.5), (3, 0.25), (4, 2.0), (5, 0.125)])
        .validated()?;
    let phi = Transformation::new(&space, &[(1, 1), (2, 1), (3, 2), (4, 3), (5, 4)], &[], None)?;
    let u = SimpleFunction::from_atom_values(&space, vec![1.0, -0.5, 2.0, 0.25, 1.5])?;
    let op = WeightedCompOp::new(space.clone(), phi, u, 2.0, 2.0)?;

    // ||Wf||_q^q equals the integral of J_q |f|^q against mu; the check
    // computes both sides from scratch.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (i, f) in random_samples(&space, 3, &mut rng).iter().enumerate() {
        let check = op.pushforward_norm_identity(f)?;
        println!(
            "pushforward sample {i}: operator side {:.12}, density side {:.12}, gap {:.3e}",
            check.via_operator.value(),
            check.via_density.value(),
            check.relative_gap()
        );
        assert!(check.consistent(1e-10));
    }

    // Two routes to the operator norm: sup J_p from the density, and the
    // largest singular value of the matrix realization.
    let jn = op.norm_via_j()?;
    let m = op.matrix_realization()?;
    let bf = m.bruteforce_norm(1)?;
    println!("\noperator norm  via J: {:.12}", jn.operator_norm);
    println!("operator norm  via SVD: {:.12}", bf);
    println!("gap {:.3e}", (jn.operator_norm - bf).abs());

    // In the Hilbert case the trace norm from singular values must sit at or
    // below the certified series bound.
    let trace = m.trace_norm()?;
    let report = check_nuclear(&op)?;
    let bound = report.nuclear_bound().expect("finite atomic operators are nuclear");
    println!("\ntrace norm     {:.12}", trace);
    println!("series bound   {:.12}", bound);
    assert!(trace <= bound + 1e-10);

    Ok(())
}
