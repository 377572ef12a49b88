//! Change-of-variables data for a point transformation: fibers, the
//! Radon-Nikodym derivative of the pushforward, conditional expectation, and
//! the local density J_q computed by two independent routes.

use lpnuclear::transform::TailFiber;
use lpnuclear::{
    conditional_expectation, fiber, j_function, j_function_via_expectation, lp_norm,
    radon_nikodym, AtomRef, ClosedFormFamily, MeasureSpace, Result, SimpleFunction, TailMap,
    TailValues, TermForm, Transformation,
};

fn main() -> Result<()> {
    // mu(n) = 2^-n on two explicit atoms plus a tail; phi folds atom 2 onto
    // atom 1 and shifts the tail forward by one.
    let space = MeasureSpace::atomic(&[(1, 0.5), (2, 0.25)])
        .with_tail(ClosedFormFamily::Geometric { coeff: 0.125, base: 0.5 })
        .validated()?;
    let phi = Transformation::new(&space, &[(1, 1), (2, 1)], &[], Some(TailMap::ShiftBy { k: 1 }))?;

    // The fiber over atom 1 collects everything phi sends there.
    let fib = fiber(&space, &phi, AtomRef::explicit(1))?;
    println!("fiber over atom 1: {} explicit atoms, tail {:?}", fib.atoms.len(), fib.tail);
    let first_tail = fiber(&space, &phi, AtomRef::tail(1))?;
    assert_eq!(first_tail.tail, TailFiber::Empty);
    println!("fiber over tail atom 1 is empty: the shift skips it");

    // h = d(mu circ phi^-1)/dmu on the target side.
    let h = radon_nikodym(&space, &phi)?;
    println!("\nh(atom 1)     {:.6}  (mass 0.75 lands on mass 0.5)", h.value_at(&space, AtomRef::explicit(1))?);
    println!("h(tail n=2)   {:.6}  (the shift moves each tail mass onto half of it)", h.value_at(&space, AtomRef::tail(2))?);

    // E(f | phi) averages f over fibers; it is constant on each fiber by
    // construction, and integrating it against any phi-measurable function
    // reproduces the integral of f.
    let f = SimpleFunction::from_atom_values(&space, vec![4.0, -2.0])?
        .with_tail(TailValues::new(TermForm::geometric(1.0, 0.5), 1));
    let e = conditional_expectation(&space, &phi, &f)?;
    let g = e.target_side();
    println!("\nE(f|phi)(atom 1) {:.6}  (mass-weighted average of 4 and -2)", g.value_at(&space, AtomRef::explicit(1))?);

    // J_q has a direct fiber formula and an equivalent h * E(|u|^q) route.
    // Both must agree wherever the pushforward charges the space.
    let u = SimpleFunction::constant(&space, 1.0);
    let q = 2.0;
    let direct = j_function(&space, &phi, &u, q)?;
    let via_e = j_function_via_expectation(&space, &phi, &u, q)?;
    let gap = lp_norm(&space, &direct.sub(&via_e)?, f64::INFINITY)?;
    println!("\nJ_2 by both routes, sup gap {:.3e}", gap);
    for n in [1u64, 2, 3, 4] {
        println!(
            "  J_2(tail {n})  direct {:.6}  via expectation {:.6}",
            direct.value_at(&space, AtomRef::tail(n))?,
            via_e.value_at(&space, AtomRef::tail(n))?
        );
    }

    Ok(())
}
