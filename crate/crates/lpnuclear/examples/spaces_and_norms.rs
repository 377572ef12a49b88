//! Build measure spaces, integrate simple functions, and take L^p norms.
//!
//! A space has three layers: explicit atoms, non-atomic blocks carried as
//! ordered fragment lists, and an optional countable atom tail whose masses
//! follow a closed form. Integrals over the tail come back as certified
//! intervals, never as bare partial sums.

use lpnuclear::{
    integrate, integrate_value, lp_norm, Block, ClosedFormFamily, MeasureSpace, Result,
    SimpleFunction, TailValues, TermForm,
};

fn main() -> Result<()> {
    // Three atoms of total mass 3.5.
    let finite = MeasureSpace::atomic(&[(1, 2.0), (2, 1.0), (3, 0.5)]).validated()?;
    let f = SimpleFunction::from_atom_values(&finite, vec![1.0, -2.0, 4.0])?;

    println!("finite space: {} atoms", finite.atoms().len());
    println!("  integral   {:+.6}", integrate_value(&finite, &f)?);
    println!("  ||f||_1    {:.6}", lp_norm(&finite, &f, 1.0)?);
    println!("  ||f||_2    {:.6}", lp_norm(&finite, &f, 2.0)?);
    println!("  ||f||_inf  {:.6}", lp_norm(&finite, &f, f64::INFINITY)?);

    // Append the tail mu(n) = 2^-n for n >= 1; total tail mass is 1.
    let tailed = MeasureSpace::atomic(&[(1, 2.0)])
        .with_tail(ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 })
        .validated()?;
    let g = SimpleFunction::from_atom_values(&tailed, vec![3.0])?
        .with_tail(TailValues::new(TermForm::geometric(1.0, 0.5), 1));

    // integrate reports a certified interval around the true value.
    let cert = integrate(&tailed, &g)?;
    println!("\ntailed space: one atom plus geometric tail");
    println!("  integral in [{:.12}, {:.12}]", cert.lower, cert.upper);
    println!("  width {:.3e}", cert.upper - cert.lower);
    // Sum_{n>=1} 4^-n = 1/3, so the integral is 6 + 1/3.
    println!("  expected {:.12}", 6.0 + 1.0 / 3.0);

    // A block is a non-atomic piece carried as an ordered fragment partition;
    // fragment masses must sum to the block mass, and a simple function is
    // constant on each fragment.
    let mixed = MeasureSpace::atomic(&[(1, 1.0)])
        .with_block(Block::with_fragments(7, 2.0, vec![1.0, 1.0]))
        .validated()?;
    let h = SimpleFunction::from_atom_values(&mixed, vec![2.0])?
        .with_block_values(&mixed, lpnuclear::BlockId(7), vec![1.0, -3.0])?;
    println!("\nmixed space: atom plus a two-fragment block of mass 2");
    println!("  integral   {:+.6}", integrate_value(&mixed, &h)?);
    println!("  ||h||_2    {:.6}", lp_norm(&mixed, &h, 2.0)?);

    Ok(())
}
