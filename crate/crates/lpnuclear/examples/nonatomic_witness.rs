//! Any surviving non-atomic mass kills nuclearity, and for p = q the refusal
//! comes with a constructive certificate: a shrinking family of sets whose
//! normalized indicators converge weakly to zero while their images keep
//! norm bounded away from zero. No compact operator does that.

use lpnuclear::{
    check_nuclear, noncompact_witness, Block, MeasureSpace, Result, SimpleFunction, Verdict,
    WeightedCompOp,
};

fn main() -> Result<()> {
    // One atom plus a non-atomic block of mass 1 where the weight is 2.
    let space = MeasureSpace::atomic(&[(1, 1.0)]).with_block(Block::new(1, 1.0)).validated()?;
    let u = SimpleFunction::from_atom_values(&space, vec![1.0])?
        .with_block_values(&space, lpnuclear::BlockId(1), vec![2.0])?;
    let op = WeightedCompOp::multiplication(space, u, 2.0, 2.0)?;

    let report = check_nuclear(&op)?;
    assert_eq!(report.verdict, Verdict::NotNuclear);
    println!("verdict {:?}", report.verdict);
    println!("weight mass on non-atomic part {:.6}", report.nonatomic_offending_mass);

    // Dyadic suffixes of the block: each set halves in measure, each
    // normalized indicator is mapped with ratio at least inf |u| on the set.
    let w = noncompact_witness(&op, 8)?;
    println!("\nwitness family on block {}, certified ratio floor {:.6}", w.block.0, w.lower_bound);
    for (k, (set, ratio)) in w.sets.iter().zip(&w.ratios).enumerate() {
        println!(
            "  level {}: mass 2^-{:<2} = {:.6e}, ||W e_k|| / ||e_k|| = {:.6}",
            k + 1,
            k + 1,
            set.mass,
            ratio
        );
    }

    // The ratios never decay, so no subsequence of images can converge in
    // norm: the operator is not compact, in particular not nuclear.
    let min = w.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= w.lower_bound - 1e-12);
    println!("\nmin ratio {:.6} >= floor {:.6}", min, w.lower_bound);

    Ok(())
}
