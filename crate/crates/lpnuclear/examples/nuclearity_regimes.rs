//! The nuclearity criterion changes shape with the exponent pair. One weight
//! on one space is run through all three regimes, and a divergent variant
//! shows the certified refusal.
//!
//! With J_q the local density and mu the atom masses, the deciding series is
//!   p = q : sum J_p(A_n)^(1/p)
//!   q < p : sum J_q(A_n)^(1/q) mu(A_n)^(1/r),  1/r = 1/q - 1/p
//!   p < q : sum J_q(A_n)^(1/q) mu(A_n)^(-1/s), 1/s = 1/p - 1/q
//! All three are the same expression J_q^(1/q) mu^(1/p' - 1/q') read in the
//! right regime.

use lpnuclear::{
    check_nuclear, criterion_terms, regime, ClosedFormFamily, MeasureSpace, Result,
    SeriesVerdict, SimpleFunction, TailValues, WeightedCompOp,
};

fn demo(label: &str, space: &MeasureSpace, u: &SimpleFunction, p: f64, q: f64) -> Result<()> {
    let op = WeightedCompOp::multiplication(space.clone(), u.clone(), p, q)?;
    let reg = regime(p, q);
    let terms = criterion_terms(&op)?;
    let report = check_nuclear(&op)?;
    println!("{label}: p = {p}, q = {q} ({:?})", reg.case);
    println!("  leading terms {:?}", terms.preview(5).iter().map(|t| (t * 1e6).round() / 1e6).collect::<Vec<_>>());
    match &report.series {
        SeriesVerdict::Converges { sum } => {
            println!("  verdict {:?}, certified bound {:.12}", report.verdict, sum.upper)
        }
        SeriesVerdict::Diverges { witness } => println!(
            "  verdict {:?}, witnessed by terms >= {:.4} * n^{:.2} from n = {}",
            report.verdict, witness.coeff, witness.exponent, witness.from
        ),
        SeriesVerdict::Inconclusive { diagnostic } => {
            println!("  verdict {:?}: {diagnostic}", report.verdict)
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    // mu(n) = 2^-n, u(n) = 2^-n. For a multiplication operator J_q = |u|^q,
    // so the three series are geometric with ratios 1/2, 2^-(3/2), 2^-(1/2).
    let space = MeasureSpace::atomic(&[])
        .with_tail(ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 })
        .validated()?;
    let family = ClosedFormFamily::Geometric { coeff: 1.0, base: 0.5 };
    let u = SimpleFunction::zero(&space).with_tail(TailValues::from_family(&family));

    demo("equal exponents", &space, &u, 2.0, 2.0)?;
    demo("q below p     ", &space, &u, 3.0, 2.0)?;
    demo("p below q     ", &space, &u, 2.0, 4.0)?;

    // Constant weight in the p < q regime: terms grow like mu^(-1/s) and the
    // series diverges with an explicit witness.
    let one = SimpleFunction::constant(&space, 1.0);
    demo("divergent     ", &space, &one, 2.0, 4.0)?;

    Ok(())
}
