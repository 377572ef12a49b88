//! Walk the built-in gallery: parse each embedded instance, run the full
//! analysis, and compare against the recorded outcome.

use lpnuclear::{check_entry, Verdict, GALLERY};

fn main() -> lpnuclear::Result<()> {
    let mut nuclear = 0usize;
    let mut rejected = 0usize;
    for entry in GALLERY {
        let check = check_entry(entry)?;
        let mark = if check.passed { "ok" } else { "MISMATCH" };
        let bound = check
            .report
            .nuclearity
            .nuclear_bound()
            .map(|b| format!("bound {b:.9}"))
            .unwrap_or_else(|| "no bound".into());
        println!("{mark:<8} {:<28} {:?}: {bound}", check.name, check.report.verdict);
        match check.report.verdict {
            Verdict::Nuclear => nuclear += 1,
            Verdict::NotNuclear => rejected += 1,
            Verdict::Inconclusive => {}
        }
        assert!(check.passed, "{} drifted from its recorded outcome", check.name);
    }
    println!("\n{} entries: {nuclear} nuclear, {rejected} not nuclear", GALLERY.len());
    Ok(())
}
