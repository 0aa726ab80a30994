//! From raw viewer scores to the two tables a study reports: differential
//! mean opinion scores per rendition, and pairwise significance verdicts.

use vfr::subjective::{dmos_table, pairwise_table, welch_t, Condition, ScoreTable};

fn main() -> vfr::Result<()> {
    // Eight observers scored two sequences under all four conditions. The
    // adaptive rendition tracks the 120 fps reference; fixed 60 loses a
    // little, fixed 30 a lot (more on the fast sequence).
    let mut table = ScoreTable::new();
    for (seq, drop60, drop30) in [("calm", 3.0, 12.0), ("sport", 6.0, 30.0)] {
        for i in 0..8 {
            let observer = format!("o{i}");
            let base = 78.0 + (i as f64 % 4.0) * 3.0;
            table.push(&observer, seq, Condition::Ref120, base)?;
            table.push(&observer, seq, Condition::Vfr, base - (i as f64 % 2.0))?;
            table.push(&observer, seq, Condition::F60, base - drop60 - (i % 3) as f64)?;
            table.push(&observer, seq, Condition::F30, base - drop30 - (i % 5) as f64)?;
        }
    }

    println!("sequence condition dmos  ci95");
    for row in dmos_table(&table)? {
        println!(
            "{:<8} {:<9} {:>6.2} {:>5.2}",
            row.sequence,
            row.condition.as_str(),
            row.dmos.value,
            row.dmos.ci95
        );
    }

    // Every rendition against every higher-rate one. Positive t means the
    // test condition scored higher than its reference.
    for seq in table.sequences() {
        println!("{seq}:");
        for cell in pairwise_table(&table, &seq)? {
            let r = &cell.result;
            println!(
                "  {:<5} vs {:<6} t {:>7.2}, p {:.4} -> {}",
                cell.test.as_str(),
                cell.reference.as_str(),
                r.t,
                r.p,
                if r.different { "different" } else { "same" }
            );
        }
    }

    // The test itself is general purpose.
    let faster = [74.0, 79.0, 81.0, 76.0, 78.0];
    let slower = [69.0, 70.0, 74.0, 68.0, 71.0];
    let t = welch_t(&faster, &slower)?;
    println!(
        "standalone test: t {:.3}, df {:.1}, p {:.4}",
        t.t, t.df, t.p
    );
    Ok(())
}
