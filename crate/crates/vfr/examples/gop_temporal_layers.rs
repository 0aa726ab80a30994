//! Shows the dyadic coding structure that makes frame dropping legal: which
//! temporal layer each picture sits on, which pictures it references, and
//! why chunk-aligned decimation never removes a frame someone else needs.

use vfr::pipeline::{gop_skip_plan, legality_violations, DecisionTimeline, GopPlan};
use vfr::FrameRate;

fn main() -> vfr::Result<()> {
    let plan = GopPlan::default();
    println!(
        "GOP of {} pictures, intra every {}",
        plan.gop_size, plan.intra_period
    );

    // Layer diagram over one GOP. Layer 0 carries the anchors; each higher
    // layer bisects the intervals of the one below.
    for layer in 0..=4 {
        let row: String = (0..=16)
            .map(|poc| {
                if plan.temporal_layer(poc) == layer {
                    "x  "
                } else {
                    ".  "
                }
            })
            .collect();
        println!("layer {layer}: {row}");
    }
    for poc in [0, 8, 12, 16, 3] {
        println!("poc {poc:>2} references {:?}", plan.references(poc));
    }

    // 30 fps keeps only layer-0 pictures, 60 fps layers 0 and 1, and so on.
    // Chunk decisions always keep dyadic prefixes, so the plan is legal.
    let timeline = DecisionTimeline::new(
        vec![
            FrameRate::F30,
            FrameRate::F30,
            FrameRate::F60,
            FrameRate::F120,
        ],
        16,
    )?;
    let skip = gop_skip_plan(&timeline, &plan)?;
    println!("kept pictures: {:?}", skip.kept_pocs);
    println!("reference violations: {}", skip.violations.len());

    // A hand-made plan that drops an anchor while keeping its dependants is
    // caught rather than silently encoded.
    let bad: Vec<usize> = (0..32).filter(|p| *p != 16).collect();
    let violations = legality_violations(&bad, 32, &plan);
    for v in &violations {
        println!(
            "picture {} needs dropped picture {}",
            v.poc, v.missing_reference
        );
    }
    Ok(())
}
