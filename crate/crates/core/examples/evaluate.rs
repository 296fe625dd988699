//! Confusion matrix, per-class rates and an overlay image for one frame.
//!
//! Usage: `cargo run --example evaluate [overlay.png]`

use irseg::eval::{class_names, confusion, render_overlay, Report};
use irseg::synth::{generate, scene};
use irseg::{ClassSemantics, LabelMap, SemanticClass};

fn main() -> irseg::Result<()> {
    let s = generate(&scene("camera_jitter")?)?;
    let t = 15;
    let frame = &s.frames[t];
    // threshold the raw intensity as a stand-in segmentation
    let pred: Vec<usize> = frame
        .data()
        .iter()
        .map(|&v| {
            if v > 0.7 {
                2
            } else if v > 0.25 {
                1
            } else {
                0
            }
        })
        .collect();
    let pred = LabelMap::new(frame.width(), frame.height(), 3, pred)?;
    let cm = confusion(&pred, &s.truth[t])?;
    print!("{}", cm.to_csv(&class_names()));
    let report = Report::new(&cm)?;
    print!("{}", report.metrics_csv());

    let out = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir()
            .join("irseg_overlay.png")
            .display()
            .to_string()
    });
    render_overlay(
        frame,
        &pred,
        &ClassSemantics::new(SemanticClass::ALL.to_vec())?,
        &out,
    )?;
    println!("overlay written to {out}");
    Ok(())
}
