//! Gaussian MRF score smoothing solved by Gauss-Seidel, for several
//! smoothness weights.

use irseg::cluster::{gmm_fit, map_labels, GmmOptions};
use irseg::eval::{assign_semantics, confusion, metrics};
use irseg::features::{build_feature_stack, FeatureConfig};
use irseg::fields::{gmrf_segment, GmrfParams};
use irseg::synth::{generate, scene};

fn main() -> irseg::Result<()> {
    let s = generate(&scene("medium_fire")?)?;
    let frame = &s.frames[14];
    let stack = build_feature_stack(frame, None, None, None, &FeatureConfig::intensity_only())?;
    let fit = gmm_fit(&stack, &GmmOptions::default())?;
    let semantics = assign_semantics(&map_labels(&fit.model, &stack)?, &frame.to_scalar_field())?;
    for lambda in [0.0, 0.5, 4.0] {
        let out = gmrf_segment(
            &stack,
            &fit.model,
            &GmrfParams {
                lambda,
                ..Default::default()
            },
        )?;
        let acc = metrics(&confusion(&semantics.apply(&out.labels)?, &s.truth[14])?)?.accuracy;
        println!(
            "lambda {lambda:<3}: {} sweeps, final residual {:.2e}, accuracy {acc:.4}",
            out.sweeps,
            out.residual_history.last().unwrap()
        );
    }
    Ok(())
}
