//! Potts MRF labeling by iterated conditional modes over a GMM likelihood,
//! for a few coupling strengths.

use irseg::cluster::{gmm_fit, map_labels, GmmOptions};
use irseg::eval::{assign_semantics, confusion, metrics};
use irseg::features::{build_feature_stack, FeatureConfig};
use irseg::fields::{icm_segment, MrfParams};
use irseg::synth::{generate, scene, SceneSpec};

fn main() -> irseg::Result<()> {
    // a noisier variant of a pinned scene, so smoothing has something to do
    let mut spec = SceneSpec {
        name: "noisy".into(),
        ..scene("fire_smoke_basic")?
    };
    spec.background.noise_std = 0.08;
    let s = generate(&spec)?;
    let frame = &s.frames[8];
    let stack = build_feature_stack(frame, None, None, None, &FeatureConfig::intensity_only())?;
    let fit = gmm_fit(&stack, &GmmOptions::default())?;
    let init = map_labels(&fit.model, &stack)?;
    let semantics = assign_semantics(&init, &frame.to_scalar_field())?;

    for beta in [0.0, 0.5, 1.0, 2.0] {
        let out = icm_segment(
            &stack,
            &fit.model,
            &MrfParams {
                beta,
                ..Default::default()
            },
            &init,
        )?;
        let acc = metrics(&confusion(&semantics.apply(&out.labels)?, &s.truth[8])?)?.accuracy;
        let last = out.history.last().unwrap();
        println!(
            "beta {beta:<3}: {} sweeps, energy {:.2}, accuracy {acc:.4}",
            out.sweeps, last.total
        );
    }
    let out = icm_segment(
        &stack,
        &fit.model,
        &MrfParams {
            beta: 1.0,
            ..Default::default()
        },
        &init,
    )?;
    print!("\n{}", out.history_csv());
    Ok(())
}
