//! Synthesize a scene, train on the first ten frames, segment the rest and
//! evaluate, all through the command layer used by the `irseg` binary.

use irseg::pipeline::{
    cmd_eval, cmd_segment, cmd_synth, cmd_train, FeatureSet, Method, PipelineConfig,
};

fn main() -> irseg::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let data = dir.path().join("scene");
    cmd_synth("medium_fire", &data)?;

    for features in FeatureSet::ALL {
        for method in Method::ALL {
            let cfg = PipelineConfig {
                input_dir: data.join("frames"),
                output_dir: dir
                    .path()
                    .join(format!("{}_{}", method.name(), features.name())),
                method,
                features: features.config(10),
                ..Default::default()
            };
            cmd_train(&cfg)?;
            let labels = cmd_segment(&cfg, None)?;
            let report = cmd_eval(
                &cfg.output_dir.join("labels"),
                &data.join("truth"),
                &cfg.output_dir,
            )?;
            println!(
                "{:<7} {:<9} {} frames, accuracy {:.4}",
                method.name(),
                features.name(),
                labels.len(),
                report.pooled.accuracy
            );
        }
    }
    Ok(())
}
