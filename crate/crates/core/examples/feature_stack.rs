//! Builds the intensity / flow magnitude / divergence stack of one frame
//! and z-scores it with statistics from the training frames.

use irseg::features::{fit_channel_stats, normalize, FeatureConfig};
use irseg::pipeline::{sequence_features, PipelineConfig};
use irseg::synth::{generate, scene};

fn main() -> irseg::Result<()> {
    let s = generate(&scene("medium_fire")?)?;
    let cfg = PipelineConfig {
        features: FeatureConfig::full(),
        ..Default::default()
    };
    let train: Vec<usize> = (0..10).collect();
    let stacks = sequence_features(&s.frames, &train, &cfg)?;
    let stats = fit_channel_stats(&stacks)?;
    for (i, name) in stats.channel_names.iter().enumerate() {
        println!(
            "{name:<10} mean {:>9.5} std {:>8.5}",
            stats.mean[i], stats.std[i]
        );
    }

    let z = normalize(&stacks[3], &stats)?;
    let truth = &s.truth[3];
    println!("\nmean z-score per true class in frame 3:");
    for class in 0..3 {
        let rows: Vec<&[f64]> = z
            .pixels()
            .zip(truth.labels())
            .filter(|(_, &l)| l == class)
            .map(|(p, _)| p)
            .collect();
        let means: Vec<String> = (0..z.dims())
            .map(|c| {
                format!(
                    "{:>7.3}",
                    rows.iter().map(|p| p[c]).sum::<f64>() / rows.len().max(1) as f64
                )
            })
            .collect();
        println!("class {class} ({} px): {}", rows.len(), means.join(" "));
    }
    Ok(())
}
