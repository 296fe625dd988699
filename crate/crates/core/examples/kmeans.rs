//! K-means on the intensity of one frame, with the WCSS trace and the
//! intensity-ranked cluster semantics.

use irseg::cluster::{kmeans_fit, KMeansOptions};
use irseg::eval::{assign_semantics, confusion, metrics};
use irseg::features::{build_feature_stack, FeatureConfig};
use irseg::synth::{generate, scene};

fn main() -> irseg::Result<()> {
    let s = generate(&scene("small_fire")?)?;
    let frame = &s.frames[12];
    let stack = build_feature_stack(frame, None, None, None, &FeatureConfig::intensity_only())?;
    let fit = kmeans_fit(
        &stack,
        &KMeansOptions {
            k: 3,
            seed: 1,
            max_iters: 100,
            tol: 1e-9,
            restarts: 10,
        },
    )?;
    for (i, w) in fit.wcss_history.iter().enumerate() {
        println!("iteration {i}: wcss {w:.6}");
    }
    let semantics = assign_semantics(&fit.labels, &frame.to_scalar_field())?;
    for (c, centroid) in fit.model.centroids.iter().enumerate() {
        println!(
            "cluster {c}: centroid {:.3} -> {}",
            centroid[0],
            semantics.class_of(c).name()
        );
    }
    let m = metrics(&confusion(&semantics.apply(&fit.labels)?, &s.truth[12])?)?;
    println!("accuracy {:.4}", m.accuracy);
    Ok(())
}
