//! Gaussian mixture fitted by EM on a small 2-D point cloud.

use irseg::cluster::{gmm_fit, GmmOptions};
use irseg::FeatureStack;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> irseg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = [(0.0, 0.0, 0.6), (1.8, 1.0, 0.8), (0.5, 2.5, 0.4)];
    let mut points = Vec::new();
    for (i, &(x, y, s)) in centers.iter().enumerate() {
        let n = Normal::new(0.0, s).unwrap();
        for _ in 0..(100 + 50 * i) {
            points.push(vec![x + n.sample(&mut rng), y + n.sample(&mut rng)]);
        }
    }
    let stack = FeatureStack::from_points(&points, vec!["x".into(), "y".into()])?;
    let fit = gmm_fit(
        &stack,
        &GmmOptions {
            k: 3,
            seed: 0,
            max_iters: 200,
            tol: 1e-10,
            reg: 1e-6,
        },
    )?;
    println!("{} EM rounds", fit.iterations);
    let last = fit.ll_history.len() - 1;
    for (i, ll) in fit
        .ll_history
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 10 == 0 || *i == last)
    {
        println!("round {i:>3}: log-likelihood {ll:.6}");
    }
    for c in 0..3 {
        let m = &fit.model.means[c];
        println!(
            "component {c}: weight {:.3} mean ({:.3}, {:.3})",
            fit.model.weights[c], m[0], m[1]
        );
    }
    Ok(())
}
