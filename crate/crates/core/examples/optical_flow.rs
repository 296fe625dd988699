//! Horn-Schunck flow on a one-pixel translation and on a synthetic fire scene.

use irseg::flow::{flow_magnitude, horn_schunck, HsParams};
use irseg::synth::{generate, scene, translation_pair};

fn main() -> irseg::Result<()> {
    let (a, b) = translation_pair(64, 64, 7)?;
    let p = HsParams {
        alpha: 1.0,
        max_iters: 200,
        tol: 0.0,
    };
    let out = horn_schunck(&a, &b, &p)?;
    let (w, h) = a.dims();
    let mut epe = 0.0;
    let mut n = 0;
    for r in 4..h - 4 {
        for c in 4..w - 4 {
            let i = r * w + c;
            epe += (out.flow.u()[i] - 1.0).hypot(out.flow.v()[i]);
            n += 1;
        }
    }
    println!(
        "translation: {} iterations, energy {:.4}, interior EPE {:.4} px",
        out.iterations,
        out.energy,
        epe / n as f64
    );

    let s = generate(&scene("fire_smoke_basic")?)?;
    let out = horn_schunck(&s.frames[5], &s.frames[6], &HsParams::default())?;
    let mag = flow_magnitude(&out.flow);
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for (m, &l) in mag.data().iter().zip(s.truth[5].labels()) {
        sums[l] += m;
        counts[l] += 1;
    }
    for (name, (s, c)) in ["background", "smoke", "fire"]
        .iter()
        .zip(sums.iter().zip(counts))
    {
        println!("{name:<10} mean |flow| {:.4}", s / c.max(1) as f64);
    }
    Ok(())
}
