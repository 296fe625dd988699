//! Every method with intensity-only and full features on the five pinned
//! scenes, pooled per configuration.

use irseg::pipeline::{run_default_bench, FeatureSet, Method, PipelineConfig};

fn main() -> irseg::Result<()> {
    let start = std::time::Instant::now();
    let report = run_default_bench(&PipelineConfig::default())?;
    println!(
        "{:<8} {:<10} {:>9} {:>7} {:>7} {:>7}",
        "method", "features", "accuracy", "bg", "smoke", "fire"
    );
    for fs in FeatureSet::ALL {
        for m in Method::ALL {
            let row = report.pooled(m, fs).unwrap();
            let r = &row.metrics.per_class_recall;
            println!(
                "{:<8} {:<10} {:>9.4} {:>7.3} {:>7.3} {:>7.3}",
                m.name(),
                fs.name(),
                row.metrics.accuracy,
                r[0],
                r[1],
                r[2]
            );
        }
    }
    println!("\n{:.1?} for {} rows", start.elapsed(), report.rows.len());
    Ok(())
}
