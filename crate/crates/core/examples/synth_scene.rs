//! Writes a pinned benchmark scene to disk as PGM frames, PNG truth and a
//! manifest.
//!
//! Usage: `cargo run --example synth_scene [scene] [out_dir]`

use std::path::PathBuf;

use irseg::pipeline::cmd_synth;
use irseg::synth::SCENE_NAMES;

fn main() -> irseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "fire_smoke_basic".into());
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("irseg_{name}")));
    let m = cmd_synth(&name, &out)?;
    println!(
        "{} frames, {} truth maps in {}",
        m.frames.len(),
        m.truth.len(),
        out.display()
    );
    println!("scenes available: {}", SCENE_NAMES.join(", "));
    Ok(())
}
