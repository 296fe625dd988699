//! Dense SIFT descriptors and the discrete SIFT-flow match between a
//! texture and its one-pixel shift.

use irseg::siftflow::{
    dense_sift, match_siftflow, siftflow_energy, DisplacementField, SiftFlowParams,
};
use irseg::synth::translation_pair;

fn main() -> irseg::Result<()> {
    let (a, b) = translation_pair(32, 32, 11)?;
    let p = SiftFlowParams {
        search_radius: 2,
        ..Default::default()
    };
    let d1 = dense_sift(&a, p.cell_size)?;
    let d2 = dense_sift(&b, p.cell_size)?;
    let w = match_siftflow(&d1, &d2, &p)?;

    let mut votes = std::collections::BTreeMap::new();
    for (&u, &v) in w.u().iter().zip(w.v()) {
        *votes.entry((u, v)).or_insert(0usize) += 1;
    }
    let mut ranked: Vec<_> = votes.into_iter().collect();
    ranked.sort_by_key(|e| std::cmp::Reverse(e.1));
    for ((u, v), n) in ranked.iter().take(4) {
        println!("displacement ({u:>2}, {v:>2}): {n} px");
    }
    let zero = siftflow_energy(&d1, &d2, &DisplacementField::zeros(32, 32), &p)?;
    let found = siftflow_energy(&d1, &d2, &w, &p)?;
    println!("energy: zero field {zero:.3}, matched field {found:.3}");
    Ok(())
}
