//! Dual-layer min-sum belief propagation for the truncated-L1 flow energy.
//!
//! Every pixel carries a horizontal node `u` and a vertical node `v`,
//! joined by the data term. Smoothness acts within each layer, so the
//! inter-pixel messages are one-dimensional min-convolutions with a
//! truncated L1 kernel, computed by a two-pass distance transform.

use super::{DescriptorField, DisplacementField, SiftFlowParams};
use crate::error::{Error, Result};

/// `out[i] = min_j h[j] + min(alpha |i - j|, d)`.
///
/// Each output is evaluated as `h[j] + alpha * |i - j|` at the source index
/// found by the forward and backward passes, so results agree bit-for-bit
/// with [`min_convolve_brute`].
pub fn min_convolve_truncated_l1(h: &[f64], alpha: f64, d: f64) -> Vec<f64> {
    let n = h.len();
    if n == 0 {
        return Vec::new();
    }
    let cost = |j: usize, i: usize| h[j] + alpha * (i.abs_diff(j) as f64);
    let mut src: Vec<usize> = (0..n).collect();
    for i in 1..n {
        if cost(src[i - 1], i) < cost(src[i], i) {
            src[i] = src[i - 1];
        }
    }
    for i in (0..n - 1).rev() {
        if cost(src[i + 1], i) < cost(src[i], i) {
            src[i] = src[i + 1];
        }
    }
    let floor = h.iter().cloned().fold(f64::INFINITY, f64::min) + d;
    (0..n).map(|i| cost(src[i], i).min(floor)).collect()
}

/// Quadratic-time reference for [`min_convolve_truncated_l1`].
pub fn min_convolve_brute(h: &[f64], alpha: f64, d: f64) -> Vec<f64> {
    (0..h.len())
        .map(|i| {
            (0..h.len())
                .map(|j| (h[j] + alpha * (i.abs_diff(j) as f64)).min(h[j] + d))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

// neighbor directions: up, down, left, right
const DIRS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

fn opposite(dir: usize) -> usize {
    dir ^ 1
}

struct Grid {
    w: usize,
    h: usize,
    l: usize,
}

impl Grid {
    fn neighbor(&self, p: usize, dir: usize) -> Option<usize> {
        let (r, c) = ((p / self.w) as isize, (p % self.w) as isize);
        let (dr, dc) = DIRS[dir];
        let (nr, nc) = (r + dr, c + dc);
        if nr < 0 || nc < 0 || nr >= self.h as isize || nc >= self.w as isize {
            None
        } else {
            Some(nr as usize * self.w + nc as usize)
        }
    }

    // message into pixel p from its neighbor in direction dir
    fn slot(&self, dir: usize, p: usize) -> usize {
        (dir * self.w * self.h + p) * self.l
    }
}

fn subtract_min(m: &mut [f64]) {
    let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
    m.iter_mut().for_each(|v| *v -= lo);
}

/// Data cost table: `[p][u][v]`, truncated L1 descriptor distance.
fn data_costs(d1: &DescriptorField, d2: &DescriptorField, p: &SiftFlowParams) -> Vec<f64> {
    let (w, h) = d1.dims();
    let rad = p.search_radius as isize;
    let l = 2 * p.search_radius + 1;
    let mut out = vec![p.t; w * h * l * l];
    for r in 0..h {
        for c in 0..w {
            let s1 = d1.at(r, c);
            let base = (r * w + c) * l * l;
            for (ui, u) in (-rad..=rad).enumerate() {
                for (vi, v) in (-rad..=rad).enumerate() {
                    let (tr, tc) = (r as isize + v, c as isize + u);
                    if tr < 0 || tc < 0 || tr >= h as isize || tc >= w as isize {
                        continue;
                    }
                    let s2 = d2.at(tr as usize, tc as usize);
                    let l1: f64 = s1.iter().zip(s2).map(|(a, b)| (a - b).abs()).sum();
                    out[base + ui * l + vi] = l1.min(p.t);
                }
            }
        }
    }
    out
}

/// Flow energy of `f` read from a precomputed data cost table.
fn table_energy(data: &[f64], f: &DisplacementField, p: &SiftFlowParams) -> f64 {
    let (w, h) = f.dims();
    let rad = p.search_radius as i32;
    let l = 2 * p.search_radius + 1;
    let (u, v) = (f.u(), f.v());
    let mut e = 0.0;
    let mut magnitude = 0.0;
    let mut smooth = 0.0;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            e += data[i * l * l + (u[i] + rad) as usize * l + (v[i] + rad) as usize];
            magnitude += (u[i].abs() + v[i].abs()) as f64;
            let mut pair = |j: usize| {
                smooth += (p.alpha * (u[i] - u[j]).abs() as f64).min(p.d);
                smooth += (p.alpha * (v[i] - v[j]).abs() as f64).min(p.d);
            };
            if c + 1 < w {
                pair(i + 1);
            }
            if r + 1 < h {
                pair(i + w);
            }
        }
    }
    e + p.eta * magnitude + smooth
}

/// Minimizes the flow energy by synchronous loopy belief propagation.
///
/// The joint decoding of every iteration is scored with the exact energy.
/// The result is the lowest-energy field among those decodings and the
/// constant fields inside the search radius, zero first.
pub fn match_siftflow(
    d1: &DescriptorField,
    d2: &DescriptorField,
    p: &SiftFlowParams,
) -> Result<DisplacementField> {
    p.validate()?;
    if d1.dims() != d2.dims() || d1.dim() != d2.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}x{}", d1.width(), d1.height(), d1.dim()),
            found: format!("{}x{}x{}", d2.width(), d2.height(), d2.dim()),
        });
    }
    let (w, h) = d1.dims();
    let n = w * h;
    let rad = p.search_radius as i32;
    let l = 2 * p.search_radius + 1;
    let grid = Grid { w, h, l };
    let data = data_costs(d1, d2, p);
    let unary: Vec<f64> = (0..l)
        .map(|i| p.eta * (i as i32 - rad).abs() as f64)
        .collect();

    let mut mu = vec![0.0; 4 * n * l];
    let mut mv = vec![0.0; 4 * n * l];
    let mut vu = vec![0.0; n * l]; // v-node to u-node
    let mut uv = vec![0.0; n * l]; // u-node to v-node

    let incoming = |m: &[f64], pix: usize, out: &mut [f64]| {
        out.copy_from_slice(&unary);
        for dir in 0..4 {
            let s = grid.slot(dir, pix);
            for (o, x) in out.iter_mut().zip(&m[s..s + l]) {
                *o += x;
            }
        }
    };

    let decode = |mu: &[f64], mv: &[f64]| -> DisplacementField {
        let mut bu = vec![0.0; l];
        let mut bv = vec![0.0; l];
        let mut u = vec![0; n];
        let mut v = vec![0; n];
        for pix in 0..n {
            incoming(mu, pix, &mut bu);
            incoming(mv, pix, &mut bv);
            let dc = &data[pix * l * l..(pix + 1) * l * l];
            let mut best = (f64::INFINITY, i32::MAX, 0, 0);
            for ui in 0..l {
                for vi in 0..l {
                    let e = dc[ui * l + vi] + bu[ui] + bv[vi];
                    let (du, dv) = (ui as i32 - rad, vi as i32 - rad);
                    let key = (e, du.abs() + dv.abs(), du, dv);
                    if key.0 < best.0
                        || (key.0 == best.0 && (key.1, key.2, key.3) < (best.1, best.2, best.3))
                    {
                        best = key;
                    }
                }
            }
            u[pix] = best.2;
            v[pix] = best.3;
        }
        DisplacementField::new(w, h, u, v).expect("decoded labels lie inside the radius")
    };

    let mut best_field = DisplacementField::zeros(w, h);
    let mut best_energy = table_energy(&data, &best_field, p);
    for du in -rad..=rad {
        for dv in -rad..=rad {
            let f = DisplacementField::constant(w, h, du, dv);
            let e = table_energy(&data, &f, p);
            if e < best_energy {
                best_energy = e;
                best_field = f;
            }
        }
    }

    let mut bu = vec![0.0; l];
    let mut bv = vec![0.0; l];
    let mut tmp = vec![0.0; l];
    for _ in 0..p.bp_iters {
        let mut nmu = vec![0.0; 4 * n * l];
        let mut nmv = vec![0.0; 4 * n * l];
        let mut nvu = vec![0.0; n * l];
        let mut nuv = vec![0.0; n * l];
        for pix in 0..n {
            incoming(&mu, pix, &mut bu);
            incoming(&mv, pix, &mut bv);
            let dc = &data[pix * l * l..(pix + 1) * l * l];
            // intra-pixel messages through the data term
            let (to_u, to_v) = (
                &mut nvu[pix * l..(pix + 1) * l],
                &mut nuv[pix * l..(pix + 1) * l],
            );
            to_u.fill(f64::INFINITY);
            to_v.fill(f64::INFINITY);
            for ui in 0..l {
                for vi in 0..l {
                    let c = dc[ui * l + vi];
                    to_u[ui] = to_u[ui].min(c + bv[vi]);
                    to_v[vi] = to_v[vi].min(c + bu[ui]);
                }
            }
            subtract_min(to_u);
            subtract_min(to_v);
            // inter-pixel messages within each layer
            for dir in 0..4 {
                let Some(q) = grid.neighbor(pix, dir) else {
                    continue;
                };
                let back = grid.slot(dir, pix);
                let dst = grid.slot(opposite(dir), q);
                for (layer, (m, intra, out)) in [(&mu, &vu, &mut nmu), (&mv, &uv, &mut nmv)]
                    .into_iter()
                    .enumerate()
                {
                    let belief = if layer == 0 { &bu } else { &bv };
                    for i in 0..l {
                        tmp[i] = belief[i] + intra[pix * l + i] - m[back + i];
                    }
                    let msg = min_convolve_truncated_l1(&tmp, p.alpha, p.d);
                    out[dst..dst + l].copy_from_slice(&msg);
                    subtract_min(&mut out[dst..dst + l]);
                }
            }
        }
        mu = nmu;
        mv = nmv;
        vu = nvu;
        uv = nuv;

        let field = decode(&mu, &mv);
        let e = table_energy(&data, &field, p);
        if !e.is_finite() {
            return Err(Error::NonFinite("sift flow energy".into()));
        }
        if e < best_energy {
            best_energy = e;
            best_field = field;
        }
    }
    Ok(best_field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siftflow::siftflow_energy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_transform_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=9 {
            for _ in 0..200 {
                let h: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let alpha = rng.random_range(0.0..2.0);
                let d = rng.random_range(0.01..4.0);
                assert_eq!(
                    min_convolve_truncated_l1(&h, alpha, d),
                    min_convolve_brute(&h, alpha, d)
                );
            }
        }
    }

    #[test]
    fn table_energy_matches_direct_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (w, h, dim) = (5, 4, 6);
        let mut desc = || {
            DescriptorField::new(
                w,
                h,
                dim,
                (0..w * h * dim).map(|_| rng.random::<f64>()).collect(),
            )
            .unwrap()
        };
        let (d1, d2) = (desc(), desc());
        let p = SiftFlowParams {
            search_radius: 2,
            t: 1.5,
            ..Default::default()
        };
        let data = data_costs(&d1, &d2, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let u = (0..w * h).map(|_| rng.random_range(-2..=2)).collect();
            let v = (0..w * h).map(|_| rng.random_range(-2..=2)).collect();
            let f = DisplacementField::new(w, h, u, v).unwrap();
            let direct = siftflow_energy(&d1, &d2, &f, &p).unwrap();
            assert!((table_energy(&data, &f, &p) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_transform_small_cases() {
        assert_eq!(
            min_convolve_truncated_l1(&[0.0, 5.0, 5.0], 1.0, 10.0),
            vec![0.0, 1.0, 2.0]
        );
        assert_eq!(
            min_convolve_truncated_l1(&[0.0, 5.0, 5.0], 1.0, 1.5),
            vec![0.0, 1.0, 1.5]
        );
        assert!(min_convolve_truncated_l1(&[], 1.0, 1.0).is_empty());
    }
}
