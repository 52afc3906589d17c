//! Exact Euclidean distance transforms of binary masks.
//!
//! The unsigned transform computes, for every voxel, the millimeter distance
//! to the nearest background voxel. It runs the separable lower-envelope
//! scan over squared distances (one 1D pass per axis, linear in the line
//! length), with per-axis spacing folded into the parabola widths. With unit
//! spacing every intermediate value is an integer, so results are exact.

use rayon::prelude::*;

use crate::volume::{mask_complement, BinaryMask, Volume};

/// Millimeter distances; +inf where the opposite set is empty.
pub type DistanceField = Volume<f64>;

/// Distance from each voxel to the nearest background voxel (0 on background).
pub fn ltdt(m: &BinaryMask) -> DistanceField {
    if m.count() == m.dims().len() {
        log::warn!("mask has no background voxels; distance field is +inf everywhere");
    }
    let seed = m.volume().map(|v| if v == 0 { 0.0 } else { f64::INFINITY });
    let squared = squared_transform(seed);
    squared.map(f64::sqrt)
}

/// Signed transform: `ltdt(m)` on the foreground and minus the distance to
/// the nearest foreground voxel on the background.
pub fn sltdt(m: &BinaryMask) -> DistanceField {
    if m.count() == 0 {
        log::warn!("mask has no foreground voxels; signed field is -inf everywhere");
    }
    let inside = ltdt(m);
    let outside = ltdt(&mask_complement(m));
    let data = m
        .data()
        .iter()
        .zip(inside.data().iter().zip(outside.data()))
        .map(|(&fg, (&pos, &neg))| if fg != 0 { pos } else { -neg })
        .collect();
    Volume::from_vec(m.dims(), m.spacing(), data).expect("same grid")
}

/// Squared-distance transform of a seed field holding 0 at sites and +inf
/// elsewhere (or any nonnegative initial costs).
pub fn squared_transform(mut field: Volume<f64>) -> Volume<f64> {
    let dims = field.dims();
    let [nx, ny, nz] = dims.as_array();
    let w = field.spacing().as_array().map(|s| s * s);

    // x lines are contiguous.
    field.data_mut().par_chunks_mut(nx).for_each_init(
        || Envelope::new(nx),
        |env, line| {
            env.buf.clear();
            env.buf.extend_from_slice(line);
            env.run(w[0], line);
        },
    );

    // y lines live inside one z slab.
    field.data_mut().par_chunks_mut(nx * ny).for_each_init(
        || (Envelope::new(ny), vec![0.0; ny]),
        |(env, out), slab| {
            for i in 0..nx {
                env.buf.clear();
                env.buf.extend((0..ny).map(|j| slab[i + nx * j]));
                env.run(w[1], out);
                for j in 0..ny {
                    slab[i + nx * j] = out[j];
                }
            }
        },
    );

    // z lines cross slabs: compute per y row, then scatter.
    if nz > 1 {
        let plane = nx * ny;
        let rows: Vec<Vec<f64>> = {
            let src = field.data();
            (0..ny)
                .into_par_iter()
                .map_init(
                    || Envelope::new(nz),
                    |env, j| {
                        let mut row = vec![0.0; nx * nz];
                        for i in 0..nx {
                            env.buf.clear();
                            env.buf.extend((0..nz).map(|k| src[i + nx * j + plane * k]));
                            env.run(w[2], &mut row[i * nz..(i + 1) * nz]);
                        }
                        row
                    },
                )
                .collect()
        };
        let data = field.data_mut();
        for (j, row) in rows.iter().enumerate() {
            for i in 0..nx {
                for k in 0..nz {
                    data[i + nx * j + plane * k] = row[i * nz + k];
                }
            }
        }
    }
    field
}

/// Scratch space for the 1D lower envelope of parabolas.
struct Envelope {
    buf: Vec<f64>,
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Envelope {
            buf: Vec::with_capacity(n),
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// out[p] = min_q buf[q] + w (p - q)^2 over finite buf[q].
    fn run(&mut self, w: f64, out: &mut [f64]) {
        let f = &self.buf;
        let n = f.len();
        let v = &mut self.sites;
        let z = &mut self.bounds;

        let mut k = 0usize;
        let mut started = false;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            if !started {
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                started = true;
                continue;
            }
            let fq = f[q] + w * (q * q) as f64;
            let mut s;
            loop {
                let r = v[k];
                s = (fq - (f[r] + w * (r * r) as f64)) / (2.0 * w * (q - r) as f64);
                if s <= z[k] && k > 0 {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }

        if !started {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0usize;
        for (p, o) in out.iter_mut().enumerate() {
            while z[k + 1] < p as f64 {
                k += 1;
            }
            let d = p as f64 - v[k] as f64;
            *o = w * d * d + f[v[k]];
        }
    }
}
