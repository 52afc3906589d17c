//! Synthetic mandible-like masks with ground-truth landmarks.
//!
//! The shape is built from simple solids in a model frame measured in
//! in-plane voxels: a horseshoe arch of elliptic cross-section whose anterior
//! wall leans forward toward the top, a chin sphere under the symphysis, two
//! vertical rami, and a condyle and coronoid sphere on each ramus. Axes follow
//! the volume convention: x toward the patient's left, y posterior, z
//! superior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edt::ltdt;
use crate::error::{Error, Result};
use crate::landmark::{Landmark, LandmarkName, LandmarkSet};
use crate::volume::{mask_complement, BinaryMask, Coord, Dims, Spacing};

/// Forward lean of the symphysis wall per unit height.
const SYMPHYSIS_LEAN: f64 = 0.8;
/// Voxels kept free around the shape on every side.
const MIN_MARGIN: i64 = 2;
/// Clearance between injected noise and the true surface.
const NOISE_CLEARANCE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub spacing: Spacing,
    pub seed: u64,
    pub arch_radius: f64,
    /// Radial semi-axis of the arch cross-section; also the ramus radius.
    pub arch_thickness: f64,
    pub ramus_height: f64,
    pub condyle_radius: f64,
    pub coronoid_radius: f64,
    pub missing_left_condyle: bool,
    pub split_into_two_parts: bool,
    pub cavity_count: usize,
    pub noise_blob_count: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: Dims::cube(96),
            spacing: Spacing::UNIT,
            seed: 0,
            arch_radius: 26.0,
            arch_thickness: 4.0,
            ramus_height: 40.0,
            condyle_radius: 5.0,
            coronoid_radius: 4.0,
            missing_left_condyle: false,
            split_into_two_parts: false,
            cavity_count: 0,
            noise_blob_count: 0,
        }
    }
}

impl PhantomSpec {
    /// Default anatomy scaled to fill `dims` at `spacing` the way the default
    /// fills 96 cubed voxels.
    pub fn scaled(dims: Dims, spacing: Spacing) -> PhantomSpec {
        let s = spacing.as_array();
        let z_extent = dims.nz as f64 * s[2] / s[0];
        let f = (dims.nx as f64).min(dims.ny as f64).min(z_extent) / 96.0;
        let d = PhantomSpec::default();
        PhantomSpec {
            dims,
            spacing,
            arch_radius: d.arch_radius * f,
            arch_thickness: d.arch_thickness * f,
            ramus_height: d.ramus_height * f,
            condyle_radius: d.condyle_radius * f,
            coronoid_radius: d.coronoid_radius * f,
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("arch_radius", self.arch_radius),
            ("arch_thickness", self.arch_thickness),
            ("ramus_height", self.ramus_height),
            ("condyle_radius", self.condyle_radius),
            ("coronoid_radius", self.coronoid_radius),
        ] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::invalid(
                    field,
                    format!("must be finite and >= 1, got {v}"),
                ));
            }
        }
        if self.arch_thickness * 2.0 >= self.arch_radius {
            return Err(Error::invalid(
                "arch_thickness",
                "must be less than half the arch radius",
            ));
        }
        Ok(())
    }
}

/// Axis-aligned frame shared by every solid, in in-plane voxel units.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    r: f64,
    t: f64,
    h: f64,
    hr: f64,
    rc: f64,
    rk: f64,
    /// Center of the anterior semicircle.
    yc: f64,
    /// Posterior end of the straight body segments.
    yb: f64,
    chin: [f64; 3],
    condyle: [[f64; 3]; 2],
    coronoid: [[f64; 3]; 2],
}

impl Geometry {
    fn new(s: &PhantomSpec) -> Self {
        let (r, t) = (s.arch_radius, s.arch_thickness);
        let h = 2.5 * t;
        let yb = 1.85 * r;
        let wc = -h + 0.25 * t;
        let side = |sign: f64, dy: f64, dz: f64| [sign * r, yb + dy, s.ramus_height + dz];
        Geometry {
            r,
            t,
            h,
            hr: s.ramus_height,
            rc: s.condyle_radius,
            rk: s.coronoid_radius,
            yc: r,
            yb,
            chin: [0.0, -SYMPHYSIS_LEAN * wc, wc],
            // Index 0 is the left side (+x).
            condyle: [
                side(1.0, 0.23 * r, 0.46 * r),
                side(-1.0, 0.23 * r, 0.46 * r),
            ],
            coronoid: [
                side(1.0, -0.54 * r, 0.31 * r),
                side(-1.0, -0.54 * r, 0.31 * r),
            ],
        }
    }

    /// Model-space bounds `[min, max]` per axis.
    fn bounds(&self) -> [[f64; 2]; 3] {
        let umax = self.r + self.t.max(self.rc).max(self.rk);
        let front = (SYMPHYSIS_LEAN * self.h).hypot(self.t);
        let vmax = (self.condyle[0][1] + self.rc).max(self.yb + self.t);
        let wmin = (self.chin[2] - self.t).min(-self.h);
        let wmax = (self.condyle[0][2] + self.rc)
            .max(self.coronoid[0][2] + self.rk)
            .max(self.hr + self.t);
        [[-umax, umax], [-front, vmax], [wmin, wmax]]
    }

    fn arch(&self, [u, v, w]: [f64; 3]) -> bool {
        let (rho, lean) = if v < self.yc {
            let d = u.hypot(v - self.yc);
            if d == 0.0 {
                return false;
            }
            (d - self.r, SYMPHYSIS_LEAN * (self.yc - v) / d)
        } else if v <= self.yb {
            (u.abs() - self.r, 0.0)
        } else {
            return false;
        };
        let a = (rho - lean * w) / self.t;
        let b = w / self.h;
        a * a + b * b <= 1.0 + 1e-9
    }

    fn contains(&self, p: [f64; 3], missing_left_condyle: bool) -> bool {
        if self.arch(p) || sphere(p, self.chin, self.t) {
            return true;
        }
        for side in 0..2 {
            let sign = if side == 0 { 1.0 } else { -1.0 };
            let base = [sign * self.r, self.yb, 0.0];
            let top = [sign * self.r, self.yb, self.hr];
            if capsule(p, base, top, self.t) {
                return true;
            }
            let kproc = [sign * self.r, self.yb, self.hr - 0.1 * self.r];
            if sphere(p, self.coronoid[side], self.rk)
                || capsule(p, kproc, self.coronoid[side], 0.6 * self.t)
            {
                return true;
            }
            if side == 0 && missing_left_condyle {
                continue;
            }
            if sphere(p, self.condyle[side], self.rc)
                || capsule(p, top, self.condyle[side], 0.6 * self.t)
            {
                return true;
            }
        }
        false
    }
}

fn sphere(p: [f64; 3], c: [f64; 3], r: f64) -> bool {
    let d2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
    d2 <= r * r + 1e-9
}

fn capsule(p: [f64; 3], a: [f64; 3], b: [f64; 3], r: f64) -> bool {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    };
    let d2: f64 = (0..3).map(|i| (ap[i] - t * ab[i]).powi(2)).sum();
    d2 <= r * r + 1e-9
}

/// Placement of the model frame in the voxel grid. Model centers of the
/// spheres are snapped to voxel centers before voxelization.
struct Placement {
    origin: [i64; 3],
    /// Model units per voxel along z.
    zscale: f64,
}

impl Placement {
    fn model(&self, [i, j, k]: Coord) -> [f64; 3] {
        [
            (i as i64 - self.origin[0]) as f64,
            (j as i64 - self.origin[1]) as f64,
            (k as i64 - self.origin[2]) as f64 * self.zscale,
        ]
    }

    fn voxel(&self, p: [f64; 3]) -> [i64; 3] {
        [
            self.origin[0] + p[0].round() as i64,
            self.origin[1] + p[1].round() as i64,
            self.origin[2] + (p[2] / self.zscale).round() as i64,
        ]
    }

    fn snap(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.voxel(p);
        [
            (v[0] - self.origin[0]) as f64,
            (v[1] - self.origin[1]) as f64,
            (v[2] - self.origin[2]) as f64 * self.zscale,
        ]
    }
}

/// Generates the phantom mask and its nine ground-truth landmarks.
pub fn generate(spec: &PhantomSpec) -> Result<(BinaryMask, LandmarkSet)> {
    spec.validate()?;
    let dims = spec.dims;
    let s = spec.spacing.as_array();
    let zscale = s[2] / s[0];
    let mut g = Geometry::new(spec);
    let bounds = g.bounds();

    let n = dims.as_array();
    let mut origin = [0i64; 3];
    for a in 0..3 {
        let scale = if a == 2 { zscale } else { 1.0 };
        let [lo, hi] = bounds[a].map(|b| b / scale);
        origin[a] = ((n[a] as f64 - 1.0) / 2.0 - (lo + hi) / 2.0).round() as i64;
        let first = origin[a] + lo.floor() as i64;
        let last = origin[a] + hi.ceil() as i64;
        if first < MIN_MARGIN || last > n[a] as i64 - 1 - MIN_MARGIN {
            return Err(Error::invalid(
                "dims",
                format!(
                    "{dims} is too small for the phantom radii (axis {a} needs {} voxels)",
                    last - first + 1 + 2 * MIN_MARGIN
                ),
            ));
        }
    }
    let place = Placement { origin, zscale };
    g.chin = place.snap(g.chin);
    for side in 0..2 {
        g.condyle[side] = place.snap(g.condyle[side]);
        g.coronoid[side] = place.snap(g.coronoid[side]);
    }

    let mut mask = BinaryMask::from_fn(dims, spec.spacing, |c| {
        g.contains(place.model(c), spec.missing_left_condyle)
    });
    let landmarks = locate_landmarks(&mask, &g, &place, spec.missing_left_condyle)?;

    if spec.split_into_two_parts {
        // A 3-voxel slab across the right body, below the ramus tops.
        let mid = (g.yc + g.yb) / 2.0;
        let cut: Vec<usize> = mask
            .foreground()
            .filter(|&idx| {
                let p = place.model(dims.coord(idx));
                p[0] < 0.0 && (p[1] - mid).abs() <= 1.0 && p[2] <= g.h + g.t
            })
            .collect();
        for idx in cut {
            mask.set(dims.coord(idx), false).expect("in domain");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    if spec.cavity_count > 0 {
        carve_cavities(&mut mask, spec.cavity_count, &mut rng)?;
    }
    if spec.noise_blob_count > 0 {
        add_blobs(&mut mask, spec.noise_blob_count, &mut rng)?;
    }
    Ok((mask, landmarks))
}

fn locate_landmarks(
    m: &BinaryMask,
    g: &Geometry,
    place: &Placement,
    missing_left_condyle: bool,
) -> Result<LandmarkSet> {
    let dims = m.dims();
    let column = |p: [f64; 3], top: bool| -> Result<Coord> {
        let [i, j, _] = place.voxel(p);
        let (i, j) = (i as usize, j as usize);
        let mut ks = (0..dims.nz).filter(|&k| m.contains([i, j, k]));
        let k = if top { ks.next_back() } else { ks.next() };
        k.map(|k| [i, j, k])
            .ok_or_else(|| Error::InvalidVolume(format!("phantom column ({i}, {j}) is empty")))
    };
    let front = |w: f64| -> Result<Coord> {
        let [i, _, k] = place.voxel([0.0, 0.0, w]);
        let (i, k) = (i as usize, k as usize);
        (0..dims.ny)
            .find(|&j| m.contains([i, j, k]))
            .map(|j| [i, j, k])
            .ok_or_else(|| Error::InvalidVolume(format!("phantom row z={k} is empty")))
    };

    let mut set = LandmarkSet::default();
    set.push(Landmark::new(LandmarkName::Me, column(g.chin, false)?))?;
    set.push(Landmark::new(LandmarkName::Gn, front(-0.6 * g.h)?))?;
    set.push(Landmark::new(LandmarkName::Pg, front(0.0)?))?;
    set.push(Landmark::new(LandmarkName::B, front(0.4 * g.h)?))?;
    set.push(Landmark::new(LandmarkName::Id, front(0.8 * g.h)?))?;
    if missing_left_condyle {
        let mut cdl = Landmark::absent(LandmarkName::CdL);
        let v = place.voxel(g.condyle[0]);
        cdl.voxel = v.map(|x| x.max(0) as usize);
        set.push(cdl)?;
    } else {
        set.push(Landmark::new(
            LandmarkName::CdL,
            column(g.condyle[0], true)?,
        ))?;
    }
    set.push(Landmark::new(
        LandmarkName::CdR,
        column(g.condyle[1], true)?,
    ))?;
    set.push(Landmark::new(
        LandmarkName::CorL,
        column(g.coronoid[0], true)?,
    ))?;
    set.push(Landmark::new(
        LandmarkName::CorR,
        column(g.coronoid[1], true)?,
    ))?;
    Ok(set)
}

/// Voxels within `r` (voxel units, Euclidean) of `c`.
fn ball(dims: Dims, c: Coord, r: i64) -> impl Iterator<Item = Coord> {
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy + dz * dz > r * r {
                    continue;
                }
                let p = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                if dims.contains(p) {
                    out.push(p.map(|v| v as usize));
                }
            }
        }
    }
    out.into_iter()
}

/// Distances in voxel units regardless of the physical spacing.
fn voxel_ltdt(m: &BinaryMask) -> Vec<f64> {
    let unit = BinaryMask::new(
        crate::volume::Volume::from_vec(m.dims(), Spacing::UNIT, m.data().to_vec())
            .expect("same grid"),
    )
    .expect("binary");
    ltdt(&unit).into_data()
}

fn carve_cavities(m: &mut BinaryMask, count: usize, rng: &mut impl Rng) -> Result<()> {
    let depth = voxel_ltdt(m);
    let candidates: Vec<usize> = (0..depth.len())
        .filter(|&i| depth[i] >= 1.0 + NOISE_CLEARANCE)
        .collect();
    if candidates.is_empty() {
        return Err(Error::invalid(
            "cavity_count",
            "the phantom has no interior deep enough for cavities",
        ));
    }
    let dims = m.dims();
    for _ in 0..count {
        let c = dims.coord(candidates[rng.random_range(0..candidates.len())]);
        for p in ball(dims, c, 1) {
            m.set(p, false).expect("in domain");
        }
    }
    Ok(())
}

fn add_blobs(m: &mut BinaryMask, count: usize, rng: &mut impl Rng) -> Result<()> {
    let dims = m.dims();
    let clearance = voxel_ltdt(&mask_complement(m));
    let n = dims.as_array().map(|v| v as i64);
    for _ in 0..count {
        let r: i64 = rng.random_range(1..=2);
        let mut placed = false;
        for _ in 0..10_000 {
            let c = [0, 1, 2].map(|a| rng.random_range(r..(n[a] - r).max(r + 1)));
            if (0..3).any(|a| c[a] + r >= n[a]) {
                continue;
            }
            let c = c.map(|v| v as usize);
            if clearance[dims.index_unchecked(c)] >= r as f64 + NOISE_CLEARANCE {
                for p in ball(dims, c, r) {
                    m.set(p, true).expect("in domain");
                }
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::invalid(
                "noise_blob_count",
                "no background far enough from the phantom to place a blob",
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postprocess::component_count;
    use crate::volume::Connectivity;

    fn default_phantom() -> (BinaryMask, LandmarkSet) {
        generate(&PhantomSpec::default()).unwrap()
    }

    #[test]
    fn default_has_nine_boundary_landmarks() {
        let (m, lm) = default_phantom();
        assert_eq!(lm.len(), 9);
        for l in &lm {
            assert!(l.present, "{} absent", l.name);
            assert!(m.contains(l.voxel), "{} off mask", l.name);
            assert!(m.is_boundary(l.voxel), "{} not on boundary", l.name);
        }
        assert_eq!(component_count(&m, Connectivity::TwentySix), 1);
    }

    #[test]
    fn midsagittal_landmarks_share_a_slice_and_recede() {
        let (_, lm) = default_phantom();
        let v: Vec<Coord> = LandmarkName::CLOSE
            .iter()
            .map(|&n| lm.voxel(n).unwrap())
            .collect();
        assert!(v.iter().all(|c| c[0] == v[0][0]));
        for w in v.windows(2) {
            assert!(w[0][1] < w[1][1], "{w:?}");
            assert!(w[0][2] > w[1][2], "{w:?}");
        }
    }

    #[test]
    fn sides_follow_axis_convention() {
        let (_, lm) = default_phantom();
        let x = |n| lm.voxel(n).unwrap()[0];
        let me = x(LandmarkName::Me);
        assert!(x(LandmarkName::CdL) > me && x(LandmarkName::CorL) > me);
        assert!(x(LandmarkName::CdR) < me && x(LandmarkName::CorR) < me);
        let y = |n| lm.voxel(n).unwrap()[1];
        assert!(y(LandmarkName::CorL) < y(LandmarkName::CdL));
    }

    #[test]
    fn missing_condyle() {
        let spec = PhantomSpec {
            missing_left_condyle: true,
            ..PhantomSpec::default()
        };
        let (m, lm) = generate(&spec).unwrap();
        let cdl = lm.get(LandmarkName::CdL).unwrap();
        assert!(!cdl.present);
        assert!(!m.contains(cdl.voxel));
        assert_eq!(lm.present().count(), 8);
        for l in lm.present() {
            assert!(m.is_boundary(l.voxel) && m.contains(l.voxel));
        }
        let (full, _) = default_phantom();
        assert!(m.count() < full.count());
    }

    #[test]
    fn split_gives_two_parts() {
        let spec = PhantomSpec {
            split_into_two_parts: true,
            ..PhantomSpec::default()
        };
        let (m, _) = generate(&spec).unwrap();
        assert_eq!(component_count(&m, Connectivity::TwentySix), 2);
        assert_eq!(component_count(&m, Connectivity::Six), 2);
    }

    #[test]
    fn deterministic() {
        let spec = PhantomSpec {
            seed: 5,
            cavity_count: 3,
            noise_blob_count: 4,
            ..PhantomSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_is_separable() {
        let clean = default_phantom().0;
        let spec = PhantomSpec {
            seed: 9,
            cavity_count: 3,
            noise_blob_count: 4,
            ..PhantomSpec::default()
        };
        let (noisy, _) = generate(&spec).unwrap();
        let fixed = crate::postprocess::fill_holes(&crate::postprocess::largest_component(
            &noisy,
            Connectivity::TwentySix,
        ));
        assert_eq!(fixed, clean);
        assert!(component_count(&noisy, Connectivity::TwentySix) > 1);
    }

    #[test]
    fn too_small_dims_rejected() {
        let spec = PhantomSpec {
            dims: Dims::cube(40),
            ..PhantomSpec::default()
        };
        assert!(
            matches!(generate(&spec), Err(Error::InvalidArgument { field, .. }) if field == "dims")
        );
    }

    #[test]
    fn spec_json_defaults_and_unknown_fields() {
        let spec: PhantomSpec = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(spec.seed, 3);
        assert_eq!(spec.dims, Dims::cube(96));
        assert!(serde_json::from_str::<PhantomSpec>(r#"{"sede": 3}"#).is_err());
    }

    #[test]
    fn anisotropic_scaled_spec_fits() {
        let spacing = Spacing::new(0.754, 0.754, 0.377).unwrap();
        let spec = PhantomSpec::scaled(Dims::new(64, 64, 128).unwrap(), spacing);
        let (m, lm) = generate(&spec).unwrap();
        assert_eq!(component_count(&m, Connectivity::TwentySix), 1);
        for l in &lm {
            assert!(m.is_boundary(l.voxel), "{}", l.name);
        }
    }
}
