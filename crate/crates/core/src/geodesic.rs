//! Geodesic landmark maps on a segmented object.
//!
//! A map holds, for every foreground voxel, the length of the shortest
//! voxel path to the landmark that stays inside the mask. Per-landmark maps
//! are fused by a pointwise minimum (in millimeters) and then quantized into
//! 21 classes. Decoding inverts the pipeline for the five sparsely-spaced
//! landmarks.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::edt;
use crate::error::{Error, Result};
use crate::landmark::{Landmark, LandmarkName, LandmarkSet};
use crate::postprocess::label_components;
use crate::volume::{
    euclidean_dist, mask_complement, offset, BinaryMask, Connectivity, Coord, Dims, Spacing, Volume,
};

/// Largest foreground class.
pub const MAX_CLASS: u8 = 20;
/// Class stored on background voxels of a quantized map.
pub const BACKGROUND_CLASS: u8 = 255;
/// Default bound on how far an off-mask annotation may be moved.
pub const DEFAULT_SNAP_LIMIT_MM: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapSource {
    Landmark(LandmarkName),
    Voxel(Coord),
    Fused,
}

/// Millimeter geodesic distances; +inf off the mask and where unreachable.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicMap {
    pub field: Volume<f64>,
    pub source: MapSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedGeodesicMap {
    pub classes: Volume<u8>,
    pub bin_width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicOptions {
    pub connectivity: Connectivity,
    pub snap_limit_mm: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            connectivity: Connectivity::TwentySix,
            snap_limit_mm: DEFAULT_SNAP_LIMIT_MM,
        }
    }
}

/// An off-mask source moved onto the nearest foreground voxel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snap {
    pub from: Coord,
    pub to: Coord,
    pub distance_mm: f64,
}

#[derive(Clone, Debug)]
pub struct GeodesicOutcome {
    pub map: GeodesicMap,
    pub snap: Option<Snap>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BinWidth {
    Fixed(f64),
    /// Largest finite distance divided by [`MAX_CLASS`].
    Auto,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // Reversed so that BinaryHeap pops the smallest distance, then the
    // smallest flat index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy)]
struct Step {
    delta: [i64; 3],
    flat: isize,
    weight: f64,
}

fn steps(dims: Dims, spacing: Spacing, connectivity: Connectivity) -> Vec<Step> {
    connectivity
        .offsets()
        .iter()
        .map(|&o| {
            let w = o
                .iter()
                .enumerate()
                .map(|(a, &d)| (d as f64 * spacing.axis(a)).powi(2))
                .sum::<f64>()
                .sqrt();
            Step {
                delta: o,
                flat: o[0] as isize
                    + dims.nx as isize * (o[1] as isize + dims.ny as isize * o[2] as isize),
                weight: w,
            }
        })
        .collect()
}

/// Multi-source Dijkstra over voxels where `allowed` holds, using a binary
/// heap with lazy deletion.
pub(crate) fn shortest_paths(
    dims: Dims,
    spacing: Spacing,
    connectivity: Connectivity,
    allowed: impl Fn(usize) -> bool,
    sources: &[(usize, f64)],
) -> Vec<f64> {
    let steps = steps(dims, spacing, connectivity);
    let [nx, ny, nz] = dims.as_array().map(|v| v as i64);
    let mut dist = vec![f64::INFINITY; dims.len()];
    let mut heap = BinaryHeap::new();
    for &(idx, d) in sources {
        if allowed(idx) && d < dist[idx] {
            dist[idx] = d;
            heap.push(HeapEntry { dist: d, idx });
        }
    }
    while let Some(HeapEntry { dist: d, idx }) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let [i, j, k] = dims.coord(idx).map(|v| v as i64);
        for s in &steps {
            let (a, b, c) = (i + s.delta[0], j + s.delta[1], k + s.delta[2]);
            if a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz {
                continue;
            }
            let n = (idx as isize + s.flat) as usize;
            if !allowed(n) {
                continue;
            }
            let nd = d + s.weight;
            if nd < dist[n] {
                dist[n] = nd;
                heap.push(HeapEntry { dist: nd, idx: n });
            }
        }
    }
    dist
}

/// Nearest foreground voxel to `voxel` within `limit_mm`, if any.
fn nearest_foreground(m: &BinaryMask, voxel: Coord, limit_mm: f64) -> Option<(Coord, f64)> {
    let dims = m.dims();
    let spacing = m.spacing();
    let reach: Vec<usize> = (0..3)
        .map(|a| (limit_mm / spacing.axis(a)).floor() as usize)
        .collect();
    let lo: Vec<usize> = (0..3).map(|a| voxel[a].saturating_sub(reach[a])).collect();
    let hi: Vec<usize> = (0..3)
        .map(|a| (voxel[a] + reach[a]).min(dims.as_array()[a] - 1))
        .collect();
    let mut best: Option<(Coord, f64)> = None;
    // z-major scan visits candidates in flat-index order, so strict `<`
    // keeps the smallest index on ties.
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let c = [i, j, k];
                if !m.contains(c) {
                    continue;
                }
                let d = euclidean_dist(voxel, c, spacing);
                if d <= limit_mm && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
        }
    }
    best
}

/// Geodesic distances from one voxel over the foreground graph.
///
/// An off-mask source is snapped to the nearest foreground voxel when that
/// voxel lies within `opts.snap_limit_mm`.
pub fn geodesic_from_voxel(
    m: &BinaryMask,
    voxel: Coord,
    label: &str,
    opts: &GeodesicOptions,
) -> Result<GeodesicOutcome> {
    let dims = m.dims();
    dims.index(voxel)?;
    if m.count() == 0 {
        return Err(Error::EmptyForeground);
    }
    let (source, snap) = if m.contains(voxel) {
        (voxel, None)
    } else {
        match nearest_foreground(m, voxel, opts.snap_limit_mm) {
            Some((to, distance_mm)) => {
                log::warn!("{label}: snapped {voxel:?} -> {to:?} ({distance_mm:.3} mm)");
                (
                    to,
                    Some(Snap {
                        from: voxel,
                        to,
                        distance_mm,
                    }),
                )
            }
            None => {
                let to_fg = edt::ltdt(&mask_complement(m));
                return Err(Error::SnapTooFar {
                    landmark: label.to_string(),
                    voxel,
                    distance_mm: to_fg.at(voxel),
                    limit_mm: opts.snap_limit_mm,
                });
            }
        }
    };
    let field = shortest_paths(
        dims,
        m.spacing(),
        opts.connectivity,
        |i| m.is_fg(i),
        &[(dims.index_unchecked(source), 0.0)],
    );
    Ok(GeodesicOutcome {
        map: GeodesicMap {
            field: Volume::from_vec(dims, m.spacing(), field)?,
            source: MapSource::Voxel(voxel),
        },
        snap,
    })
}

/// Geodesic map of one present landmark.
pub fn geodesic_map(
    m: &BinaryMask,
    landmark: &Landmark,
    opts: &GeodesicOptions,
) -> Result<GeodesicOutcome> {
    if !landmark.present {
        return Err(Error::MissingLandmark(landmark.name.to_string()));
    }
    let mut out = geodesic_from_voxel(m, landmark.voxel, landmark.name.as_str(), opts)?;
    out.map.source = MapSource::Landmark(landmark.name);
    Ok(out)
}

/// Pointwise minimum of maps on one grid.
pub fn fuse_maps(maps: &[&GeodesicMap]) -> Result<GeodesicMap> {
    let (first, rest) = maps
        .split_first()
        .ok_or_else(|| Error::invalid("maps", "at least one map is required"))?;
    let mut field = first.field.clone();
    for m in rest {
        field.same_grid(&m.field)?;
        for (a, &b) in field.data_mut().iter_mut().zip(m.field.data()) {
            if b < *a {
                *a = b;
            }
        }
    }
    Ok(GeodesicMap {
        field,
        source: MapSource::Fused,
    })
}

fn resolve_bin_width(g: &GeodesicMap, sbin: BinWidth) -> Result<f64> {
    match sbin {
        BinWidth::Fixed(w) if w.is_finite() && w > 0.0 => Ok(w),
        BinWidth::Fixed(w) => Err(Error::invalid("sbin", format!("must be > 0, got {w}"))),
        BinWidth::Auto => {
            let max = g
                .field
                .data()
                .iter()
                .copied()
                .filter(|v| v.is_finite())
                .fold(0.0f64, f64::max);
            Ok(if max > 0.0 {
                max / MAX_CLASS as f64
            } else {
                1.0
            })
        }
    }
}

#[inline]
fn class_of(value: f64, bin_width: f64) -> u8 {
    if value.is_finite() {
        (value / bin_width).floor().min(MAX_CLASS as f64) as u8
    } else {
        MAX_CLASS
    }
}

/// Quantizes a map, treating every +inf voxel as background.
pub fn quantize(g: &GeodesicMap, sbin: BinWidth) -> Result<QuantizedGeodesicMap> {
    let bin_width = resolve_bin_width(g, sbin)?;
    let classes = g.field.map(|v| {
        if v.is_finite() {
            class_of(v, bin_width)
        } else {
            BACKGROUND_CLASS
        }
    });
    Ok(QuantizedGeodesicMap { classes, bin_width })
}

/// Quantizes a map using `mask` to tell background from unreachable
/// foreground (which gets class [`MAX_CLASS`]).
pub fn quantize_masked(
    g: &GeodesicMap,
    mask: &BinaryMask,
    sbin: BinWidth,
) -> Result<QuantizedGeodesicMap> {
    g.field.same_grid(mask.volume())?;
    let bin_width = resolve_bin_width(g, sbin)?;
    let data = g
        .field
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&v, &fg)| {
            if fg == 0 {
                BACKGROUND_CLASS
            } else {
                class_of(v, bin_width)
            }
        })
        .collect();
    Ok(QuantizedGeodesicMap {
        classes: Volume::from_vec(g.field.dims(), g.field.spacing(), data)?,
        bin_width,
    })
}

/// Anything decodable: a per-voxel level where lower is nearer a landmark.
pub trait LevelMap {
    fn dims(&self) -> Dims;
    fn spacing(&self) -> Spacing;
    /// +inf on background.
    fn level(&self, idx: usize) -> f64;
}

impl LevelMap for GeodesicMap {
    fn dims(&self) -> Dims {
        self.field.dims()
    }
    fn spacing(&self) -> Spacing {
        self.field.spacing()
    }
    fn level(&self, idx: usize) -> f64 {
        self.field.data()[idx]
    }
}

impl LevelMap for QuantizedGeodesicMap {
    fn dims(&self) -> Dims {
        self.classes.dims()
    }
    fn spacing(&self) -> Spacing {
        self.classes.spacing()
    }
    fn level(&self, idx: usize) -> f64 {
        match self.classes.data()[idx] {
            BACKGROUND_CLASS => f64::INFINITY,
            c => c as f64,
        }
    }
}

/// Anatomical region of a sparsely-spaced landmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Inferior,
    SuperiorAnteriorLeft,
    SuperiorAnteriorRight,
    SuperiorPosteriorLeft,
    SuperiorPosteriorRight,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Inferior => "inferior",
            Region::SuperiorAnteriorLeft => "superior-anterior-left",
            Region::SuperiorAnteriorRight => "superior-anterior-right",
            Region::SuperiorPosteriorLeft => "superior-posterior-left",
            Region::SuperiorPosteriorRight => "superior-posterior-right",
        }
    }

    pub fn of(name: LandmarkName) -> Option<Region> {
        match name {
            LandmarkName::Me => Some(Region::Inferior),
            LandmarkName::CorL => Some(Region::SuperiorAnteriorLeft),
            LandmarkName::CorR => Some(Region::SuperiorAnteriorRight),
            LandmarkName::CdL => Some(Region::SuperiorPosteriorLeft),
            LandmarkName::CdR => Some(Region::SuperiorPosteriorRight),
            _ => None,
        }
    }
}

/// Split planes derived from the mask's bounding boxes (LPS axes).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSplit {
    /// z at or above is superior.
    pub superior_z: f64,
    /// x at or above is left.
    pub left_x: f64,
    /// Within the superior part, y below is anterior.
    pub posterior_y: f64,
}

impl RegionSplit {
    /// Inferior/superior and left/right split at the center of the mask's
    /// bounding box; anterior/posterior split at the center of the bounding
    /// box of the superior part alone.
    pub fn from_mask(m: &BinaryMask) -> Result<Self> {
        let (lo, hi) = m.bounding_box().ok_or(Error::EmptyForeground)?;
        let center = |a: usize| (lo[a] + hi[a]) as f64 / 2.0;
        let superior_z = center(2);
        let dims = m.dims();
        let (mut ylo, mut yhi) = (usize::MAX, 0);
        for idx in m.foreground() {
            let c = dims.coord(idx);
            if c[2] as f64 >= superior_z {
                ylo = ylo.min(c[1]);
                yhi = yhi.max(c[1]);
            }
        }
        Ok(RegionSplit {
            superior_z,
            left_x: center(0),
            posterior_y: (ylo + yhi) as f64 / 2.0,
        })
    }

    pub fn classify(&self, c: Coord) -> Region {
        let [x, y, z] = c.map(|v| v as f64);
        if z < self.superior_z {
            return Region::Inferior;
        }
        match (y < self.posterior_y, x >= self.left_x) {
            (true, true) => Region::SuperiorAnteriorLeft,
            (true, false) => Region::SuperiorAnteriorRight,
            (false, true) => Region::SuperiorPosteriorLeft,
            (false, false) => Region::SuperiorPosteriorRight,
        }
    }
}

/// Recovers sparsely-spaced landmarks from a fused (optionally quantized) map.
///
/// Minimum-level voxels are grouped into 26-connected clusters. Within each
/// cluster, enclosed non-minimum voxels are absorbed, and the landmark is the
/// cluster voxel farthest (geodesically, inside the cluster) from the rest of
/// the object: the center of the innermost level set. Clusters are named by
/// the region they fall in; expected names with no cluster are reported
/// absent.
pub fn decode_landmarks(
    map: &impl LevelMap,
    m: &BinaryMask,
    expected: &[LandmarkName],
) -> Result<LandmarkSet> {
    let dims = m.dims();
    if map.dims() != dims {
        return Err(Error::DimsMismatch {
            left: map.dims(),
            right: dims,
        });
    }
    for &name in expected {
        if !name.is_sparse() {
            return Err(Error::NotSparse(name.to_string()));
        }
    }
    let level = |i: usize| {
        if m.is_fg(i) {
            map.level(i)
        } else {
            f64::INFINITY
        }
    };
    let min_level = if (0..dims.len()).any(|i| level(i) == 0.0) {
        0.0
    } else {
        (0..dims.len()).map(level).fold(f64::INFINITY, f64::min)
    };
    if !min_level.is_finite() {
        return Err(Error::EmptyForeground);
    }

    let (labels, sizes) =
        label_components(dims, Connectivity::TwentySix, |i| level(i) == min_level);
    if sizes.len() > expected.len() {
        return Err(Error::TooManyClusters {
            found: sizes.len(),
            expected: expected.len(),
        });
    }
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for (idx, &l) in labels.iter().enumerate() {
        if l > 0 {
            clusters[l as usize - 1].push(idx);
        }
    }

    let split = RegionSplit::from_mask(m)?;
    let mut found: Vec<(Region, Coord)> = Vec::new();
    for cluster in &clusters {
        let c = cluster_center(m, cluster);
        let region = split.classify(c);
        if let Some(&(_, prev)) = found.iter().find(|(r, _)| *r == region) {
            return Err(Error::RegionConflict {
                region: region.name(),
                first: prev,
                second: c,
            });
        }
        if !expected.iter().any(|&n| Region::of(n) == Some(region)) {
            return Err(Error::UnexpectedRegion {
                region: region.name(),
                voxel: c,
            });
        }
        found.push((region, c));
    }

    let mut out = LandmarkSet::default();
    let mut names = expected.to_vec();
    names.sort();
    for name in names {
        let region = Region::of(name).expect("sparse");
        let lm = match found.iter().find(|(r, _)| *r == region) {
            Some(&(_, c)) => Landmark::new(name, c),
            None => Landmark::absent(name),
        };
        out.push(lm)?;
    }
    Ok(out)
}

/// The voxel of `cluster` deepest inside it, measured from the surrounding
/// foreground.
fn cluster_center(m: &BinaryMask, cluster: &[usize]) -> Coord {
    let dims = m.dims();
    if cluster.len() == 1 {
        return dims.coord(cluster[0]);
    }
    // Work in the cluster's bounding box grown by two voxels.
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for &idx in cluster {
        let c = dims.coord(idx);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let full = dims.as_array();
    for a in 0..3 {
        lo[a] = lo[a].saturating_sub(2);
        hi[a] = (hi[a] + 2).min(full[a] - 1);
    }
    let sub = Dims {
        nx: hi[0] - lo[0] + 1,
        ny: hi[1] - lo[1] + 1,
        nz: hi[2] - lo[2] + 1,
    };
    let to_full = |c: Coord| [c[0] + lo[0], c[1] + lo[1], c[2] + lo[2]];
    let fg: Vec<bool> = (0..sub.len())
        .map(|i| m.contains(to_full(sub.coord(i))))
        .collect();
    let mut inside = vec![false; sub.len()];
    for &idx in cluster {
        let c = dims.coord(idx);
        inside[sub.index_unchecked([c[0] - lo[0], c[1] - lo[1], c[2] - lo[2]])] = true;
    }

    // Absorb foreground pockets that cannot reach the box faces.
    let mut open = vec![false; sub.len()];
    let mut queue = VecDeque::new();
    for i in 0..sub.len() {
        let [x, y, z] = sub.coord(i);
        let on_face =
            x == 0 || y == 0 || z == 0 || x + 1 == sub.nx || y + 1 == sub.ny || z + 1 == sub.nz;
        if on_face && fg[i] && !inside[i] {
            open[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let c = sub.coord(i);
        for &o in Connectivity::Six.offsets() {
            if let Some(n) = offset(sub, c, o) {
                let ni = sub.index_unchecked(n);
                if fg[ni] && !inside[ni] && !open[ni] {
                    open[ni] = true;
                    queue.push_back(ni);
                }
            }
        }
    }
    for i in 0..sub.len() {
        if fg[i] && !open[i] {
            inside[i] = true;
        }
    }

    // Seed each cluster voxel touching the rest of the object with its step
    // length to it, then propagate inside the cluster.
    let spacing = m.spacing();
    let mut sources = Vec::new();
    for i in (0..sub.len()).filter(|&i| inside[i]) {
        let c = sub.coord(i);
        let mut best = f64::INFINITY;
        for &o in Connectivity::TwentySix.offsets() {
            if let Some(n) = offset(sub, c, o) {
                if open[sub.index_unchecked(n)] {
                    best = best.min(euclidean_dist(c, n, spacing));
                }
            }
        }
        if best.is_finite() {
            sources.push((i, best));
        }
    }

    let members: Vec<usize> = (0..sub.len()).filter(|&i| inside[i]).collect();
    let candidates: Vec<usize> = if sources.is_empty() {
        members.clone()
    } else {
        let depth = shortest_paths(
            sub,
            spacing,
            Connectivity::TwentySix,
            |i| inside[i],
            &sources,
        );
        let deepest = members.iter().map(|&i| depth[i]).fold(0.0f64, f64::max);
        members
            .iter()
            .copied()
            .filter(|&i| depth[i] >= deepest - 1e-9)
            .collect()
    };
    to_full(snap_centroid(sub, &candidates))
}

/// Centroid of `idxs`, snapped to the nearest member (smallest index on ties).
fn snap_centroid(dims: Dims, idxs: &[usize]) -> Coord {
    let n = idxs.len() as f64;
    let mut mean = [0.0; 3];
    for &i in idxs {
        let c = dims.coord(i);
        for a in 0..3 {
            mean[a] += c[a] as f64;
        }
    }
    let mean = mean.map(|v| v / n);
    let mut best = (f64::INFINITY, idxs[0]);
    for &i in idxs {
        let c = dims.coord(i);
        let d: f64 = (0..3).map(|a| (c[a] as f64 - mean[a]).powi(2)).sum();
        if d < best.0 || (d == best.0 && i < best.1) {
            best = (d, i);
        }
    }
    dims.coord(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Bellman-Ford relaxation over the explicit foreground edge list.
    fn bellman_ford(m: &BinaryMask, src: Coord, conn: Connectivity) -> Vec<f64> {
        let dims = m.dims();
        let mut edges = Vec::new();
        for a in m.foreground() {
            let c = dims.coord(a);
            for &o in conn.offsets() {
                if let Some(n) = offset(dims, c, o) {
                    if m.contains(n) {
                        edges.push((
                            a,
                            dims.index_unchecked(n),
                            euclidean_dist(c, n, m.spacing()),
                        ));
                    }
                }
            }
        }
        let mut dist = vec![f64::INFINITY; dims.len()];
        dist[dims.index_unchecked(src)] = 0.0;
        loop {
            let mut changed = false;
            for &(a, b, w) in &edges {
                if dist[a] + w < dist[b] {
                    dist[b] = dist[a] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    fn random_mask(rng: &mut ChaCha8Rng, n: usize, density: f64, spacing: Spacing) -> BinaryMask {
        let bits: Vec<bool> = (0..n * n * n).map(|_| rng.random_bool(density)).collect();
        BinaryMask::from_bools(Dims::cube(n), spacing, &bits).unwrap()
    }

    fn opts(conn: Connectivity) -> GeodesicOptions {
        GeodesicOptions {
            connectivity: conn,
            ..Default::default()
        }
    }

    #[test]
    fn rod_distances_are_forced() {
        let m = BinaryMask::from_fn(Dims::new(1, 1, 20).unwrap(), Spacing::UNIT, |_| true);
        let g = geodesic_from_voxel(&m, [0, 0, 0], "rod", &opts(Connectivity::Six)).unwrap();
        for k in 0..20 {
            assert_eq!(g.map.field.at([0, 0, k]), k as f64);
        }
    }

    #[test]
    fn background_is_infinite() {
        let m = BinaryMask::from_fn(Dims::cube(5), Spacing::UNIT, |c| c[0] < 3);
        let g = geodesic_from_voxel(&m, [0, 0, 0], "x", &GeodesicOptions::default()).unwrap();
        for idx in 0..m.dims().len() {
            assert_eq!(g.map.field.data()[idx].is_infinite(), !m.is_fg(idx));
        }
    }

    fn u_shape() -> (BinaryMask, Coord, Coord) {
        // Two 10-voxel arms along y at x = 0 and x = 3 (two background
        // columns between them), joined at y = 0.
        let m = BinaryMask::from_fn(Dims::new(4, 11, 1).unwrap(), Spacing::UNIT, |[i, j, _]| {
            i == 0 || i == 3 || j == 0
        });
        (m, [0, 10, 0], [3, 10, 0])
    }

    #[test]
    fn u_shape_goes_around_the_bend() {
        let (m, a, b) = u_shape();
        for conn in [Connectivity::Six, Connectivity::TwentySix] {
            let g = geodesic_from_voxel(&m, a, "tip", &opts(conn)).unwrap();
            let oracle = bellman_ford(&m, a, conn);
            let d = g.map.field.at(b);
            assert_eq!(d, oracle[m.dims().index_unchecked(b)]);
            assert!(d > 3.0 * 5.0);
        }
        let g = geodesic_from_voxel(&m, a, "tip", &opts(Connectivity::Six)).unwrap();
        assert_eq!(g.map.field.at(b), 23.0);
    }

    #[test]
    fn matches_bellman_ford_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for round in 0..30 {
            let spacing = if round % 2 == 0 {
                Spacing::UNIT
            } else {
                Spacing::new(0.754, 0.754, 0.377).unwrap()
            };
            let m = random_mask(&mut rng, 7, 0.7, spacing);
            assert!(m.count() <= 500);
            let src = m.dims().coord(m.foreground().next().unwrap());
            for conn in [Connectivity::Six, Connectivity::TwentySix] {
                let g = geodesic_from_voxel(&m, src, "s", &opts(conn)).unwrap();
                let oracle = bellman_ford(&m, src, conn);
                for (a, b) in g.map.field.data().iter().zip(&oracle) {
                    if b.is_finite() {
                        assert!((a - b).abs() <= 1e-9);
                    } else {
                        assert!(a.is_infinite());
                    }
                }
            }
        }
    }

    #[test]
    fn geodesic_dominates_euclidean_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_mask(&mut rng, 8, 0.75, Spacing::new(1.0, 0.5, 2.0).unwrap());
        let fg: Vec<_> = m.foreground().collect();
        let a = m.dims().coord(fg[0]);
        let b = m.dims().coord(fg[fg.len() - 1]);
        let ga = geodesic_from_voxel(&m, a, "a", &GeodesicOptions::default()).unwrap();
        let gb = geodesic_from_voxel(&m, b, "b", &GeodesicOptions::default()).unwrap();
        assert_eq!(ga.map.field.at(b), gb.map.field.at(a));
        for &idx in &fg {
            let v = ga.map.field.data()[idx];
            if v.is_finite() {
                assert!(v + 1e-12 >= euclidean_dist(a, m.dims().coord(idx), m.spacing()));
            }
        }
    }

    #[test]
    fn off_mask_source_snaps_within_limit() {
        let m = BinaryMask::from_fn(Dims::cube(20), Spacing::UNIT, |c| c[2] < 5);
        let g = geodesic_from_voxel(&m, [10, 10, 8], "Me", &GeodesicOptions::default()).unwrap();
        let snap = g.snap.unwrap();
        assert_eq!(snap.to, [10, 10, 4]);
        assert_eq!(snap.distance_mm, 4.0);
        assert_eq!(-edt::sltdt(&m).at([10, 10, 8]), 4.0);
        assert_eq!(g.map.field.at([10, 10, 4]), 0.0);

        let far = geodesic_from_voxel(&m, [10, 10, 19], "Me", &GeodesicOptions::default());
        match far {
            Err(Error::SnapTooFar {
                landmark,
                distance_mm,
                ..
            }) => {
                assert_eq!(landmark, "Me");
                assert_eq!(distance_mm, 15.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = BinaryMask::empty(Dims::cube(3), Spacing::UNIT);
        assert!(matches!(
            geodesic_from_voxel(&m, [0, 0, 0], "x", &GeodesicOptions::default()),
            Err(Error::EmptyForeground)
        ));
    }

    #[test]
    fn fusion_examples() {
        let m = BinaryMask::from_fn(Dims::new(1, 1, 21).unwrap(), Spacing::UNIT, |_| true);
        let o = opts(Connectivity::Six);
        let a = geodesic_from_voxel(&m, [0, 0, 0], "a", &o).unwrap().map;
        let b = geodesic_from_voxel(&m, [0, 0, 20], "b", &o).unwrap().map;
        let one = fuse_maps(&[&a]).unwrap();
        assert_eq!(one.field, a.field);
        assert_eq!(one.source, MapSource::Fused);
        let f = fuse_maps(&[&a, &b]).unwrap();
        assert_eq!(f.field.at([0, 0, 10]), 10.0);
        assert_eq!(f.field.at([0, 0, 3]), 3.0);
        assert_eq!(f.field.at([0, 0, 18]), 2.0);
        assert_eq!(f.field.data().iter().filter(|&&v| v == 0.0).count(), 2);
        assert!(fuse_maps(&[]).is_err());
    }

    #[test]
    fn fusion_dims_mismatch() {
        let m1 = BinaryMask::from_fn(Dims::cube(3), Spacing::UNIT, |_| true);
        let m2 = BinaryMask::from_fn(Dims::cube(4), Spacing::UNIT, |_| true);
        let a = geodesic_from_voxel(&m1, [0, 0, 0], "a", &GeodesicOptions::default()).unwrap();
        let b = geodesic_from_voxel(&m2, [0, 0, 0], "b", &GeodesicOptions::default()).unwrap();
        assert!(matches!(
            fuse_maps(&[&a.map, &b.map]),
            Err(Error::DimsMismatch { .. })
        ));
    }

    #[test]
    fn fusion_is_exhaustively_a_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let m = random_mask(&mut rng, 6, 0.8, Spacing::UNIT);
            let fg: Vec<_> = m.foreground().collect();
            let maps: Vec<GeodesicMap> = (0..3)
                .map(|_| {
                    let src = m.dims().coord(fg[rng.random_range(0..fg.len())]);
                    geodesic_from_voxel(&m, src, "s", &GeodesicOptions::default())
                        .unwrap()
                        .map
                })
                .collect();
            let refs: Vec<&GeodesicMap> = maps.iter().collect();
            let f = fuse_maps(&refs).unwrap();
            for i in 0..m.dims().len() {
                let v = f.field.data()[i];
                assert!(maps.iter().all(|g| v <= g.field.data()[i]));
                assert!(maps.iter().any(|g| v == g.field.data()[i]));
            }
            let ab = fuse_maps(&[&maps[0], &maps[1]]).unwrap();
            let abc = fuse_maps(&[&ab, &maps[2]]).unwrap();
            let cba = fuse_maps(&[&maps[2], &maps[1], &maps[0]]).unwrap();
            assert_eq!(abc.field, f.field);
            assert_eq!(cba.field, f.field);
        }
    }

    #[test]
    fn quantize_examples() {
        let dims = Dims::new(5, 1, 1).unwrap();
        let field = Volume::from_vec(
            dims,
            Spacing::UNIT,
            vec![0.0, 12.5, 100.0, 5.0 * 20.0, f64::INFINITY],
        )
        .unwrap();
        let g = GeodesicMap {
            field,
            source: MapSource::Fused,
        };
        let q = quantize(&g, BinWidth::Fixed(5.0)).unwrap();
        assert_eq!(q.classes.data(), &[0, 2, 20, 20, BACKGROUND_CLASS]);
        assert!(quantize(&g, BinWidth::Fixed(0.0)).is_err());

        let mask = BinaryMask::from_fn(dims, Spacing::UNIT, |_| true);
        let qm = quantize_masked(&g, &mask, BinWidth::Fixed(5.0)).unwrap();
        assert_eq!(qm.classes.data()[4], MAX_CLASS);

        let auto = quantize(&g, BinWidth::Auto).unwrap();
        assert_eq!(auto.bin_width, 5.0);
        assert_eq!(auto.classes.data()[2], 20);
    }

    #[test]
    fn fuse_before_quantize_differs_from_quantize_before_fuse() {
        // Two sources; auto bin width depends on the fused range, so the
        // order of operations is observable.
        let m = BinaryMask::from_fn(Dims::new(1, 1, 41).unwrap(), Spacing::UNIT, |_| true);
        let o = opts(Connectivity::Six);
        let a = geodesic_from_voxel(&m, [0, 0, 0], "a", &o).unwrap().map;
        let b = geodesic_from_voxel(&m, [0, 0, 40], "b", &o).unwrap().map;
        let fused_then = quantize(&fuse_maps(&[&a, &b]).unwrap(), BinWidth::Auto).unwrap();
        let qa = quantize(&a, BinWidth::Auto).unwrap();
        let qb = quantize(&b, BinWidth::Auto).unwrap();
        let min_of: Vec<u8> = qa
            .classes
            .data()
            .iter()
            .zip(qb.classes.data())
            .map(|(x, y)| *x.min(y))
            .collect();
        assert_ne!(fused_then.classes.data(), &min_of[..]);
        // The fused map uses its own range: the midpoint is the top class.
        assert_eq!(fused_then.classes.data()[20], 20);
    }

    #[test]
    fn decode_rejects_closely_spaced_names() {
        let m = BinaryMask::from_fn(Dims::cube(3), Spacing::UNIT, |_| true);
        let g = geodesic_from_voxel(&m, [0, 0, 0], "x", &GeodesicOptions::default()).unwrap();
        assert!(matches!(
            decode_landmarks(&g.map, &m, &[LandmarkName::Pg]),
            Err(Error::NotSparse(_))
        ));
    }

    #[test]
    fn hemisphere_cap_decodes_to_apex() {
        // A solid ball; the landmark sits on top. The minimum class covers a
        // cap around it and the decoder must return the apex itself.
        let dims = Dims::cube(21);
        let m = BinaryMask::from_fn(dims, Spacing::UNIT, |c| {
            c.iter().map(|&v| (v as f64 - 10.0).powi(2)).sum::<f64>() <= 36.0
        });
        let apex = [10, 10, 16];
        let g = geodesic_from_voxel(&m, apex, "Me", &GeodesicOptions::default()).unwrap();
        let q = quantize(&g.map, BinWidth::Fixed(2.5)).unwrap();
        let members: Vec<usize> = (0..dims.len())
            .filter(|&i| q.classes.data()[i] == 0)
            .collect();
        assert!(members.len() > 5);
        assert_eq!(cluster_center(&m, &members), apex);
    }
}
