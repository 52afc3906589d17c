//! Segmentation clean-up: largest connected component and 3D hole filling.

use std::collections::VecDeque;

use crate::volume::{offset, BinaryMask, Connectivity, Dims, Volume};

/// Connected-component labels over voxels where `member` holds.
///
/// Labels start at 1 in order of each component's smallest flat index; 0
/// marks non-members.
pub(crate) fn label_components(
    dims: Dims,
    connectivity: Connectivity,
    member: impl Fn(usize) -> bool,
) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; dims.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..dims.len() {
        if labels[start] != 0 || !member(start) {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let c = dims.coord(idx);
            for &o in connectivity.offsets() {
                if let Some(n) = offset(dims, c, o) {
                    let ni = dims.index_unchecked(n);
                    if labels[ni] == 0 && member(ni) {
                        labels[ni] = label;
                        queue.push_back(ni);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Number of foreground components under `connectivity`.
pub fn component_count(m: &BinaryMask, connectivity: Connectivity) -> usize {
    label_components(m.dims(), connectivity, |i| m.is_fg(i))
        .1
        .len()
}

/// Keeps only the largest foreground component. Equal sizes resolve to the
/// component containing the smallest flat index.
pub fn largest_component(m: &BinaryMask, connectivity: Connectivity) -> BinaryMask {
    let (labels, sizes) = label_components(m.dims(), connectivity, |i| m.is_fg(i));
    let Some(best) = sizes
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, usize)>, (i, &s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i as u32 + 1)
    else {
        return m.clone();
    };
    let data = labels.iter().map(|&l| (l == best) as u8).collect();
    BinaryMask::new(Volume::from_vec(m.dims(), m.spacing(), data).expect("same grid"))
        .expect("binary")
}

/// Fills background voxels that are not 6-connected to the volume border.
pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    let dims = m.dims();
    let [nx, ny, nz] = dims.as_array();
    let mut outside = vec![false; dims.len()];
    let mut queue = VecDeque::new();
    for idx in (0..dims.len()).filter(|&i| !m.is_fg(i)) {
        let [i, j, k] = dims.coord(idx);
        if i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz {
            outside[idx] = true;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let c = dims.coord(idx);
        for &o in Connectivity::Six.offsets() {
            if let Some(n) = offset(dims, c, o) {
                let ni = dims.index_unchecked(n);
                if !outside[ni] && !m.is_fg(ni) {
                    outside[ni] = true;
                    queue.push_back(ni);
                }
            }
        }
    }
    let data = outside.iter().map(|&o| (!o) as u8).collect();
    BinaryMask::new(Volume::from_vec(dims, m.spacing(), data).expect("same grid")).expect("binary")
}
