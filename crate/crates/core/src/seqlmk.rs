//! Closely-spaced landmarks as a row-labelled sagittal boundary sequence.
//!
//! The sagittal slice through Menton is cropped to its foreground, reduced to
//! a one-pixel boundary and rescaled to a 64x64 image. Row 0 is the most
//! superior row and column 0 the most anterior column. Each row contributes
//! the column of its anterior-most boundary pixel, and a binary label marks
//! the rows that hold a landmark.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmark::{LandmarkName, LandmarkSet};
use crate::volume::{BinaryMask, Coord};

/// Rows (and columns) of the rescaled boundary image.
pub const ROWS: usize = 64;
/// Landmark rows carried by a full sequence.
pub const LANDMARK_ROWS: usize = 5;
/// Voxels of background kept around the slice foreground when cropping.
pub const CROP_MARGIN: i64 = 2;

/// Placement of the 64x64 image in the source volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropWindow {
    /// Sagittal index (x) of the slice.
    pub sagittal: usize,
    /// Source y of column 0 (most anterior); may lie outside the volume.
    pub y_min: i64,
    /// Source z of row 0 (most superior).
    pub z_max: i64,
    /// Source extent along y.
    pub width: usize,
    /// Source extent along z.
    pub height: usize,
}

impl CropWindow {
    /// Source pixels per output pixel along (columns, rows).
    pub fn scale(&self) -> [f64; 2] {
        [
            self.width as f64 / ROWS as f64,
            self.height as f64 / ROWS as f64,
        ]
    }

    fn src_col(&self, col: usize) -> usize {
        (((col as f64 + 0.5) * self.width as f64 / ROWS as f64).floor() as usize)
            .min(self.width - 1)
    }

    fn src_row(&self, row: usize) -> usize {
        (((row as f64 + 0.5) * self.height as f64 / ROWS as f64).floor() as usize)
            .min(self.height - 1)
    }

    /// Output row whose sample lands on source z.
    pub fn row_of(&self, z: usize) -> Option<usize> {
        let r = self.z_max - z as i64;
        if r < 0 || r >= self.height as i64 {
            return None;
        }
        let row = ((r as f64 + 0.5) * ROWS as f64 / self.height as f64).floor() as usize;
        Some(row.min(ROWS - 1))
    }

    pub fn col_of(&self, y: usize) -> Option<usize> {
        let c = y as i64 - self.y_min;
        if c < 0 || c >= self.width as i64 {
            return None;
        }
        let col = ((c as f64 + 0.5) * ROWS as f64 / self.width as f64).floor() as usize;
        Some(col.min(ROWS - 1))
    }

    /// Source (y, z) sampled by output pixel (col, row).
    pub fn source_of(&self, col: usize, row: usize) -> (i64, i64) {
        (
            self.y_min + self.src_col(col) as i64,
            self.z_max - self.src_row(row) as i64,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySequence {
    /// Anterior-most boundary column per row; `None` for rows with no
    /// boundary.
    pub profile: Vec<Option<u8>>,
    pub labels: Vec<u8>,
    /// Absent for synthesized sequences.
    pub crop: Option<CropWindow>,
}

impl BoundarySequence {
    pub fn validate(&self) -> Result<()> {
        if self.profile.len() != ROWS || self.labels.len() != ROWS {
            return Err(Error::InvalidSequence(format!(
                "expected {ROWS} rows, got profile {} and labels {}",
                self.profile.len(),
                self.labels.len()
            )));
        }
        let mut ones = 0;
        for (row, (&l, p)) in self.labels.iter().zip(&self.profile).enumerate() {
            match l {
                0 => {}
                1 => {
                    ones += 1;
                    if p.is_none() {
                        return Err(Error::InvalidSequence(format!(
                            "row {row} is labelled but has no boundary"
                        )));
                    }
                }
                v => {
                    return Err(Error::InvalidSequence(format!(
                        "label {v} at row {row} is not 0 or 1"
                    )))
                }
            }
            if let Some(c) = p {
                if *c as usize >= ROWS {
                    return Err(Error::InvalidSequence(format!(
                        "column {c} at row {row} is outside [0, {ROWS})"
                    )));
                }
            }
        }
        if ones > LANDMARK_ROWS {
            return Err(Error::InvalidSequence(format!(
                "{ones} labelled rows exceeds {LANDMARK_ROWS}"
            )));
        }
        Ok(())
    }

    pub fn flagged_rows(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 1)
            .map(|(r, _)| r)
            .collect()
    }
}

/// Label vector with ones at `rows`.
pub fn encode_labels(rows: &[usize]) -> Result<Vec<u8>> {
    let mut labels = vec![0u8; ROWS];
    for &r in rows {
        if r >= ROWS {
            return Err(Error::invalid(
                "rows",
                format!("row {r} outside [0, {ROWS})"),
            ));
        }
        labels[r] = 1;
    }
    Ok(labels)
}

/// Boundary pixels of the cropped slice, indexed `[row][col]` in source
/// resolution.
fn slice_boundary(m: &BinaryMask, crop: &CropWindow) -> Vec<Vec<bool>> {
    let dims = m.dims();
    let fg = |y: i64, z: i64| {
        y >= 0
            && z >= 0
            && (y as usize) < dims.ny
            && (z as usize) < dims.nz
            && m.contains([crop.sagittal, y as usize, z as usize])
    };
    (0..crop.height)
        .map(|r| {
            let z = crop.z_max - r as i64;
            (0..crop.width)
                .map(|c| {
                    let y = crop.y_min + c as i64;
                    fg(y, z) && (!fg(y - 1, z) || !fg(y + 1, z) || !fg(y, z - 1) || !fg(y, z + 1))
                })
                .collect()
        })
        .collect()
}

/// Builds the 64-row boundary sequence on the sagittal slice through
/// Menton, labelling rows of every closely-spaced landmark present in `lm`.
pub fn extract_boundary_sequence(m: &BinaryMask, lm: &LandmarkSet) -> Result<BoundarySequence> {
    let me = lm
        .voxel(LandmarkName::Me)
        .ok_or_else(|| Error::MissingLandmark("Me".into()))?;
    let dims = m.dims();
    dims.index(me)?;
    let x = me[0];

    let (mut ylo, mut yhi, mut zlo, mut zhi) = (usize::MAX, 0, usize::MAX, 0);
    for k in 0..dims.nz {
        for j in 0..dims.ny {
            if m.contains([x, j, k]) {
                ylo = ylo.min(j);
                yhi = yhi.max(j);
                zlo = zlo.min(k);
                zhi = zhi.max(k);
            }
        }
    }
    if ylo == usize::MAX {
        return Err(Error::EmptySlice(x));
    }
    let crop = CropWindow {
        sagittal: x,
        y_min: ylo as i64 - CROP_MARGIN,
        z_max: zhi as i64 + CROP_MARGIN,
        width: yhi - ylo + 1 + 2 * CROP_MARGIN as usize,
        height: zhi - zlo + 1 + 2 * CROP_MARGIN as usize,
    };
    let boundary = slice_boundary(m, &crop);
    let profile: Vec<Option<u8>> = (0..ROWS)
        .map(|row| {
            let src = &boundary[crop.src_row(row)];
            (0..ROWS)
                .find(|&col| src[crop.src_col(col)])
                .map(|c| c as u8)
        })
        .collect();

    let mut rows: Vec<(usize, LandmarkName)> = Vec::new();
    for name in LandmarkName::CLOSE {
        let Some(v) = lm.voxel(name) else { continue };
        let row = crop.row_of(v[2]).ok_or_else(|| {
            Error::invalid(
                "landmarks",
                format!("{name} at {v:?} lies outside the sagittal crop"),
            )
        })?;
        if let Some(&(_, other)) = rows.iter().find(|(r, _)| *r == row) {
            return Err(Error::RowCollision {
                first: other.to_string(),
                second: name.to_string(),
                row,
            });
        }
        if profile[row].is_none() {
            return Err(Error::InvalidSequence(format!(
                "{name} maps to row {row}, which has no boundary"
            )));
        }
        rows.push((row, name));
    }
    let labels = encode_labels(&rows.iter().map(|(r, _)| *r).collect::<Vec<_>>())?;
    let seq = BoundarySequence {
        profile,
        labels,
        crop: Some(crop),
    };
    seq.validate()?;
    Ok(seq)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedLandmark {
    pub name: LandmarkName,
    pub row: usize,
    pub column: u8,
    /// Source voxel, when the sequence carries its crop window.
    pub voxel: Option<Coord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedSequence {
    pub landmarks: Vec<DecodedLandmark>,
    pub absent: Vec<LandmarkName>,
}

impl DecodedSequence {
    /// Decoded landmarks with voxels, plus absent entries, as a set.
    pub fn to_landmark_set(&self) -> Result<LandmarkSet> {
        let mut set = LandmarkSet::default();
        for d in &self.landmarks {
            match d.voxel {
                Some(v) => set.push(crate::landmark::Landmark::new(d.name, v))?,
                None => set.push(crate::landmark::Landmark::absent(d.name))?,
            }
        }
        for &n in &self.absent {
            set.push(crate::landmark::Landmark::absent(n))?;
        }
        Ok(set.sorted())
    }
}

/// Names flagged rows in anatomical order Id, B, Pg, Gn, Me. With fewer than
/// five flags, Me anchors the bottom-most row and names fill upward.
pub fn decode_sequence(s: &BoundarySequence) -> Result<DecodedSequence> {
    s.validate()?;
    let rows = s.flagged_rows();
    if rows.is_empty() {
        return Err(Error::NoFlaggedRows);
    }
    let names = &LandmarkName::CLOSE[LANDMARK_ROWS - rows.len()..];
    let absent = LandmarkName::CLOSE[..LANDMARK_ROWS - rows.len()].to_vec();
    let landmarks = rows
        .iter()
        .zip(names)
        .map(|(&row, &name)| {
            let column = s.profile[row].expect("validated");
            let voxel = s.crop.as_ref().and_then(|crop| {
                let (y, z) = crop.source_of(column as usize, row);
                (y >= 0 && z >= 0).then_some([crop.sagittal, y as usize, z as usize])
            });
            DecodedLandmark {
                name,
                row,
                column,
                voxel,
            }
        })
        .collect();
    Ok(DecodedSequence { landmarks, absent })
}

/// Linear shape model over boundary profiles and landmark rows.
#[derive(Clone, Debug)]
pub struct ShapeModel {
    pub mean: DVector<f64>,
    /// Principal directions as columns, by decreasing variance.
    pub components: DMatrix<f64>,
    /// Standard deviation along each component.
    pub sigmas: Vec<f64>,
    /// Rows left empty in the majority of training sequences.
    pub empty_rows: Vec<bool>,
}

/// Feature length: one column per row plus the landmark rows.
pub const FEATURES: usize = ROWS + LANDMARK_ROWS;

/// Empty rows take the value of the nearest non-empty row (upper on ties).
fn filled_profile(s: &BoundarySequence) -> Result<Vec<f64>> {
    let known: Vec<usize> = (0..ROWS).filter(|&r| s.profile[r].is_some()).collect();
    if known.is_empty() {
        return Err(Error::InvalidSequence(
            "profile has no boundary rows".into(),
        ));
    }
    Ok((0..ROWS)
        .map(|r| {
            let nearest = known
                .iter()
                .min_by(|&&a, &&b| a.abs_diff(r).cmp(&b.abs_diff(r)).then(a.cmp(&b)))
                .unwrap();
            s.profile[*nearest].unwrap() as f64
        })
        .collect())
}

pub fn feature_vector(s: &BoundarySequence) -> Result<DVector<f64>> {
    s.validate()?;
    let rows = s.flagged_rows();
    if rows.len() != LANDMARK_ROWS {
        return Err(Error::InvalidSequence(format!(
            "training sequences need {LANDMARK_ROWS} labelled rows, got {}",
            rows.len()
        )));
    }
    let mut v = filled_profile(s)?;
    v.extend(rows.iter().map(|&r| r as f64));
    Ok(DVector::from_vec(v))
}

impl ShapeModel {
    pub fn fit(training: &[BoundarySequence]) -> Result<Self> {
        if training.len() < 3 {
            return Err(Error::invalid(
                "training",
                format!("need at least 3 sequences, got {}", training.len()),
            ));
        }
        let samples: Vec<DVector<f64>> =
            training.iter().map(feature_vector).collect::<Result<_>>()?;
        let n = samples.len() as f64;
        let mean = samples
            .iter()
            .fold(DVector::zeros(FEATURES), |acc, s| acc + s)
            / n;
        let mut cov = DMatrix::<f64>::zeros(FEATURES, FEATURES);
        for s in &samples {
            let d = s - &mean;
            cov += &d * d.transpose();
        }
        cov /= n - 1.0;

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..FEATURES).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(Ordering::Equal)
        });
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        let keep: Vec<usize> = order
            .into_iter()
            .filter(|&i| {
                eig.eigenvalues[i] > 1e-9 * total.max(1e-300) && eig.eigenvalues[i] > 1e-12
            })
            .collect();
        let mut components = DMatrix::<f64>::zeros(FEATURES, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            components.set_column(c, &eig.eigenvectors.column(i));
        }
        let sigmas = keep.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();

        let empty_rows = (0..ROWS)
            .map(|r| {
                let empty = training.iter().filter(|s| s.profile[r].is_none()).count();
                2 * empty > training.len()
            })
            .collect();
        Ok(ShapeModel {
            mean,
            components,
            sigmas,
            empty_rows,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn project(&self, s: &BoundarySequence) -> Result<DVector<f64>> {
        Ok(self.components.transpose() * (feature_vector(s)? - &self.mean))
    }

    /// Independent uniform draws in `[-cap * sigma_i, cap * sigma_i]`.
    pub fn sample_coefficients(&self, rng: &mut impl Rng, sigma_cap: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.sigmas.len(),
            self.sigmas.iter().map(|&s| {
                let half = sigma_cap * s;
                if half > 0.0 {
                    rng.random_range(-half..=half)
                } else {
                    0.0
                }
            }),
        )
    }

    /// Rounded, clamped sequence for `coeffs`; rows in `empty` are cleared
    /// unless they carry a landmark.
    pub fn reconstruct(&self, coeffs: &DVector<f64>, empty: &[bool]) -> BoundarySequence {
        let v = &self.mean + &self.components * coeffs;
        let clamp = |x: f64| x.round().clamp(0.0, (ROWS - 1) as f64) as usize;
        let rows: Vec<usize> = (0..LANDMARK_ROWS).map(|i| clamp(v[ROWS + i])).collect();
        let mut labels = vec![0u8; ROWS];
        for &r in &rows {
            labels[r] = 1;
        }
        let profile = (0..ROWS)
            .map(|r| {
                if empty[r] && labels[r] == 0 {
                    None
                } else {
                    Some(clamp(v[r]) as u8)
                }
            })
            .collect();
        BoundarySequence {
            profile,
            labels,
            crop: None,
        }
    }
}

/// Synthesizes `count` sequences by sampling the training shape model.
pub fn pca_augment(
    training: &[BoundarySequence],
    count: usize,
    sigma_cap: f64,
    seed: u64,
) -> Result<Vec<BoundarySequence>> {
    if count == 0 {
        return Err(Error::invalid("count", "must be at least 1"));
    }
    if !(sigma_cap.is_finite() && sigma_cap >= 0.0) {
        return Err(Error::invalid(
            "sigma_cap",
            format!("must be finite and >= 0, got {sigma_cap}"),
        ));
    }
    let model = ShapeModel::fit(training)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if model.is_degenerate() {
        log::warn!("training sequences are identical; returning jittered copies");
        let base = model.reconstruct(&DVector::zeros(0), &model.empty_rows);
        return Ok((0..count)
            .map(|_| {
                let mut s = base.clone();
                for c in s.profile.iter_mut().flatten() {
                    let j: i64 = rng.random_range(-1..=1);
                    *c = (*c as i64 + j).clamp(0, ROWS as i64 - 1) as u8;
                }
                s
            })
            .collect());
    }
    Ok((0..count)
        .map(|_| {
            let c = model.sample_coefficients(&mut rng, sigma_cap);
            model.reconstruct(&c, &model.empty_rows)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmark::Landmark;
    use crate::volume::{Dims, Spacing};
    use proptest::prelude::*;

    /// Slice with an anterior arc; landmarks planted on the arc so that the
    /// crop is exactly 64 rows tall (identity row mapping).
    fn arc_phantom(rows: &[usize]) -> (BinaryMask, LandmarkSet) {
        let dims = Dims::new(3, 80, 64).unwrap();
        // Crop adds two rows above and below: foreground spans z in 2..=61.
        let front = |z: usize| 10 + ((z as f64 - 31.5).powi(2) / 60.0) as usize;
        let m = BinaryMask::from_fn(dims, Spacing::UNIT, |[x, y, z]| {
            x == 1 && (2..=61).contains(&z) && y >= front(z) && y < 60
        });
        let mut set = LandmarkSet::default();
        let names = &LandmarkName::CLOSE[LANDMARK_ROWS - rows.len()..];
        for (&row, &name) in rows.iter().zip(names) {
            let z = 63 - row; // z_max = 61 + 2
            set.push(Landmark::new(name, [1, front(z), z])).unwrap();
        }
        (m, set)
    }

    #[test]
    fn planted_rows_are_labelled() {
        let rows = [10, 18, 25, 33, 40];
        let (m, lm) = arc_phantom(&rows);
        let seq = extract_boundary_sequence(&m, &lm).unwrap();
        assert_eq!(seq.flagged_rows(), rows);
        let dec = decode_sequence(&seq).unwrap();
        let got: Vec<_> = dec.landmarks.iter().map(|d| (d.name, d.row)).collect();
        assert_eq!(
            got,
            vec![
                (LandmarkName::Id, 10),
                (LandmarkName::B, 18),
                (LandmarkName::Pg, 25),
                (LandmarkName::Gn, 33),
                (LandmarkName::Me, 40)
            ]
        );
        for d in &dec.landmarks {
            let truth = lm.voxel(d.name).unwrap();
            let v = d.voxel.unwrap();
            assert_eq!(v[0], truth[0]);
            assert!(v[1].abs_diff(truth[1]) <= 1 && v[2].abs_diff(truth[2]) <= 1);
        }
    }

    #[test]
    fn fewer_rows_anchor_menton_to_bottom() {
        let seq = BoundarySequence {
            profile: vec![Some(5); ROWS],
            labels: encode_labels(&[25, 33, 40]).unwrap(),
            crop: None,
        };
        let dec = decode_sequence(&seq).unwrap();
        let got: Vec<_> = dec.landmarks.iter().map(|d| (d.name, d.row)).collect();
        assert_eq!(
            got,
            vec![
                (LandmarkName::Pg, 25),
                (LandmarkName::Gn, 33),
                (LandmarkName::Me, 40)
            ]
        );
        assert_eq!(dec.absent, vec![LandmarkName::Id, LandmarkName::B]);
        assert!(dec.landmarks.iter().all(|d| d.voxel.is_none()));
    }

    #[test]
    fn zero_flags_is_an_error() {
        let seq = BoundarySequence {
            profile: vec![Some(5); ROWS],
            labels: vec![0; ROWS],
            crop: None,
        };
        assert!(matches!(decode_sequence(&seq), Err(Error::NoFlaggedRows)));
    }

    #[test]
    fn extraction_errors() {
        let (m, mut lm) = arc_phantom(&[10, 18, 25, 33, 40]);
        // Menton on an empty slice.
        let mut moved = LandmarkSet::default();
        moved
            .push(Landmark::new(LandmarkName::Me, [0, 20, 20]))
            .unwrap();
        assert!(matches!(
            extract_boundary_sequence(&m, &moved),
            Err(Error::EmptySlice(0))
        ));
        assert!(matches!(
            extract_boundary_sequence(&m, &LandmarkSet::default()),
            Err(Error::MissingLandmark(_))
        ));
        // Two landmarks on one source row collapse.
        let me = lm.voxel(LandmarkName::Me).unwrap();
        let mut entries: Vec<Landmark> = lm.entries().to_vec();
        for e in entries.iter_mut() {
            if e.name == LandmarkName::Gn {
                e.voxel = me;
            }
        }
        lm = LandmarkSet::new(entries).unwrap();
        assert!(matches!(
            extract_boundary_sequence(&m, &lm),
            Err(Error::RowCollision { .. })
        ));
    }

    fn training_set() -> Vec<BoundarySequence> {
        (0..6)
            .map(|i| {
                let rows = [8 + i, 16 + i, 26, 34 - i, 44 + (i % 3)];
                let profile = (0..ROWS)
                    .map(|r| {
                        if !(3..=60).contains(&r) {
                            None
                        } else {
                            Some((20.0 + 8.0 * ((r as f64) / 10.0 + i as f64 * 0.3).sin()) as u8)
                        }
                    })
                    .collect();
                BoundarySequence {
                    profile,
                    labels: encode_labels(&rows).unwrap(),
                    crop: None,
                }
            })
            .collect()
    }

    #[test]
    fn zero_cap_returns_mean_shape() {
        let training = training_set();
        let model = ShapeModel::fit(&training).unwrap();
        let mean = model.reconstruct(&DVector::zeros(model.sigmas.len()), &model.empty_rows);
        let out = pca_augment(&training, 7, 0.0, 3).unwrap();
        assert!(out.iter().all(|s| *s == mean));
    }

    #[test]
    fn requested_count_and_invariants() {
        let out = pca_augment(&training_set(), 40, 2.0, 11).unwrap();
        assert_eq!(out.len(), 40);
        for s in &out {
            s.validate().unwrap();
            assert!(s.profile.iter().flatten().all(|&c| (c as usize) < ROWS));
        }
        assert_eq!(out, pca_augment(&training_set(), 40, 2.0, 11).unwrap());
    }

    #[test]
    fn full_coefficients_reconstruct_training_samples() {
        let training = training_set();
        let model = ShapeModel::fit(&training).unwrap();
        for s in &training {
            let coeffs = model.project(s).unwrap();
            let empty: Vec<bool> = s.profile.iter().map(|p| p.is_none()).collect();
            let r = model.reconstruct(&coeffs, &empty);
            assert_eq!(r.labels, s.labels);
            for (a, b) in r.profile.iter().zip(&s.profile) {
                match (a, b) {
                    (Some(a), Some(b)) => assert!(a.abs_diff(*b) <= 1),
                    (None, None) => {}
                    _ => panic!("emptiness differs"),
                }
            }
        }
    }

    #[test]
    fn degenerate_training_jitters() {
        let one = training_set().remove(0);
        let out = pca_augment(&[one.clone(), one.clone(), one.clone()], 5, 1.0, 0).unwrap();
        assert_eq!(out.len(), 5);
        for s in &out {
            assert_eq!(s.labels, one.labels);
            for (a, b) in s.profile.iter().zip(&one.profile) {
                match (a, b) {
                    (Some(a), Some(b)) => assert!(a.abs_diff(*b) <= 1),
                    (None, None) => {}
                    _ => panic!("emptiness differs"),
                }
            }
        }
    }

    #[test]
    fn too_few_training_sequences() {
        let t = training_set();
        assert!(pca_augment(&t[..2], 1, 1.0, 0).is_err());
        assert!(pca_augment(&t, 0, 1.0, 0).is_err());
    }

    #[test]
    fn sampled_coefficients_are_centered() {
        let model = ShapeModel::fit(&training_set()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 2000;
        let mut sum = DVector::zeros(model.sigmas.len());
        for _ in 0..n {
            sum += model.sample_coefficients(&mut rng, 2.0);
        }
        let mean = sum / n as f64;
        for (m, s) in mean.iter().zip(&model.sigmas) {
            assert!(m.abs() <= 0.1 * s);
        }
    }

    proptest! {
        #[test]
        fn label_encoding_roundtrips(rows in proptest::collection::btree_set(0usize..ROWS, 1..=5)) {
            let rows: Vec<usize> = rows.into_iter().collect();
            let labels = encode_labels(&rows).unwrap();
            let seq = BoundarySequence { profile: vec![Some(3); ROWS], labels: labels.clone(), crop: None };
            prop_assert_eq!(seq.flagged_rows(), rows.clone());
            let dec = decode_sequence(&seq).unwrap();
            let back: Vec<usize> = dec.landmarks.iter().map(|d| d.row).collect();
            prop_assert_eq!(&back, &rows);
            prop_assert_eq!(encode_labels(&back).unwrap(), labels);
            // Rows increase top to bottom while names follow Id, B, Pg, Gn, Me.
            let close = |n| LandmarkName::CLOSE.iter().position(|&c| c == n).unwrap();
            for w in dec.landmarks.windows(2) {
                prop_assert!(w[0].row < w[1].row);
                prop_assert!(close(w[0].name) < close(w[1].name));
            }
            prop_assert_eq!(dec.landmarks.last().unwrap().name, LandmarkName::Me);
        }
    }
}
