//! Segmentation overlap scores, Hausdorff distance and landmark errors.

use serde::{Deserialize, Serialize};

use crate::edt::squared_transform;
use crate::error::{Error, Result};
use crate::landmark::{LandmarkName, LandmarkSet};
use crate::volume::{BinaryMask, Spacing, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub dsc: f64,
    pub iou: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// +inf when exactly one mask is empty.
    pub hd_mm: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        pred.volume().same_grid(gt.volume())?;
        let mut c = Confusion::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            match (p != 0, g != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }
}

/// `num / den`, with 0/0 read as perfect agreement.
fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn seg_scores(pred: &BinaryMask, gt: &BinaryMask) -> Result<SegScores> {
    seg_scores_at(pred, gt, 100.0)
}

/// Scores with the Hausdorff distance taken at `percentile` (100 is the
/// maximum).
pub fn seg_scores_at(pred: &BinaryMask, gt: &BinaryMask, percentile: f64) -> Result<SegScores> {
    let c = Confusion::of(pred, gt)?;
    if c.tp + c.fp + c.fn_ == 0 {
        log::warn!("both masks are empty; overlap scores are defined as 1");
    }
    Ok(SegScores {
        dsc: rate(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        iou: rate(c.tp, c.tp + c.fp + c.fn_),
        sensitivity: rate(c.tp, c.tp + c.fn_),
        specificity: rate(c.tn, c.tn + c.fp),
        hd_mm: hausdorff_percentile(pred, gt, percentile)?,
    })
}

/// Millimeter distance from every voxel to the nearest boundary voxel of `m`.
fn distance_to_boundary(m: &BinaryMask) -> Volume<f64> {
    let dims = m.dims();
    let seed: Vec<f64> = (0..dims.len())
        .map(|i| {
            if m.is_fg(i) && m.is_boundary(dims.coord(i)) {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    squared_transform(Volume::from_vec(dims, m.spacing(), seed).expect("same grid")).map(f64::sqrt)
}

fn boundary_indices(m: &BinaryMask) -> Vec<usize> {
    let dims = m.dims();
    m.foreground()
        .filter(|&i| m.is_boundary(dims.coord(i)))
        .collect()
}

/// Nearest-rank percentile of `values` (sorted in place).
fn percentile_of(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Symmetric boundary Hausdorff distance in mm.
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    hausdorff_percentile(a, b, 100.0)
}

pub fn hausdorff_percentile(a: &BinaryMask, b: &BinaryMask, percentile: f64) -> Result<f64> {
    a.volume().same_grid(b.volume())?;
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::invalid(
            "percentile",
            format!("must be in (0, 100], got {percentile}"),
        ));
    }
    let (ba, bb) = (boundary_indices(a), boundary_indices(b));
    match (ba.is_empty(), bb.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => {
            log::warn!("one mask is empty; Hausdorff distance is infinite");
            return Ok(f64::INFINITY);
        }
        _ => {}
    }
    let directed = |from: &[usize], to: &BinaryMask| {
        let d = distance_to_boundary(to);
        let mut v: Vec<f64> = from.iter().map(|&i| d.data()[i]).collect();
        percentile_of(&mut v, percentile)
    };
    Ok(directed(&ba, b).max(directed(&bb, a)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkError {
    pub name: LandmarkName,
    /// Prediction minus ground truth, in voxels.
    pub delta: [i64; 3],
    pub pixel_error: f64,
    pub mm_error: f64,
    /// Largest per-axis offset in voxels.
    pub max_axis_error: u64,
    pub in_box: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LandmarkErrors {
    pub entries: Vec<LandmarkError>,
    /// Predicted present but absent in the ground truth.
    pub false_positives: Vec<LandmarkName>,
    /// Present in the ground truth but not predicted.
    pub false_negatives: Vec<LandmarkName>,
}

impl LandmarkErrors {
    pub fn get(&self, name: LandmarkName) -> Option<&LandmarkError> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn mm_errors(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mm_error).collect()
    }

    pub fn detection_rate(&self) -> f64 {
        rate(
            self.entries.iter().filter(|e| e.in_box).count(),
            self.entries.len(),
        )
    }
}

pub fn landmark_errors(
    pred: &LandmarkSet,
    gt: &LandmarkSet,
    spacing: Spacing,
) -> Result<LandmarkErrors> {
    let s = spacing.as_array();
    let mut out = LandmarkErrors::default();
    let mut common = 0;
    for name in LandmarkName::ROSTER {
        let (Some(p), Some(g)) = (pred.get(name), gt.get(name)) else {
            continue;
        };
        common += 1;
        match (p.present, g.present) {
            (true, true) => {
                let delta: [i64; 3] =
                    std::array::from_fn(|a| p.voxel[a] as i64 - g.voxel[a] as i64);
                let pixel = delta.iter().map(|&d| (d * d) as f64).sum::<f64>().sqrt();
                let mm = (0..3)
                    .map(|a| (delta[a] as f64 * s[a]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let max_axis = delta.iter().map(|d| d.unsigned_abs()).max().unwrap();
                out.entries.push(LandmarkError {
                    name,
                    delta,
                    pixel_error: pixel,
                    mm_error: mm,
                    max_axis_error: max_axis,
                    in_box: max_axis <= 1,
                });
            }
            (true, false) => out.false_positives.push(name),
            (false, true) => out.false_negatives.push(name),
            (false, false) => {}
        }
    }
    if common == 0 {
        return Err(Error::NoCommonLandmarks);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Lower middle for even counts.
    pub median: f64,
    pub count: usize,
}

impl Stat {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Stat {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: v[(v.len() - 1) / 2],
            count: v.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub seg: Option<SegScores>,
    pub landmarks: Option<LandmarkErrors>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSummary {
    pub name: LandmarkName,
    pub mm_error: Stat,
    pub pixel_error: Stat,
    pub detection_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub dsc: Option<Stat>,
    pub iou: Option<Stat>,
    pub sensitivity: Option<Stat>,
    pub specificity: Option<Stat>,
    pub hd_mm: Option<Stat>,
    pub landmarks: Vec<LandmarkSummary>,
}

pub fn aggregate(cases: &[CaseReport]) -> Summary {
    let seg: Vec<SegScores> = cases.iter().filter_map(|c| c.seg).collect();
    let field = |f: fn(&SegScores) -> f64| Stat::of(&seg.iter().map(f).collect::<Vec<_>>());
    let mut landmarks = Vec::new();
    for name in LandmarkName::ROSTER {
        let hits: Vec<&LandmarkError> = cases
            .iter()
            .filter_map(|c| c.landmarks.as_ref()?.get(name))
            .collect();
        let (Some(mm), Some(px)) = (
            Stat::of(&hits.iter().map(|e| e.mm_error).collect::<Vec<_>>()),
            Stat::of(&hits.iter().map(|e| e.pixel_error).collect::<Vec<_>>()),
        ) else {
            continue;
        };
        landmarks.push(LandmarkSummary {
            name,
            mm_error: mm,
            pixel_error: px,
            detection_rate: rate(hits.iter().filter(|e| e.in_box).count(), hits.len()),
        });
    }
    Summary {
        cases: cases.len(),
        dsc: field(|s| s.dsc),
        iou: field(|s| s.iou),
        sensitivity: field(|s| s.sensitivity),
        specificity: field(|s| s.specificity),
        hd_mm: field(|s| s.hd_mm),
        landmarks,
    }
}
