//! File formats: raw volumes with a JSON sidecar header, landmark JSON,
//! labelled landmark volumes, boundary sequences and evaluation reports.
//!
//! A volume at `path` stores its little-endian, x-fastest payload in `path`
//! and its header in `path.json`:
//!
//! ```json
//! {"magic": "GVOL1", "dims": [nx, ny, nz], "spacing": [sx, sy, sz],
//!  "dtype": "u8", "byte_order": "little", "layout": "x-fastest"}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::landmark::{Landmark, LandmarkName, LandmarkSet};
use crate::metrics::CaseReport;
use crate::postprocess::label_components;
use crate::seqlmk::BoundarySequence;
use crate::volume::{BinaryMask, Connectivity, Coord, DType, Dims, Scalar, Spacing, Volume};

pub const MAGIC: &str = "GVOL1";
pub const BYTE_ORDER: &str = "little";
pub const LAYOUT: &str = "x-fastest";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeHeader {
    pub dims: Dims,
    pub spacing: Spacing,
    pub dtype: DType,
}

impl VolumeHeader {
    pub fn payload_len(&self) -> u64 {
        self.dims.len() as u64 * self.dtype.size() as u64
    }

    pub fn to_json(&self) -> String {
        let doc = json!({
            "magic": MAGIC,
            "dims": self.dims.as_array(),
            "spacing": self.spacing.as_array(),
            "dtype": self.dtype.name(),
            "byte_order": BYTE_ORDER,
            "layout": LAYOUT,
        });
        serde_json::to_string_pretty(&doc).expect("header serializes")
    }

    /// Parses and validates a header document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Json {
            context: "volume header".into(),
            source: e,
        })?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::header("header", "must be a JSON object"))?;
        let field = |name: &str| obj.get(name).ok_or_else(|| Error::header(name, "missing"));
        let string = |name: &str| -> Result<&str> {
            field(name)?
                .as_str()
                .ok_or_else(|| Error::header(name, "must be a string"))
        };
        if string("magic")? != MAGIC {
            return Err(Error::header("magic", format!("expected {MAGIC:?}")));
        }
        if string("byte_order")? != BYTE_ORDER {
            return Err(Error::header(
                "byte_order",
                format!("only {BYTE_ORDER:?} is supported"),
            ));
        }
        if string("layout")? != LAYOUT {
            return Err(Error::header(
                "layout",
                format!("only {LAYOUT:?} is supported"),
            ));
        }
        let dtype_name = string("dtype")?;
        let dtype = DType::parse(dtype_name)
            .ok_or_else(|| Error::header("dtype", format!("unknown dtype {dtype_name:?}")))?;

        let triple = |name: &str| -> Result<Vec<Value>> {
            match field(name)?.as_array() {
                Some(a) if a.len() == 3 => Ok(a.clone()),
                _ => Err(Error::header(name, "must be an array of 3 numbers")),
            }
        };
        let mut d = [0usize; 3];
        for (slot, v) in d.iter_mut().zip(triple("dims")?) {
            *slot = v
                .as_u64()
                .and_then(|n| usize::try_from(n).ok())
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::header("dims", "entries must be positive integers"))?;
        }
        let dims = Dims::new(d[0], d[1], d[2]).map_err(|e| Error::header("dims", e.to_string()))?;
        dims.len()
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::header("dims", "payload size overflows"))?;
        let mut s = [0f64; 3];
        for (slot, v) in s.iter_mut().zip(triple("spacing")?) {
            *slot = v
                .as_f64()
                .ok_or_else(|| Error::header("spacing", "entries must be numbers"))?;
        }
        let spacing =
            Spacing::new(s[0], s[1], s[2]).map_err(|e| Error::header("spacing", e.to_string()))?;
        Ok(VolumeHeader {
            dims,
            spacing,
            dtype,
        })
    }
}

/// A volume of any supported element type.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyVolume {
    U8(Volume<u8>),
    I32(Volume<i32>),
    F32(Volume<f32>),
    F64(Volume<f64>),
}

impl AnyVolume {
    pub fn dtype(&self) -> DType {
        match self {
            AnyVolume::U8(_) => DType::U8,
            AnyVolume::I32(_) => DType::I32,
            AnyVolume::F32(_) => DType::F32,
            AnyVolume::F64(_) => DType::F64,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            AnyVolume::U8(v) => v.dims(),
            AnyVolume::I32(v) => v.dims(),
            AnyVolume::F32(v) => v.dims(),
            AnyVolume::F64(v) => v.dims(),
        }
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Volume<f64> {
        match self {
            AnyVolume::U8(v) => v.map(f64::from),
            AnyVolume::I32(v) => v.map(f64::from),
            AnyVolume::F32(v) => v.map(f64::from),
            AnyVolume::F64(v) => v.clone(),
        }
    }

    /// Integer labels in flat order; floating volumes must hold whole
    /// numbers.
    pub fn labels(&self) -> Result<Vec<i64>> {
        fn whole(x: f64) -> Result<i64> {
            if x.fract() == 0.0 && x.abs() < 1e15 {
                Ok(x as i64)
            } else {
                Err(Error::InvalidVolume(format!(
                    "label value {x} is not an integer"
                )))
            }
        }
        match self {
            AnyVolume::U8(v) => Ok(v.data().iter().map(|&x| x as i64).collect()),
            AnyVolume::I32(v) => Ok(v.data().iter().map(|&x| x as i64).collect()),
            AnyVolume::F32(v) => v.data().iter().map(|&x| whole(x as f64)).collect(),
            AnyVolume::F64(v) => v.data().iter().map(|&x| whole(x)).collect(),
        }
    }
}

macro_rules! any_from {
    ($t:ty, $var:ident) => {
        impl From<Volume<$t>> for AnyVolume {
            fn from(v: Volume<$t>) -> Self {
                AnyVolume::$var(v)
            }
        }
    };
}
any_from!(u8, U8);
any_from!(i32, I32);
any_from!(f32, F32);
any_from!(f64, F64);

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_payload<T: Scalar>(v: &Volume<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.data().len() * T::DTYPE.size());
    for x in v.data() {
        x.write_le(&mut out);
    }
    out
}

fn decode_typed<T: Scalar>(h: &VolumeHeader, bytes: &[u8]) -> Volume<T> {
    let data = bytes
        .chunks_exact(T::DTYPE.size())
        .map(T::read_le)
        .collect();
    Volume::from_vec(h.dims, h.spacing, data).expect("length checked")
}

/// Decodes a payload against its header.
pub fn decode_payload(h: &VolumeHeader, bytes: &[u8]) -> Result<AnyVolume> {
    let expected = h.payload_len();
    if bytes.len() as u64 != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(match h.dtype {
        DType::U8 => AnyVolume::U8(decode_typed(h, bytes)),
        DType::I32 => AnyVolume::I32(decode_typed(h, bytes)),
        DType::F32 => AnyVolume::F32(decode_typed(h, bytes)),
        DType::F64 => AnyVolume::F64(decode_typed(h, bytes)),
    })
}

pub fn write_volume<T: Scalar>(v: &Volume<T>, path: &Path) -> Result<()> {
    let header = VolumeHeader {
        dims: v.dims(),
        spacing: v.spacing(),
        dtype: T::DTYPE,
    };
    fs::write(path, encode_payload(v)).map_err(|e| Error::io(path, e))?;
    let hp = header_path(path);
    fs::write(&hp, header.to_json()).map_err(|e| Error::io(hp, e))
}

pub fn write_any(v: &AnyVolume, path: &Path) -> Result<()> {
    match v {
        AnyVolume::U8(v) => write_volume(v, path),
        AnyVolume::I32(v) => write_volume(v, path),
        AnyVolume::F32(v) => write_volume(v, path),
        AnyVolume::F64(v) => write_volume(v, path),
    }
}

pub fn read_header(path: &Path) -> Result<VolumeHeader> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(hp, e))?;
    VolumeHeader::parse(&text)
}

pub fn read_volume(path: &Path) -> Result<AnyVolume> {
    let header = read_header(path)?;
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.len() != header.payload_len() {
        return Err(Error::LengthMismatch {
            expected: header.payload_len(),
            actual: meta.len(),
        });
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_payload(&header, &bytes)
}

/// Reads a u8 volume and validates it as a mask.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    match read_volume(path)? {
        AnyVolume::U8(v) => BinaryMask::new(v),
        other => Err(Error::header(
            "dtype",
            format!("a mask must be u8, found {}", other.dtype().name()),
        )),
    }
}

pub fn write_mask(m: &BinaryMask, path: &Path) -> Result<()> {
    write_volume(m.volume(), path)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkRecord {
    id: u8,
    name: String,
    voxel: [usize; 3],
    #[serde(default = "yes")]
    present: bool,
}

fn yes() -> bool {
    true
}

pub fn landmarks_to_json(set: &LandmarkSet) -> String {
    let records: Vec<LandmarkRecord> = set
        .entries()
        .iter()
        .map(|l| LandmarkRecord {
            id: l.id,
            name: l.name.to_string(),
            voxel: l.voxel,
            present: l.present,
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("landmarks serialize")
}

pub fn landmarks_from_json(text: &str) -> Result<LandmarkSet> {
    let records: Vec<LandmarkRecord> = serde_json::from_str(text).map_err(|e| Error::Json {
        context: "landmark list".into(),
        source: e,
    })?;
    let mut set = LandmarkSet::default();
    for r in records {
        set.push(Landmark {
            id: r.id,
            name: r.name.parse()?,
            voxel: r.voxel,
            present: r.present,
        })?;
    }
    Ok(set)
}

pub fn write_landmarks_json(set: &LandmarkSet, path: &Path) -> Result<()> {
    fs::write(path, landmarks_to_json(set)).map_err(|e| Error::io(path, e))
}

pub fn read_landmarks_json(path: &Path) -> Result<LandmarkSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    landmarks_from_json(&text)
}

/// Marks each present landmark with its id on the 3x3x3 neighborhood around
/// it (clipped at the border).
pub fn write_landmarks_labeled_volume(
    set: &LandmarkSet,
    dims: Dims,
    spacing: Spacing,
) -> Result<Volume<i32>> {
    set.validate(dims)?;
    let mut v = Volume::filled(dims, spacing, 0i32);
    for l in set.present() {
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let p = [
                        l.voxel[0] as i64 + dx,
                        l.voxel[1] as i64 + dy,
                        l.voxel[2] as i64 + dz,
                    ];
                    if dims.contains(p) {
                        v.set(p.map(|x| x as usize), l.id as i32)?;
                    }
                }
            }
        }
    }
    Ok(v)
}

/// Inverts the 3x3x3 annotation convention: each nonzero label becomes one
/// landmark at the labelled voxel nearest the cluster centroid (smallest
/// flat index on ties). Labels are roster ids.
pub fn read_landmarks_labeled_volume(v: &AnyVolume) -> Result<LandmarkSet> {
    let dims = v.dims();
    let labels = v.labels()?;
    let mut ids: Vec<i64> = Vec::new();
    for &x in &labels {
        if x < 0 {
            return Err(Error::invalid("labels", format!("negative label {x}")));
        }
        if x > 0 && !ids.contains(&x) {
            ids.push(x);
        }
    }
    ids.sort_unstable();
    let mut set = LandmarkSet::default();
    for id in ids {
        let name = LandmarkName::from_id(id).ok_or_else(|| {
            Error::invalid("labels", format!("label {id} is not a roster id (1..=9)"))
        })?;
        let (_, sizes) = label_components(dims, Connectivity::TwentySix, |i| labels[i] == id);
        if sizes.len() > 1 {
            return Err(Error::DisconnectedLabel {
                id,
                clusters: sizes.len(),
            });
        }
        let voxels: Vec<Coord> = (0..dims.len())
            .filter(|&i| labels[i] == id)
            .map(|i| dims.coord(i))
            .collect();
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut sum = [0f64; 3];
        for c in &voxels {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
                sum[a] += c[a] as f64;
            }
        }
        if (0..3).any(|a| hi[a] - lo[a] + 1 > 3) {
            log::warn!("label {id} spans more than a 3x3x3 box");
        }
        let centroid = sum.map(|s| s / voxels.len() as f64);
        let nearest = voxels
            .iter()
            .min_by(|a, b| {
                let d = |c: &Coord| {
                    (0..3)
                        .map(|i| (c[i] as f64 - centroid[i]).powi(2))
                        .sum::<f64>()
                };
                d(a).total_cmp(&d(b))
            })
            .copied()
            .expect("nonempty label");
        set.push(Landmark {
            id: id as u8,
            name,
            voxel: nearest,
            present: true,
        })?;
    }
    Ok(set)
}

pub fn sequence_to_json(seq: &BoundarySequence) -> String {
    serde_json::to_string_pretty(seq).expect("sequence serializes")
}

pub fn sequence_from_json(text: &str) -> Result<BoundarySequence> {
    let seq: BoundarySequence = serde_json::from_str(text).map_err(|e| Error::Json {
        context: "boundary sequence".into(),
        source: e,
    })?;
    seq.validate()?;
    Ok(seq)
}

pub fn sequences_from_json(text: &str) -> Result<Vec<BoundarySequence>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Json {
        context: "boundary sequences".into(),
        source: e,
    })?;
    let list = if v.is_array() {
        v
    } else {
        Value::Array(vec![v])
    };
    let seqs: Vec<BoundarySequence> = serde_json::from_value(list).map_err(|e| Error::Json {
        context: "boundary sequences".into(),
        source: e,
    })?;
    for s in &seqs {
        s.validate()?;
    }
    Ok(seqs)
}

fn report_columns() -> Vec<String> {
    let mut cols: Vec<String> = [
        "case_id",
        "dsc",
        "iou",
        "sensitivity",
        "specificity",
        "hd_mm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in LandmarkName::ROSTER {
        cols.push(format!("{n}_mm_error"));
        cols.push(format!("{n}_in_box"));
    }
    cols
}

pub fn report_csv_header() -> String {
    report_columns().join(",")
}

/// One header row plus one row per case; missing values are empty cells.
pub fn report_csv(cases: &[CaseReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(report_columns()).expect("in-memory write");
    for c in cases {
        let mut row = vec![c.case_id.clone()];
        match &c.seg {
            Some(s) => row.extend(
                [s.dsc, s.iou, s.sensitivity, s.specificity, s.hd_mm].map(|v| v.to_string()),
            ),
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        for n in LandmarkName::ROSTER {
            match c.landmarks.as_ref().and_then(|l| l.get(n)) {
                Some(e) => {
                    row.push(e.mm_error.to_string());
                    row.push(e.in_box.to_string());
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn report_json<T: Serialize>(report: &T) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}
