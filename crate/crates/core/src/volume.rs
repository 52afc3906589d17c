//! Voxel grids, coordinate conventions and mask algebra.
//!
//! Volumes are stored with x varying fastest: the flat index of `(i, j, k)` is
//! `i + nx * (j + ny * k)`. Axes follow the LPS patient convention: x grows
//! toward the patient's left, y toward posterior, z toward superior. A
//! sagittal slice `s` is the plane `x = s`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer voxel coordinate `(i, j, k)`.
pub type Coord = [usize; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 3]", try_from = "[usize; 3]")]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidVolume(format!(
                "dims must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        nx.checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| Error::InvalidVolume("voxel count overflows usize".into()))?;
        Ok(Dims { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Self {
        Dims {
            nx: n,
            ny: n,
            nz: n,
        }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: [i64; 3]) -> bool {
        c[0] >= 0
            && c[1] >= 0
            && c[2] >= 0
            && (c[0] as usize) < self.nx
            && (c[1] as usize) < self.ny
            && (c[2] as usize) < self.nz
    }

    /// Flat index of `c`, or a domain error when it lies outside.
    pub fn index(&self, c: Coord) -> Result<usize> {
        if c[0] < self.nx && c[1] < self.ny && c[2] < self.nz {
            Ok(self.index_unchecked(c))
        } else {
            Err(Error::OutOfDomain {
                coord: c.map(|v| v as i64),
                dims: *self,
            })
        }
    }

    #[inline]
    pub fn index_unchecked(&self, c: Coord) -> usize {
        c[0] + self.nx * (c[1] + self.ny * c[2])
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> Coord {
        let i = idx % self.nx;
        let rest = idx / self.nx;
        [i, rest % self.ny, rest / self.ny]
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

impl From<Dims> for [usize; 3] {
    fn from(d: Dims) -> Self {
        d.as_array()
    }
}

impl TryFrom<[usize; 3]> for Dims {
    type Error = Error;
    fn try_from(v: [usize; 3]) -> Result<Self> {
        Dims::new(v[0], v[1], v[2])
    }
}

/// Voxel size in millimeters along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct Spacing([f64; 3]);

impl Spacing {
    pub const UNIT: Spacing = Spacing([1.0; 3]);

    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        for (axis, s) in ["x", "y", "z"].iter().zip([sx, sy, sz]) {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidVolume(format!(
                    "spacing along {axis} must be positive and finite, got {s}"
                )));
            }
        }
        Ok(Spacing([sx, sy, sz]))
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    #[inline]
    pub fn axis(&self, a: usize) -> f64 {
        self.0[a]
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing::UNIT
    }
}

impl From<Spacing> for [f64; 3] {
    fn from(s: Spacing) -> Self {
        s.0
    }
}

impl TryFrom<[f64; 3]> for Spacing {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        Spacing::new(v[0], v[1], v[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    I32,
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::I32 | DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::I32 => "i32",
            DType::F32 => "f32",
            DType::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<DType> {
        match s {
            "u8" => Some(DType::U8),
            "i32" => Some(DType::I32),
            "f32" => Some(DType::F32),
            "f64" => Some(DType::F64),
            _ => None,
        }
    }
}

/// Element types a [`Volume`] can hold.
pub trait Scalar: Copy + PartialEq + Send + Sync + fmt::Debug + 'static {
    const DTYPE: DType;
    fn write_le(&self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty, $d:expr) => {
        impl Scalar for $t {
            const DTYPE: DType = $d;
            fn write_le(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn read_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("element width"))
            }
        }
    };
}

impl_scalar!(u8, DType::U8);
impl_scalar!(i32, DType::I32);
impl_scalar!(f32, DType::F32);
impl_scalar!(f64, DType::F64);

/// A 3D scalar grid with spacing metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    dims: Dims,
    spacing: Spacing,
    data: Vec<T>,
}

impl<T: Scalar> Volume<T> {
    pub fn from_vec(dims: Dims, spacing: Spacing, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {dims} ({} voxels)",
                data.len(),
                dims.len()
            )));
        }
        Ok(Volume {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: Dims, spacing: Spacing, value: T) -> Self {
        Volume {
            dims,
            spacing,
            data: vec![value; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, c: Coord) -> Result<T> {
        Ok(self.data[self.dims.index(c)?])
    }

    #[inline]
    pub fn at(&self, c: Coord) -> T {
        self.data[self.dims.index_unchecked(c)]
    }

    pub fn set(&mut self, c: Coord, value: T) -> Result<()> {
        let idx = self.dims.index(c)?;
        self.data[idx] = value;
        Ok(())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            spacing: self.spacing,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_grid<U>(&self, other: &Volume<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        if self.spacing != other.spacing {
            return Err(Error::InvalidVolume(format!(
                "spacing mismatch: {:?} vs {:?}",
                self.spacing.as_array(),
                other.spacing.as_array()
            )));
        }
        Ok(())
    }
}

/// A u8 volume restricted to {0, 1}.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask(Volume<u8>);

impl BinaryMask {
    pub fn new(volume: Volume<u8>) -> Result<Self> {
        if let Some((index, &value)) = volume.data.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidMask {
                index,
                value: value.to_string(),
            });
        }
        Ok(BinaryMask(volume))
    }

    pub fn empty(dims: Dims, spacing: Spacing) -> Self {
        BinaryMask(Volume::filled(dims, spacing, 0))
    }

    pub fn from_fn(dims: Dims, spacing: Spacing, f: impl Fn(Coord) -> bool) -> Self {
        let data = (0..dims.len()).map(|i| f(dims.coord(i)) as u8).collect();
        BinaryMask(Volume {
            dims,
            spacing,
            data,
        })
    }

    pub fn from_bools(dims: Dims, spacing: Spacing, values: &[bool]) -> Result<Self> {
        Volume::from_vec(dims, spacing, values.iter().map(|&b| b as u8).collect()).map(BinaryMask)
    }

    pub fn volume(&self) -> &Volume<u8> {
        &self.0
    }

    pub fn into_volume(self) -> Volume<u8> {
        self.0
    }

    pub fn dims(&self) -> Dims {
        self.0.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.0.spacing
    }

    pub fn data(&self) -> &[u8] {
        &self.0.data
    }

    #[inline]
    pub fn is_fg(&self, idx: usize) -> bool {
        self.0.data[idx] != 0
    }

    #[inline]
    pub fn contains(&self, c: Coord) -> bool {
        self.0.at(c) != 0
    }

    pub fn set(&mut self, c: Coord, fg: bool) -> Result<()> {
        self.0.set(c, fg as u8)
    }

    pub fn count(&self) -> usize {
        self.0.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i)
    }

    /// Foreground voxels with at least one background (or out-of-domain)
    /// 6-neighbor.
    pub fn is_boundary(&self, c: Coord) -> bool {
        if !self.contains(c) {
            return false;
        }
        let dims = self.dims();
        Connectivity::Six
            .offsets()
            .iter()
            .any(|o| match offset(dims, c, *o) {
                Some(n) => !self.contains(n),
                None => true,
            })
    }

    /// Axis-aligned bounding box of the foreground as `(min, max)` inclusive.
    pub fn bounding_box(&self) -> Option<(Coord, Coord)> {
        let dims = self.dims();
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for idx in self.foreground() {
            let c = dims.coord(idx);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
            any = true;
        }
        any.then_some((lo, hi))
    }
}

/// Flat index of `v`; see the module docs for the layout.
pub fn voxel_index(v: Coord, dims: Dims) -> Result<usize> {
    dims.index(v)
}

pub fn unflatten(idx: usize, dims: Dims) -> Result<Coord> {
    if idx >= dims.len() {
        return Err(Error::OutOfDomain {
            coord: [idx as i64, 0, 0],
            dims,
        });
    }
    Ok(dims.coord(idx))
}

pub fn mask_complement(m: &BinaryMask) -> BinaryMask {
    BinaryMask(m.0.map(|v| 1 - v))
}

/// Center-to-center distance in millimeters.
pub fn euclidean_dist(v: Coord, q: Coord, spacing: Spacing) -> f64 {
    let mut sum = 0.0;
    for a in 0..3 {
        let d = (v[a] as f64 - q[a] as f64) * spacing.axis(a);
        sum += d * d;
    }
    sum.sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "6")]
    Six,
    #[default]
    #[serde(rename = "26")]
    TwentySix,
}

const FACE_OFFSETS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

const ALL_OFFSETS: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::invalid(
                "connectivity",
                format!("must be 6 or 26, got {n}"),
            )),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }

    pub fn offsets(self) -> &'static [[i64; 3]] {
        match self {
            Connectivity::Six => &FACE_OFFSETS,
            Connectivity::TwentySix => &ALL_OFFSETS,
        }
    }
}

/// `c + o` when it stays inside `dims`.
#[inline]
pub fn offset(dims: Dims, c: Coord, o: [i64; 3]) -> Option<Coord> {
    let n = [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]];
    dims.contains(n)
        .then(|| [n[0] as usize, n[1] as usize, n[2] as usize])
}
