//! The nine-landmark mandible roster and landmark sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Coord, Dims};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandmarkName {
    Me,
    Gn,
    Pg,
    B,
    Id,
    CdL,
    CdR,
    CorL,
    CorR,
}

impl LandmarkName {
    /// Roster order; the position plus one is the annotation label id.
    pub const ROSTER: [LandmarkName; 9] = [
        LandmarkName::Me,
        LandmarkName::Gn,
        LandmarkName::Pg,
        LandmarkName::B,
        LandmarkName::Id,
        LandmarkName::CdL,
        LandmarkName::CdR,
        LandmarkName::CorL,
        LandmarkName::CorR,
    ];

    /// Landmarks far enough apart to be decoded from a fused geodesic map.
    pub const SPARSE: [LandmarkName; 5] = [
        LandmarkName::Me,
        LandmarkName::CorL,
        LandmarkName::CorR,
        LandmarkName::CdL,
        LandmarkName::CdR,
    ];

    /// Mid-sagittal landmarks in top-to-bottom anatomical order.
    pub const CLOSE: [LandmarkName; 5] = [
        LandmarkName::Id,
        LandmarkName::B,
        LandmarkName::Pg,
        LandmarkName::Gn,
        LandmarkName::Me,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkName::Me => "Me",
            LandmarkName::Gn => "Gn",
            LandmarkName::Pg => "Pg",
            LandmarkName::B => "B",
            LandmarkName::Id => "Id",
            LandmarkName::CdL => "CdL",
            LandmarkName::CdR => "CdR",
            LandmarkName::CorL => "CorL",
            LandmarkName::CorR => "CorR",
        }
    }

    pub fn default_id(self) -> u8 {
        Self::ROSTER.iter().position(|&n| n == self).unwrap() as u8 + 1
    }

    pub fn from_id(id: i64) -> Option<LandmarkName> {
        usize::try_from(id)
            .ok()
            .and_then(|i| i.checked_sub(1))
            .and_then(|i| Self::ROSTER.get(i).copied())
    }

    pub fn is_sparse(self) -> bool {
        Self::SPARSE.contains(&self)
    }

    fn suggest(name: &str) -> Option<&'static str> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let found = match key.as_str() {
            "menton" | "me" => LandmarkName::Me,
            "gnathion" | "gn" => LandmarkName::Gn,
            "pogonion" | "pg" => LandmarkName::Pg,
            "bpoint" | "b" | "supramentale" => LandmarkName::B,
            "infradentale" | "id" => LandmarkName::Id,
            "condylarleft" | "condylionleft" | "leftcondyle" | "cdl" => LandmarkName::CdL,
            "condylarright" | "condylionright" | "rightcondyle" | "cdr" => LandmarkName::CdR,
            "coronoidleft" | "leftcoronoid" | "corl" => LandmarkName::CorL,
            "coronoidright" | "rightcoronoid" | "corr" => LandmarkName::CorR,
            _ => return None,
        };
        Some(found.as_str())
    }
}

impl fmt::Display for LandmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LandmarkName {
    type Err = Error;

    /// Accepts canonical abbreviations only; near misses get a suggestion.
    fn from_str(s: &str) -> Result<Self> {
        Self::ROSTER
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownLandmark {
                name: s.to_string(),
                suggestion: Self::suggest(s),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u8,
    pub name: LandmarkName,
    pub voxel: Coord,
    pub present: bool,
}

impl Landmark {
    pub fn new(name: LandmarkName, voxel: Coord) -> Self {
        Landmark {
            id: name.default_id(),
            name,
            voxel,
            present: true,
        }
    }

    pub fn absent(name: LandmarkName) -> Self {
        Landmark {
            id: name.default_id(),
            name,
            voxel: [0; 3],
            present: false,
        }
    }
}

/// Ordered landmarks with unique ids and names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LandmarkSet {
    entries: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn new(entries: Vec<Landmark>) -> Result<Self> {
        let mut set = LandmarkSet::default();
        for e in entries {
            set.push(e)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, lm: Landmark) -> Result<()> {
        if self.entries.iter().any(|e| e.id == lm.id) {
            return Err(Error::DuplicateLandmark {
                field: "id",
                value: lm.id.to_string(),
            });
        }
        if self.entries.iter().any(|e| e.name == lm.name) {
            return Err(Error::DuplicateLandmark {
                field: "name",
                value: lm.name.to_string(),
            });
        }
        self.entries.push(lm);
        Ok(())
    }

    pub fn entries(&self) -> &[Landmark] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: LandmarkName) -> Option<&Landmark> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Voxel of `name` if it is listed and present.
    pub fn voxel(&self, name: LandmarkName) -> Option<Coord> {
        self.get(name).filter(|l| l.present).map(|l| l.voxel)
    }

    pub fn present(&self) -> impl Iterator<Item = &Landmark> {
        self.entries.iter().filter(|e| e.present)
    }

    pub fn validate(&self, dims: Dims) -> Result<()> {
        for lm in self.present() {
            dims.index(lm.voxel)?;
        }
        Ok(())
    }

    /// Entries re-ordered by roster position.
    pub fn sorted(&self) -> LandmarkSet {
        let mut entries = self.entries.clone();
        entries.sort_by_key(|e| e.name);
        LandmarkSet { entries }
    }
}

impl<'a> IntoIterator for &'a LandmarkSet {
    type Item = &'a Landmark;
    type IntoIter = std::slice::Iter<'a, Landmark>;
    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}
