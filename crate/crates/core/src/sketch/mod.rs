//! Face sketch model: the five components, their crop windows, and the
//! decomposition of a sketch into per-component images.

mod decompose;
mod layout;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub use decompose::{compose_preview, decompose, ComponentCrop, FaceSketchDecomposition};
pub use layout::{ComponentLayout, Window};
pub use synthetic::{generate_synthetic_face, FaceStyle, SyntheticFace};

/// The five face components. Declaration order is both the component index
/// and the merge priority: earlier kinds win wherever windows overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComponentKind {
    LeftEye,
    RightEye,
    Nose,
    Mouth,
    Remainder,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 5] = [
        ComponentKind::LeftEye,
        ComponentKind::RightEye,
        ComponentKind::Nose,
        ComponentKind::Mouth,
        ComponentKind::Remainder,
    ];

    /// The four kinds that own a crop window.
    pub const FACIAL: [ComponentKind; 4] = [
        ComponentKind::LeftEye,
        ComponentKind::RightEye,
        ComponentKind::Nose,
        ComponentKind::Mouth,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentKind::LeftEye => "left-eye",
            ComponentKind::RightEye => "right-eye",
            ComponentKind::Nose => "nose",
            ComponentKind::Mouth => "mouth",
            ComponentKind::Remainder => "remainder",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComponentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown component '{s}'")))
    }
}
