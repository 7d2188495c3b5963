//! Label identifiers, the label registry and source-class mappings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semantic label of a vertex or pixel. `-1` is background/other and is
/// never an optimization target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub i16);

impl LabelId {
    pub const BACKGROUND: LabelId = LabelId(-1);
    pub const SKIN: LabelId = LabelId(0);
    pub const HAIR: LabelId = LabelId(1);
    pub const SHOE: LabelId = LabelId(2);
    pub const UPPER: LabelId = LabelId(3);
    pub const LOWER: LabelId = LabelId(4);
    pub const OUTER: LabelId = LabelId(5);

    #[inline]
    pub fn is_background(self) -> bool {
        self.0 < 0
    }

    /// Column index into per-label tables, `None` for background.
    #[inline]
    pub fn index(self) -> Option<usize> {
        if self.0 < 0 {
            None
        } else {
            Some(self.0 as usize)
        }
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        LabelId(index as i16)
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub id: LabelId,
    pub name: String,
    pub color: [u8; 3],
}

/// Contiguous set of optimizable labels `0..n` plus the background entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRegistry {
    entries: Vec<LabelEntry>,
    #[serde(default = "default_background_color")]
    background_color: [u8; 3],
}

fn default_background_color() -> [u8; 3] {
    [255, 255, 255]
}

impl Default for LabelRegistry {
    fn default() -> Self {
        let entries = [
            ("skin", [255, 128, 0]),
            ("hair", [128, 0, 255]),
            ("shoe", [255, 255, 0]),
            ("upper", [0, 128, 255]),
            ("lower", [0, 200, 0]),
            ("outer", [255, 0, 64]),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, (name, color))| LabelEntry {
            id: LabelId::from_index(i),
            name: name.to_string(),
            color,
        })
        .collect();
        LabelRegistry {
            entries,
            background_color: default_background_color(),
        }
    }
}

impl LabelRegistry {
    /// Builds a registry, requiring ids to be exactly `0..entries.len()` in order.
    pub fn new(entries: Vec<LabelEntry>) -> Result<Self> {
        let registry = LabelRegistry {
            entries,
            background_color: default_background_color(),
        };
        registry.validate()?;
        Ok(registry)
    }

    pub fn with_background_color(mut self, color: [u8; 3]) -> Self {
        self.background_color = color;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyLabelSet);
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.id.index() != Some(i) {
                return Err(Error::Manifest(format!(
                    "label registry ids must be contiguous from 0; entry {i} has id {}",
                    e.id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn contains(&self, label: LabelId) -> bool {
        label.index().is_some_and(|i| i < self.entries.len())
    }

    /// Accepts registered labels and background.
    pub fn check(&self, label: LabelId) -> Result<()> {
        if label == LabelId::BACKGROUND || self.contains(label) {
            Ok(())
        } else {
            Err(Error::UnknownLabel(label.0 as i32))
        }
    }

    pub fn name(&self, label: LabelId) -> Option<&str> {
        label.index().and_then(|i| self.entries.get(i)).map(|e| e.name.as_str())
    }

    pub fn color(&self, label: LabelId) -> [u8; 3] {
        label
            .index()
            .and_then(|i| self.entries.get(i))
            .map(|e| e.color)
            .unwrap_or(self.background_color)
    }

    pub fn background_color(&self) -> [u8; 3] {
        self.background_color
    }
}

/// Maps class ids of an external parser onto registry labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassMap {
    map: BTreeMap<u32, LabelId>,
}

/// The 20 LIP classes in parser output order.
pub const LIP_CLASSES: [&str; 20] = [
    "background",
    "hat",
    "hair",
    "glove",
    "sunglasses",
    "upper-clothes",
    "dress",
    "coat",
    "socks",
    "pants",
    "jumpsuits",
    "scarf",
    "skirt",
    "face",
    "left-arm",
    "right-arm",
    "left-leg",
    "right-leg",
    "left-shoe",
    "right-shoe",
];

impl ClassMap {
    pub fn new(map: BTreeMap<u32, LabelId>) -> Self {
        ClassMap { map }
    }

    /// Identity mapping for ids `0..n_labels`, with 255 as background.
    pub fn identity(n_labels: usize) -> Self {
        let mut map: BTreeMap<u32, LabelId> = (0..n_labels as u32).map(|i| (i, LabelId(i as i16))).collect();
        map.insert(255, LabelId::BACKGROUND);
        ClassMap { map }
    }

    /// LIP (20 classes) onto the six clothing categories.
    pub fn lip() -> Self {
        use LabelId as L;
        let by_name = |name: &str| -> LabelId {
            match name {
                "background" => L::BACKGROUND,
                "face" | "glove" | "left-arm" | "right-arm" | "left-leg" | "right-leg" => L::SKIN,
                "hat" | "hair" | "sunglasses" => L::HAIR,
                "socks" | "left-shoe" | "right-shoe" => L::SHOE,
                "upper-clothes" | "dress" | "scarf" | "jumpsuits" => L::UPPER,
                "pants" | "skirt" => L::LOWER,
                "coat" => L::OUTER,
                other => unreachable!("unlisted LIP class {other}"),
            }
        };
        let map = LIP_CLASSES
            .iter()
            .enumerate()
            .map(|(i, name)| (i as u32, by_name(name)))
            .collect();
        ClassMap { map }
    }

    pub fn get(&self, class: u32) -> Result<LabelId> {
        self.map.get(&class).copied().ok_or(Error::UnmappedClass(class))
    }

    /// Reads a JSON object `{"<source class>": <label id>, ...}`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, i16> = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let mut map = BTreeMap::new();
        for (k, v) in raw {
            let class: u32 = k
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, format!("class key {k:?} is not an integer")))?;
            map.insert(class, LabelId(v));
        }
        Ok(ClassMap { map })
    }
}
