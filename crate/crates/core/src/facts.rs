//! The seven-fact taxonomy and its bitvector encoding.
//!
//! A [`FactSet`] is rendered as a 7-character `0`/`1` string in taxonomy
//! order, so `"1000000"` is the buggy class alone and `"0000001"` the
//! GitHub issue alone. The integer value of a set is the binary number that
//! string denotes; it is used for deterministic tie-breaking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of facts in the taxonomy.
pub const FACT_COUNT: usize = 7;

/// Number of distinct fact sets (`2^7`).
pub const FACT_SET_COUNT: usize = 1 << FACT_COUNT;

/// One bug-related fact. Bit positions are frozen: they are part of every
/// serialized bitvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactKind {
    BuggyClass,
    UsedMethodSignatures,
    FailingTest,
    ErrorInfo,
    RuntimeInfo,
    AngelicForest,
    GitHubIssue,
}

impl FactKind {
    /// All facts in taxonomy order.
    pub const ALL: [FactKind; FACT_COUNT] = [
        FactKind::BuggyClass,
        FactKind::UsedMethodSignatures,
        FactKind::FailingTest,
        FactKind::ErrorInfo,
        FactKind::RuntimeInfo,
        FactKind::AngelicForest,
        FactKind::GitHubIssue,
    ];

    /// Position in the bitvector string, 0 = leftmost character.
    pub const fn position(self) -> usize {
        match self {
            FactKind::BuggyClass => 0,
            FactKind::UsedMethodSignatures => 1,
            FactKind::FailingTest => 2,
            FactKind::ErrorInfo => 3,
            FactKind::RuntimeInfo => 4,
            FactKind::AngelicForest => 5,
            FactKind::GitHubIssue => 6,
        }
    }

    pub fn from_position(position: usize) -> Option<FactKind> {
        Self::ALL.get(position).copied()
    }

    /// Taxonomy code, e.g. `"2.1"` for error information.
    pub const fn code(self) -> &'static str {
        match self {
            FactKind::BuggyClass => "1.1",
            FactKind::UsedMethodSignatures => "1.2",
            FactKind::FailingTest => "1.3",
            FactKind::ErrorInfo => "2.1",
            FactKind::RuntimeInfo => "2.2",
            FactKind::AngelicForest => "2.3",
            FactKind::GitHubIssue => "3.1",
        }
    }

    pub fn from_code(code: &str) -> Option<FactKind> {
        Self::ALL.iter().copied().find(|k| k.code() == code)
    }

    /// Human-readable label used in reports.
    pub const fn label(self) -> &'static str {
        match self {
            FactKind::BuggyClass => "Buggy Class",
            FactKind::UsedMethodSignatures => "Used Method Signatures",
            FactKind::FailingTest => "Failing Test",
            FactKind::ErrorInfo => "Error Info",
            FactKind::RuntimeInfo => "Runtime Info",
            FactKind::AngelicForest => "Angelic Forest",
            FactKind::GitHubIssue => "GitHub Issue",
        }
    }

    /// Single-bit mask of this fact inside a [`FactSet`] value.
    const fn mask(self) -> u8 {
        1 << (FACT_COUNT - 1 - self.position())
    }
}

impl fmt::Display for FactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A subset of the seven facts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FactSet(u8);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FactSetError {
    #[error("bitvector must be exactly 7 characters of '0'/'1', got {0:?}")]
    Malformed(String),
    #[error("fact set value {0} is out of range 0..128")]
    OutOfRange(u32),
}

impl FactSet {
    pub const EMPTY: FactSet = FactSet(0);
    pub const FULL: FactSet = FactSet((FACT_SET_COUNT - 1) as u8);

    pub fn from_value(value: u32) -> Result<FactSet, FactSetError> {
        if value as usize >= FACT_SET_COUNT {
            return Err(FactSetError::OutOfRange(value));
        }
        Ok(FactSet(value as u8))
    }

    /// Integer value of the bitvector (`"0000101"` is 5).
    pub const fn value(self) -> u8 {
        self.0
    }

    pub fn from_kinds<I: IntoIterator<Item = FactKind>>(kinds: I) -> FactSet {
        kinds.into_iter().fold(FactSet::EMPTY, |s, k| s.with(k))
    }

    /// All 128 sets in ascending value order.
    pub fn all() -> impl Iterator<Item = FactSet> {
        (0..FACT_SET_COUNT as u8).map(FactSet)
    }

    pub const fn contains(self, kind: FactKind) -> bool {
        self.0 & kind.mask() != 0
    }

    #[must_use]
    pub const fn with(self, kind: FactKind) -> FactSet {
        FactSet(self.0 | kind.mask())
    }

    #[must_use]
    pub const fn without(self, kind: FactKind) -> FactSet {
        FactSet(self.0 & !kind.mask())
    }

    #[must_use]
    pub const fn intersect(self, other: FactSet) -> FactSet {
        FactSet(self.0 & other.0)
    }

    #[must_use]
    pub const fn union(self, other: FactSet) -> FactSet {
        FactSet(self.0 | other.0)
    }

    pub const fn is_subset_of(self, other: FactSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Facts in the set, taxonomy order.
    pub fn kinds(self) -> impl Iterator<Item = FactKind> {
        FactKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }
}

impl fmt::Display for FactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for kind in FactKind::ALL {
            f.write_str(if self.contains(kind) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FactSet {
    type Err = FactSetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != FACT_COUNT {
            return Err(FactSetError::Malformed(s.to_string()));
        }
        let mut set = FactSet::EMPTY;
        for (position, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => set = set.with(FactKind::ALL[position]),
                _ => return Err(FactSetError::Malformed(s.to_string())),
            }
        }
        Ok(set)
    }
}

impl Serialize for FactSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FactSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
