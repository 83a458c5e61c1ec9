use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Knowledge domain handled by one agent branch. The derived order is the
/// order in which the supervisor lays out sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Preclinical,
    Clinical,
    Strategic,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Preclinical, Domain::Clinical, Domain::Strategic];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Preclinical => "preclinical",
            Domain::Clinical => "clinical",
            Domain::Strategic => "strategic",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        match s.trim().to_ascii_lowercase().as_str() {
            "preclinical" | "pre-clinical" => Some(Domain::Preclinical),
            "clinical" => Some(Domain::Clinical),
            "strategic" => Some(Domain::Strategic),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StudyStage {
    Preclinical,
    Clinical,
    Strategic,
    #[default]
    Unknown,
}

impl StudyStage {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyStage::Preclinical => "preclinical",
            StudyStage::Clinical => "clinical",
            StudyStage::Strategic => "strategic",
            StudyStage::Unknown => "unknown",
        }
    }

    pub fn domain(self) -> Option<Domain> {
        match self {
            StudyStage::Preclinical => Some(Domain::Preclinical),
            StudyStage::Clinical => Some(Domain::Clinical),
            StudyStage::Strategic => Some(Domain::Strategic),
            StudyStage::Unknown => None,
        }
    }
}

/// Internal unique identifier of a molecule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MoleculeId(pub String);

impl MoleculeId {
    pub fn new(id: impl Into<String>) -> Self {
        MoleculeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MoleculeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MoleculeId {
    fn from(s: &str) -> Self {
        MoleculeId(s.into())
    }
}
