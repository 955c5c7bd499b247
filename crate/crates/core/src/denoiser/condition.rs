use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which embedding row conditions the denoiser.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    NonMakeup,
    Makeup,
    /// Index into the closed tag vocabulary.
    Tag(usize),
}

impl ConditionId {
    /// Row of the embedding table: the two domains first, then the tags.
    pub fn row(self) -> usize {
        match self {
            ConditionId::NonMakeup => 0,
            ConditionId::Makeup => 1,
            ConditionId::Tag(i) => 2 + i,
        }
    }
}

/// Closed tag vocabulary shared by the sprite generator and the model.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary(Vec<String>);

impl Vocabulary {
    pub fn new(tags: Vec<String>) -> Self {
        Self(tags)
    }

    pub fn tags(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.0.iter().position(|t| t == tag)
    }

    pub fn validate(&self, cond: ConditionId) -> Result<()> {
        match cond {
            ConditionId::Tag(i) if i >= self.len() => Err(Error::UnknownCondition {
                name: format!("tag #{i}"),
                vocabulary: self.listing(),
            }),
            _ => Ok(()),
        }
    }

    /// Resolves a tag or one of the reserved domain descriptors
    /// (`non_makeup`/`nomakeup`, `makeup`).
    pub fn resolve(&self, name: &str) -> Result<ConditionId> {
        match name {
            "non_makeup" | "nomakeup" => Ok(ConditionId::NonMakeup),
            "makeup" => Ok(ConditionId::Makeup),
            _ => self
                .index_of(name)
                .map(ConditionId::Tag)
                .ok_or_else(|| Error::UnknownCondition {
                    name: name.to_string(),
                    vocabulary: self.listing(),
                }),
        }
    }

    /// Parses the command-line form `nomakeup | makeup | tag:<name>`.
    pub fn parse_condition(&self, spec: &str) -> Result<ConditionId> {
        match spec.strip_prefix("tag:") {
            Some(tag) => self.index_of(tag).map(ConditionId::Tag).ok_or_else(|| {
                Error::UnknownCondition {
                    name: tag.to_string(),
                    vocabulary: self.listing(),
                }
            }),
            None => match spec {
                "nomakeup" | "non_makeup" => Ok(ConditionId::NonMakeup),
                "makeup" => Ok(ConditionId::Makeup),
                _ => Err(Error::UnknownCondition {
                    name: spec.to_string(),
                    vocabulary: self.listing(),
                }),
            },
        }
    }

    pub fn listing(&self) -> String {
        self.0.join(", ")
    }
}
