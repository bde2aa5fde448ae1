//! Site and link identifiers.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdError {
    #[error("site id must be non-empty")]
    EmptySite,
    #[error("site id `{0}` must not contain whitespace")]
    SiteWhitespace(String),
    #[error("link id must be non-empty")]
    EmptyLink,
    #[error("link id `{0}` must not contain whitespace")]
    LinkWhitespace(String),
}

/// Identifier of a site (hostname-like token). Lowercased on construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SiteId(String);

impl SiteId {
    pub fn new(value: impl AsRef<str>) -> Result<Self, IdError> {
        let value = value.as_ref();
        if value.is_empty() {
            return Err(IdError::EmptySite);
        }
        if value.chars().any(char::is_whitespace) {
            return Err(IdError::SiteWhitespace(value.to_string()));
        }
        Ok(SiteId(value.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for SiteId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        SiteId::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Identifier of a link within a site (path-like token). Case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct LinkId(String);

impl LinkId {
    pub fn new(value: impl AsRef<str>) -> Result<Self, IdError> {
        let value = value.as_ref();
        if value.is_empty() {
            return Err(IdError::EmptyLink);
        }
        if value.chars().any(char::is_whitespace) {
            return Err(IdError::LinkWhitespace(value.to_string()));
        }
        Ok(LinkId(value.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LinkId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        LinkId::new(raw).map_err(serde::de::Error::custom)
    }
}

/// A page addressed across sites: the unit ranked by the cross-site graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PageRef {
    pub site: SiteId,
    pub link: LinkId,
}

impl PageRef {
    pub fn new(site: SiteId, link: LinkId) -> Self {
        PageRef { site, link }
    }
}

impl fmt::Display for PageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.site, self.link)
    }
}
