//! Structured tags: a general part-of-speech tag plus up to four
//! subcategory features, validated against a data-driven registry.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

pub const MAX_FEATURES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneralTag {
    /// adjective
    A,
    /// adverb
    Adv,
    /// determiner
    Det,
    /// noun
    N,
    /// bound noun
    Ni,
    /// pronoun
    Pro,
    /// verb
    V,
    /// interjection
    Int,
    /// derivational suffix
    Sfx,
    /// pre-final verb/adjective ending
    Morph,
    /// postposition
    Post,
    /// conjunctive suffix
    Sc,
    /// determinative suffix
    Sd,
    /// nominalization suffix
    Sncomp,
    /// final ending
    St,
    /// pre-final nominal ending
    Suf,
}

impl GeneralTag {
    pub const ALL: [GeneralTag; 16] = [
        GeneralTag::A,
        GeneralTag::Adv,
        GeneralTag::Det,
        GeneralTag::N,
        GeneralTag::Ni,
        GeneralTag::Pro,
        GeneralTag::V,
        GeneralTag::Int,
        GeneralTag::Sfx,
        GeneralTag::Morph,
        GeneralTag::Post,
        GeneralTag::Sc,
        GeneralTag::Sd,
        GeneralTag::Sncomp,
        GeneralTag::St,
        GeneralTag::Suf,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            GeneralTag::A => "A",
            GeneralTag::Adv => "ADV",
            GeneralTag::Det => "DET",
            GeneralTag::N => "N",
            GeneralTag::Ni => "NI",
            GeneralTag::Pro => "PRO",
            GeneralTag::V => "V",
            GeneralTag::Int => "INT",
            GeneralTag::Sfx => "Sfx",
            GeneralTag::Morph => "Morph",
            GeneralTag::Post => "Post",
            GeneralTag::Sc => "Sc",
            GeneralTag::Sd => "Sd",
            GeneralTag::Sncomp => "Sncomp",
            GeneralTag::St => "St",
            GeneralTag::Suf => "Suf",
        }
    }

    /// Lexical (stem) tags as opposed to functional-morpheme tags.
    pub fn is_stem(self) -> bool {
        matches!(
            self,
            GeneralTag::A
                | GeneralTag::Adv
                | GeneralTag::Det
                | GeneralTag::N
                | GeneralTag::Ni
                | GeneralTag::Pro
                | GeneralTag::V
                | GeneralTag::Int
        )
    }
}

impl fmt::Display for GeneralTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for GeneralTag {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GeneralTag::ALL
            .iter()
            .copied()
            .find(|t| t.symbol() == s)
            .ok_or_else(|| TagError::UnknownGeneralTag(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("unknown general tag `{0}`")]
    UnknownGeneralTag(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("value `{value}` not allowed for feature `{feature}`")]
    UnknownFeatureValue { feature: String, value: String },
    #[error("{0} features given, at most 4 allowed")]
    TooManyFeatures(usize),
    #[error("feature `{0}` given twice")]
    DuplicateFeature(String),
    #[error("malformed feature `{0}`, expected name=value")]
    MalformedFeature(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("line {line}: expected `name<TAB>value,value,...`")]
    Syntax { line: usize },
    #[error("line {line}: feature `{name}` declared twice")]
    DuplicateFeature { line: usize, name: String },
    #[error("line {line}: feature `{name}` has no values")]
    NoValues { line: usize, name: String },
    #[error("line {line}: `{token}` is not a valid feature name or value")]
    BadToken { line: usize, token: String },
}

/// Feature names and their allowed values, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureRegistry {
    features: IndexMap<String, IndexSet<String>>,
}

impl FeatureRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `.feats` text: `name<TAB>v1,v2,...` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut registry = FeatureRegistry::new();
        registry.extend_from(text)?;
        Ok(registry)
    }

    pub fn extend_from(&mut self, text: &str) -> Result<(), RegistryError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let (name, values) = raw.split_once('\t').ok_or(RegistryError::Syntax { line })?;
            if !is_token(name) {
                return Err(RegistryError::BadToken { line, token: name.to_string() });
            }
            if self.features.contains_key(name) {
                return Err(RegistryError::DuplicateFeature { line, name: name.to_string() });
            }
            let mut set = IndexSet::new();
            for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                if !is_token(v) {
                    return Err(RegistryError::BadToken { line, token: v.to_string() });
                }
                set.insert(v.to_string());
            }
            if set.is_empty() {
                return Err(RegistryError::NoValues { line, name: name.to_string() });
            }
            self.features.insert(name.to_string(), set);
        }
        Ok(())
    }

    /// Adds a feature programmatically; panics on an empty value list.
    pub fn insert<I, S>(&mut self, name: &str, values: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: IndexSet<String> = values.into_iter().map(Into::into).collect();
        assert!(!set.is_empty(), "feature `{name}` needs at least one value");
        self.features.insert(name.to_string(), set);
    }

    pub fn allows(&self, name: &str, value: &str) -> Result<(), TagError> {
        let values = self
            .features
            .get(name)
            .ok_or_else(|| TagError::UnknownFeature(name.to_string()))?;
        if values.contains(value) {
            Ok(())
        } else {
            Err(TagError::UnknownFeatureValue { feature: name.to_string(), value: value.to_string() })
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn value_count(&self) -> usize {
        self.features.values().map(IndexSet::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, impl Iterator<Item = &str>)> {
        self.features
            .iter()
            .map(|(k, v)| (k.as_str(), v.iter().map(String::as_str)))
    }

    /// Canonical `.feats` text.
    pub fn format(&self) -> String {
        let mut out = String::new();
        for (name, values) in &self.features {
            out.push_str(name);
            out.push('\t');
            out.push_str(&values.iter().cloned().collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// Feature names and values are restricted to a plain identifier alphabet so
/// that tags embed safely in the resource and payload formats.
pub(crate) fn is_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// A general tag plus an ordered list of `(feature, value)` pairs.
///
/// Feature order is kept for display; equality, hashing and ordering treat
/// the features as a set.
#[derive(Clone, Debug)]
pub struct StructuredTag {
    general: GeneralTag,
    features: Vec<(String, String)>,
}

impl StructuredTag {
    pub fn new(general: GeneralTag) -> Self {
        StructuredTag { general, features: Vec::new() }
    }

    /// Builds a tag and validates it against `registry`.
    pub fn with_features<I, N, V>(
        general: GeneralTag,
        features: I,
        registry: &FeatureRegistry,
    ) -> Result<Self, TagError>
    where
        I: IntoIterator<Item = (N, V)>,
        N: Into<String>,
        V: Into<String>,
    {
        let mut tag = StructuredTag::new(general);
        for (name, value) in features {
            tag.push_feature(name.into(), value.into(), registry)?;
        }
        Ok(tag)
    }

    pub fn general(&self) -> GeneralTag {
        self.general
    }

    pub fn features(&self) -> &[(String, String)] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&str> {
        self.features
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    fn push_feature(
        &mut self,
        name: String,
        value: String,
        registry: &FeatureRegistry,
    ) -> Result<(), TagError> {
        registry.allows(&name, &value)?;
        if self.features.iter().any(|(n, _)| *n == name) {
            return Err(TagError::DuplicateFeature(name));
        }
        if self.features.len() == MAX_FEATURES {
            return Err(TagError::TooManyFeatures(MAX_FEATURES + 1));
        }
        self.features.push((name, value));
        Ok(())
    }

    /// Sets `name` to `value`, replacing an existing value in place or
    /// appending a new feature.
    pub fn set_feature(
        &mut self,
        name: &str,
        value: &str,
        registry: &FeatureRegistry,
    ) -> Result<(), TagError> {
        registry.allows(name, value)?;
        if let Some(slot) = self.features.iter_mut().find(|(n, _)| n == name) {
            slot.1 = value.to_string();
            return Ok(());
        }
        if self.features.len() == MAX_FEATURES {
            return Err(TagError::TooManyFeatures(MAX_FEATURES + 1));
        }
        self.features.push((name.to_string(), value.to_string()));
        Ok(())
    }

    /// Like [`set_feature`](Self::set_feature) for values already checked
    /// against the registry.
    pub(crate) fn put_feature(&mut self, name: &str, value: &str) -> Result<(), TagError> {
        if let Some(slot) = self.features.iter_mut().find(|(n, _)| n == name) {
            slot.1 = value.to_string();
            return Ok(());
        }
        if self.features.len() == MAX_FEATURES {
            return Err(TagError::TooManyFeatures(MAX_FEATURES + 1));
        }
        self.features.push((name.to_string(), value.to_string()));
        Ok(())
    }

    fn sorted_features(&self) -> Vec<&(String, String)> {
        let mut f: Vec<_> = self.features.iter().collect();
        f.sort();
        f
    }
}

impl PartialEq for StructuredTag {
    fn eq(&self, other: &Self) -> bool {
        self.general == other.general && self.sorted_features() == other.sorted_features()
    }
}

impl Eq for StructuredTag {}

impl Hash for StructuredTag {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.general.hash(state);
        self.sorted_features().hash(state);
    }
}

impl PartialOrd for StructuredTag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StructuredTag {
    fn cmp(&self, other: &Self) -> Ordering {
        self.general
            .cmp(&other.general)
            .then_with(|| self.sorted_features().cmp(&other.sorted_features()))
    }
}

impl fmt::Display for StructuredTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.general.symbol())?;
        for (name, value) in &self.features {
            write!(f, "+{name}={value}")?;
        }
        Ok(())
    }
}

/// Parses `GENERAL(+name=value)*`.
pub fn parse_tag(text: &str, registry: &FeatureRegistry) -> Result<StructuredTag, TagError> {
    let mut parts = text.split('+');
    let general: GeneralTag = parts.next().unwrap_or_default().parse()?;
    let features: Vec<&str> = parts.collect();
    if features.len() > MAX_FEATURES {
        return Err(TagError::TooManyFeatures(features.len()));
    }
    let mut tag = StructuredTag::new(general);
    for feature in features {
        let (name, value) = feature
            .split_once('=')
            .ok_or_else(|| TagError::MalformedFeature(feature.to_string()))?;
        tag.push_feature(name.to_string(), value.to_string(), registry)?;
    }
    Ok(tag)
}

pub fn format_tag(tag: &StructuredTag) -> String {
    tag.to_string()
}
