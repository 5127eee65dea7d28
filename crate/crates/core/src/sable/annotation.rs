use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("malformed source annotation: {0}")]
pub struct AnnotationError(#[from] serde_json::Error);

/// `"file:proc"` keys mapped to label → symbol lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceAnnotation(pub BTreeMap<String, BTreeMap<String, Vec<String>>>);

pub fn parse_source_annotation(text: &str) -> Result<SourceAnnotation, AnnotationError> {
    Ok(serde_json::from_str(text)?)
}

fn basename(path: &str) -> &str {
    path.rsplit(['/', '\\']).next().unwrap_or(path)
}

fn short_key(key: &str) -> Option<(String, &str)> {
    let (path, name) = key.rsplit_once(':')?;
    Some((basename(path).to_string(), name))
}

impl SourceAnnotation {
    /// Exact key first, then a match on file basename and procedure name.
    pub fn entry(&self, qualifier: &str) -> Option<&BTreeMap<String, Vec<String>>> {
        if let Some(e) = self.0.get(qualifier) {
            return Some(e);
        }
        let want = short_key(qualifier)?;
        self.0
            .iter()
            .find(|(k, _)| short_key(k).is_some_and(|k| k.0 == want.0 && k.1 == want.1))
            .map(|(_, v)| v)
    }
}
