use std::path::{Path, PathBuf};

use pwcrt_core::{datasets, format, BlockingRule, ErrorModel, MessageSet, RetryLimit};
use sha2::{Digest, Sha256};

use crate::manifest::InputDigest;
use crate::{BlockingArg, CliError, CliResult, SetArgs};

pub(crate) struct LoadedSet {
    pub set: MessageSet,
    /// Dataset name or file stem, used in output names.
    pub label: String,
    pub digest: Option<InputDigest>,
    pub builtin: bool,
}

pub(crate) fn read_file(path: &Path) -> CliResult<(String, InputDigest)> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Usage(format!("{}: not valid UTF-8", path.display())))?;
    Ok((text, digest))
}

pub(crate) fn load_set_file(path: &Path) -> CliResult<(MessageSet, InputDigest)> {
    let (text, digest) = read_file(path)?;
    let set = format::parse_message_set(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((set, digest))
}

impl SetArgs {
    pub(crate) fn load(&self) -> CliResult<LoadedSet> {
        let mut loaded = if datasets::NAMES.contains(&self.set.as_str()) {
            LoadedSet {
                set: datasets::by_name(&self.set)?,
                label: self.set.clone(),
                digest: None,
                builtin: true,
            }
        } else {
            let path = PathBuf::from(&self.set);
            let (set, digest) = load_set_file(&path)?;
            LoadedSet {
                set,
                label: path
                    .file_stem()
                    .map_or_else(|| "set".to_string(), |s| s.to_string_lossy().into_owned()),
                digest: Some(digest),
                builtin: false,
            }
        };
        let current = loaded.set.error_model;
        let retry = match (self.retry_limit, self.retry_threshold) {
            (Some(k), _) => Some(RetryLimit::Fixed(k)),
            (None, Some(p)) => Some(RetryLimit::Threshold(p)),
            (None, None) => None,
        };
        if self.lambda.is_some() || retry.is_some() {
            let model = ErrorModel {
                lambda: self.lambda.unwrap_or(current.lambda),
                retry: retry.unwrap_or(current.retry),
                ..current
            };
            loaded.set = loaded.set.with_error_model(model)?;
            if self.lambda.is_some() {
                loaded.set = loaded.set.without_retry_overrides();
            }
        }
        Ok(loaded)
    }

    /// Indices of the selected frames.
    pub(crate) fn targets(&self, set: &MessageSet) -> CliResult<Vec<usize>> {
        if self.all {
            Ok((0..set.len()).collect())
        } else if self.lowest_priority {
            Ok(vec![set.lowest_priority_index()?])
        } else if let Some(id) = &self.frame {
            Ok(vec![set.index_of(id)?])
        } else {
            Err(CliError::Usage(
                "select frames with --frame ID, --lowest-priority or --all".into(),
            ))
        }
    }

    pub(crate) fn blocking_rule(&self) -> BlockingRule {
        match self.blocking {
            BlockingArg::LowerPriority => BlockingRule::LowerPriority,
            BlockingArg::IncludingSelf => BlockingRule::IncludingSelf,
        }
    }
}

/// Default stopping threshold: 2.7e-15 for the SAE benchmark, 1e-12 otherwise.
pub(crate) fn default_epsilon(loaded: &LoadedSet) -> f64 {
    if loaded.builtin && loaded.label == "sae" {
        datasets::SAE_EPSILON
    } else {
        pwcrt_core::analysis::DEFAULT_EPSILON
    }
}

/// Parses `lo:hi`.
pub(crate) fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(text: &str, what: &str) -> CliResult<(T, T)> {
    let bad = || CliError::Usage(format!("{what} must look like lo:hi, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: T = lo.trim().parse().map_err(|_| bad())?;
    let hi: T = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range::<f64>("0:60", "range").unwrap(), (0.0, 60.0));
        assert_eq!(parse_range::<u64>("55:135", "c").unwrap(), (55, 135));
        assert!(parse_range::<f64>("60:0", "range").is_err());
        assert!(parse_range::<f64>("60", "range").is_err());
    }
}
