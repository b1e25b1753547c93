//! Path validation and longest-prefix capability matching.
//!
//! Paths inside a policy (and on the wire) are plain `/`-separated strings,
//! independent of any host filesystem.  A rights table maps either a file
//! path (`/input/a.bin`) or a directory prefix (`/input/`, trailing slash) to
//! a rights set; queries select the longest matching entry.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::collections::BTreeMap;

use crate::rights::RightsSet;

/// Checks a path as used in a rights table: absolute, normalized (no `..`, no
/// `.`, no empty components), optionally ending in `/` to denote a directory
/// subtree.  `/` alone is the whole tree.
pub fn validate_rights_path(path: &str) -> Result<(), String> {
    validate(path, true)
}

/// Checks a concrete file path: like [`validate_rights_path`] but a trailing
/// slash is not allowed, and the root itself is not a file.
pub fn validate_file_path(path: &str) -> Result<(), String> {
    if path == "/" {
        return Err("\"/\" is not a file path".into());
    }
    validate(path, false)
}

fn validate(path: &str, allow_trailing_slash: bool) -> Result<(), String> {
    if path.is_empty() {
        return Err("path is empty".into());
    }
    if !path.starts_with('/') {
        return Err(format!("path {path:?} is not absolute"));
    }
    if path == "/" {
        return Ok(());
    }
    let trimmed = match path.strip_suffix('/') {
        Some(rest) => {
            if !allow_trailing_slash {
                return Err(format!("path {path:?} has a trailing slash"));
            }
            rest
        }
        None => path,
    };
    for component in trimmed[1..].split('/') {
        if component.is_empty() {
            return Err(format!("path {path:?} has duplicate separators"));
        }
        if component == "." || component == ".." {
            return Err(format!("path {path:?} is not normalized"));
        }
    }
    Ok(())
}

/// Whether the rights-table entry `entry` covers `path`.
///
/// An entry covers a path when it is equal to it, or when it is a directory
/// prefix of it at a component boundary.
fn entry_matches(entry: &str, path: &str) -> bool {
    if entry == path {
        return true;
    }
    if let Some(rest) = path.strip_prefix(entry) {
        // "/input/" covers "/input/a"; "/" covers everything.
        if entry.ends_with('/') && !rest.is_empty() {
            return true;
        }
        // "/input" covers "/input/a" but not "/inputs".
        if rest.starts_with('/') {
            return true;
        }
    }
    false
}

/// Selects the rights of the longest matching entry in `table` for `path`,
/// or the empty set when nothing matches.
pub fn longest_prefix_rights(table: &BTreeMap<String, RightsSet>, path: &str) -> RightsSet {
    table
        .iter()
        .filter(|(entry, _)| entry_matches(entry, path))
        .max_by_key(|(entry, _)| entry.len())
        .map(|(_, rights)| *rights)
        .unwrap_or_else(RightsSet::empty)
}
