//! File capability sets.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// A set of rights over a filesystem path.
///
/// `READ` and `WRITE` each imply `OPEN`: a principal that may read a file may
/// necessarily open it.  Construction normalizes the set so the implication
/// always holds, which keeps serialized policies canonical.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RightsSet(u8);

impl RightsSet {
    pub const OPEN: RightsSet = RightsSet(0b0001);
    pub const READ: RightsSet = RightsSet(0b0010);
    pub const WRITE: RightsSet = RightsSet(0b0100);
    pub const SEEK: RightsSet = RightsSet(0b1000);

    pub fn empty() -> Self {
        RightsSet(0)
    }

    /// Builds a set from raw flags, adding `OPEN` whenever `READ` or `WRITE`
    /// is present.
    pub fn normalized(bits: RightsSet) -> Self {
        let mut out = bits;
        if out.contains(Self::READ) || out.contains(Self::WRITE) {
            out = out.union(Self::OPEN);
        }
        out
    }

    /// `READ | OPEN`.
    pub fn read() -> Self {
        Self::normalized(Self::READ)
    }

    /// `WRITE | OPEN`.
    pub fn write() -> Self {
        Self::normalized(Self::WRITE)
    }

    /// `READ | WRITE | SEEK | OPEN`: everything.
    pub fn all() -> Self {
        Self::normalized(Self::READ.union(Self::WRITE).union(Self::SEEK))
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, other: RightsSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(&self, other: RightsSet) -> RightsSet {
        RightsSet(self.0 | other.0)
    }

    pub fn intersect(&self, other: RightsSet) -> RightsSet {
        RightsSet(self.0 & other.0)
    }

    /// True iff `READ implies OPEN` and `WRITE implies OPEN` hold.
    pub fn is_well_formed(&self) -> bool {
        *self == Self::normalized(*self)
    }

    fn flag_names(&self) -> Vec<&'static str> {
        // Lexicographic order, so serialization is canonical.
        let mut names = Vec::new();
        if self.contains(Self::OPEN) {
            names.push("open");
        }
        if self.contains(Self::READ) {
            names.push("read");
        }
        if self.contains(Self::SEEK) {
            names.push("seek");
        }
        if self.contains(Self::WRITE) {
            names.push("write");
        }
        names
    }

    fn from_flag_name(name: &str) -> Option<RightsSet> {
        match name {
            "open" => Some(Self::OPEN),
            "read" => Some(Self::READ),
            "seek" => Some(Self::SEEK),
            "write" => Some(Self::WRITE),
            _ => None,
        }
    }
}

impl fmt::Debug for RightsSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RightsSet[{}]", self.flag_names().join("|"))
    }
}

impl Serialize for RightsSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.flag_names().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RightsSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        let mut set = RightsSet::empty();
        for name in &names {
            let flag = RightsSet::from_flag_name(name)
                .ok_or_else(|| de::Error::custom(format!("unknown right {name:?}")))?;
            set = set.union(flag);
        }
        Ok(RightsSet::normalized(set))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn read_and_write_imply_open() {
        assert!(RightsSet::read().contains(RightsSet::OPEN));
        assert!(RightsSet::write().contains(RightsSet::OPEN));
        assert!(RightsSet::normalized(RightsSet::SEEK) == RightsSet::SEEK);
    }

    #[test]
    fn serde_round_trip_is_normalized() {
        let parsed: RightsSet = serde_json::from_str(r#"["read"]"#).unwrap();
        assert_eq!(parsed, RightsSet::read());
        let json = serde_json::to_string(&parsed).unwrap();
        assert_eq!(json, r#"["open","read"]"#);
        let reparsed: RightsSet = serde_json::from_str(&json).unwrap();
        assert_eq!(reparsed, parsed);
    }

    #[test]
    fn unknown_right_is_rejected() {
        assert!(serde_json::from_str::<RightsSet>(r#"["execute"]"#).is_err());
    }
}
