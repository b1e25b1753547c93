//! Scatter-gather buffer descriptors with a small-object optimization.
//!
//! Most reads and writes carry a single buffer, so sequences of up to two
//! descriptors are stored inline in the structure itself; longer sequences
//! spill to the heap.  The two representations behave identically, and tests
//! can force the spilled form to check that.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use smallvec::SmallVec;

use crate::error::VfsError;

/// One buffer inside a caller memory view: an offset and a length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IoVec {
    pub offset: u32,
    pub len: u32,
}

impl IoVec {
    pub fn new(offset: u32, len: u32) -> Self {
        IoVec { offset, len }
    }
}

/// A sequence of [`IoVec`]s; at most two live inline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoVecSeq(SmallVec<[IoVec; 2]>);

impl IoVecSeq {
    /// Builds a sequence, inlining up to two descriptors.
    pub fn from_slice(bufs: &[IoVec]) -> Self {
        IoVecSeq(SmallVec::from_slice(bufs))
    }

    pub fn single(offset: u32, len: u32) -> Self {
        Self::from_slice(&[IoVec::new(offset, len)])
    }

    /// Builds a sequence that is heap-backed even when it would fit inline.
    /// Exists so tests can compare the two representations.
    pub fn spilled(bufs: Vec<IoVec>) -> Self {
        // from_vec re-inlines small vectors unless their capacity exceeds
        // the inline capacity, so over-allocate first.
        let mut v = Vec::with_capacity(bufs.len().max(3));
        v.extend(bufs);
        IoVecSeq(SmallVec::from_vec(v))
    }

    /// Whether the descriptors live on the heap.
    pub fn is_spilled(&self) -> bool {
        self.0.spilled()
    }

    pub fn iter(&self) -> impl Iterator<Item = &IoVec> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of all buffer lengths.
    pub fn total_len(&self) -> u64 {
        self.0.iter().map(|b| b.len as u64).sum()
    }

    /// Checks that every buffer lies within a memory view of `view_len`
    /// bytes.
    pub fn check_bounds(&self, view_len: usize) -> Result<(), VfsError> {
        for buf in &self.0 {
            let end = buf.offset as u64 + buf.len as u64;
            if end > view_len as u64 {
                return Err(VfsError::OutOfBoundsIoVec);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_or_fewer_buffers_stay_inline() {
        assert!(!IoVecSeq::single(0, 16).is_spilled());
        assert!(!IoVecSeq::from_slice(&[IoVec::new(0, 8), IoVec::new(8, 8)]).is_spilled());
        assert!(IoVecSeq::from_slice(&[
            IoVec::new(0, 1),
            IoVec::new(1, 1),
            IoVec::new(2, 1)
        ])
        .is_spilled());
    }

    #[test]
    fn forced_spill_is_observably_equal() {
        let bufs = vec![IoVec::new(0, 8), IoVec::new(8, 8)];
        let inline = IoVecSeq::from_slice(&bufs);
        let spilled = IoVecSeq::spilled(bufs);
        assert!(!inline.is_spilled());
        assert!(spilled.is_spilled());
        assert_eq!(inline, spilled);
        assert_eq!(inline.total_len(), spilled.total_len());
    }

    #[test]
    fn bounds_checking() {
        let seq = IoVecSeq::single(10, 10);
        assert!(seq.check_bounds(20).is_ok());
        assert_eq!(seq.check_bounds(19), Err(VfsError::OutOfBoundsIoVec));
        // Offset + length close to u32::MAX must not wrap around to a small
        // value that would pass the check.
        let seq = IoVecSeq::single(u32::MAX, 2);
        assert_eq!(seq.check_bounds(100), Err(VfsError::OutOfBoundsIoVec));
    }
}
