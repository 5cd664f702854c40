//! Tagged channels that carry shadows across call boundaries.
//!
//! Both channels are tagged with the id of the callee. A reader whose own id
//! does not match the tag knows its caller (or callee) was not instrumented
//! and falls back to extending application values.

use crate::extended::ShadowScalar;

#[derive(Debug, Default)]
pub struct ShadowStack {
    tag: Option<u64>,
    slots: Vec<Vec<ShadowScalar>>,
}

impl ShadowStack {
    /// Starts a new argument list for `callee`, discarding anything unread.
    pub fn begin(&mut self, callee: u64) {
        self.tag = Some(callee);
        self.slots.clear();
    }

    pub fn push(&mut self, lanes: Vec<ShadowScalar>) {
        self.slots.push(lanes);
    }

    pub fn tag_is(&self, id: u64) -> bool {
        self.tag == Some(id)
    }

    pub fn tag(&self) -> Option<u64> {
        self.tag
    }

    pub fn get(&self, index: usize) -> Option<&[ShadowScalar]> {
        self.slots.get(index).map(|v| v.as_slice())
    }

    /// Called once per function entry after the arguments have been read.
    pub fn end(&mut self) {
        self.tag = None;
        self.slots.clear();
    }
}

#[derive(Debug, Default)]
pub struct ReturnSlot {
    tag: Option<u64>,
    value: Vec<ShadowScalar>,
}

impl ReturnSlot {
    pub fn set(&mut self, callee: u64, lanes: Vec<ShadowScalar>) {
        self.tag = Some(callee);
        self.value = lanes;
    }

    /// Compares the tag with `callee` and clears it, so a stale value can
    /// never be claimed by a later call.
    pub fn take_tag(&mut self, callee: u64) -> bool {
        self.tag.take() == Some(callee)
    }

    pub fn tag(&self) -> Option<u64> {
        self.tag
    }

    pub fn value(&self) -> &[ShadowScalar] {
        &self.value
    }
}
