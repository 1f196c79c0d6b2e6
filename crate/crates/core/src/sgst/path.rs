use serde::Serialize;

use super::{Sgst, TxClass};
use crate::graph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// A maximal run of consecutive fast edges.
    FastStretch,
    SlowEdge,
    SuperSlowEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Length in edges; always 1 for slow and super-slow edges.
    pub len: usize,
}

/// The root-to-target tree path split into fast stretches and single slow or
/// super-slow edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathDecomposition {
    pub target: NodeId,
    pub segments: Vec<Segment>,
}

impl PathDecomposition {
    /// Number of fast stretches.
    pub fn q(&self) -> usize {
        self.count(SegmentKind::FastStretch)
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    /// Slow edges whose neighbors on both sides are fast stretches.
    pub fn connectors(&self) -> usize {
        self.segments
            .windows(3)
            .filter(|w| {
                w[0].kind == SegmentKind::FastStretch
                    && w[1].kind == SegmentKind::SlowEdge
                    && w[2].kind == SegmentKind::FastStretch
            })
            .count()
    }
}

pub fn decompose_path(s: &Sgst, target: NodeId) -> PathDecomposition {
    let mut kinds = Vec::with_capacity(s.layer(target));
    let mut v = target;
    while let Some(p) = s.parent(v) {
        kinds.push(s.class_of[v]);
        v = p;
    }
    kinds.reverse();

    let mut segments: Vec<Segment> = Vec::new();
    for class in kinds {
        match class {
            TxClass::Fast => match segments.last_mut() {
                Some(seg) if seg.kind == SegmentKind::FastStretch => seg.len += 1,
                _ => segments.push(Segment {
                    kind: SegmentKind::FastStretch,
                    len: 1,
                }),
            },
            TxClass::Slow => segments.push(Segment {
                kind: SegmentKind::SlowEdge,
                len: 1,
            }),
            TxClass::SuperSlow => segments.push(Segment {
                kind: SegmentKind::SuperSlowEdge,
                len: 1,
            }),
            TxClass::Root => unreachable!("the root is never a child endpoint"),
        }
    }
    PathDecomposition { target, segments }
}
