use crate::graph::NodeId;
use crate::sgst::{Sgst, TxClass};

/// A run of at most `S` consecutive nodes of one fast stretch, or a single
/// node outside any stretch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    /// Top to bottom along the stretch.
    pub members: Vec<NodeId>,
    /// Contracted BFS level.
    pub level: u32,
    /// Threshold-2 rank shared by the members.
    pub rank: u32,
    /// Fast child of the last member, i.e. the head of the next block.
    pub exit: Option<NodeId>,
    /// Index of the stretch this block belongs to.
    pub stretch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contraction {
    pub block_size: u32,
    pub blocks: Vec<Block>,
    pub block_of: Vec<usize>,
    /// Contracted level of every node.
    pub level: Vec<u32>,
    /// Node lists of each maximal fast stretch, top to bottom.
    pub stretches: Vec<Vec<NodeId>>,
    /// Fast nodes on a BFS layer divisible by the block size.
    pub barriers: Vec<NodeId>,
    /// Child endpoints of slow edges that join two fast stretches.
    pub connectors: Vec<NodeId>,
}

impl Contraction {
    pub fn max_level(&self) -> u32 {
        self.level.iter().copied().max().unwrap_or(0)
    }
}

/// Splits every fast stretch into consecutive blocks of `block_size` nodes
/// from the top (the last may be shorter) and derives contracted levels.
pub fn contract_supernodes(s: &Sgst, block_size: u32) -> Contraction {
    assert!(block_size >= 1, "block size must be positive");
    let n = s.node_count();
    let size = block_size as usize;
    let mut block_of = vec![usize::MAX; n];
    let mut blocks: Vec<Block> = Vec::new();
    let mut stretches = Vec::new();

    for head in 0..n {
        if s.fast_child(head).is_none() || s.class_of[head] == TxClass::Fast {
            continue;
        }
        let mut chain = vec![head];
        let mut v = head;
        while let Some(c) = s.fast_child(v) {
            chain.push(c);
            v = c;
        }
        let stretch = stretches.len();
        for piece in chain.chunks(size) {
            let id = blocks.len();
            for &m in piece {
                block_of[m] = id;
            }
            blocks.push(Block {
                members: piece.to_vec(),
                level: 0,
                rank: s.rank2(piece[0]),
                exit: s.fast_child(*piece.last().unwrap()),
                stretch: Some(stretch),
            });
        }
        stretches.push(chain);
    }
    for v in 0..n {
        if block_of[v] == usize::MAX {
            block_of[v] = blocks.len();
            blocks.push(Block {
                members: vec![v],
                level: 0,
                rank: s.rank2(v),
                exit: None,
                stretch: None,
            });
        }
    }

    let mut level = vec![0u32; n];
    for layer in &s.layering.layers {
        for &v in layer {
            if let Some(p) = s.parent(v) {
                level[v] = if block_of[p] == block_of[v] {
                    level[p]
                } else {
                    level[p] + 1
                };
            }
        }
    }
    for b in &mut blocks {
        b.level = level[b.members[0]];
    }

    let barriers = (0..n)
        .filter(|&v| s.class_of[v] == TxClass::Fast && s.layer(v).is_multiple_of(size))
        .collect();
    let connectors = (0..n)
        .filter(|&v| {
            s.class_of[v] == TxClass::Slow
                && s.fast_child(v).is_some()
                && s.parent(v).is_some_and(|p| s.class_of[p] == TxClass::Fast)
        })
        .collect();

    Contraction {
        block_size,
        blocks,
        block_of,
        level,
        stretches,
        barriers,
        connectors,
    }
}
