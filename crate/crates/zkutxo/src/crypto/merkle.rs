//! Append-only Merkle commitment tree with retained root history.
//!
//! Fixed depth, zero-leaf default, incremental append. Leaves are never
//! removed or mutated; the root after every committed append batch stays
//! queryable forever because the contract accepts proofs against any
//! historical root until their nullifiers are spent.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::crypto::{domain, hash_tagged};
use crate::types::Digest;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MerkleError {
    #[error("path length {got} does not match tree depth {expected}")]
    PathLengthMismatch { expected: usize, got: usize },
    #[error("tree is full: capacity {capacity}, appending {appending}")]
    TreeFull { capacity: u64, appending: usize },
    #[error("leaf index {index} out of range (tree has {len} leaves)")]
    IndexOutOfRange { index: usize, len: usize },
}

/// One step of a Merkle path. `at_left` means the sibling occupies the left
/// slot of the parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleStep {
    pub sibling: Digest,
    pub at_left: bool,
}

/// Bottom-up Merkle path; length equals the tree depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerklePath {
    pub steps: Vec<MerkleStep>,
}

fn node(left: &Digest, right: &Digest) -> Digest {
    hash_tagged(domain::DS_MERKLE_NODE, &[&left.0, &right.0])
}

impl crate::enc::Encode for MerklePath {
    fn encode(&self, enc: &mut crate::enc::Encoder) {
        enc.put_u64(self.steps.len() as u64);
        for step in &self.steps {
            enc.put_digest(&step.sibling);
            enc.put_bool(step.at_left);
        }
    }
}

/// Folds a value up a Merkle path, returning the implied root.
pub fn fold_path(value: Digest, path: &MerklePath) -> Digest {
    let mut h = value;
    for step in &path.steps {
        h = if step.at_left {
            node(&step.sibling, &h)
        } else {
            node(&h, &step.sibling)
        };
    }
    h
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TreeSnapshot {
    depth: u32,
    leaves: Vec<Digest>,
    roots: Vec<Digest>,
}

/// Append-only commitment tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "TreeSnapshot", from = "TreeSnapshot")]
pub struct CommitmentTree {
    depth: usize,
    /// levels[0] holds the appended leaves; levels[d] the (single) root node.
    levels: Vec<Vec<Digest>>,
    /// Hash of the all-zero subtree at each level.
    zeros: Vec<Digest>,
    /// Root history, oldest first. Seeded with the empty-tree root.
    roots: Vec<Digest>,
    root_set: BTreeSet<Digest>,
    leaf_set: BTreeSet<Digest>,
}

impl CommitmentTree {
    /// Standard production depth.
    pub const DEFAULT_DEPTH: usize = 32;

    pub fn new(depth: usize) -> Self {
        assert!(depth <= 48, "tree depth {depth} is unreasonably large");
        let mut zeros = Vec::with_capacity(depth + 1);
        zeros.push(Digest::ZERO);
        for l in 0..depth {
            let z = node(&zeros[l], &zeros[l]);
            zeros.push(z);
        }
        let empty_root = zeros[depth];
        CommitmentTree {
            depth,
            levels: vec![Vec::new(); depth + 1],
            zeros,
            roots: vec![empty_root],
            root_set: BTreeSet::from([empty_root]),
            leaf_set: BTreeSet::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.depth.min(63)
    }

    pub fn next_index(&self) -> usize {
        self.levels[0].len()
    }

    pub fn leaves(&self) -> &[Digest] {
        &self.levels[0]
    }

    /// Root history in append order.
    pub fn roots(&self) -> &[Digest] {
        &self.roots
    }

    pub fn root(&self) -> Digest {
        self.node_at(self.depth, 0)
    }

    pub fn contains_root(&self, root: &Digest) -> bool {
        self.root_set.contains(root)
    }

    pub fn contains_leaf(&self, leaf: &Digest) -> bool {
        self.leaf_set.contains(leaf)
    }

    fn node_at(&self, level: usize, index: usize) -> Digest {
        self.levels[level]
            .get(index)
            .copied()
            .unwrap_or(self.zeros[level])
    }

    /// Appends leaves in order, records the new root in the history, and
    /// returns it. An empty batch leaves the tree and history untouched.
    pub fn append(&mut self, leaves: &[Digest]) -> Result<Digest, MerkleError> {
        if leaves.is_empty() {
            return Ok(self.root());
        }
        let len = self.levels[0].len();
        if len as u64 + leaves.len() as u64 > self.capacity() {
            return Err(MerkleError::TreeFull {
                capacity: self.capacity(),
                appending: leaves.len(),
            });
        }
        self.levels[0].extend_from_slice(leaves);
        self.leaf_set.extend(leaves.iter().copied());
        self.recompute_from(len);
        let root = self.root();
        self.roots.push(root);
        self.root_set.insert(root);
        Ok(root)
    }

    fn recompute_from(&mut self, dirty_start: usize) {
        let mut start = dirty_start;
        for level in 0..self.depth {
            let child_len = self.levels[level].len();
            let first_parent = start / 2;
            let last_parent = (child_len.saturating_sub(1)) / 2;
            for parent in first_parent..=last_parent {
                let left = self.node_at(level, parent * 2);
                let right = self.node_at(level, parent * 2 + 1);
                let value = node(&left, &right);
                if parent < self.levels[level + 1].len() {
                    self.levels[level + 1][parent] = value;
                } else {
                    debug_assert_eq!(parent, self.levels[level + 1].len());
                    self.levels[level + 1].push(value);
                }
            }
            start = first_parent;
        }
    }

    /// Merkle path for the leaf at `index` against the current root.
    pub fn proof_for(&self, index: usize) -> Result<MerklePath, MerkleError> {
        let len = self.levels[0].len();
        if index >= len {
            return Err(MerkleError::IndexOutOfRange { index, len });
        }
        let mut steps = Vec::with_capacity(self.depth);
        for level in 0..self.depth {
            let idx_at_level = index >> level;
            let sibling_idx = idx_at_level ^ 1;
            steps.push(MerkleStep {
                sibling: self.node_at(level, sibling_idx),
                at_left: sibling_idx < idx_at_level,
            });
        }
        Ok(MerklePath { steps })
    }

    /// Folds a value up a path after checking the path matches this tree's
    /// depth.
    pub fn root_from(&self, value: Digest, path: &MerklePath) -> Result<Digest, MerkleError> {
        if path.steps.len() != self.depth {
            return Err(MerkleError::PathLengthMismatch {
                expected: self.depth,
                got: path.steps.len(),
            });
        }
        Ok(fold_path(value, path))
    }
}

impl From<CommitmentTree> for TreeSnapshot {
    fn from(tree: CommitmentTree) -> Self {
        TreeSnapshot {
            depth: tree.depth as u32,
            leaves: tree.levels[0].clone(),
            roots: tree.roots,
        }
    }
}

impl From<TreeSnapshot> for CommitmentTree {
    fn from(snap: TreeSnapshot) -> Self {
        let mut tree = CommitmentTree::new(snap.depth as usize);
        if !snap.leaves.is_empty() {
            tree.levels[0] = snap.leaves.clone();
            tree.leaf_set = snap.leaves.iter().copied().collect();
            tree.recompute_from(0);
        }
        tree.root_set = snap.roots.iter().copied().collect();
        tree.roots = snap.roots;
        tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash256;

    /// Brute-force oracle: root of a zero-padded full tree, recomputed level
    /// by level from scratch.
    pub(crate) fn oracle_root(depth: usize, leaves: &[Digest]) -> Digest {
        let mut level: Vec<Digest> = leaves.to_vec();
        level.resize(1usize << depth, Digest::ZERO);
        for _ in 0..depth {
            level = level.chunks(2).map(|pair| node(&pair[0], &pair[1])).collect();
        }
        level[0]
    }

    fn leaf(n: u8) -> Digest {
        hash256(&[n])
    }

    #[test]
    fn empty_path_is_identity() {
        let v = leaf(9);
        assert_eq!(fold_path(v, &MerklePath { steps: vec![] }), v);
        let tree = CommitmentTree::new(0);
        assert_eq!(tree.root(), Digest::ZERO);
    }

    #[test]
    fn golden_vector_node_hash() {
        // Frozen from the independent oracle run (vectors/golden.json).
        let one = Digest(crate::types::u256_be(&crate::types::U256::from(1u64)));
        let two = Digest(crate::types::u256_be(&crate::types::U256::from(2u64)));
        assert_eq!(
            node(&one, &two).to_hex(),
            "0x8fb3fd98ff9fe53f1e34fa615ee9d4313b2757e358a59ae1a33d9231e298bb4b"
        );
    }

    #[test]
    fn depth_two_matches_oracle_for_every_leaf() {
        let mut tree = CommitmentTree::new(2);
        let leaves: Vec<Digest> = (0..4).map(leaf).collect();
        let root = tree.append(&leaves).unwrap();
        assert_eq!(root, oracle_root(2, &leaves));
        for (i, l) in leaves.iter().enumerate() {
            let path = tree.proof_for(i).unwrap();
            assert_eq!(fold_path(*l, &path), root);
        }
    }

    #[test]
    fn corrupted_sibling_changes_root() {
        let mut tree = CommitmentTree::new(3);
        tree.append(&[leaf(1), leaf(2), leaf(3)]).unwrap();
        let mut path = tree.proof_for(1).unwrap();
        let good = fold_path(leaf(2), &path);
        path.steps[1].sibling = hash256(b"corrupt");
        assert_ne!(fold_path(leaf(2), &path), good);
    }

    #[test]
    fn single_leaf_path_is_zero_subtrees() {
        let tree_depth = 4;
        let mut tree = CommitmentTree::new(tree_depth);
        tree.append(&[leaf(5)]).unwrap();
        let path = tree.proof_for(0).unwrap();
        assert_eq!(path.steps.len(), tree_depth);
        for (l, step) in path.steps.iter().enumerate() {
            assert_eq!(step.sibling, tree.zeros[l]);
            assert!(!step.at_left);
        }
    }

    #[test]
    fn history_retains_every_batch_root() {
        let mut tree = CommitmentTree::new(3);
        let empty = tree.root();
        let r1 = tree.append(&[leaf(1), leaf(2)]).unwrap();
        let r2 = tree.append(&[leaf(3)]).unwrap();
        assert!(tree.contains_root(&empty));
        assert!(tree.contains_root(&r1));
        assert!(tree.contains_root(&r2));
        assert_eq!(tree.roots().len(), 3);

        // Empty append: root unchanged, no new history entry.
        let r3 = tree.append(&[]).unwrap();
        assert_eq!(r3, r2);
        assert_eq!(tree.roots().len(), 3);
    }

    #[test]
    fn stale_path_still_verifies_against_old_root() {
        let mut tree = CommitmentTree::new(4);
        let l1 = leaf(1);
        let r1 = tree.append(&[l1]).unwrap();
        let stale = tree.proof_for(0).unwrap();
        tree.append(&[leaf(2), leaf(3)]).unwrap();
        assert_ne!(tree.root(), r1);
        assert_eq!(fold_path(l1, &stale), r1);
        assert!(tree.contains_root(&r1));
    }

    #[test]
    fn capacity_enforced() {
        let mut tree = CommitmentTree::new(1);
        tree.append(&[leaf(1), leaf(2)]).unwrap();
        assert!(matches!(
            tree.append(&[leaf(3)]),
            Err(MerkleError::TreeFull { .. })
        ));
        assert!(matches!(
            tree.proof_for(2),
            Err(MerkleError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn path_length_checked_against_depth() {
        let mut tree = CommitmentTree::new(3);
        tree.append(&[leaf(1)]).unwrap();
        let short = MerklePath { steps: vec![] };
        assert!(matches!(
            tree.root_from(leaf(1), &short),
            Err(MerkleError::PathLengthMismatch { expected: 3, got: 0 })
        ));
    }

    #[test]
    fn snapshot_round_trip_preserves_state() {
        let mut tree = CommitmentTree::new(5);
        tree.append(&[leaf(1), leaf(2)]).unwrap();
        tree.append(&[leaf(3)]).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        let back: CommitmentTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back.root(), tree.root());
        assert_eq!(back.roots(), tree.roots());
        assert_eq!(back.leaves(), tree.leaves());
        assert!(back.contains_leaf(&leaf(2)));
        assert_eq!(back.proof_for(1).unwrap(), tree.proof_for(1).unwrap());
    }
}
