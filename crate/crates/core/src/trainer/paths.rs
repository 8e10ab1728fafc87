use std::collections::HashSet;

use crate::graph::{EntityId, RelationId};

/// `(e_s, r₁, e₁, …, r_T, e_T)`: edge labels and intermediate entities.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathSignature(Vec<u32>);

impl PathSignature {
    pub fn new(source: EntityId, steps: &[(RelationId, EntityId)]) -> Self {
        let mut v = Vec::with_capacity(1 + 2 * steps.len());
        v.push(source);
        for &(r, e) in steps {
            v.push(r);
            v.push(e);
        }
        Self(v)
    }
}

/// Running set of distinct explored paths.
#[derive(Clone, Debug, Default)]
pub struct UniquePaths {
    seen: HashSet<PathSignature>,
}

impl UniquePaths {
    pub fn insert(&mut self, sig: PathSignature) -> bool {
        self.seen.insert(sig)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}
