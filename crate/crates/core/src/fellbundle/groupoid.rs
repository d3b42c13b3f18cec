use std::collections::HashSet;

use crate::error::{Error, Result};

/// Arrow `(range, source)` of a pair groupoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arrow {
    pub range: usize,
    pub source: usize,
}

impl Arrow {
    pub fn new(range: usize, source: usize) -> Self {
        Self { range, source }
    }

    pub fn inverse(self) -> Self {
        Self::new(self.source, self.range)
    }

    pub fn is_unit(self) -> bool {
        self.range == self.source
    }
}

/// `Pair(n)`: one arrow between every ordered pair of objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairGroupoid {
    objects: Vec<String>,
}

impl PairGroupoid {
    pub fn new<S: AsRef<str>>(object_ids: &[S]) -> Result<Self> {
        if object_ids.is_empty() {
            return Err(Error::Geometry(
                "pair groupoid needs at least one object".into(),
            ));
        }
        let mut seen = HashSet::new();
        for id in object_ids {
            if !seen.insert(id.as_ref()) {
                return Err(Error::Geometry(format!(
                    "duplicate object id {:?}",
                    id.as_ref()
                )));
            }
        }
        Ok(Self {
            objects: object_ids.iter().map(|s| s.as_ref().to_string()).collect(),
        })
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o == id)
    }

    pub fn arrows(&self) -> Vec<Arrow> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| Arrow::new(i, j)))
            .collect()
    }

    pub fn units(&self) -> Vec<Arrow> {
        (0..self.len()).map(|i| Arrow::new(i, i)).collect()
    }

    /// `(i, j) ∘ (j, k) = (i, k)`; `None` when the inner objects differ.
    pub fn compose(&self, first: Arrow, second: Arrow) -> Option<Arrow> {
        (first.source == second.range).then(|| Arrow::new(first.range, second.source))
    }
}

pub fn build_pair_groupoid<S: AsRef<str>>(object_ids: &[S]) -> Result<PairGroupoid> {
    PairGroupoid::new(object_ids)
}
