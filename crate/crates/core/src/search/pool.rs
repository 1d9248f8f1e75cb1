use serde::{Deserialize, Serialize};

use crate::expr::OperatorSequence;

/// Where a candidate was first sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub iteration: usize,
    pub sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sequence: OperatorSequence,
    /// Weights at the minimum loss.
    pub weights: Vec<f64>,
    /// Weights the optimization started from.
    pub init: Vec<f64>,
    /// Minimum loss attained; `None` if no finite loss was ever seen.
    pub loss: Option<f64>,
    pub score: f64,
    pub provenance: Provenance,
}

impl Candidate {
    pub fn failed(&self) -> bool {
        self.loss.is_none()
    }
}

/// `1 / (1 + L)`.
pub fn score_from_loss(loss: f64) -> f64 {
    1.0 / (1.0 + loss)
}

/// Best-scoring candidates, at most one per operator sequence, sorted by
/// score (descending) then provenance (ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    capacity: usize,
    entries: Vec<Candidate>,
}

fn ranks_before(a: &Candidate, b: &Candidate) -> bool {
    a.score > b.score || (a.score == b.score && a.provenance < b.provenance)
}

impl CandidatePool {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.entries.first()
    }

    /// Offers a candidate; returns whether the pool changed.
    pub fn insert(&mut self, c: Candidate) -> bool {
        if c.failed() || self.capacity == 0 {
            return false;
        }
        if let Some(i) = self.entries.iter().position(|e| e.sequence == c.sequence) {
            if !ranks_before(&c, &self.entries[i]) {
                return false;
            }
            self.entries.remove(i);
        } else if self.entries.len() == self.capacity
            && !ranks_before(&c, self.entries.last().expect("full pool"))
        {
            return false;
        }
        let at = self
            .entries
            .iter()
            .position(|e| ranks_before(&c, e))
            .unwrap_or(self.entries.len());
        self.entries.insert(at, c);
        self.entries.truncate(self.capacity);
        true
    }
}
