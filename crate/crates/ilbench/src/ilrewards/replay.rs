use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::math::Mat;

/// One rollout's worth of agent transitions, stored raw (unnormalised).
#[derive(Clone, Debug)]
pub struct ReplayBatch {
    pub states: Mat,
    pub actions: Mat,
    pub next_states: Mat,
}

/// Ring of the most recent agent rollouts fed to discriminator training.
/// Capacity is counted in whole rollouts; pushing beyond it evicts the
/// oldest batch. Training always consumes the entire current contents.
#[derive(Clone, Debug)]
pub struct ImitationReplay {
    batches: VecDeque<ReplayBatch>,
    multiplier: usize,
}

impl ImitationReplay {
    pub fn new(multiplier: usize) -> Result<ImitationReplay> {
        if !matches!(multiplier, 1 | 3 | 5) {
            return Err(Error::Config(format!(
                "replay multiplier must be 1, 3 or 5, got {multiplier}"
            )));
        }
        Ok(ImitationReplay { batches: VecDeque::with_capacity(multiplier), multiplier })
    }

    pub fn push(&mut self, batch: ReplayBatch) {
        if self.batches.len() == self.multiplier {
            self.batches.pop_front();
        }
        self.batches.push_back(batch);
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn total_transitions(&self) -> usize {
        self.batches.iter().map(|b| b.states.rows()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayBatch> {
        self.batches.iter()
    }

    /// Concatenates the whole store into single matrices, oldest first.
    pub fn concatenated(&self) -> ReplayBatch {
        assert!(!self.is_empty(), "concatenating an empty replay");
        let total = self.total_transitions();
        let ds = self.batches[0].states.cols();
        let da = self.batches[0].actions.cols();
        let mut states = Mat::zeros(total, ds);
        let mut actions = Mat::zeros(total, da);
        let mut next_states = Mat::zeros(total, ds);
        let mut at = 0;
        for b in &self.batches {
            for i in 0..b.states.rows() {
                states.row_mut(at).copy_from_slice(b.states.row(i));
                actions.row_mut(at).copy_from_slice(b.actions.row(i));
                next_states.row_mut(at).copy_from_slice(b.next_states.row(i));
                at += 1;
            }
        }
        ReplayBatch { states, actions, next_states }
    }
}
