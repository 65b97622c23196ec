use std::collections::VecDeque;

use super::EditRecord;
use crate::volume::MaskVolume;

pub const DEFAULT_JOURNAL_DEPTH: usize = 64;

/// Bounded undo/redo history of stroke edits.
///
/// Records past `depth` fall off the old end and can no longer be undone.
/// Pushing a new record discards the redo tail.
#[derive(Debug, Clone)]
pub struct EditJournal {
    records: VecDeque<EditRecord>,
    applied: usize,
    depth: usize,
}

impl Default for EditJournal {
    fn default() -> Self {
        Self::new(DEFAULT_JOURNAL_DEPTH)
    }
}

impl EditJournal {
    pub fn new(depth: usize) -> Self {
        Self {
            records: VecDeque::new(),
            applied: 0,
            depth: depth.max(1),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn can_undo(&self) -> bool {
        self.applied > 0
    }

    pub fn can_redo(&self) -> bool {
        self.applied < self.records.len()
    }

    /// Number of records that can currently be undone.
    pub fn undo_len(&self) -> usize {
        self.applied
    }

    /// Records an already-applied edit. Empty records are ignored.
    pub fn push(&mut self, record: EditRecord) {
        if record.is_empty() {
            return;
        }
        self.records.truncate(self.applied);
        self.records.push_back(record);
        self.applied += 1;
        if self.records.len() > self.depth {
            self.records.pop_front();
            self.applied -= 1;
        }
    }

    /// Restores the old labels of the latest applied record.
    pub fn undo(&mut self, mask: &mut MaskVolume) -> Option<&EditRecord> {
        if self.applied == 0 {
            return None;
        }
        self.applied -= 1;
        let record = &self.records[self.applied];
        for c in &record.changes {
            mask.set_pixel(record.slice, c.x as usize, c.y as usize, c.old);
        }
        Some(record)
    }

    /// Re-applies the most recently undone record.
    pub fn redo(&mut self, mask: &mut MaskVolume) -> Option<&EditRecord> {
        let record = self.records.get(self.applied)?;
        for c in &record.changes {
            mask.set_pixel(record.slice, c.x as usize, c.y as usize, c.new);
        }
        self.applied += 1;
        Some(record)
    }
}

pub fn undo(mask: &mut MaskVolume, journal: &mut EditJournal) -> Option<EditRecord> {
    journal.undo(mask).cloned()
}

pub fn redo(mask: &mut MaskVolume, journal: &mut EditJournal) -> Option<EditRecord> {
    journal.redo(mask).cloned()
}
