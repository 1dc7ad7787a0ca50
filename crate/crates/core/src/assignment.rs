//! Partial assignments with a journal for undoing modifications on return.

/// State of one variable inside a partial assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Accessed and assigned the value with this index.
    Value(u32),
    /// Accessed but not yet assigned.
    Star,
    /// Not accessed.
    Unset,
}

impl Slot {
    #[inline]
    pub fn value(self) -> Option<u32> {
        match self {
            Slot::Value(x) => Some(x),
            _ => None,
        }
    }

    #[inline]
    pub fn is_assigned(self) -> bool {
        matches!(self, Slot::Value(_))
    }

    #[inline]
    pub fn is_accessed(self) -> bool {
        !matches!(self, Slot::Unset)
    }
}

/// Position in the journal; undoing to a mark restores the state at the time it was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark(usize);

/// A partial assignment `σ` over `n` variables.
///
/// Every modification goes through [`PartialAssignment::set`] and is journaled,
/// so callers can take a [`Mark`] on entry and [`undo_to`](PartialAssignment::undo_to)
/// it on return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    state: Vec<Slot>,
    stars: Vec<usize>,
    journal: Vec<(usize, Slot)>,
}

impl PartialAssignment {
    /// The empty assignment: every variable unaccessed.
    pub fn new(n: usize) -> Self {
        PartialAssignment {
            state: vec![Slot::Unset; n],
            stars: Vec::new(),
            journal: Vec::new(),
        }
    }

    pub fn from_slots(slots: Vec<Slot>) -> Self {
        let stars = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Slot::Star)
            .map(|(i, _)| i)
            .collect();
        PartialAssignment {
            state: slots,
            stars,
            journal: Vec::new(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.state.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> Slot {
        self.state[v]
    }

    pub fn slots(&self) -> &[Slot] {
        &self.state
    }

    /// Variables currently set to `Star`, in the order they were starred.
    pub fn stars(&self) -> &[usize] {
        &self.stars
    }

    /// `Λ(σ)`: assigned variables.
    pub fn assigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.state
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_assigned())
            .map(|(i, _)| i)
    }

    /// `Λ⁺(σ)`: accessed variables.
    pub fn accessed(&self) -> impl Iterator<Item = usize> + '_ {
        self.state
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_accessed())
            .map(|(i, _)| i)
    }

    pub fn mark(&self) -> Mark {
        Mark(self.journal.len())
    }

    /// `σ ← σ_{v←slot}`, journaled.
    pub fn set(&mut self, v: usize, slot: Slot) {
        let prev = self.state[v];
        if prev == slot {
            return;
        }
        self.journal.push((v, prev));
        self.write(v, prev, slot);
    }

    /// Revert every modification made after `mark`.
    pub fn undo_to(&mut self, mark: Mark) {
        while self.journal.len() > mark.0 {
            let (v, prev) = self.journal.pop().expect("journal non-empty");
            let cur = self.state[v];
            self.write(v, cur, prev);
        }
    }

    /// Forget the journal without changing the state.
    pub fn commit(&mut self) {
        self.journal.clear();
    }

    fn write(&mut self, v: usize, prev: Slot, next: Slot) {
        if prev == Slot::Star {
            let pos = self
                .stars
                .iter()
                .rposition(|&s| s == v)
                .expect("star list tracks starred variables");
            self.stars.remove(pos);
        }
        if next == Slot::Star {
            self.stars.push(v);
        }
        self.state[v] = next;
    }

    /// Full-scan check that the star list matches the state.
    pub fn star_list_consistent(&self) -> bool {
        let mut scanned: Vec<usize> = self
            .state
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Slot::Star)
            .map(|(i, _)| i)
            .collect();
        let mut listed = self.stars.clone();
        scanned.sort_unstable();
        listed.sort_unstable();
        scanned == listed
    }
}
