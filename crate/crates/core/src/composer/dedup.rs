use std::collections::HashSet;
use std::sync::Mutex;

/// Identity of one composite: foreground, background and integer box.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub foreground: String,
    pub background: String,
    pub x: i64,
    pub y: i64,
    pub width: u32,
    pub height: u32,
}

/// Dataset-wide set of emitted triplets, safe to share between workers.
#[derive(Debug, Default)]
pub struct TripletRegistry {
    seen: Mutex<HashSet<Triplet>>,
}

impl TripletRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `t` and returns `false`, or returns `true` if it was already
    /// present. Check and insert happen under one lock.
    pub fn check_insert(&self, t: Triplet) -> bool {
        let mut seen = self.seen.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
        !seen.insert(t)
    }

    pub fn len(&self) -> usize {
        self.seen.lock().map(|s| s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
