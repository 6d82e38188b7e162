//! Linear probing with exact probe accounting.
//!
//! Insertion follows the displacement policy: scanning `h(x), h(x)+1, ...`, the
//! new key claims the first slot that is empty or holds a key `x'` whose home
//! lies outside `h(x) + [i + 1]`. A displaced key continues its own scan from
//! the next slot. The total number of inspected slots over a sequence of
//! insertions is independent of the insertion order and equals
//! `sum(1 + d_i)` over the stored keys.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("table holds {count} keys and cannot take another (capacity {capacity})")]
    Capacity { count: usize, capacity: usize },
    #[error("key {0} is already stored")]
    Duplicate(u64),
    #[error("home slot {home} outside table of size {size}")]
    HomeOutOfRange { home: usize, size: usize },
    #[error("table size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("table size must be at least {min}, got {size}")]
    TooSmall { size: usize, min: usize },
}

/// A stored key together with its cached home slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub key: u64,
    pub home: usize,
}

#[derive(Debug, Clone)]
pub struct LinearTable {
    slots: Vec<Option<Entry>>,
    count: usize,
    probes_total: u64,
}

impl LinearTable {
    /// Creates an empty table with `size` slots (at least 2, so that one slot
    /// can always stay free).
    pub fn new(size: usize) -> Result<Self, TableError> {
        if size < 2 {
            return Err(TableError::TooSmall { size, min: 2 });
        }
        Ok(LinearTable {
            slots: vec![None; size],
            count: 0,
            probes_total: 0,
        })
    }

    pub fn size(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Maximum number of keys: one slot always stays empty.
    pub fn capacity(&self) -> usize {
        self.slots.len() - 1
    }

    /// Sum of the probe counts returned by every successful insertion.
    pub fn probes_total(&self) -> u64 {
        self.probes_total
    }

    pub fn slots(&self) -> &[Option<Entry>] {
        &self.slots
    }

    #[inline]
    fn next(&self, s: usize) -> usize {
        if s + 1 == self.slots.len() {
            0
        } else {
            s + 1
        }
    }

    /// Cyclic distance from `from` forward to `to`.
    #[inline]
    fn offset(&self, from: usize, to: usize) -> usize {
        if to >= from {
            to - from
        } else {
            to + self.slots.len() - from
        }
    }

    fn check_home(&self, home: usize) -> Result<(), TableError> {
        if home >= self.slots.len() {
            Err(TableError::HomeOutOfRange {
                home,
                size: self.slots.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Inserts `key` with home slot `home`, returning the number of slots
    /// inspected across the whole displacement chain.
    pub fn insert(&mut self, key: u64, home: usize) -> Result<u64, TableError> {
        self.check_home(home)?;
        if self.locate(key, home).is_some() {
            return Err(TableError::Duplicate(key));
        }
        if self.count >= self.capacity() {
            return Err(TableError::Capacity {
                count: self.count,
                capacity: self.capacity(),
            });
        }

        let mut carried = Entry { key, home };
        let mut slot = home;
        let mut probes = 0u64;
        loop {
            probes += 1;
            match self.slots[slot] {
                None => {
                    self.slots[slot] = Some(carried);
                    break;
                }
                Some(occupant) => {
                    // The occupant's home lies outside carried.home + [i + 1]
                    // exactly when it is displaced further than `i`.
                    let i = self.offset(carried.home, slot);
                    if self.offset(occupant.home, slot) > i {
                        self.slots[slot] = Some(carried);
                        carried = occupant;
                    }
                }
            }
            slot = self.next(slot);
        }
        self.count += 1;
        self.probes_total += probes;
        Ok(probes)
    }

    fn locate(&self, key: u64, home: usize) -> Option<usize> {
        let mut slot = home;
        for _ in 0..self.slots.len() {
            match self.slots[slot] {
                None => return None,
                Some(e) if e.key == key => return Some(slot),
                Some(_) => slot = self.next(slot),
            }
        }
        None
    }

    /// Scans from `home` until the key or an empty slot is found. The probe
    /// count includes the terminating slot.
    pub fn search(&self, key: u64, home: usize) -> Result<(bool, u64), TableError> {
        self.check_home(home)?;
        let mut slot = home;
        let mut probes = 0u64;
        loop {
            probes += 1;
            match self.slots[slot] {
                None => return Ok((false, probes)),
                Some(e) if e.key == key => return Ok((true, probes)),
                Some(_) => slot = self.next(slot),
            }
        }
    }

    pub fn contains(&self, key: u64, home: usize) -> bool {
        home < self.slots.len() && self.locate(key, home).is_some()
    }

    /// Displacement of the key resting in `slot`.
    pub fn displacement(&self, slot: usize) -> Option<usize> {
        self.slots[slot].map(|e| self.offset(e.home, slot))
    }

    /// `sum(1 + d_i)` over the stored keys.
    pub fn total_cost(&self) -> u64 {
        (0..self.slots.len())
            .filter_map(|s| self.displacement(s))
            .map(|d| 1 + d as u64)
            .sum()
    }

    /// Home slots of every stored key.
    pub fn homes(&self) -> Vec<usize> {
        self.slots.iter().flatten().map(|e| e.home).collect()
    }

    /// Checks that every slot between a key's home and its resting slot is
    /// occupied. Returns the first offending slot.
    pub fn check_no_gap(&self) -> Result<(), usize> {
        for (s, e) in self.slots.iter().enumerate() {
            let Some(e) = e else { continue };
            let mut t = e.home;
            while t != s {
                if self.slots[t].is_none() {
                    return Err(s);
                }
                t = self.next(t);
            }
        }
        Ok(())
    }

    /// One line per slot: `index,key,home,displacement` or `index,EMPTY`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (s, e) in self.slots.iter().enumerate() {
            match e {
                Some(e) => {
                    let d = self.offset(e.home, s);
                    writeln!(out, "{s},{},{},{d}", e.key, e.home).unwrap();
                }
                None => writeln!(out, "{s},EMPTY").unwrap(),
            }
        }
        out
    }
}

/// True iff at least `length` of the `homes` fall into the cyclic interval
/// `{start, start + 1, ..., start + length - 1} mod r`.
pub fn fully_loaded(homes: &[usize], start: usize, length: usize, r: usize) -> bool {
    let hits = homes
        .iter()
        .filter(|&&h| (h + r - start % r) % r < length)
        .count();
    hits >= length
}
