//! Blocked probing over a power-of-two table.
//!
//! Around every home slot `h` the table is covered by nested aligned blocks
//! `V^i(h) = {h ⊖ 2^i, ..., h ⊖ 2^i + 2^i - 1}`. A probe sequence visits
//! `V^0(h) = {h}` and then, level by level, the untraversed half of the next
//! block. Level `i >= 1` therefore holds `2^(i-1)` slots and
//! `d(h, y)` (see [`metric`]) is the level at which slot `y` is reached.
//!
//! Two traversal orders are provided. [`Traversal::Bidirectional`] walks each
//! new half sequentially away from the already visited block, which makes
//! the scheme a variant of bidirectional linear probing. [`Traversal::Xor`]
//! probes `h xor j` for `j = 0, 1, 2, ...`.
//!
//! The table maintains the level invariant: a key stored at level `i` has all
//! of `V^0(h), ..., V^(i-1)(h)` fully occupied by keys whose homes lie
//! inside the respective block. Searches rely on it to stop after any level
//! whose block has a hole or a foreign key.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::linear_probe::{Entry, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Traversal {
    Bidirectional,
    Xor,
}

/// `x ⊖ a = x - (x mod a)`.
#[inline]
pub fn block_align(x: usize, a: usize) -> usize {
    x - x % a
}

/// `d(y1, y2)`: the smallest `i` with `y2` inside the aligned block of size
/// `2^i` that contains `y1`.
#[inline]
pub fn metric(y1: usize, y2: usize) -> u32 {
    usize::BITS - (y1 ^ y2).leading_zeros()
}

#[inline]
fn level_len(level: u32) -> usize {
    if level == 0 {
        1
    } else {
        1 << (level - 1)
    }
}

/// The `j`-th slot visited at `level` when probing from `home`.
#[inline]
fn level_slot(home: usize, level: u32, j: usize, traversal: Traversal) -> usize {
    if level == 0 {
        return home;
    }
    let half = 1usize << (level - 1);
    match traversal {
        Traversal::Xor => home ^ (half + j),
        Traversal::Bidirectional => {
            let base = block_align(home, half);
            if home & half == 0 {
                base + half + j
            } else {
                base - 1 - j
            }
        }
    }
}

fn level_slots(home: usize, level: u32, traversal: Traversal) -> impl Iterator<Item = usize> {
    (0..level_len(level)).map(move |j| level_slot(home, level, j, traversal))
}

/// Full probe sequence from `home` in a table of size `r` (a power of two).
pub fn probe_sequence(home: usize, r: usize, traversal: Traversal) -> Vec<usize> {
    let levels = r.trailing_zeros();
    (0..=levels)
        .flat_map(|level| level_slots(home, level, traversal))
        .collect()
}

#[derive(Debug, Clone)]
pub struct BlockedTable {
    slots: Vec<Option<Entry>>,
    levels: u32,
    traversal: Traversal,
    count: usize,
    repair: bool,
}

/// A violation reported by [`BlockedTable::check_level_invariant`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelViolation {
    pub slot: usize,
    pub level: u32,
    pub block_level: u32,
}

impl BlockedTable {
    pub fn new(size: usize, traversal: Traversal) -> Result<Self, TableError> {
        if !size.is_power_of_two() {
            return Err(TableError::NotPowerOfTwo(size));
        }
        Ok(BlockedTable {
            slots: vec![None; size],
            levels: size.trailing_zeros(),
            traversal,
            count: 0,
            repair: true,
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

    pub fn traversal(&self) -> Traversal {
        self.traversal
    }

    pub fn slots(&self) -> &[Option<Entry>] {
        &self.slots
    }

    /// Disables the post-deletion repair pass. Only useful for demonstrating
    /// that the differential checker catches a broken table.
    #[doc(hidden)]
    pub fn disable_repair(&mut self) {
        self.repair = false;
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

    /// Follows the probe sequence with stop rules; returns the slot holding
    /// `key` (if any) and the number of inspected slots.
    fn find(&self, key: u64, home: usize) -> (Option<usize>, u64) {
        let mut probes = 0;
        for level in 0..=self.levels {
            let mut stop = false;
            for s in level_slots(home, level, self.traversal) {
                probes += 1;
                match self.slots[s] {
                    None => stop = true,
                    Some(e) if e.key == key => return (Some(s), probes),
                    Some(e) => stop |= metric(home, e.home) > level,
                }
            }
            if stop {
                break;
            }
        }
        (None, probes)
    }

    /// Returns whether `key` is stored and the number of probes spent.
    ///
    /// The search stops immediately when the key is found, and otherwise
    /// only at the end of a level whose block contained an empty slot or a
    /// key hashed outside it.
    pub fn search(&self, key: u64, home: usize) -> Result<(bool, u64), TableError> {
        self.check_home(home)?;
        let (slot, probes) = self.find(key, home);
        Ok((slot.is_some(), probes))
    }

    pub fn contains(&self, key: u64, home: usize) -> bool {
        home < self.slots.len() && self.find(key, home).0.is_some()
    }

    /// Inserts `key`, evicting any occupant that is strictly farther from
    /// its own home (in the metric `d`). An evicted key resumes from the
    /// level at which it was stored. Returns the slots inspected along the
    /// whole chain.
    pub fn insert(&mut self, key: u64, home: usize) -> Result<u64, TableError> {
        self.check_home(home)?;
        if self.find(key, home).0.is_some() {
            return Err(TableError::Duplicate(key));
        }
        if self.count >= self.slots.len() {
            return Err(TableError::Capacity {
                count: self.count,
                capacity: self.slots.len(),
            });
        }

        let mut carried = Entry { key, home };
        let mut start_level = 0;
        let mut skip = None;
        let mut probes = 0;
        'chain: loop {
            let from = start_level;
            for level in from..=self.levels {
                for s in level_slots(carried.home, level, self.traversal) {
                    if skip == Some(s) {
                        continue;
                    }
                    probes += 1;
                    match self.slots[s] {
                        None => {
                            self.slots[s] = Some(carried);
                            break 'chain;
                        }
                        Some(occupant) => {
                            let occupant_level = metric(occupant.home, s);
                            if level < occupant_level {
                                self.slots[s] = Some(carried);
                                carried = occupant;
                                start_level = occupant_level;
                                skip = Some(s);
                                continue 'chain;
                            }
                        }
                    }
                }
            }
            unreachable!("a table below capacity always has an empty slot on every probe path");
        }
        self.count += 1;
        Ok(probes)
    }

    /// Removes `key` if present and repairs the table. Returns the probes of
    /// the search plus those of the repair scan. Deleting an absent key
    /// costs exactly an unsuccessful search.
    pub fn delete(&mut self, key: u64, home: usize) -> Result<u64, TableError> {
        self.check_home(home)?;
        let (slot, mut probes) = self.find(key, home);
        let Some(slot) = slot else {
            return Ok(probes);
        };
        self.slots[slot] = None;
        self.count -= 1;
        if self.repair {
            probes += self.repair_from(slot, metric(home, slot));
        }
        Ok(probes)
    }

    /// Refills the hole left at `hole` by a key that sat at `level` relative
    /// to its home.
    ///
    /// Rings around the hole are scanned in increasing size, skipping the
    /// ring at `level` (the departed key's lower block, whose keys are all
    /// native to it). Scanning stops after the inner region, or any later
    /// ring, that contains another empty slot. Among keys that would get
    /// strictly closer to home by moving into the hole, the one whose new
    /// level would be smallest is moved (ties: largest current level, then
    /// lowest slot), and the procedure repeats from its old slot.
    fn repair_from(&mut self, mut hole: usize, mut level: u32) -> u64 {
        let mut probes = 0;
        loop {
            // (target level, current level, slot)
            let mut best: Option<(u32, u32, usize)> = None;
            let mut saw_empty = false;
            for ring in 1..=self.levels {
                if ring == level {
                    continue;
                }
                for s in level_slots(hole, ring, self.traversal) {
                    probes += 1;
                    match self.slots[s] {
                        None => saw_empty = true,
                        Some(e) => {
                            let current = metric(e.home, s);
                            let target = metric(e.home, hole);
                            if target < current {
                                let better = match best {
                                    None => true,
                                    Some((bt, bc, bs)) => {
                                        (target, std::cmp::Reverse(current), s)
                                            < (bt, std::cmp::Reverse(bc), bs)
                                    }
                                };
                                if better {
                                    best = Some((target, current, s));
                                }
                            }
                        }
                    }
                }
                if saw_empty && ring + 1 >= level {
                    break;
                }
            }
            let Some((_, current, from)) = best else {
                return probes;
            };
            self.slots[hole] = self.slots[from].take();
            hole = from;
            level = current;
        }
    }

    /// Verifies the level invariant for every stored key.
    pub fn check_level_invariant(&self) -> Result<(), LevelViolation> {
        for (y, e) in self.slots.iter().enumerate() {
            let Some(e) = e else { continue };
            let level = metric(e.home, y);
            for j in 0..level {
                let size = 1usize << j;
                let start = block_align(e.home, size);
                let ok = (start..start + size)
                    .all(|s| self.slots[s].is_some_and(|o| block_align(o.home, size) == start));
                if !ok {
                    return Err(LevelViolation {
                        slot: y,
                        level,
                        block_level: j,
                    });
                }
            }
        }
        Ok(())
    }

    /// Returns the first stored key that could reach a strictly lower level
    /// by moving into some empty slot, as `(slot, empty_slot)`.
    pub fn find_improvable(&self) -> Option<(usize, usize)> {
        let empties: Vec<usize> = (0..self.slots.len())
            .filter(|&s| self.slots[s].is_none())
            .collect();
        for (y, e) in self.slots.iter().enumerate() {
            let Some(e) = e else { continue };
            let level = metric(e.home, y);
            if let Some(&z) = empties.iter().find(|&&z| metric(e.home, z) < level) {
                return Some((y, z));
            }
        }
        None
    }

    /// One line per slot: `index,key,home,displacement,level` or `index,EMPTY`.
    pub fn dump(&self) -> String {
        let r = self.slots.len();
        let mut out = String::new();
        for (s, e) in self.slots.iter().enumerate() {
            match e {
                Some(e) => {
                    let d = (s + r - e.home) % r;
                    let level = metric(e.home, s);
                    writeln!(out, "{s},{},{},{d},{level}", e.key, e.home).unwrap();
                }
                None => writeln!(out, "{s},EMPTY").unwrap(),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{BTreeSet, HashMap};

    const BOTH: [Traversal; 2] = [Traversal::Bidirectional, Traversal::Xor];

    fn slot_of(t: &BlockedTable, key: u64) -> Option<usize> {
        t.slots()
            .iter()
            .position(|e| e.is_some_and(|e| e.key == key))
    }

    #[test]
    fn block_align_examples() {
        assert_eq!(block_align(13, 4), 12);
        assert_eq!(block_align(12, 4), 12);
        assert_eq!(block_align(5, 8), 0);
    }

    #[test]
    fn metric_examples() {
        for y in 0..64 {
            assert_eq!(metric(y, y), 0);
        }
        assert_eq!(metric(4, 5), 1);
        assert_eq!(metric(3, 4), 3);
        // Against the block definition.
        for y1 in 0..32usize {
            for y2 in 0..32usize {
                let brute = (0..=5)
                    .find(|&i| block_align(y1, 1 << i) == block_align(y2, 1 << i))
                    .unwrap();
                assert_eq!(metric(y1, y2), brute);
            }
        }
    }

    #[test]
    fn probe_sequence_examples() {
        assert_eq!(
            probe_sequence(0, 8, Traversal::Xor),
            (0..8).collect::<Vec<_>>()
        );
        assert_eq!(
            probe_sequence(5, 8, Traversal::Bidirectional),
            vec![5, 4, 6, 7, 3, 2, 1, 0]
        );
        assert_eq!(
            probe_sequence(5, 8, Traversal::Xor),
            vec![5, 4, 7, 6, 1, 0, 3, 2]
        );
    }

    #[test]
    fn probe_sequence_prefixes_are_aligned_blocks() {
        for r in (0..=8).map(|e| 1usize << e) {
            for traversal in BOTH {
                for home in 0..r {
                    let seq = probe_sequence(home, r, traversal);
                    assert_eq!(seq.len(), r);
                    for i in 0..=r.trailing_zeros() {
                        let len = 1usize << i;
                        let start = block_align(home, len);
                        let prefix: BTreeSet<_> = seq[..len].iter().copied().collect();
                        let block: BTreeSet<_> = (start..start + len).collect();
                        assert_eq!(prefix, block, "home {home} r {r} level {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn search_examples() {
        for traversal in BOTH {
            let mut t = BlockedTable::new(4, traversal).unwrap();
            assert_eq!(t.search(1, 2), Ok((false, 1)));
            t.insert(1, 2).unwrap();
            assert_eq!(t.search(1, 2), Ok((true, 1)));

            let mut t = BlockedTable::new(4, traversal).unwrap();
            t.insert(10, 0).unwrap();
            t.insert(11, 0).unwrap();
            assert_eq!(slot_of(&t, 11), Some(1));
            assert_eq!(t.search(99, 1), Ok((false, 1)));
        }
    }

    #[test]
    fn insert_walks_levels_in_order() {
        for traversal in BOTH {
            let mut t = BlockedTable::new(4, traversal).unwrap();
            assert_eq!(t.insert(0xA, 3), Ok(1));
            assert_eq!(t.insert(0xB, 2), Ok(1));
            // Probes 3, 2, then slot 1 opens level 2 for home 3.
            assert_eq!(t.insert(0xC, 3), Ok(3));
            assert_eq!(slot_of(&t, 0xC), Some(1));
            assert_eq!(t.insert(0xD, 0), Ok(1));
            let layout: Vec<_> = (0..4).map(|s| t.slots()[s].unwrap().key).collect();
            assert_eq!(layout, vec![0xD, 0xC, 0xB, 0xA]);
            assert!(t.check_level_invariant().is_ok());
            assert!(matches!(t.insert(0xE, 1), Err(TableError::Capacity { .. })));
        }
    }

    #[test]
    fn insert_with_eviction_chain() {
        for traversal in BOTH {
            let mut t = BlockedTable::new(4, traversal).unwrap();
            t.insert(0xA, 3).unwrap();
            t.insert(0xC, 3).unwrap();
            assert_eq!(slot_of(&t, 0xC), Some(2));
            // B claims its home from C (level 1 there); C resumes at level 1,
            // whose only slot is taken, and lands at level 2 in slot 1.
            assert_eq!(t.insert(0xB, 2), Ok(2));
            assert_eq!(slot_of(&t, 0xB), Some(2));
            assert_eq!(slot_of(&t, 0xC), Some(1));
            assert!(t.check_level_invariant().is_ok());
        }
    }

    #[test]
    fn delete_examples() {
        for traversal in BOTH {
            let mut t = BlockedTable::new(4, traversal).unwrap();
            t.insert(1, 0).unwrap();
            let before = t.dump();
            let (_, miss) = t.search(7, 2).unwrap();
            assert_eq!(t.delete(7, 2), Ok(miss));
            assert_eq!(t.dump(), before);

            // Sole key: search (1) + repair scanning slot 1, which is empty.
            assert_eq!(t.delete(1, 0), Ok(2));
            assert!(t.is_empty());

            let mut t = BlockedTable::new(4, traversal).unwrap();
            t.insert(0xA, 0).unwrap();
            t.insert(0xB, 0).unwrap();
            // Search 1. Repair from slot 0 scans {1} (B is a candidate) and
            // {2, 3} (empty, stop), moves B, then from slot 1 scans {2, 3}.
            assert_eq!(t.delete(0xA, 0), Ok(1 + 3 + 2));
            assert_eq!(slot_of(&t, 0xB), Some(0));
            assert!(t.check_level_invariant().is_ok());
        }
    }

    #[test]
    fn repair_prefers_the_smallest_target_level() {
        // x (home 0) at 0, w (home 0) pushed to level 2, z (home 1) pushed to
        // level 3. Deleting x must move w into slot 0, not z.
        let mut t = BlockedTable::new(8, Traversal::Xor).unwrap();
        for (key, home) in [(100, 0), (101, 1), (102, 0), (103, 3), (104, 1)] {
            t.insert(key, home).unwrap();
            t.check_level_invariant().unwrap();
        }
        assert_eq!(metric(1, slot_of(&t, 104).unwrap()), 3);
        t.delete(100, 0).unwrap();
        t.check_level_invariant().unwrap();
        assert!(t.find_improvable().is_none());
        for (key, home) in [(101, 1), (102, 0), (103, 3), (104, 1)] {
            assert!(t.contains(key, home));
        }
    }

    #[test]
    fn construction_and_errors() {
        assert_eq!(
            BlockedTable::new(6, Traversal::Xor).unwrap_err(),
            TableError::NotPowerOfTwo(6)
        );
        let mut t = BlockedTable::new(2, Traversal::Xor).unwrap();
        t.insert(5, 1).unwrap();
        assert_eq!(t.insert(5, 1), Err(TableError::Duplicate(5)));
        assert!(t.insert(6, 2).is_err());
        t.insert(6, 1).unwrap();
        assert_eq!(t.search(7, 0), Ok((false, 1)));
        assert_eq!(t.search(7, 1), Ok((false, 2)));
    }

    #[test]
    fn dump_has_level_column() {
        let mut t = BlockedTable::new(4, Traversal::Bidirectional).unwrap();
        t.insert(1, 3).unwrap();
        t.insert(2, 3).unwrap();
        assert_eq!(t.dump(), "0,EMPTY\n1,EMPTY\n2,2,3,3,1\n3,1,3,0,0\n");
    }

    #[derive(Debug, Clone)]
    enum Op {
        Insert(u64),
        Delete(u64),
        Search(u64),
    }

    fn op_strategy() -> impl Strategy<Value = Op> {
        prop_oneof![
            3 => (0u64..40).prop_map(Op::Insert),
            2 => (0u64..40).prop_map(Op::Delete),
            1 => (0u64..40).prop_map(Op::Search),
        ]
    }

    proptest! {
        #[test]
        fn random_operations_keep_invariants(
            log_r in 0u32..=5,
            xor in any::<bool>(),
            salt in any::<u64>(),
            ops in proptest::collection::vec(op_strategy(), 1..200),
        ) {
            let r = 1usize << log_r;
            let traversal = if xor { Traversal::Xor } else { Traversal::Bidirectional };
            let home = |k: u64| ((k.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt) >> 7) as usize % r;
            let mut t = BlockedTable::new(r, traversal).unwrap();
            let mut model: HashMap<u64, ()> = HashMap::new();
            for op in ops {
                match op {
                    Op::Insert(k) => {
                        let res = t.insert(k, home(k));
                        if model.contains_key(&k) {
                            prop_assert_eq!(res, Err(TableError::Duplicate(k)));
                        } else if model.len() == r {
                            prop_assert!(res.is_err());
                        } else {
                            prop_assert!(res.is_ok());
                            model.insert(k, ());
                        }
                    }
                    Op::Delete(k) => {
                        t.delete(k, home(k)).unwrap();
                        model.remove(&k);
                    }
                    Op::Search(k) => {
                        let (found, probes) = t.search(k, home(k)).unwrap();
                        prop_assert_eq!(found, model.contains_key(&k));
                        if !found {
                            prop_assert!(probes.is_power_of_two());
                        }
                    }
                }
                prop_assert!(t.check_level_invariant().is_ok(), "{}", t.dump());
                prop_assert!(t.find_improvable().is_none(), "{}", t.dump());
                prop_assert_eq!(t.len(), model.len());
            }
            for k in model.keys() {
                prop_assert!(t.contains(*k, home(*k)));
            }
        }
    }
}
