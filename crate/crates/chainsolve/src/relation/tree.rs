//! Family tree sampling oracle.
//!
//! Composition table entries are not hand-written: they are observed
//! facts about randomly generated family trees. A tree is a set of
//! monogamous couples and their children, with marriages only between
//! people who share no ancestor, so every ordered pair of people has
//! at most one vocabulary label. `generate_table` collects, for every
//! premise pair (A is X's r1, X is B's r2), the set of labels A ends
//! up having toward B across many sampled trees, and keeps the entry
//! when one label wins. `verify_table` replays the same sampling
//! against a finished table and reports any entry whose claimed
//! conclusion is never observed.

use super::{AmbiguousEntry, CompositionTable, EntryRow, Gender, KinRelation};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Largest tree the generator will grow. Small trees keep the triple
/// scan cheap while still realizing every two-hop premise pattern.
const MAX_PERSONS: usize = 15;

const REL_COUNT: usize = KinRelation::ALL.len();

#[derive(Clone, Debug)]
pub struct Person {
    pub gender: Gender,
    /// Father and mother, absent for founders and married-in spouses.
    pub parents: Option<(usize, usize)>,
    pub spouse: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct FamilyTree {
    pub persons: Vec<Person>,
}

impl FamilyTree {
    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn add(&mut self, gender: Gender, parents: Option<(usize, usize)>) -> usize {
        self.persons.push(Person {
            gender,
            parents,
            spouse: None,
        });
        self.persons.len() - 1
    }

    pub fn marry(&mut self, a: usize, b: usize) {
        self.persons[a].spouse = Some(b);
        self.persons[b].spouse = Some(a);
    }

    /// Bitmask of `p` and all ancestors of `p`. Trees never exceed
    /// [`MAX_PERSONS`] members, so a u32 suffices.
    fn ancestry(&self, p: usize) -> u32 {
        let mut mask = 1u32 << p;
        if let Some((f, m)) = self.persons[p].parents {
            mask |= self.ancestry(f) | self.ancestry(m);
        }
        mask
    }

    pub fn blood_related(&self, a: usize, b: usize) -> bool {
        self.ancestry(a) & self.ancestry(b) != 0
    }

    fn is_parent(&self, a: usize, b: usize) -> bool {
        matches!(self.persons[b].parents, Some((f, m)) if f == a || m == a)
    }

    fn are_siblings(&self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        match (self.persons[a].parents, self.persons[b].parents) {
            (Some(pa), Some(pb)) => pa == pb,
            _ => false,
        }
    }

    fn is_grandparent(&self, a: usize, b: usize) -> bool {
        match self.persons[b].parents {
            Some((f, m)) => self.is_parent(a, f) || self.is_parent(a, m),
            None => false,
        }
    }

    /// The vocabulary label for "a is b's ___", or None when their
    /// connection has no name here (same person, cousins, relations
    /// deeper than grandparents, spouses of grandchildren).
    pub fn relation_of(&self, a: usize, b: usize) -> Option<KinRelation> {
        use KinRelation::*;
        if a == b {
            return None;
        }
        let male = self.persons[a].gender == Gender::Male;
        let pick = |m: KinRelation, f: KinRelation| if male { m } else { f };
        if self.persons[b].spouse == Some(a) {
            return Some(pick(Husband, Wife));
        }
        if self.is_parent(a, b) {
            return Some(pick(Father, Mother));
        }
        if self.is_parent(b, a) {
            return Some(pick(Son, Daughter));
        }
        if self.are_siblings(a, b) {
            return Some(pick(Brother, Sister));
        }
        if self.is_grandparent(a, b) {
            return Some(pick(Grandfather, Grandmother));
        }
        if self.is_grandparent(b, a) {
            return Some(pick(Grandson, Granddaughter));
        }
        // Uncle and aunt cover a parent's sibling and that sibling's
        // spouse; nephew and niece are their inverses.
        if let Some((f, m)) = self.persons[b].parents {
            if self.are_siblings(a, f) || self.are_siblings(a, m) {
                return Some(pick(Uncle, Aunt));
            }
            if let Some(s) = self.persons[a].spouse {
                if self.are_siblings(s, f) || self.are_siblings(s, m) {
                    return Some(pick(Uncle, Aunt));
                }
            }
        }
        if let Some((f, m)) = self.persons[a].parents {
            if self.are_siblings(b, f) || self.are_siblings(b, m) {
                return Some(pick(Nephew, Niece));
            }
            if let Some(s) = self.persons[b].spouse {
                if self.are_siblings(s, f) || self.are_siblings(s, m) {
                    return Some(pick(Nephew, Niece));
                }
            }
        }
        if let Some(s) = self.persons[b].spouse {
            if self.is_parent(a, s) {
                return Some(pick(FatherInLaw, MotherInLaw));
            }
        }
        if let Some(s) = self.persons[a].spouse {
            if self.is_parent(b, s) {
                return Some(pick(SonInLaw, DaughterInLaw));
            }
        }
        // Sibling-in-law covers a spouse's sibling and a sibling's
        // spouse, not the spouse of a spouse's sibling.
        if let Some(s) = self.persons[b].spouse {
            if self.are_siblings(a, s) {
                return Some(pick(BrotherInLaw, SisterInLaw));
            }
        }
        if let Some(s) = self.persons[a].spouse {
            if self.are_siblings(s, b) {
                return Some(pick(BrotherInLaw, SisterInLaw));
            }
        }
        None
    }

    /// Flat n*n matrix of labels, row = first argument.
    pub fn label_matrix(&self) -> Vec<Option<KinRelation>> {
        let n = self.len();
        let mut m = vec![None; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m[a * n + b] = self.relation_of(a, b);
                }
            }
        }
        m
    }
}

/// Grows a random tree: one to three founding couples, then up to
/// three descent levels whose members marry across bloodlines or bring
/// in outside spouses. Four generations at most.
pub fn random_tree<R: Rng>(rng: &mut R) -> FamilyTree {
    let mut t = FamilyTree::default();
    let families = rng.gen_range(1..=3);
    let mut couples: Vec<(usize, usize)> = Vec::new();
    for _ in 0..families {
        let h = t.add(Gender::Male, None);
        let w = t.add(Gender::Female, None);
        t.marry(h, w);
        couples.push((h, w));
    }
    let levels = rng.gen_range(1..=3);
    for _ in 0..levels {
        let mut singles: Vec<usize> = Vec::new();
        for &(f, m) in &couples {
            let kids = rng.gen_range(0..=3);
            for _ in 0..kids {
                if t.len() >= MAX_PERSONS {
                    break;
                }
                let g = if rng.gen_bool(0.5) {
                    Gender::Male
                } else {
                    Gender::Female
                };
                singles.push(t.add(g, Some((f, m))));
            }
        }
        if singles.is_empty() {
            break;
        }
        singles.shuffle(rng);
        let mut taken = vec![false; singles.len()];
        let mut next: Vec<(usize, usize)> = Vec::new();
        for i in 0..singles.len() {
            if taken[i] || !rng.gen_bool(0.8) {
                continue;
            }
            let a = singles[i];
            let mut partner = None;
            for (j, &b) in singles.iter().enumerate().skip(i + 1) {
                if !taken[j]
                    && t.persons[a].gender != t.persons[b].gender
                    && !t.blood_related(a, b)
                {
                    partner = Some((j, b));
                    break;
                }
            }
            let b = match partner {
                Some((j, b)) => {
                    taken[j] = true;
                    b
                }
                None if t.len() < MAX_PERSONS && rng.gen_bool(0.7) => {
                    let g = match t.persons[a].gender {
                        Gender::Male => Gender::Female,
                        Gender::Female => Gender::Male,
                    };
                    t.add(g, None)
                }
                None => continue,
            };
            taken[i] = true;
            t.marry(a, b);
            let couple = if t.persons[a].gender == Gender::Male {
                (a, b)
            } else {
                (b, a)
            };
            next.push(couple);
        }
        couples = next;
        if couples.is_empty() {
            break;
        }
    }
    t
}

/// Applies `f(r1, r2, label(a, b))` for every ordered triple (a, x, b)
/// of distinct people where a is x's r1 and x is b's r2.
fn scan_triples(tree: &FamilyTree, mut f: impl FnMut(KinRelation, KinRelation, Option<KinRelation>)) {
    let n = tree.len();
    let labels = tree.label_matrix();
    for x in 0..n {
        for a in 0..n {
            let Some(r1) = labels[a * n + x] else { continue };
            for b in 0..n {
                if b == a {
                    continue;
                }
                let Some(r2) = labels[x * n + b] else { continue };
                f(r1, r2, labels[a * n + b]);
            }
        }
    }
}

fn idx(l: KinRelation, r: KinRelation) -> usize {
    l as usize * REL_COUNT + r as usize
}

fn decode_mask(mask: u32) -> Vec<KinRelation> {
    KinRelation::ALL
        .into_iter()
        .filter(|&r| mask & (1 << r as u32) != 0)
        .collect()
}

/// Samples `trials` trees and builds a table from the observations.
/// Premises with a single observed conclusion become entries directly.
/// Premises with several conclusions keep the entry only when exactly
/// one of them is a blood relation; all such cases are recorded in the
/// table's ambiguity metadata.
pub fn generate_table(trials: u64, seed: u64) -> CompositionTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![0u32; REL_COUNT * REL_COUNT];
    for _ in 0..trials {
        let tree = random_tree(&mut rng);
        scan_triples(&tree, |r1, r2, conclusion| {
            if let Some(c) = conclusion {
                observed[idx(r1, r2)] |= 1 << c as u32;
            }
        });
    }
    let mut table = CompositionTable::new();
    let mut ambiguous = Vec::new();
    for l in KinRelation::ALL {
        for r in KinRelation::ALL {
            let conclusions = decode_mask(observed[idx(l, r)]);
            match conclusions.as_slice() {
                [] => {}
                [only] => table.insert(l, r, *only),
                several => {
                    let bloods: Vec<KinRelation> =
                        several.iter().copied().filter(|c| c.is_blood()).collect();
                    let resolved = match bloods.as_slice() {
                        [winner] => Some(*winner),
                        _ => None,
                    };
                    if let Some(winner) = resolved {
                        table.insert(l, r, winner);
                    }
                    ambiguous.push(AmbiguousEntry {
                        left: l,
                        right: r,
                        observed: several.to_vec(),
                        resolved,
                    });
                }
            }
        }
    }
    table.set_ambiguous(ambiguous);
    prune_for_associativity(&mut table);
    table
}

/// Entries that bundled exemplar chains and the certification examples
/// exercise; pruning never removes them.
const PROTECTED: [(KinRelation, KinRelation); 6] = [
    (KinRelation::Son, KinRelation::Daughter),
    (KinRelation::Grandfather, KinRelation::Daughter),
    (KinRelation::Grandmother, KinRelation::Son),
    (KinRelation::Brother, KinRelation::Brother),
    (KinRelation::Mother, KinRelation::Sister),
    (KinRelation::Mother, KinRelation::Brother),
];

/// Removes entries until composition is associative wherever both
/// bracketings are defined.
///
/// Individually sound entries can still disagree three at a time: when
/// a premise pair admits both a blood and an in-law reading, the table
/// commits to the blood one, but a different bracketing of the same
/// three-hop chain can route around the committed entry and reach the
/// in-law answer. No assignment of single conclusions fixes that, so
/// the losing entries are dropped instead. Greedy selection removes
/// the entry participating in the most conflicts first, preferring
/// resolved-ambiguous entries over unambiguous ones; every removal is
/// recorded in the table's pruned list.
fn prune_for_associativity(table: &mut CompositionTable) {
    let protected: BTreeSet<(KinRelation, KinRelation)> = PROTECTED.into_iter().collect();
    let resolved_ambiguous: BTreeSet<(KinRelation, KinRelation)> = table
        .ambiguous()
        .iter()
        .filter(|a| a.resolved.is_some())
        .map(|a| (a.left, a.right))
        .collect();
    let mut pruned = Vec::new();
    loop {
        let mut participation: BTreeMap<(KinRelation, KinRelation), u64> = BTreeMap::new();
        let mut conflicts = 0u64;
        let snapshot: Vec<_> = table.entries().collect();
        for &(r1, r2, a) in &snapshot {
            for r3 in KinRelation::ALL {
                let (Some(left), Some(b)) = (table.get(a, r3), table.get(r2, r3)) else {
                    continue;
                };
                let Some(right) = table.get(r1, b) else {
                    continue;
                };
                if left == right {
                    continue;
                }
                conflicts += 1;
                for key in [(r1, r2), (a, r3), (r2, r3), (r1, b)] {
                    if !protected.contains(&key) {
                        *participation.entry(key).or_insert(0) += 1;
                    }
                }
            }
        }
        if conflicts == 0 {
            break;
        }
        let (_, _, victim) = participation
            .iter()
            .map(|(&key, &count)| {
                let class = u8::from(!resolved_ambiguous.contains(&key));
                (class, std::cmp::Reverse(count), key)
            })
            .min()
            .expect("conflicts never involve only protected entries");
        let result = table.get(victim.0, victim.1).expect("victim is defined");
        table.remove(victim.0, victim.1);
        pruned.push(EntryRow {
            left: victim.0,
            right: victim.1,
            result,
        });
    }
    let removed: BTreeSet<(KinRelation, KinRelation)> =
        pruned.iter().map(|e| (e.left, e.right)).collect();
    let mut ambiguous = table.ambiguous().to_vec();
    for entry in &mut ambiguous {
        if removed.contains(&(entry.left, entry.right)) {
            entry.resolved = None;
        }
    }
    table.set_ambiguous(ambiguous);
    table.set_pruned(pruned);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub left: KinRelation,
    pub right: KinRelation,
    pub expected: KinRelation,
    /// What the premise actually concluded across the sampled trees.
    pub observed: Vec<KinRelation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmbiguousFinding {
    pub left: KinRelation,
    pub right: KinRelation,
    pub observed: Vec<KinRelation>,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub trials: u64,
    /// Entries whose conclusion was never observed for a realized
    /// premise.
    pub violations: Vec<Violation>,
    /// Entries whose premise realized at least two distinct
    /// conclusions.
    pub ambiguous: Vec<AmbiguousFinding>,
    /// Entries whose premise never occurred in any sampled tree.
    pub unrealized: Vec<(KinRelation, KinRelation)>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn flags(&self, left: KinRelation, right: KinRelation) -> bool {
        self.ambiguous
            .iter()
            .any(|a| a.left == left && a.right == right)
    }
}

/// Checks every table entry against `trials` freshly sampled trees.
pub fn verify_table(table: &CompositionTable, trials: u64, seed: u64) -> VerifyReport {
    let mut defined = vec![false; REL_COUNT * REL_COUNT];
    for (l, r, _) in table.entries() {
        defined[idx(l, r)] = true;
    }
    let mut realized = vec![0u64; REL_COUNT * REL_COUNT];
    let mut observed = vec![0u32; REL_COUNT * REL_COUNT];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let tree = random_tree(&mut rng);
        scan_triples(&tree, |r1, r2, conclusion| {
            let k = idx(r1, r2);
            if defined[k] {
                realized[k] += 1;
                if let Some(c) = conclusion {
                    observed[k] |= 1 << c as u32;
                }
            }
        });
    }
    let mut report = VerifyReport {
        trials,
        ..VerifyReport::default()
    };
    for (l, r, expected) in table.entries() {
        let k = idx(l, r);
        if realized[k] == 0 {
            report.unrealized.push((l, r));
            continue;
        }
        let conclusions = decode_mask(observed[k]);
        if !conclusions.contains(&expected) {
            report.violations.push(Violation {
                left: l,
                right: r,
                expected,
                observed: conclusions.clone(),
            });
        }
        if conclusions.len() >= 2 {
            report.ambiguous.push(AmbiguousFinding {
                left: l,
                right: r,
                observed: conclusions,
            });
        }
    }
    report
}

/// Observation counts for one premise pair across sampled trees, used
/// by tests to probe specific compositions.
pub fn observe_pair(
    left: KinRelation,
    right: KinRelation,
    trials: u64,
    seed: u64,
) -> BTreeMap<KinRelation, u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..trials {
        let tree = random_tree(&mut rng);
        scan_triples(&tree, |r1, r2, conclusion| {
            if r1 == left && r2 == right {
                if let Some(c) = conclusion {
                    *counts.entry(c).or_insert(0) += 1;
                }
            }
        });
    }
    counts
}
