//! Conjugacy classes of the free group as canonical cyclic words.
//!
//! Classes are generated directly as necklaces (least rotations) over the
//! cyclically reduced language with a Fredricksen-Kessler-Maiorana style
//! backtracking, so the work is proportional to the output.

use std::fmt;

use crate::error::{CensusError, Result};
use crate::group::{reduce_word, Letter, Word};

/// A cyclically reduced word, stored as its least rotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CyclicWord {
    letters: Vec<Letter>,
}

impl CyclicWord {
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn to_word(&self) -> Word {
        Word::from(self.letters.clone())
    }

    /// Class of the inverse element.
    pub fn inverse(&self) -> CyclicWord {
        canonical_form(&self.to_word().inverse()).expect("inverse of a nonempty class is nonempty")
    }

    /// Both invariants: cyclically reduced and least among rotations.
    pub fn is_valid(&self) -> bool {
        let n = self.letters.len();
        n > 0
            && Word::is_reduced(&self.letters)
            && self.letters[n - 1] != self.letters[0].inv()
            && least_rotation(&self.letters) == 0
    }

    /// Trusted constructor for letters already known to be canonical.
    fn from_canonical(letters: Vec<Letter>) -> Self {
        CyclicWord { letters }
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_word().fmt(f)
    }
}

/// Index of the lexicographically least rotation (Booth's algorithm).
fn least_rotation(s: &[Letter]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let at = |i: usize| s[i % n];
    let mut f: Vec<isize> = vec![-1; 2 * n];
    let mut k = 0usize;
    for j in 1..2 * n {
        let sj = at(j);
        let mut i = f[j - k - 1];
        while i != -1 && sj != at(k + i as usize + 1) {
            if sj < at(k + i as usize + 1) {
                k = j - i as usize - 1;
            }
            i = f[i as usize];
        }
        if i == -1 && sj != at(k) {
            if sj < at(k) {
                k = j;
            }
            f[j - k] = -1;
        } else {
            f[j - k] = i + 1;
        }
    }
    k % n
}

/// Freely and cyclically reduced core of w, without rotating: w is the
/// core conjugated by the trimmed prefix.
pub fn cyclic_core(w: &Word) -> Result<Word> {
    let w = reduce_word(w.letters().iter().copied());
    let l = w.letters();
    let (mut lo, mut hi) = (0usize, l.len());
    while hi - lo >= 2 && l[hi - 1] == l[lo].inv() {
        lo += 1;
        hi -= 1;
    }
    if lo == hi {
        return Err(CensusError::IdentityClass);
    }
    Ok(Word::from(l[lo..hi].to_vec()))
}

/// Cyclically reduce and rotate to the least representative.
pub fn canonical_form(w: &Word) -> Result<CyclicWord> {
    let core = cyclic_core(w)?;
    let core = core.letters();
    let r = least_rotation(core);
    let letters = core[r..].iter().chain(&core[..r]).copied().collect();
    Ok(CyclicWord::from_canonical(letters))
}

/// Smallest p with letters[i] = letters[i + p mod n] for all i.
pub fn rotation_period(letters: &[Letter]) -> usize {
    let n = letters.len();
    (1..=n).find(|&p| n % p == 0 && (0..n).all(|i| letters[i] == letters[(i + p) % n])).unwrap_or(n)
}

/// Not a proper power.
pub fn is_primitive(c: &CyclicWord) -> bool {
    rotation_period(&c.letters) == c.len()
}

/// Partition of the class stream by leading letters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shard {
    pub index: usize,
    pub count: usize,
}

impl Shard {
    pub const ALL: Shard = Shard { index: 0, count: 1 };

    pub fn new(index: usize, count: usize) -> Result<Self> {
        if count == 0 || index >= count {
            return Err(CensusError::Validation(format!("shard {index} of {count} is invalid")));
        }
        Ok(Shard { index, count })
    }

    /// Owner of a word, decided by its first two letters (first letter for
    /// single-letter words).
    fn owns(&self, k: usize, letters: &[u8]) -> bool {
        if self.count == 1 {
            return true;
        }
        let rank = match letters {
            [a] => *a as usize,
            [a, b, ..] => 2 * k + (*a as usize) * 2 * k + *b as usize,
            [] => 0,
        };
        rank % self.count == self.index
    }
}

struct Necklaces<'a, F: FnMut(&[u8], bool)> {
    alphabet: u8,
    n: usize,
    a: Vec<u8>,
    primitive_only: bool,
    shard: Shard,
    k: usize,
    emit: &'a mut F,
}

impl<F: FnMut(&[u8], bool)> Necklaces<'_, F> {
    // a is 1-indexed as in the classical formulation; a[0] is unused
    fn gen(&mut self, t: usize, p: usize) {
        if t == 2.min(self.n) + 1 && !self.shard.owns(self.k, &self.a[1..t]) {
            return;
        }
        if t > self.n {
            let n = self.n;
            if n % p == 0 && self.a[n] != self.a[1] ^ 1 {
                let prim = p == n;
                if prim || !self.primitive_only {
                    (self.emit)(&self.a[1..=n], prim);
                }
            }
            return;
        }
        let start = if t == 1 { 0 } else { self.a[t - p] };
        for j in start..self.alphabet {
            if t > 1 && j == self.a[t - 1] ^ 1 {
                continue;
            }
            self.a[t] = j;
            if j == self.a[t - p] && t > 1 {
                self.gen(t + 1, p);
            } else {
                self.gen(t + 1, t);
            }
        }
    }
}

/// Visit every class of cyclically reduced length 1..=max_len, length
/// ascending then lexicographic, as letter codes. The flag is primitivity.
pub fn for_each_class_codes<F>(k: usize, max_len: usize, primitive_only: bool, shard: Shard, mut visit: F)
where
    F: FnMut(&[u8], bool),
{
    for n in 1..=max_len {
        let mut gen = Necklaces {
            alphabet: (2 * k) as u8,
            n,
            a: vec![0; n + 1],
            primitive_only,
            shard,
            k,
            emit: &mut visit,
        };
        gen.gen(1, 1);
    }
}

pub fn for_each_class<F>(k: usize, max_len: usize, primitive_only: bool, shard: Shard, mut visit: F)
where
    F: FnMut(CyclicWord, bool),
{
    for_each_class_codes(k, max_len, primitive_only, shard, |codes, prim| {
        visit(CyclicWord::from_canonical(codes.iter().map(|&c| Letter::from_code(c)).collect()), prim)
    });
}

fn check_args(k: usize, max_len: usize) -> Result<()> {
    if k < 2 || k > 26 {
        return Err(CensusError::Validation(format!("generator count must be in 2..=26, got {k}")));
    }
    if max_len < 1 {
        return Err(CensusError::Validation("maximum length must be at least 1".into()));
    }
    Ok(())
}

pub fn enumerate_classes(k: usize, max_len: usize, primitive_only: bool) -> Result<Vec<CyclicWord>> {
    enumerate_shard(k, max_len, primitive_only, Shard::ALL)
}

pub fn enumerate_shard(k: usize, max_len: usize, primitive_only: bool, shard: Shard) -> Result<Vec<CyclicWord>> {
    check_args(k, max_len)?;
    let mut out = Vec::new();
    for_each_class(k, max_len, primitive_only, shard, |c, _| out.push(c));
    Ok(out)
}

/// Cumulative number of classes of length <= max_len.
pub fn class_count(k: usize, max_len: usize, primitive_only: bool) -> Result<u64> {
    check_args(k, max_len)?;
    let mut n = 0u64;
    for_each_class_codes(k, max_len, primitive_only, Shard::ALL, |_, _| n += 1);
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{BTreeSet, HashSet};

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn least_rotation_naive(s: &[Letter]) -> Vec<Letter> {
        (0..s.len()).map(|r| [&s[r..], &s[..r]].concat()).min().unwrap()
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(canonical_form(&w("b a")).unwrap().to_string(), "a b");
        assert_eq!(canonical_form(&w("a b a'")).unwrap().to_string(), "b");
        assert!(matches!(canonical_form(&w("a b b' a'")), Err(CensusError::IdentityClass)));
        assert!(matches!(canonical_form(&Word::empty()), Err(CensusError::IdentityClass)));
    }

    #[test]
    fn primitive_examples() {
        assert!(is_primitive(&canonical_form(&w("a b")).unwrap()));
        assert!(!is_primitive(&canonical_form(&w("a b a b")).unwrap()));
    }

    proptest! {
        #[test]
        fn booth_matches_naive(codes in prop::collection::vec(0u8..4, 1..16)) {
            let s: Vec<Letter> = codes.iter().map(|&c| Letter::from_code(c)).collect();
            let r = least_rotation(&s);
            prop_assert_eq!([&s[r..], &s[..r]].concat(), least_rotation_naive(&s));
        }

        #[test]
        fn conjugates_share_canonical_form(
            base in prop::collection::vec(0u8..4, 1..10),
            conj in prop::collection::vec(prop::collection::vec(0u8..4, 0..8), 200),
        ) {
            let w0 = reduce_word(base.iter().map(|&c| Letter::from_code(c)));
            prop_assume!(canonical_form(&w0).is_ok());
            let c0 = canonical_form(&w0).unwrap();
            prop_assert!(c0.is_valid());
            for g in conj {
                let g = reduce_word(g.iter().map(|&c| Letter::from_code(c)));
                let gwg = g.concat(&w0).concat(&g.inverse());
                prop_assert_eq!(&canonical_form(&gwg).unwrap(), &c0);
            }
        }
    }

    /// All reduced words of length n over k generators.
    fn reduced_words(k: usize, n: usize) -> Vec<Vec<Letter>> {
        let mut out: Vec<Vec<Letter>> = vec![vec![]];
        for _ in 0..n {
            let mut next = Vec::new();
            for p in &out {
                for c in 0..2 * k as u8 {
                    let l = Letter::from_code(c);
                    if p.last().is_some_and(|&q| q == l.inv()) {
                        continue;
                    }
                    let mut q = p.clone();
                    q.push(l);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    /// Rotation orbits of cyclically reduced words, with primitivity
    /// decided by trying every proper divisor.
    fn orbit_oracle(k: usize, n: usize) -> (usize, usize) {
        let mut seen = HashSet::new();
        let (mut total, mut prim) = (0, 0);
        for word in reduced_words(k, n) {
            if word[n - 1] == word[0].inv() {
                continue;
            }
            let rep = least_rotation_naive(&word);
            if seen.insert(rep.clone()) {
                total += 1;
                let power = (1..n).filter(|d| n % d == 0).any(|d| rep.chunks(d).all(|c| c == &rep[..d]));
                if !power {
                    prim += 1;
                }
            }
        }
        (total, prim)
    }

    #[test]
    fn counts_match_orbit_oracle() {
        for k in [2, 3] {
            for n in 1..=6 {
                let exact: Vec<_> = enumerate_classes(k, n, false).unwrap().into_iter().filter(|c| c.len() == n).collect();
                let prim = exact.iter().filter(|c| is_primitive(c)).count();
                assert_eq!((exact.len(), prim), orbit_oracle(k, n), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn small_counts() {
        assert_eq!(class_count(2, 1, false).unwrap(), 4);
        assert_eq!(class_count(2, 2, false).unwrap(), 12);
        assert_eq!(class_count(2, 3, true).unwrap(), 16);
        let names: Vec<String> = enumerate_classes(2, 1, false).unwrap().iter().map(|c| c.to_string()).collect();
        assert_eq!(names, ["a", "a'", "b", "b'"]);
    }

    #[test]
    fn stream_is_valid_unique_and_ordered() {
        let all = enumerate_classes(2, 10, false).unwrap();
        let mut seen = HashSet::new();
        for c in &all {
            assert!(c.is_valid(), "{c}");
            assert!(seen.insert(c.clone()), "duplicate {c}");
        }
        for pair in all.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!(a.len() < b.len() || (a.len() == b.len() && a.letters() < b.letters()));
        }
        // the primitivity flag agrees with is_primitive
        for_each_class(2, 8, false, Shard::ALL, |c, prim| assert_eq!(prim, is_primitive(&c)));
    }

    #[test]
    fn inverse_classes_are_emitted() {
        let all: HashSet<_> = enumerate_classes(3, 6, true).unwrap().into_iter().collect();
        for c in &all {
            assert!(all.contains(&c.inverse()), "{c}");
        }
    }

    #[test]
    fn shards_partition_the_stream() {
        let full: Vec<_> = enumerate_classes(2, 9, false).unwrap();
        for count in [1, 2, 3, 5, 16] {
            let mut union = Vec::new();
            for i in 0..count {
                union.extend(enumerate_shard(2, 9, false, Shard::new(i, count).unwrap()).unwrap());
            }
            assert_eq!(union.len(), full.len());
            let a: BTreeSet<_> = union.into_iter().collect();
            let b: BTreeSet<_> = full.iter().cloned().collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cyclic_core_keeps_rotation() {
        let w: Word = "a' b a b a".parse().unwrap();
        assert_eq!(cyclic_core(&w).unwrap().to_string(), "b a b");
        assert_eq!(canonical_form(&w).unwrap(), canonical_form(&"b b a".parse().unwrap()).unwrap());
        assert!(matches!(cyclic_core(&"a b b' a'".parse().unwrap()), Err(CensusError::IdentityClass)));
    }
}
