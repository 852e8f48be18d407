//! Deterministic acyclic letter automata with payload lists on final
//! states.
//!
//! Automata are always stored in canonical form: states are numbered in
//! reverse postorder of a depth-first walk from the initial state (children
//! taken in letter order), so the initial state is 0 and every transition
//! goes to a higher-numbered state. Two automata with the same states,
//! letters and payloads therefore compare equal and serialize to the same
//! bytes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Cursor, Read};

use thiserror::Error;

use crate::hangul::LetterString;

pub const MAGIC: &[u8; 4] = b"KFST";
pub const FORMAT_VERSION: u16 = 1;

pub type StateId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FstError {
    #[error("automaton has a cycle")]
    CyclicInput,
    #[error("bad magic, not an automaton image")]
    BadMagic,
    #[error("format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("input truncated")]
    TruncatedInput,
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("corrupt automaton image: {0}")]
    Corrupt(String),
}

/// Interned analysis records. Identical records share one index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PayloadTable {
    records: Vec<String>,
}

impl PayloadTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, index: u32) -> Option<&str> {
        self.records.get(index as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(String::as_str)
    }
}

/// Builds a [`PayloadTable`] while deduplicating records.
#[derive(Debug, Default)]
pub struct PayloadInterner {
    table: PayloadTable,
    index: HashMap<String, u32>,
}

impl PayloadInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, record: &str) -> u32 {
        if let Some(&i) = self.index.get(record) {
            return i;
        }
        let i = self.table.records.len() as u32;
        self.table.records.push(record.to_string());
        self.index.insert(record.to_string(), i);
        i
    }

    pub fn finish(self) -> PayloadTable {
        self.table
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stats {
    pub states: usize,
    pub transitions: usize,
    pub serialized_bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Automaton {
    /// Sorted letters; transitions refer to them by index.
    alphabet: Vec<char>,
    /// `edges[offsets[s]..offsets[s + 1]]` are the transitions of state `s`,
    /// sorted by letter index.
    offsets: Vec<u32>,
    edges: Vec<(u32, StateId)>,
    finals: Vec<Option<Box<[u32]>>>,
    payloads: PayloadTable,
}

/// Mutable adjacency form used while building.
struct Draft {
    children: Vec<Vec<(char, StateId)>>,
    finals: Vec<Vec<u32>>,
}

impl Draft {
    fn with_root() -> Self {
        Draft { children: vec![Vec::new()], finals: vec![Vec::new()] }
    }

    fn add_state(&mut self) -> StateId {
        self.children.push(Vec::new());
        self.finals.push(Vec::new());
        (self.children.len() - 1) as StateId
    }

    /// Renumbers states reachable from `root` into canonical order.
    fn canonicalize(&self, root: StateId, payloads: PayloadTable) -> Result<Automaton, FstError> {
        let n = self.children.len();
        let mut color = vec![0u8; n];
        let mut post = Vec::new();
        let mut stack = vec![(root, 0usize)];
        color[root as usize] = 1;
        while let Some(&mut (state, ref mut next)) = stack.last_mut() {
            let kids = &self.children[state as usize];
            if let Some(&(_, child)) = kids.get(*next) {
                *next += 1;
                match color[child as usize] {
                    0 => {
                        color[child as usize] = 1;
                        stack.push((child, 0));
                    }
                    1 => return Err(FstError::CyclicInput),
                    _ => {}
                }
            } else {
                color[state as usize] = 2;
                post.push(state);
                stack.pop();
            }
        }
        post.reverse();
        let mut renumber = vec![u32::MAX; n];
        for (new, &old) in post.iter().enumerate() {
            renumber[old as usize] = new as u32;
        }
        let alphabet: Vec<char> = post
            .iter()
            .flat_map(|&s| self.children[s as usize].iter().map(|&(c, _)| c))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut offsets = Vec::with_capacity(post.len() + 1);
        let mut edges = Vec::new();
        let mut finals = Vec::with_capacity(post.len());
        offsets.push(0);
        for &old in &post {
            let mut out: Vec<(u32, StateId)> = self.children[old as usize]
                .iter()
                .map(|&(c, t)| {
                    let id = alphabet.binary_search(&c).expect("letter collected above") as u32;
                    (id, renumber[t as usize])
                })
                .collect();
            out.sort_unstable();
            edges.extend(out);
            offsets.push(edges.len() as u32);
            let f = &self.finals[old as usize];
            finals.push(if f.is_empty() { None } else { Some(f.clone().into_boxed_slice()) });
        }
        Ok(Automaton { alphabet, offsets, edges, finals, payloads })
    }
}

/// Incrementally inserts keys into a trie.
pub struct TrieBuilder {
    draft: Draft,
}

impl Default for TrieBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl TrieBuilder {
    pub fn new() -> Self {
        TrieBuilder { draft: Draft::with_root() }
    }

    pub fn insert(&mut self, key: &[char], payload: u32) {
        let mut state = 0;
        for &c in key {
            let kids = &self.draft.children[state as usize];
            state = match kids.binary_search_by_key(&c, |&(l, _)| l) {
                Ok(i) => kids[i].1,
                Err(i) => {
                    let new = self.draft.add_state();
                    self.draft.children[state as usize].insert(i, (c, new));
                    new
                }
            };
        }
        let f = &mut self.draft.finals[state as usize];
        let at = f.partition_point(|&p| p <= payload);
        f.insert(at, payload);
    }

    pub fn finish(self, payloads: PayloadTable) -> Automaton {
        self.draft.canonicalize(0, payloads).expect("a trie has no cycles")
    }
}

/// Trie accepting exactly the given keys. Payload lists of duplicate keys
/// are merged as sorted multisets.
pub fn build_trie<'a, I>(entries: I) -> Automaton
where
    I: IntoIterator<Item = (&'a [char], u32)>,
{
    let mut builder = TrieBuilder::new();
    for (key, payload) in entries {
        builder.insert(key, payload);
    }
    builder.finish(PayloadTable::new())
}

/// Merges equivalent states bottom-up by height: states of equal height with
/// the same payload list and the same letter-to-representative map become
/// one state.
pub fn minimize(a: &Automaton) -> Result<Automaton, FstError> {
    let n = a.state_count();
    // Canonical numbering is topological, so successors have higher ids.
    let mut height = vec![0u32; n];
    for s in (0..n).rev() {
        for &(_, t) in a.edges_of(s as StateId) {
            if (t as usize) <= s {
                return Err(FstError::CyclicInput);
            }
            height[s] = height[s].max(height[t as usize] + 1);
        }
    }
    let max_height = height.iter().copied().max().unwrap_or(0) as usize;
    let mut by_height: Vec<Vec<StateId>> = vec![Vec::new(); max_height + 1];
    for (s, &h) in height.iter().enumerate() {
        by_height[h as usize].push(s as StateId);
    }

    let mut draft = Draft { children: Vec::new(), finals: Vec::new() };
    let mut rep = vec![u32::MAX; n];
    type Signature<'s> = (&'s [u32], Vec<(u32, StateId)>);
    let mut register: HashMap<Signature<'_>, StateId> = HashMap::new();
    for layer in &by_height {
        for &s in layer {
            let payload: &[u32] = a.final_payloads(s).unwrap_or(&[]);
            let sig: Vec<(u32, StateId)> =
                a.edges_of(s).iter().map(|&(l, t)| (l, rep[t as usize])).collect();
            let key = (payload, sig);
            let id = match register.get(&key) {
                Some(&id) => id,
                None => {
                    let id = draft.add_state();
                    draft.children[id as usize] =
                        key.1.iter().map(|&(l, t)| (a.alphabet[l as usize], t)).collect();
                    draft.finals[id as usize] = payload.to_vec();
                    register.insert(key, id);
                    id
                }
            };
            rep[s as usize] = id;
        }
    }
    draft.canonicalize(rep[0], a.payloads.clone())
}

impl Automaton {
    /// One non-final state, no transitions.
    pub fn empty() -> Self {
        Draft::with_root().canonicalize(0, PayloadTable::new()).expect("single state")
    }

    /// Builds from an explicit transition list. States unreachable from
    /// `initial` are dropped.
    pub fn from_parts(
        transitions: &[Vec<(char, StateId)>],
        finals: &[Vec<u32>],
        initial: StateId,
        payloads: PayloadTable,
    ) -> Result<Self, FstError> {
        let n = transitions.len();
        if finals.len() != n || initial as usize >= n.max(1) {
            return Err(FstError::Corrupt("state tables disagree".into()));
        }
        let mut draft = Draft { children: transitions.to_vec(), finals: finals.to_vec() };
        for kids in &mut draft.children {
            kids.sort_unstable();
            if kids.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(FstError::Corrupt("nondeterministic transition".into()));
            }
            if kids.iter().any(|&(_, t)| t as usize >= n) {
                return Err(FstError::Corrupt("transition target out of range".into()));
            }
        }
        for f in &mut draft.finals {
            f.sort_unstable();
        }
        draft.canonicalize(initial, payloads)
    }

    pub fn with_payloads(mut self, payloads: PayloadTable) -> Self {
        self.payloads = payloads;
        self
    }

    pub fn payloads(&self) -> &PayloadTable {
        &self.payloads
    }

    pub fn initial(&self) -> StateId {
        0
    }

    pub fn state_count(&self) -> usize {
        self.finals.len()
    }

    pub fn transition_count(&self) -> usize {
        self.edges.len()
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    fn edges_of(&self, state: StateId) -> &[(u32, StateId)] {
        let s = state as usize;
        &self.edges[self.offsets[s] as usize..self.offsets[s + 1] as usize]
    }

    /// Outgoing transitions as `(letter, target)`.
    pub fn transitions(&self, state: StateId) -> impl Iterator<Item = (char, StateId)> + '_ {
        self.edges_of(state).iter().map(|&(l, t)| (self.alphabet[l as usize], t))
    }

    pub fn letter_id(&self, ch: char) -> Option<u32> {
        self.alphabet.binary_search(&ch).ok().map(|i| i as u32)
    }

    pub fn step_id(&self, state: StateId, letter: u32) -> Option<StateId> {
        let edges = self.edges_of(state);
        edges
            .binary_search_by_key(&letter, |&(l, _)| l)
            .ok()
            .map(|i| edges[i].1)
    }

    pub fn step(&self, state: StateId, ch: char) -> Option<StateId> {
        self.step_id(state, self.letter_id(ch)?)
    }

    pub fn final_payloads(&self, state: StateId) -> Option<&[u32]> {
        self.finals[state as usize].as_deref()
    }

    pub fn walk(&self, key: &[char]) -> Option<StateId> {
        key.iter().try_fold(self.initial(), |s, &c| self.step(s, c))
    }

    /// Payload list of `key`, if accepted.
    pub fn accept(&self, key: &[char]) -> Option<&[u32]> {
        self.walk(key).and_then(|s| self.final_payloads(s))
    }

    /// Every accepted key with its payload list, in letter order.
    pub fn entries(&self) -> Vec<(LetterString, Vec<u32>)> {
        let mut out = Vec::new();
        let mut key = Vec::new();
        fn walk(a: &Automaton, s: StateId, key: &mut Vec<char>, out: &mut Vec<(LetterString, Vec<u32>)>) {
            if let Some(p) = a.final_payloads(s) {
                out.push((key.clone(), p.to_vec()));
            }
            for (c, t) in a.transitions(s) {
                key.push(c);
                walk(a, t, key, out);
                key.pop();
            }
        }
        walk(self, 0, &mut key, &mut out);
        out
    }

    pub fn stats(&self) -> Stats {
        Stats {
            states: self.state_count(),
            transitions: self.transition_count(),
            serialized_bytes: self.serialize().len(),
        }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.edges.len() * 3);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.alphabet.len() as u32).to_le_bytes());
        for &c in &self.alphabet {
            out.extend_from_slice(&(c as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.state_count() as u32).to_le_bytes());
        for s in 0..self.state_count() as StateId {
            let edges = self.edges_of(s);
            write_varint(&mut out, edges.len() as u64);
            for &(l, t) in edges {
                write_varint(&mut out, l as u64);
                write_varint(&mut out, (t - s) as u64);
            }
        }
        let finals: Vec<(usize, &[u32])> = self
            .finals
            .iter()
            .enumerate()
            .filter_map(|(s, f)| f.as_deref().map(|f| (s, f)))
            .collect();
        out.extend_from_slice(&(finals.len() as u32).to_le_bytes());
        let mut prev = 0;
        for (s, payloads) in finals {
            write_varint(&mut out, (s - prev) as u64);
            prev = s;
            write_varint(&mut out, payloads.len() as u64);
            for &p in payloads {
                write_varint(&mut out, p as u64);
            }
        }
        out.extend_from_slice(&(self.payloads.len() as u32).to_le_bytes());
        for record in self.payloads.iter() {
            write_varint(&mut out, record.len() as u64);
            out.extend_from_slice(record.as_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Automaton, FstError> {
        if bytes.len() < MAGIC.len() {
            return Err(FstError::TruncatedInput);
        }
        if &bytes[..4] != MAGIC {
            return Err(FstError::BadMagic);
        }
        if bytes.len() < 6 {
            return Err(FstError::TruncatedInput);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(FstError::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        if bytes.len() < 10 {
            return Err(FstError::TruncatedInput);
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
            return Err(FstError::ChecksumMismatch);
        }
        let mut r = Cursor::new(&body[6..]);
        let alphabet_len = read_u32(&mut r)? as usize;
        let mut alphabet = Vec::with_capacity(alphabet_len.min(1 << 16));
        for _ in 0..alphabet_len {
            let c = char::from_u32(read_u32(&mut r)?)
                .ok_or_else(|| FstError::Corrupt("invalid codepoint in alphabet".into()))?;
            alphabet.push(c);
        }
        if alphabet.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FstError::Corrupt("alphabet not sorted".into()));
        }
        let states = read_u32(&mut r)? as usize;
        if states == 0 {
            return Err(FstError::Corrupt("no states".into()));
        }
        let mut offsets = Vec::with_capacity(states.min(1 << 24) + 1);
        let mut edges = Vec::new();
        offsets.push(0);
        for s in 0..states {
            let count = read_varint(&mut r)?;
            let mut prev: Option<u32> = None;
            for _ in 0..count {
                let l = read_varint(&mut r)?;
                let delta = read_varint(&mut r)?;
                let t = s as u64 + delta;
                if l >= alphabet.len() as u64 || delta == 0 || t >= states as u64 {
                    return Err(FstError::Corrupt(format!("bad transition in state {s}")));
                }
                let l = l as u32;
                if prev.is_some_and(|p| p >= l) {
                    return Err(FstError::Corrupt(format!("unsorted transitions in state {s}")));
                }
                prev = Some(l);
                edges.push((l, t as StateId));
            }
            offsets.push(edges.len() as u32);
        }
        let mut finals: Vec<Option<Box<[u32]>>> = vec![None; states];
        let final_count = read_u32(&mut r)?;
        let mut state = 0u64;
        for i in 0..final_count {
            let delta = read_varint(&mut r)?;
            if i > 0 && delta == 0 {
                return Err(FstError::Corrupt("duplicate final state".into()));
            }
            state += delta;
            if state >= states as u64 {
                return Err(FstError::Corrupt("final state out of range".into()));
            }
            let n = read_varint(&mut r)?;
            let list = (0..n)
                .map(|_| read_varint(&mut r).map(|p| p as u32))
                .collect::<Result<Vec<_>, _>>()?;
            finals[state as usize] = Some(list.into_boxed_slice());
        }
        let record_count = read_u32(&mut r)?;
        let mut records = Vec::with_capacity(record_count.min(1 << 20) as usize);
        for _ in 0..record_count {
            let len = read_varint(&mut r)? as usize;
            let remaining = body.len() - 6 - r.position() as usize;
            if len > remaining {
                return Err(FstError::TruncatedInput);
            }
            let mut buf = vec![0; len];
            r.read_exact(&mut buf).map_err(|_| FstError::TruncatedInput)?;
            records.push(
                String::from_utf8(buf).map_err(|_| FstError::Corrupt("payload is not UTF-8".into()))?,
            );
        }
        if r.position() as usize != body.len() - 6 {
            return Err(FstError::Corrupt("trailing bytes".into()));
        }
        Ok(Automaton { alphabet, offsets, edges, finals, payloads: PayloadTable { records } })
    }
}

pub fn stats(a: &Automaton) -> Stats {
    a.stats()
}

pub(crate) fn write_varint(out: &mut Vec<u8>, v: u64) {
    leb128::write::unsigned(out, v).expect("writing to a Vec cannot fail");
}

pub(crate) fn read_varint<R: Read>(r: &mut R) -> Result<u64, FstError> {
    leb128::read::unsigned(r).map_err(|e| match e {
        leb128::read::Error::IoError(_) => FstError::TruncatedInput,
        leb128::read::Error::Overflow => FstError::Corrupt("varint overflow".into()),
    })
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32, FstError> {
    let mut buf = [0; 4];
    r.read_exact(&mut buf).map_err(|_| FstError::TruncatedInput)?;
    Ok(u32::from_le_bytes(buf))
}

/// Key-to-payload map of an automaton; convenient for equivalence checks.
pub fn language(a: &Automaton) -> BTreeMap<LetterString, Vec<u32>> {
    a.entries().into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn trie(entries: &[(&str, u32)]) -> Automaton {
        let keys: Vec<(Vec<char>, u32)> = entries.iter().map(|&(k, p)| (key(k), p)).collect();
        build_trie(keys.iter().map(|(k, p)| (k.as_slice(), *p)))
    }

    /// Brute-force minimal state count: the number of distinct right
    /// languages (suffix, payload list) over all trie states.
    fn right_language_classes(a: &Automaton) -> usize {
        fn right(a: &Automaton, s: StateId) -> BTreeSet<(Vec<char>, Vec<u32>)> {
            let mut out = BTreeSet::new();
            if let Some(p) = a.final_payloads(s) {
                out.insert((Vec::new(), p.to_vec()));
            }
            for (c, t) in a.transitions(s) {
                for (mut suffix, p) in right(a, t) {
                    suffix.insert(0, c);
                    out.insert((suffix, p));
                }
            }
            out
        }
        (0..a.state_count() as StateId)
            .map(|s| right(a, s))
            .collect::<BTreeSet<_>>()
            .len()
    }

    #[test]
    fn trie_shapes() {
        let t = trie(&[("ab", 0), ("ac", 1)]);
        assert_eq!(t.state_count(), 4);
        assert_eq!(t.transition_count(), 3);
        assert_eq!(t.accept(&key("ab")), Some(&[0][..]));
        assert_eq!(t.accept(&key("ac")), Some(&[1][..]));
        assert_eq!(t.accept(&key("a")), None);

        let empty = build_trie(std::iter::empty());
        assert_eq!(empty.state_count(), 1);
        assert!(empty.entries().is_empty());
        assert_eq!(empty, Automaton::empty());

        let eps = trie(&[("", 0)]);
        assert_eq!(eps.state_count(), 1);
        assert_eq!(eps.final_payloads(0), Some(&[0][..]));
    }

    #[test]
    fn duplicate_keys_merge_payloads() {
        let t = trie(&[("ab", 3), ("ab", 1), ("ab", 3)]);
        assert_eq!(t.accept(&key("ab")), Some(&[1, 3, 3][..]));
    }

    #[test]
    fn minimize_merges_equal_leaves_only() {
        let same = trie(&[("ab", 0), ("ac", 0)]);
        assert_eq!(minimize(&same).unwrap().state_count(), 3);
        let diff = trie(&[("ab", 0), ("ac", 1)]);
        assert_eq!(minimize(&diff).unwrap().state_count(), 4);
        let m = minimize(&same).unwrap();
        assert_eq!(minimize(&m).unwrap(), m);
    }

    #[test]
    fn stats_of_empty() {
        let s = Automaton::empty().stats();
        assert_eq!((s.states, s.transitions), (1, 0));
        // magic + version + alphabet count + state count + one empty state
        // + finals count + payload count + crc
        assert_eq!(s.serialized_bytes, 4 + 2 + 4 + 4 + 1 + 4 + 4 + 4);
    }

    #[test]
    fn from_parts_rejects_cycles() {
        let cyclic = Automaton::from_parts(&[vec![('a', 1)], vec![('b', 0)]], &[vec![], vec![0]], 0, PayloadTable::new());
        assert_eq!(cyclic, Err(FstError::CyclicInput));
        let ok = Automaton::from_parts(&[vec![('a', 1)], vec![]], &[vec![], vec![0]], 0, PayloadTable::new()).unwrap();
        assert_eq!(ok.accept(&key("a")), Some(&[0][..]));
    }

    #[test]
    fn serialization_errors() {
        let mut interner = PayloadInterner::new();
        let p = interner.intern("N\tCS_N");
        assert_eq!(interner.intern("N\tCS_N"), p);
        let t = trie(&[("집", p)]).with_payloads(interner.finish());
        let bytes = t.serialize();
        assert_eq!(Automaton::deserialize(&bytes).unwrap(), t);

        assert_eq!(Automaton::deserialize(&[]), Err(FstError::TruncatedInput));
        assert_eq!(Automaton::deserialize(b"NOPE\x01\x00"), Err(FstError::BadMagic));
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(Automaton::deserialize(&wrong_version), Err(FstError::VersionMismatch { found: 9, .. })));
        // The payload record is the last thing before the checksum.
        let mut flipped = bytes.clone();
        let at = bytes.len() - 5;
        flipped[at] ^= 0x01;
        assert_eq!(Automaton::deserialize(&flipped), Err(FstError::ChecksumMismatch));
        assert_eq!(Automaton::deserialize(&bytes[..bytes.len() - 1]), Err(FstError::ChecksumMismatch));
        assert_eq!(Automaton::deserialize(&bytes[..8]), Err(FstError::TruncatedInput));
    }

    fn key_sets() -> impl Strategy<Value = Vec<(Vec<char>, u32)>> {
        proptest::collection::vec(
            (proptest::collection::vec(prop_oneof![Just('a'), Just('b'), Just('c')], 0..=8), 0u32..3),
            0..=100,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn minimize_matches_right_language_oracle(keys in key_sets()) {
            let t = build_trie(keys.iter().map(|(k, p)| (k.as_slice(), *p)));
            let m = minimize(&t).unwrap();
            prop_assert_eq!(language(&m), language(&t));
            prop_assert_eq!(m.state_count(), right_language_classes(&t));
            prop_assert!(m.stats().serialized_bytes <= t.stats().serialized_bytes);
        }

        #[test]
        fn serialization_roundtrip(keys in key_sets(), records in proptest::collection::vec(".{0,6}", 0..4)) {
            let mut interner = PayloadInterner::new();
            for r in &records {
                interner.intern(r);
            }
            let t = build_trie(keys.iter().map(|(k, p)| (k.as_slice(), *p))).with_payloads(interner.finish());
            for a in [t.clone(), minimize(&t).unwrap()] {
                let bytes = a.serialize();
                let back = Automaton::deserialize(&bytes).unwrap();
                prop_assert_eq!(&back, &a);
                prop_assert_eq!(back.serialize(), bytes);
            }
        }

        #[test]
        fn deserialize_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = Automaton::deserialize(&bytes);
            let mut framed = MAGIC.to_vec();
            framed.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
            framed.extend_from_slice(&bytes);
            let crc = crc32fast::hash(&framed);
            framed.extend_from_slice(&crc.to_le_bytes());
            let _ = Automaton::deserialize(&framed);
        }
    }
}
