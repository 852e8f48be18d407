//! Compilation of a resource set into a [`WordLexicon`] and word lookup.
//!
//! The stem automaton and the per-CS ending automata stay separate; lookup
//! switches from the stem automaton to the ending automaton of the CS found
//! at each stem-final state.
//!
//! Payload records store each morpheme's base relative to its surface (how
//! many letters to strip from the surface end and which letters to append),
//! so stems that inflect alike share records and their automaton states can
//! merge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Cursor, Read};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::enumerate::{self, CyclePolicy, EndingSequence, EnumerateError};
use crate::fst::{self, read_u32, read_varint, write_varint, Automaton, FstError, PayloadInterner, Stats, TrieBuilder};
use crate::generate::{self, GenerateError, StemForm};
use crate::hangul::LetterString;
use crate::resources::{self, CsId, Diagnostic, MorphemeArc, ResourceSet};
use crate::tagset::{self, FeatureRegistry, StructuredTag, TagError};

pub const MAGIC: &[u8; 4] = b"KLEX";
pub const FORMAT_VERSION: u16 = 1;

const SECTION_STEMS: u8 = 1;
const SECTION_ENDINGS: u8 = 2;
const SECTION_HANJA: u8 = 3;
const SECTION_FEATURES: u8 = 4;
const SECTION_METADATA: u8 = 5;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("step 1 (validate): {} error(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
    #[error("step 2 (generate stems): {0}")]
    Generate(#[from] GenerateError),
    #[error("step 4 (enumerate endings): {0}")]
    Enumerate(#[from] EnumerateError),
    #[error("step {step} (minimize): {source}")]
    Minimize { step: u8, source: FstError },
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("not a word lexicon (bad magic)")]
    BadMagic,
    #[error("lexicon format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("lexicon truncated")]
    TruncatedInput,
    #[error("lexicon checksum mismatch")]
    ChecksumMismatch,
    #[error("section `{section}`: {source}")]
    Section { section: String, source: FstError },
    #[error("bad payload record `{record}`: {message}")]
    BadRecord { record: String, message: String },
    #[error("bad tag in payload record: {0}")]
    Tag(#[from] TagError),
    #[error("corrupt lexicon: {0}")]
    Corrupt(String),
}

impl From<FstError> for LoadError {
    fn from(e: FstError) -> Self {
        match e {
            FstError::TruncatedInput => LoadError::TruncatedInput,
            other => LoadError::Corrupt(other.to_string()),
        }
    }
}

/// One morpheme of an analysis. `span` is the letter range of the word it
/// covers; a morpheme with an empty surface shares the span of the morpheme
/// before it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Morpheme {
    pub surface: LetterString,
    pub base: LetterString,
    pub tag: StructuredTag,
    pub span: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    /// Letters consumed by the stem.
    pub split: usize,
    pub cs: CsId,
    pub hanja: Option<String>,
    pub stem_payload: u32,
    pub ending_payload: Option<u32>,
    pub morphemes: Vec<Morpheme>,
}

impl Analysis {
    /// `(surface, base, tag)` triples, the part compared against resources.
    pub fn triples(&self) -> Vec<MorphemeArc> {
        self.morphemes
            .iter()
            .map(|m| MorphemeArc { surface: m.surface.clone(), base: m.base.clone(), tag: m.tag.clone() })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct RelMorpheme {
    /// Surface length in letters; `None` for the first morpheme, which takes
    /// what the others leave.
    len: Option<usize>,
    strip: usize,
    tag: StructuredTag,
    append: LetterString,
}

#[derive(Clone, Debug)]
struct StemRecord {
    cs: usize,
    hanja: Option<String>,
    morphemes: Vec<RelMorpheme>,
}

#[derive(Clone, Debug)]
struct CsEndings {
    cs: CsId,
    automaton: Automaton,
    records: Vec<Vec<RelMorpheme>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HanjaEntry {
    pub surface: LetterString,
    pub payload: u32,
}

#[derive(Clone, Debug)]
pub struct WordLexicon {
    stems: Automaton,
    stem_records: Vec<StemRecord>,
    endings: Vec<CsEndings>,
    hanja: BTreeMap<String, Vec<HanjaEntry>>,
    features: FeatureRegistry,
    metadata: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default)]
pub struct CompileReport {
    pub steps: Vec<(&'static str, Duration)>,
    pub warnings: Vec<String>,
    pub stem_forms: usize,
    pub ending_counts: BTreeMap<CsId, usize>,
    pub stem_trie: Option<Stats>,
    pub stem_minimal: Option<Stats>,
    /// Summed over all CSs.
    pub ending_trie: Option<Stats>,
    pub ending_minimal: Option<Stats>,
    /// Number of (stem form, ending) pairs the lexicon represents.
    pub word_forms: u128,
}

impl CompileReport {
    pub fn trie_bytes(&self) -> usize {
        self.stem_trie.map_or(0, |s| s.serialized_bytes) + self.ending_trie.map_or(0, |s| s.serialized_bytes)
    }

    pub fn minimal_bytes(&self) -> usize {
        self.stem_minimal.map_or(0, |s| s.serialized_bytes) + self.ending_minimal.map_or(0, |s| s.serialized_bytes)
    }
}

pub struct Compiled {
    pub lexicon: WordLexicon,
    pub report: CompileReport,
    pub stem_forms: Vec<StemForm>,
    pub endings: BTreeMap<CsId, Vec<EndingSequence>>,
}

fn add_stats(total: &mut Option<Stats>, s: Stats) {
    let t = total.get_or_insert(Stats { states: 0, transitions: 0, serialized_bytes: 0 });
    t.states += s.states;
    t.transitions += s.transitions;
    t.serialized_bytes += s.serialized_bytes;
}

/// Encodes morphemes relative to their surfaces. The first morpheme omits
/// its length.
fn encode_morphemes(out: &mut String, morphemes: &[MorphemeArc]) {
    for (i, m) in morphemes.iter().enumerate() {
        let common = m.surface.iter().zip(&m.base).take_while(|(a, b)| a == b).count();
        if i > 0 {
            let _ = write!(out, "{}", m.surface.len());
        }
        let append = &m.base[common..];
        let _ = write!(out, ":{}:{}:{}:", m.surface.len() - common, m.tag, append.len());
        out.extend(append.iter());
    }
}

fn stem_record(form: &StemForm) -> String {
    let mut out = format!("{}\t{}\t", form.cs, form.hanja.as_deref().unwrap_or(""));
    encode_morphemes(&mut out, &form.morphemes);
    out
}

fn ending_record(ending: &EndingSequence) -> String {
    let mut out = String::new();
    encode_morphemes(&mut out, &ending.morphemes);
    out
}

fn decode_morphemes(text: &str, features: &FeatureRegistry) -> Result<Vec<RelMorpheme>, LoadError> {
    let bad = |message: &str| LoadError::BadRecord { record: text.to_string(), message: message.to_string() };
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let mut fields = rest.splitn(5, ':');
        let len = fields.next().ok_or_else(|| bad("missing length"))?;
        let strip = fields.next().ok_or_else(|| bad("missing strip count"))?;
        let tag = fields.next().ok_or_else(|| bad("missing tag"))?;
        let count = fields.next().ok_or_else(|| bad("missing append count"))?;
        let tail = fields.next().ok_or_else(|| bad("missing append letters"))?;
        let len = match (out.is_empty(), len) {
            (true, "") => None,
            (false, l) => Some(l.parse().map_err(|_| bad("bad length"))?),
            (true, _) => return Err(bad("first morpheme has a length")),
        };
        let strip = strip.parse().map_err(|_| bad("bad strip count"))?;
        let count: usize = count.parse().map_err(|_| bad("bad append count"))?;
        let tag = tagset::parse_tag(tag, features)?;
        let mut chars = tail.char_indices();
        let mut append = Vec::with_capacity(count);
        for _ in 0..count {
            append.push(chars.next().ok_or_else(|| bad("append letters truncated"))?.1);
        }
        rest = &tail[chars.next().map_or(tail.len(), |(i, _)| i)..];
        out.push(RelMorpheme { len, strip, tag, append });
    }
    Ok(out)
}

/// Rebuilds morphemes over `letters[start..end]`.
fn expand(rel: &[RelMorpheme], letters: &[char], start: usize, end: usize, out: &mut Vec<Morpheme>) -> bool {
    let fixed: usize = rel.iter().filter_map(|m| m.len).sum();
    let total = end - start;
    let first_len = match rel.first() {
        Some(m) if m.len.is_none() => match total.checked_sub(fixed) {
            Some(l) => l,
            None => return false,
        },
        _ if fixed == total => 0,
        _ => return false,
    };
    let mut pos = start;
    for m in rel {
        let len = m.len.unwrap_or(first_len);
        let surface = &letters[pos..pos + len];
        if m.strip > len {
            return false;
        }
        let mut base = surface[..len - m.strip].to_vec();
        base.extend_from_slice(&m.append);
        let span = if len == 0 {
            out.last().map_or((pos, pos), |p: &Morpheme| p.span)
        } else {
            (pos, pos + len)
        };
        out.push(Morpheme { surface: surface.to_vec(), base, tag: m.tag.clone(), span });
        pos += len;
    }
    true
}

fn estimate_word_forms(stems: &[StemForm], endings: &BTreeMap<CsId, Vec<EndingSequence>>) -> u128 {
    let mut per_cs: BTreeMap<&CsId, u128> = BTreeMap::new();
    for s in stems {
        *per_cs.entry(&s.cs).or_default() += 1;
    }
    per_cs
        .into_iter()
        .map(|(cs, n)| n * endings.get(cs).map_or(0, |e| e.len() as u128))
        .sum()
}

/// Runs the five compilation steps on a resource set.
pub fn compile(resources: &ResourceSet, policy: CyclePolicy) -> Result<Compiled, LinkError> {
    let mut report = CompileReport::default();
    let mut clock = Instant::now();
    let mut lap = |report: &mut CompileReport, name: &'static str| {
        report.steps.push((name, clock.elapsed()));
        clock = Instant::now();
    };

    // 1. Validation. Resource text becomes letters as it is parsed and
    // expanded.
    let diagnostics = resources::validate(resources);
    if resources::has_errors(&diagnostics) {
        return Err(LinkError::Invalid(
            diagnostics.into_iter().filter(|d| d.severity == resources::Severity::Error).collect(),
        ));
    }
    report.warnings.extend(diagnostics.iter().map(|d| d.to_string()));
    lap(&mut report, "decompose");

    // 2. Allomorphs and derived stems.
    let stem_forms = generate::generate_all(resources, policy)?;
    report.stem_forms = stem_forms.len();
    lap(&mut report, "generate");

    // 3. Stem automaton.
    let cs_ids: Vec<CsId> = resources.cs.iter().map(|(id, _)| id.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut interner = PayloadInterner::new();
    let mut builder = TrieBuilder::new();
    let mut hanja: BTreeMap<String, Vec<HanjaEntry>> = BTreeMap::new();
    for form in &stem_forms {
        let p = interner.intern(&stem_record(form));
        builder.insert(&form.surface, p);
        if let Some(h) = &form.hanja {
            hanja.entry(h.clone()).or_default().push(HanjaEntry { surface: form.surface.clone(), payload: p });
        }
    }
    let stem_table = interner.finish();
    let stem_trie = builder.finish(stem_table.clone());
    let stems = fst::minimize(&stem_trie).map_err(|source| LinkError::Minimize { step: 3, source })?;
    report.stem_trie = Some(stem_trie.stats());
    report.stem_minimal = Some(stems.stats());
    drop(stem_trie);
    lap(&mut report, "stems");

    // 4. Ending automata.
    let endings = enumerate::enumerate_all(&resources.graphs, &resources.cs, policy)?;
    let built: Vec<Result<(CsId, Automaton, Stats, Stats), LinkError>> = cs_ids
        .par_iter()
        .map(|cs| {
            let list = endings.get(cs).map(Vec::as_slice).unwrap_or(&[]);
            let mut interner = PayloadInterner::new();
            let mut builder = TrieBuilder::new();
            for e in list {
                let p = interner.intern(&ending_record(e));
                builder.insert(&e.surface, p);
            }
            let trie = builder.finish(interner.finish());
            let min = fst::minimize(&trie).map_err(|source| LinkError::Minimize { step: 4, source })?;
            Ok((cs.clone(), min.clone(), trie.stats(), min.stats()))
        })
        .collect();
    let mut ending_automata = Vec::with_capacity(built.len());
    for b in built {
        let (cs, automaton, trie_stats, min_stats) = b?;
        add_stats(&mut report.ending_trie, trie_stats);
        add_stats(&mut report.ending_minimal, min_stats);
        ending_automata.push((cs, automaton));
    }
    for (cs, list) in &endings {
        report.ending_counts.insert(cs.clone(), list.len());
        if list.is_empty() && stem_forms.iter().any(|s| &s.cs == cs) {
            report.warnings.push(format!("CS `{cs}` has no endings; its stems match no word"));
        }
    }
    report.word_forms = estimate_word_forms(&stem_forms, &endings);
    lap(&mut report, "endings");

    // 5. Assembly.
    let mut metadata = BTreeMap::new();
    metadata.insert("format_version".to_string(), FORMAT_VERSION.to_string());
    metadata.insert("generator".to_string(), format!("klex {}", env!("CARGO_PKG_VERSION")));
    metadata.insert("resources_sha256".to_string(), resources.fingerprint());
    metadata.insert("max_unroll".to_string(), policy.max_unroll.to_string());
    metadata.insert("max_paths".to_string(), policy.max_paths.to_string());
    metadata.insert("stem_forms".to_string(), stem_forms.len().to_string());
    metadata.insert("word_forms".to_string(), report.word_forms.to_string());
    let lexicon = WordLexicon::assemble(stems, ending_automata, hanja, resources.features.clone(), metadata)
        .expect("records produced by this compiler decode");
    lap(&mut report, "link");

    Ok(Compiled { lexicon, report, stem_forms, endings })
}

impl WordLexicon {
    fn assemble(
        stems: Automaton,
        endings: Vec<(CsId, Automaton)>,
        hanja: BTreeMap<String, Vec<HanjaEntry>>,
        features: FeatureRegistry,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, LoadError> {
        let mut endings: Vec<(CsId, Automaton)> = endings;
        endings.sort_by(|a, b| a.0.cmp(&b.0));
        let mut stem_records = Vec::with_capacity(stems.payloads().len());
        for record in stems.payloads().iter() {
            let mut parts = record.splitn(3, '\t');
            let (Some(cs), Some(h), Some(morphs)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LoadError::BadRecord { record: record.to_string(), message: "expected 3 fields".into() });
            };
            let cs = endings
                .binary_search_by(|(id, _)| id.as_str().cmp(cs))
                .map_err(|_| LoadError::Corrupt(format!("stem record names CS `{cs}` without endings")))?;
            stem_records.push(StemRecord {
                cs,
                hanja: (!h.is_empty()).then(|| h.to_string()),
                morphemes: decode_morphemes(morphs, &features)?,
            });
        }
        let endings = endings
            .into_iter()
            .map(|(cs, automaton)| {
                let records = automaton
                    .payloads()
                    .iter()
                    .map(|r| decode_morphemes(r, &features))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(CsEndings { cs, automaton, records })
            })
            .collect::<Result<Vec<_>, LoadError>>()?;
        let check = |p: &[u32], n: usize| p.iter().all(|&i| (i as usize) < n);
        for s in 0..stems.state_count() as u32 {
            if !check(stems.final_payloads(s).unwrap_or(&[]), stem_records.len()) {
                return Err(LoadError::Corrupt("stem payload index out of range".into()));
            }
        }
        for e in &endings {
            for s in 0..e.automaton.state_count() as u32 {
                if !check(e.automaton.final_payloads(s).unwrap_or(&[]), e.records.len()) {
                    return Err(LoadError::Corrupt(format!("ending payload index out of range in `{}`", e.cs)));
                }
            }
        }
        if hanja.values().flatten().any(|h| h.payload as usize >= stem_records.len()) {
            return Err(LoadError::Corrupt("hanja index out of range".into()));
        }
        Ok(WordLexicon { stems, stem_records, endings, hanja, features, metadata })
    }

    pub fn stem_automaton(&self) -> &Automaton {
        &self.stems
    }

    pub fn ending_automaton(&self, cs: &CsId) -> Option<&Automaton> {
        self.endings.binary_search_by(|e| e.cs.cmp(cs)).ok().map(|i| &self.endings[i].automaton)
    }

    pub fn cs_ids(&self) -> impl Iterator<Item = &CsId> {
        self.endings.iter().map(|e| &e.cs)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn features(&self) -> &FeatureRegistry {
        &self.features
    }

    pub fn hanja_index(&self) -> &BTreeMap<String, Vec<HanjaEntry>> {
        &self.hanja
    }

    /// Every stem/ending decomposition of `word`, ordered by split position,
    /// stem payload, then ending payload.
    pub fn lookup(&self, word: &[char]) -> Vec<Analysis> {
        let mut out = Vec::new();
        self.lookup_into(word, &mut out);
        out
    }

    pub fn lookup_into(&self, word: &[char], out: &mut Vec<Analysis>) {
        self.for_each_split(word, |split, p, record, ending_payloads| {
            let endings = &self.endings[record.cs];
            for &e in ending_payloads {
                let mut morphemes = Vec::with_capacity(record.morphemes.len() + 2);
                if !expand(&record.morphemes, word, 0, split, &mut morphemes)
                    || !expand(&endings.records[e as usize], word, split, word.len(), &mut morphemes)
                {
                    continue;
                }
                out.push(Analysis {
                    split,
                    cs: endings.cs.clone(),
                    hanja: record.hanja.clone(),
                    stem_payload: p,
                    ending_payload: Some(e),
                    morphemes,
                });
            }
        });
    }

    /// Number of analyses of `word`, without building them.
    pub fn count(&self, word: &[char]) -> usize {
        let mut n = 0;
        self.for_each_split(word, |_, _, _, endings| n += endings.len());
        n
    }

    /// Calls `f(split, stem payload, stem record, ending payloads)` for every
    /// stem payload whose CS accepts the rest of the word. Each CS's ending
    /// automaton is walked once per split.
    fn for_each_split<'a, F>(&'a self, word: &[char], mut f: F)
    where
        F: FnMut(usize, u32, &'a StemRecord, &'a [u32]),
    {
        let mut cache: Vec<(usize, Option<&'a [u32]>)> = Vec::new();
        let mut state = self.stems.initial();
        for split in 0..=word.len() {
            if let Some(payloads) = self.stems.final_payloads(state) {
                cache.clear();
                let rest = &word[split..];
                for &p in payloads {
                    let record = &self.stem_records[p as usize];
                    let hit = match cache.iter().find(|(cs, _)| *cs == record.cs) {
                        Some(&(_, hit)) => hit,
                        None => {
                            let hit = self.endings[record.cs].automaton.accept(rest);
                            cache.push((record.cs, hit));
                            hit
                        }
                    };
                    if let Some(endings) = hit {
                        f(split, p, record, endings);
                    }
                }
            }
            if split == word.len() {
                break;
            }
            match self.stems.step(state, word[split]) {
                Some(next) => state = next,
                None => break,
            }
        }
    }

    /// Stem-only analyses of stems spelled `token` in hanja. Spans refer to
    /// the stem's Hangul letters.
    pub fn lookup_hanja(&self, token: &str) -> Vec<Analysis> {
        let Some(entries) = self.hanja.get(token) else { return Vec::new() };
        let mut out = Vec::with_capacity(entries.len());
        for entry in entries {
            let record = &self.stem_records[entry.payload as usize];
            let mut morphemes = Vec::new();
            if expand(&record.morphemes, &entry.surface, 0, entry.surface.len(), &mut morphemes) {
                out.push(Analysis {
                    split: entry.surface.len(),
                    cs: self.endings[record.cs].cs.clone(),
                    hanja: record.hanja.clone(),
                    stem_payload: entry.payload,
                    ending_payload: None,
                    morphemes,
                });
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut sections: Vec<(u8, String, Vec<u8>)> = Vec::new();
        sections.push((SECTION_STEMS, String::new(), self.stems.serialize()));
        for e in &self.endings {
            sections.push((SECTION_ENDINGS, e.cs.to_string(), e.automaton.serialize()));
        }
        let mut hanja = Vec::new();
        write_varint(&mut hanja, self.hanja.len() as u64);
        for (text, entries) in &self.hanja {
            write_str(&mut hanja, text);
            write_varint(&mut hanja, entries.len() as u64);
            for e in entries {
                write_str(&mut hanja, &e.surface.iter().collect::<String>());
                write_varint(&mut hanja, e.payload as u64);
            }
        }
        sections.push((SECTION_HANJA, String::new(), hanja));
        sections.push((SECTION_FEATURES, String::new(), self.features.format().into_bytes()));
        let meta: String = self.metadata.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        sections.push((SECTION_METADATA, String::new(), meta.into_bytes()));

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (kind, name, body) in &sections {
            out.push(*kind);
            write_str(&mut out, name);
            out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        }
        for (_, _, body) in &sections {
            out.extend_from_slice(body);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LoadError> {
        if bytes.len() < 4 {
            return Err(LoadError::TruncatedInput);
        }
        if &bytes[..4] != MAGIC {
            return Err(LoadError::BadMagic);
        }
        if bytes.len() < 6 {
            return Err(LoadError::TruncatedInput);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(LoadError::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        if bytes.len() < 14 {
            return Err(LoadError::TruncatedInput);
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
            return Err(LoadError::ChecksumMismatch);
        }
        let mut r = Cursor::new(&body[6..]);
        let count = read_u32(&mut r)?;
        let mut table = Vec::new();
        for _ in 0..count {
            let mut kind = [0u8];
            r.read_exact(&mut kind).map_err(|_| LoadError::TruncatedInput)?;
            let name = read_str(&mut r)?;
            let len = read_u32(&mut r)? as usize;
            table.push((kind[0], name, len));
        }
        let mut pos = 6 + r.position() as usize;
        let mut stems = None;
        let mut endings = Vec::new();
        let mut hanja = BTreeMap::new();
        let mut features = None;
        let mut metadata = BTreeMap::new();
        for (kind, name, len) in table {
            let data = body.get(pos..pos + len).ok_or(LoadError::TruncatedInput)?;
            pos += len;
            let section = |e| LoadError::Section { section: if name.is_empty() { "stems".into() } else { name.clone() }, source: e };
            match kind {
                SECTION_STEMS => stems = Some(Automaton::deserialize(data).map_err(section)?),
                SECTION_ENDINGS => endings.push((CsId::new(name.clone()), Automaton::deserialize(data).map_err(section)?)),
                SECTION_HANJA => hanja = read_hanja(data)?,
                SECTION_FEATURES => {
                    let text = std::str::from_utf8(data).map_err(|_| LoadError::Corrupt("features not UTF-8".into()))?;
                    features = Some(
                        FeatureRegistry::parse(text).map_err(|e| LoadError::Corrupt(format!("feature registry: {e}")))?,
                    );
                }
                SECTION_METADATA => {
                    let text = std::str::from_utf8(data).map_err(|_| LoadError::Corrupt("metadata not UTF-8".into()))?;
                    for line in text.lines() {
                        let (k, v) = line.split_once('=').ok_or_else(|| LoadError::Corrupt(format!("metadata line `{line}`")))?;
                        metadata.insert(k.to_string(), v.to_string());
                    }
                }
                other => return Err(LoadError::Corrupt(format!("unknown section kind {other}"))),
            }
        }
        if pos != body.len() {
            return Err(LoadError::Corrupt("trailing bytes after sections".into()));
        }
        let stems = stems.ok_or_else(|| LoadError::Corrupt("missing stem section".into()))?;
        let features = features.ok_or_else(|| LoadError::Corrupt("missing feature section".into()))?;
        if endings.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(LoadError::Corrupt("ending sections not in CS order".into()));
        }
        WordLexicon::assemble(stems, endings, hanja, features, metadata)
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    write_varint(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

fn read_str<R: Read>(r: &mut R) -> Result<String, LoadError> {
    let len = read_varint(r)? as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf).map_err(|_| LoadError::TruncatedInput)?;
    if buf.len() != len {
        return Err(LoadError::TruncatedInput);
    }
    String::from_utf8(buf).map_err(|_| LoadError::Corrupt("string not UTF-8".into()))
}

fn read_hanja(data: &[u8]) -> Result<BTreeMap<String, Vec<HanjaEntry>>, LoadError> {
    let mut r = Cursor::new(data);
    let mut out = BTreeMap::new();
    for _ in 0..read_varint(&mut r)? {
        let text = read_str(&mut r)?;
        let n = read_varint(&mut r)?;
        let mut entries = Vec::new();
        for _ in 0..n {
            let surface = read_str(&mut r)?.chars().collect();
            let payload = read_varint(&mut r)? as u32;
            entries.push(HanjaEntry { surface, payload });
        }
        out.insert(text, entries);
    }
    if r.position() as usize != data.len() {
        return Err(LoadError::Corrupt("trailing bytes in hanja index".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hangul::{compose_letters, decompose_text};

    fn resources() -> ResourceSet {
        let dir = tempfile::tempdir().unwrap();
        let files = [
            ("registry.feats", "past\ty\n"),
            ("registry.cs", "CS_N\tN_END\nCS_V\tV_END\nCS_EMPTY\tNOTHING\n"),
            ("lexicon.stems", "집\tN\tCS_N\n책\tN\tCS_N\t冊\n산\tN\tCS_N\t山\n산\tN\tCS_N\t算\n가\tV\tCS_V\n가지\tN\tCS_N\n저\tPRO\tCS_EMPTY\n"),
            ("graphs/N_END.grf", "states 3 initial 0 final 0,1,2\n0\t1\tm:이/이.Post\n0\t2\tm:지/지.Post\n"),
            ("graphs/V_END.grf", "states 2 initial 0 final 1\n0\t1\tm:지/지.Sc\n0\t1\tm:ㅆ다/았다.St+past=y\n"),
            ("graphs/NOTHING.grf", "states 1 initial 0 final -\n"),
        ];
        for (name, text) in files {
            let path = dir.path().join(name);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(path, text).unwrap();
        }
        ResourceSet::load_dir(dir.path()).unwrap()
    }

    fn render(a: &Analysis) -> String {
        a.morphemes
            .iter()
            .map(|m| format!("{}/{}.{}", compose_letters(&m.surface), compose_letters(&m.base), m.tag))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    #[test]
    fn two_split_points() {
        let c = compile(&resources(), CyclePolicy::default()).unwrap();
        // 가지 = N 가지 + empty ending, or V 가 + 지.Sc
        let analyses = c.lexicon.lookup(&decompose_text("가지"));
        let rendered: Vec<String> = analyses.iter().map(render).collect();
        assert_eq!(rendered, vec!["가/가.V + 지/지.Sc", "가지/가지.N"]);
        assert_eq!(analyses[0].split, 2);
        assert_eq!(c.lexicon.count(&decompose_text("가지")), 2);
    }

    #[test]
    fn relative_base_and_spans() {
        let c = compile(&resources(), CyclePolicy::default()).unwrap();
        let a = c.lexicon.lookup(&decompose_text("갔다"));
        assert_eq!(a.len(), 1);
        assert_eq!(render(&a[0]), "가/가.V + ㅆ다/았다.St+past=y");
        assert_eq!(a[0].morphemes[1].span, (2, 5));
        assert!(c.lexicon.lookup(&decompose_text("가")).is_empty());
    }

    #[test]
    fn empty_ending_list_warns() {
        let c = compile(&resources(), CyclePolicy::default()).unwrap();
        assert!(c.lexicon.lookup(&decompose_text("저")).is_empty());
        assert!(c.report.warnings.iter().any(|w| w.contains("CS_EMPTY")));
    }

    #[test]
    fn hanja_lookup() {
        let c = compile(&resources(), CyclePolicy::default()).unwrap();
        assert_eq!(c.lexicon.lookup_hanja("冊").len(), 1);
        assert_eq!(c.lexicon.lookup_hanja("山").len(), 1);
        assert!(c.lexicon.lookup_hanja("水").is_empty());
        // 산 has two hanja readings, hence two analyses.
        assert_eq!(c.lexicon.lookup(&decompose_text("산이")).len(), 2);
    }

    #[test]
    fn bytes_roundtrip_and_errors() {
        let c = compile(&resources(), CyclePolicy::default()).unwrap();
        let bytes = c.lexicon.to_bytes();
        let back = WordLexicon::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let word = decompose_text("책이");
        assert_eq!(back.lookup(&word), c.lexicon.lookup(&word));
        assert!(matches!(WordLexicon::from_bytes(b"KFST\x01\x00"), Err(LoadError::BadMagic)));
        assert!(matches!(WordLexicon::from_bytes(&bytes[..3]), Err(LoadError::TruncatedInput)));
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert!(matches!(WordLexicon::from_bytes(&flipped), Err(LoadError::ChecksumMismatch)));
        let again = compile(&resources(), CyclePolicy::default()).unwrap();
        assert_eq!(again.lexicon.to_bytes(), bytes);
    }

    #[test]
    fn record_encoding_roundtrip() {
        let features = FeatureRegistry::parse("past\ty\n").unwrap();
        let m = |s: &str, b: &str, t: &str| MorphemeArc {
            surface: decompose_text(s),
            base: decompose_text(b),
            tag: tagset::parse_tag(t, &features).unwrap(),
        };
        let morphemes = vec![m("셨", "으시", "Morph"), m("", "었", "Morph+past=y"), m("다", "다", "St")];
        let mut text = String::new();
        encode_morphemes(&mut text, &morphemes);
        let rel = decode_morphemes(&text, &features).unwrap();
        let letters: Vec<char> = morphemes.iter().flat_map(|m| m.surface.clone()).collect();
        let mut out = Vec::new();
        assert!(expand(&rel, &letters, 0, letters.len(), &mut out));
        let back: Vec<MorphemeArc> = out
            .iter()
            .map(|x| MorphemeArc { surface: x.surface.clone(), base: x.base.clone(), tag: x.tag.clone() })
            .collect();
        assert_eq!(back, morphemes);
        assert_eq!(out[0].span, (0, 3));
        assert_eq!(out[1].span, (0, 3));
        assert_eq!(out[2].span, (3, 5));
    }
}
