//! Readable resource files: feature registry (`.feats`), CS registry
//! (`.cs`), stem lexicons (`.stems`), graphs (`.grf`) and derivation tables
//! (`.deriv`).
//!
//! Every parser keeps the file name and line of what it read so that
//! [`validate`] and the error types can point back at the source.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hangul::{self, LetterString, Role};
use crate::tagset::{self, FeatureRegistry, RegistryError, StructuredTag, TagError};

/// Where a resource item came from. Locations never take part in equality,
/// so a parsed resource compares equal to the same resource reparsed from
/// its canonical text.
#[derive(Clone, Debug, Default)]
pub struct SourceLoc {
    pub file: String,
    pub line: usize,
}

impl SourceLoc {
    pub fn new(file: impl Into<String>, line: usize) -> Self {
        SourceLoc { file: file.into(), line }
    }
}

impl PartialEq for SourceLoc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for SourceLoc {}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.file)
        } else {
            write!(f, "{}:{}", self.file, self.line)
        }
    }
}

/// Compatibility symbol: selects the set of endings a stem form accepts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CsId(pub String);

impl CsId {
    pub fn new(id: impl Into<String>) -> Self {
        CsId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: SourceLoc, message: String },
    #[error("{loc}: unknown compatibility symbol `{cs}`")]
    UnknownCs { loc: SourceLoc, cs: String },
    #[error("{loc}: invalid tag: {source}")]
    InvalidTag { loc: SourceLoc, source: TagError },
    #[error("{loc}: compatibility symbol `{cs}` declared twice")]
    DuplicateCs { loc: SourceLoc, cs: String },
    #[error("{loc}: graph `{name}` already defined in {first}")]
    DuplicateGraphName { loc: SourceLoc, name: String, first: String },
    #[error("{file}: {source}")]
    Registry { file: String, source: RegistryError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl ResourceError {
    fn syntax(loc: SourceLoc, message: impl Into<String>) -> Self {
        ResourceError::Syntax { loc, message: message.into() }
    }
}

/// One line of a stem lexicon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StemEntry {
    /// As written: syllabic hangul, possibly with jamo.
    pub base_form: String,
    pub tag: StructuredTag,
    pub cs: CsId,
    pub hanja: Option<String>,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsEntry {
    pub root_graph: String,
    /// Rule graph producing stem allomorphs for stems of this CS.
    pub allomorph_graph: Option<String>,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsRegistry {
    entries: IndexMap<CsId, CsEntry>,
}

impl CsRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `cs_id<TAB>root_graph[<TAB>allomorph_graph]` per line.
    pub fn parse(text: &str, file: &str) -> Result<Self, ResourceError> {
        let mut registry = CsRegistry::new();
        registry.extend_from(text, file)?;
        Ok(registry)
    }

    pub fn extend_from(&mut self, text: &str, file: &str) -> Result<(), ResourceError> {
        for (line, fields) in data_lines(text) {
            let loc = SourceLoc::new(file, line);
            if !(2..=3).contains(&fields.len()) {
                return Err(ResourceError::syntax(
                    loc,
                    "expected `cs_id<TAB>root_graph[<TAB>allomorph_graph]`",
                ));
            }
            for f in &fields {
                if !tagset::is_token(f) {
                    return Err(ResourceError::syntax(loc, format!("`{f}` is not a valid identifier")));
                }
            }
            let cs = CsId::new(fields[0]);
            if self.entries.contains_key(&cs) {
                return Err(ResourceError::DuplicateCs { loc, cs: cs.0 });
            }
            self.entries.insert(
                cs,
                CsEntry {
                    root_graph: fields[1].to_string(),
                    allomorph_graph: fields.get(2).map(|s| s.to_string()),
                    loc,
                },
            );
        }
        Ok(())
    }

    pub fn insert(&mut self, cs: CsId, root_graph: &str, allomorph_graph: Option<&str>) {
        self.entries.insert(
            cs,
            CsEntry {
                root_graph: root_graph.to_string(),
                allomorph_graph: allomorph_graph.map(str::to_string),
                loc: SourceLoc::default(),
            },
        );
    }

    pub fn get(&self, cs: &CsId) -> Option<&CsEntry> {
        self.entries.get(cs)
    }

    pub fn contains(&self, cs: &str) -> bool {
        self.entries.contains_key(&CsId::new(cs))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CsId, &CsEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for (cs, entry) in &self.entries {
            out.push_str(&format!("{}\t{}", cs, entry.root_graph));
            if let Some(g) = &entry.allomorph_graph {
                out.push('\t');
                out.push_str(g);
            }
            out.push('\n');
        }
        out
    }
}

/// Stems of `source` CS extended by every path of `root_graph` become
/// derived stems of `target` CS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub source: CsId,
    pub root_graph: String,
    pub target: CsId,
    /// Tag of the derived stem; the last suffix's tag when absent.
    pub tag: Option<StructuredTag>,
    pub loc: SourceLoc,
}

/// Input/output pair on a suffix or derivation graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MorphemeArc {
    pub surface: LetterString,
    pub base: LetterString,
    pub tag: StructuredTag,
}

/// Output of an allomorph rule path: the allomorph's CS and the feature
/// values to set on its tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputAssignment {
    pub cs: CsId,
    pub features: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArcLabel {
    Morpheme(MorphemeArc),
    Call(String),
    /// Remove this letter from the end of the form.
    Remove(char),
    /// Append this letter to the form.
    Append(char),
    Output(OutputAssignment),
}

impl ArcLabel {
    fn is_rule_label(&self) -> bool {
        matches!(self, ArcLabel::Remove(_) | ArcLabel::Append(_) | ArcLabel::Output(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphArc {
    pub src: usize,
    pub dst: usize,
    pub label: ArcLabel,
    pub loc: SourceLoc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    /// No arcs at all; usable as either kind.
    Empty,
    Suffix,
    Allomorph,
}

/// One named graph. States are `0..state_count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub name: String,
    pub state_count: usize,
    pub initial: usize,
    pub finals: Vec<usize>,
    pub arcs: Vec<GraphArc>,
    pub loc: SourceLoc,
}

impl Graph {
    pub fn kind(&self) -> GraphKind {
        match self.arcs.first() {
            None => GraphKind::Empty,
            Some(a) if a.label.is_rule_label() => GraphKind::Allomorph,
            Some(_) => GraphKind::Suffix,
        }
    }

    pub fn is_final(&self, state: usize) -> bool {
        self.finals.contains(&state)
    }

    /// Outgoing arc indices per state, in file order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.state_count];
        for (i, arc) in self.arcs.iter().enumerate() {
            adj[arc.src].push(i);
        }
        adj
    }

    pub fn calls(&self) -> impl Iterator<Item = (usize, &str)> {
        self.arcs.iter().enumerate().filter_map(|(i, a)| match &a.label {
            ArcLabel::Call(g) => Some((i, g.as_str())),
            _ => None,
        })
    }

    /// True when the state graph has a cycle reachable from the initial
    /// state.
    pub fn has_cycle(&self) -> bool {
        let adj = self.adjacency();
        let mut color = vec![0u8; self.state_count];
        let mut stack = vec![(self.initial, 0usize)];
        color[self.initial] = 1;
        while let Some(&mut (state, ref mut next)) = stack.last_mut() {
            if let Some(&arc) = adj[state].get(*next) {
                *next += 1;
                let dst = self.arcs[arc].dst;
                match color[dst] {
                    0 => {
                        color[dst] = 1;
                        stack.push((dst, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                color[state] = 2;
                stack.pop();
            }
        }
        false
    }
}

/// Named graphs, possibly calling one another.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SuffixRtn {
    graphs: BTreeMap<String, Graph>,
}

impl SuffixRtn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, graph: Graph) -> Result<(), ResourceError> {
        if let Some(first) = self.graphs.get(&graph.name) {
            return Err(ResourceError::DuplicateGraphName {
                loc: graph.loc.clone(),
                name: graph.name.clone(),
                first: first.loc.file.clone(),
            });
        }
        self.graphs.insert(graph.name.clone(), graph);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Graph> {
        self.graphs.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.graphs.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.graphs.values()
    }
}

/// Everything the compiler reads.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResourceSet {
    pub features: FeatureRegistry,
    pub cs: CsRegistry,
    pub stems: Vec<StemEntry>,
    pub graphs: SuffixRtn,
    pub derivations: Vec<Derivation>,
}

/// Yields `(line_number, tab-separated fields)` for non-blank, non-comment
/// lines.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            None
        } else {
            Some((i + 1, raw.split('\t').collect()))
        }
    })
}

pub fn is_ideograph(ch: char) -> bool {
    matches!(ch as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x2F800..=0x2FA1F
        | 0x30000..=0x3134F)
}

/// Parses a `.stems` file: `base_form<TAB>tag<TAB>cs_id[<TAB>hanja]`.
pub fn parse_stem_lexicon(
    text: &str,
    file: &str,
    cs: &CsRegistry,
    features: &FeatureRegistry,
) -> Result<Vec<StemEntry>, ResourceError> {
    let mut entries = Vec::new();
    for (line, fields) in data_lines(text) {
        let loc = SourceLoc::new(file, line);
        if !(3..=4).contains(&fields.len()) {
            return Err(ResourceError::syntax(loc, "expected `base_form<TAB>tag<TAB>cs_id[<TAB>hanja]`"));
        }
        let base_form = fields[0].trim();
        if base_form.is_empty() {
            return Err(ResourceError::syntax(loc, "empty base form"));
        }
        let tag = tagset::parse_tag(fields[1], features)
            .map_err(|source| ResourceError::InvalidTag { loc: loc.clone(), source })?;
        if !cs.contains(fields[2]) {
            return Err(ResourceError::UnknownCs { loc, cs: fields[2].to_string() });
        }
        let hanja = match fields.get(3).map(|h| h.trim()) {
            None | Some("") => None,
            Some(h) if h.chars().all(is_ideograph) => Some(h.to_string()),
            Some(h) => {
                return Err(ResourceError::syntax(loc, format!("hanja `{h}` contains non-ideograph characters")))
            }
        };
        entries.push(StemEntry {
            base_form: base_form.to_string(),
            tag,
            cs: CsId::new(fields[2]),
            hanja,
            loc,
        });
    }
    Ok(entries)
}

pub fn format_stem_lexicon(entries: &[StemEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{}\t{}\t{}", e.base_form, e.tag, e.cs));
        if let Some(h) = &e.hanja {
            out.push('\t');
            out.push_str(h);
        }
        out.push('\n');
    }
    out
}

/// Parses a `.deriv` file: `source_cs<TAB>root_graph<TAB>target_cs[<TAB>tag]`.
pub fn parse_derivations(
    text: &str,
    file: &str,
    cs: &CsRegistry,
    features: &FeatureRegistry,
) -> Result<Vec<Derivation>, ResourceError> {
    let mut out = Vec::new();
    for (line, fields) in data_lines(text) {
        let loc = SourceLoc::new(file, line);
        if !(3..=4).contains(&fields.len()) {
            return Err(ResourceError::syntax(loc, "expected `source_cs<TAB>root_graph<TAB>target_cs[<TAB>tag]`"));
        }
        let tag = match fields.get(3) {
            None => None,
            Some(t) => Some(
                tagset::parse_tag(t, features).map_err(|source| ResourceError::InvalidTag { loc: loc.clone(), source })?,
            ),
        };
        for id in [fields[0], fields[2]] {
            if !cs.contains(id) {
                return Err(ResourceError::UnknownCs { loc, cs: id.to_string() });
            }
        }
        if !tagset::is_token(fields[1]) {
            return Err(ResourceError::syntax(loc, format!("`{}` is not a valid graph name", fields[1])));
        }
        out.push(Derivation {
            source: CsId::new(fields[0]),
            root_graph: fields[1].to_string(),
            target: CsId::new(fields[2]),
            tag,
            loc,
        });
    }
    Ok(out)
}

pub fn format_derivations(derivations: &[Derivation]) -> String {
    derivations
        .iter()
        .map(|d| match &d.tag {
            Some(tag) => format!("{}\t{}\t{}\t{}\n", d.source, d.root_graph, d.target, tag),
            None => format!("{}\t{}\t{}\n", d.source, d.root_graph, d.target),
        })
        .collect()
}

/// Parses one `.grf` graph.
///
/// Header: `states N initial 0 final f1,f2,...` (the final list may be
/// empty). Then `src<TAB>dst<TAB>arc` lines where `arc` is one of
/// `m:surface/base.tag`, `c:graph`, `e:-j`, `e:+j`, `o:cs[+feat=val...]`.
/// An empty surface or base is written `0`.
pub fn parse_graph(
    name: &str,
    text: &str,
    file: &str,
    features: &FeatureRegistry,
) -> Result<Graph, ResourceError> {
    if !tagset::is_token(name) {
        return Err(ResourceError::syntax(SourceLoc::new(file, 0), format!("`{name}` is not a valid graph name")));
    }
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let l = l.trim_end_matches('\r');
        !(l.trim().is_empty() || l.starts_with('#'))
    });
    let (header_idx, header) = lines
        .next()
        .ok_or_else(|| ResourceError::syntax(SourceLoc::new(file, 1), "missing `states` header"))?;
    let header_loc = SourceLoc::new(file, header_idx + 1);
    let (state_count, initial, finals) = parse_header(header.trim_end_matches('\r'))
        .ok_or_else(|| ResourceError::syntax(header_loc.clone(), "expected `states N initial S final F1,F2,...`"))?;
    let check_state = |s: usize, loc: &SourceLoc| {
        if s < state_count {
            Ok(s)
        } else {
            Err(ResourceError::syntax(loc.clone(), format!("state {s} not declared (graph has {state_count})")))
        }
    };
    check_state(initial, &header_loc)?;
    for &f in &finals {
        check_state(f, &header_loc)?;
    }

    let mut arcs = Vec::new();
    let mut rule_arcs = 0;
    for (idx, raw) in lines {
        let loc = SourceLoc::new(file, idx + 1);
        let fields: Vec<&str> = raw.trim_end_matches('\r').split('\t').collect();
        if fields.len() != 3 {
            return Err(ResourceError::syntax(loc, "expected `src<TAB>dst<TAB>arc`"));
        }
        let parse_state = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| ResourceError::syntax(loc.clone(), format!("bad state id `{s}`")))
        };
        let src = check_state(parse_state(fields[0])?, &loc)?;
        let dst = check_state(parse_state(fields[1])?, &loc)?;
        let label = parse_arc(fields[2], &loc, features)?;
        if label.is_rule_label() {
            rule_arcs += 1;
        }
        arcs.push(GraphArc { src, dst, label, loc });
    }
    if rule_arcs != 0 && rule_arcs != arcs.len() {
        return Err(ResourceError::syntax(header_loc, "graph mixes rule arcs (e:, o:) with m:/c: arcs"));
    }
    Ok(Graph { name: name.to_string(), state_count, initial, finals, arcs, loc: header_loc })
}

fn parse_header(header: &str) -> Option<(usize, usize, Vec<usize>)> {
    let words: Vec<&str> = header.split_whitespace().collect();
    if !(5..=6).contains(&words.len())
        || words[0] != "states"
        || words[2] != "initial"
        || words[4] != "final"
    {
        return None;
    }
    let count = words[1].parse().ok()?;
    let initial = words[3].parse().ok()?;
    let finals = match words.get(5) {
        None | Some(&"-") => Vec::new(),
        Some(list) => list
            .split(',')
            .map(|s| s.parse().ok())
            .collect::<Option<Vec<usize>>>()?,
    };
    if count == 0 {
        return None;
    }
    Some((count, initial, finals))
}

fn parse_form(text: &str) -> LetterString {
    if text == "0" {
        Vec::new()
    } else {
        hangul::to_letters(text, Role::Suffix)
    }
}

fn parse_single_letter(text: &str, loc: &SourceLoc) -> Result<char, ResourceError> {
    let letters = hangul::to_letters(text, Role::Stem);
    match letters.as_slice() {
        [c] if hangul::jamo_class(*c).is_some() => Ok(*c),
        _ => Err(ResourceError::syntax(loc.clone(), format!("`{text}` is not a single jamo"))),
    }
}

fn parse_arc(
    text: &str,
    loc: &SourceLoc,
    features: &FeatureRegistry,
) -> Result<ArcLabel, ResourceError> {
    let (kind, body) = text
        .split_once(':')
        .ok_or_else(|| ResourceError::syntax(loc.clone(), format!("arc `{text}` lacks a kind prefix")))?;
    match kind {
        "m" => {
            let (surface, rest) = body
                .split_once('/')
                .ok_or_else(|| ResourceError::syntax(loc.clone(), "expected `m:surface/base.tag`"))?;
            let (base, tag) = rest
                .split_once('.')
                .ok_or_else(|| ResourceError::syntax(loc.clone(), "expected `m:surface/base.tag`"))?;
            if surface.is_empty() || base.is_empty() {
                return Err(ResourceError::syntax(loc.clone(), "write an empty surface or base as `0`"));
            }
            let tag = tagset::parse_tag(tag, features)
                .map_err(|source| ResourceError::InvalidTag { loc: loc.clone(), source })?;
            let surface = parse_form(surface);
            let base = parse_form(base);
            if surface.is_empty() && base.is_empty() {
                return Err(ResourceError::syntax(loc.clone(), "surface and base both empty"));
            }
            Ok(ArcLabel::Morpheme(MorphemeArc { surface, base, tag }))
        }
        "c" => {
            if !tagset::is_token(body) {
                return Err(ResourceError::syntax(loc.clone(), format!("`{body}` is not a valid graph name")));
            }
            Ok(ArcLabel::Call(body.to_string()))
        }
        "e" => {
            let mut chars = body.chars();
            match chars.next() {
                Some('-') => Ok(ArcLabel::Remove(parse_single_letter(chars.as_str(), loc)?)),
                Some('+') => Ok(ArcLabel::Append(parse_single_letter(chars.as_str(), loc)?)),
                _ => Err(ResourceError::syntax(loc.clone(), "expected `e:-j` or `e:+j`")),
            }
        }
        "o" => {
            let mut parts = body.split('+');
            let cs = parts.next().unwrap_or_default();
            if !tagset::is_token(cs) {
                return Err(ResourceError::syntax(loc.clone(), format!("`{cs}` is not a valid CS id")));
            }
            let mut feats = Vec::new();
            for part in parts {
                let (name, value) = part
                    .split_once('=')
                    .ok_or_else(|| ResourceError::syntax(loc.clone(), format!("malformed feature `{part}`")))?;
                features
                    .allows(name, value)
                    .map_err(|source| ResourceError::InvalidTag { loc: loc.clone(), source })?;
                feats.push((name.to_string(), value.to_string()));
            }
            Ok(ArcLabel::Output(OutputAssignment { cs: CsId::new(cs), features: feats }))
        }
        other => Err(ResourceError::syntax(loc.clone(), format!("unknown arc kind `{other}`"))),
    }
}

fn format_form(letters: &[char]) -> String {
    if letters.is_empty() {
        "0".to_string()
    } else {
        hangul::compose_letters(letters)
    }
}

fn format_letter(ch: char) -> String {
    hangul::letter_identity(ch).to_string()
}

pub fn format_graph(graph: &Graph) -> String {
    let finals = if graph.finals.is_empty() {
        "-".to_string()
    } else {
        graph.finals.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    };
    let mut out = format!("states {} initial {} final {}\n", graph.state_count, graph.initial, finals);
    for arc in &graph.arcs {
        let label = match &arc.label {
            ArcLabel::Morpheme(m) => {
                format!("m:{}/{}.{}", format_form(&m.surface), format_form(&m.base), m.tag)
            }
            ArcLabel::Call(g) => format!("c:{g}"),
            ArcLabel::Remove(c) => format!("e:-{}", format_letter(*c)),
            ArcLabel::Append(c) => format!("e:+{}", format_letter(*c)),
            ArcLabel::Output(o) => {
                let mut s = format!("o:{}", o.cs);
                for (n, v) in &o.features {
                    s.push_str(&format!("+{n}={v}"));
                }
                s
            }
        };
        out.push_str(&format!("{}\t{}\t{}\n", arc.src, arc.dst, label));
    }
    out
}

/// Parses a set of `(graph name, file name, text)` triples.
pub fn parse_rtn<'a, I>(files: I, features: &FeatureRegistry) -> Result<SuffixRtn, ResourceError>
where
    I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
{
    let mut rtn = SuffixRtn::new();
    for (name, file, text) in files {
        rtn.insert(parse_graph(name, text, file, features)?)?;
    }
    Ok(rtn)
}

fn read(path: &Path) -> Result<String, ResourceError> {
    fs::read_to_string(path).map_err(|source| ResourceError::Io { path: path.to_path_buf(), source })
}

fn display_name(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

impl ResourceSet {
    /// Loads every resource file below `dir`. Files are read in a fixed
    /// order (registries, graphs, stems, derivations; paths sorted within
    /// each kind).
    pub fn load_dir(dir: &Path) -> Result<ResourceSet, ResourceError> {
        let mut files: BTreeMap<&'static str, Vec<PathBuf>> = BTreeMap::new();
        for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| ResourceError::Io {
                path: e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf()),
                source: e.into(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let kind = match entry.path().extension().and_then(|e| e.to_str()) {
                Some("feats") => "feats",
                Some("cs") => "cs",
                Some("grf") => "grf",
                Some("stems") => "stems",
                Some("deriv") => "deriv",
                _ => continue,
            };
            files.entry(kind).or_default().push(entry.path().to_path_buf());
        }
        let mut texts = Vec::new();
        for path in files.into_values().flatten() {
            texts.push((display_name(dir, &path), read(&path)?));
        }
        ResourceSet::from_files(texts)
    }

    /// Parses `(relative path, text)` pairs by extension, in the same order
    /// as [`load_dir`](Self::load_dir). Graph names are file stems; files
    /// with other extensions are ignored.
    pub fn from_files<I>(files: I) -> Result<ResourceSet, ResourceError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut by_kind: BTreeMap<usize, Vec<(String, String)>> = BTreeMap::new();
        for (name, text) in files {
            let kind = match Path::new(&name).extension().and_then(|e| e.to_str()) {
                Some("feats") => 0,
                Some("cs") => 1,
                Some("grf") => 2,
                Some("stems") => 3,
                Some("deriv") => 4,
                _ => continue,
            };
            by_kind.entry(kind).or_default().push((name, text));
        }
        for files in by_kind.values_mut() {
            files.sort_by(|a, b| a.0.cmp(&b.0));
        }
        let kind = |k: usize| by_kind.get(&k).map(Vec::as_slice).unwrap_or(&[]);

        let mut set = ResourceSet::default();
        for (name, text) in kind(0) {
            set.features
                .extend_from(text)
                .map_err(|source| ResourceError::Registry { file: name.clone(), source })?;
        }
        for (name, text) in kind(1) {
            set.cs.extend_from(text, name)?;
        }
        for (name, text) in kind(2) {
            let graph_name = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            set.graphs.insert(parse_graph(graph_name, text, name, &set.features)?)?;
        }
        for (name, text) in kind(3) {
            set.stems.extend(parse_stem_lexicon(text, name, &set.cs, &set.features)?);
        }
        for (name, text) in kind(4) {
            set.derivations.extend(parse_derivations(text, name, &set.cs, &set.features)?);
        }
        Ok(set)
    }

    /// Canonical file contents as `(relative path, text)` pairs.
    pub fn canonical_files(&self) -> Vec<(String, String)> {
        let mut files = vec![
            ("registry.feats".to_string(), self.features.format()),
            ("registry.cs".to_string(), self.cs.format()),
        ];
        let mut by_file: IndexMap<String, Vec<StemEntry>> = IndexMap::new();
        for stem in &self.stems {
            let name = Path::new(&stem.loc.file)
                .file_name()
                .and_then(|n| n.to_str())
                .filter(|n| n.ends_with(".stems"))
                .unwrap_or("lexicon.stems")
                .to_string();
            by_file.entry(name).or_default().push(stem.clone());
        }
        for (name, stems) in by_file {
            files.push((name, format_stem_lexicon(&stems)));
        }
        for graph in self.graphs.graphs() {
            files.push((format!("graphs/{}.grf", graph.name), format_graph(graph)));
        }
        if !self.derivations.is_empty() {
            files.push(("derivations.deriv".to_string(), format_derivations(&self.derivations)));
        }
        files
    }

    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        for (name, text) in self.canonical_files() {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical text of every resource.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, text) in self.canonical_files() {
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
            hasher.update((text.len() as u64).to_le_bytes());
            hasher.update(text.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    DanglingCall,
    DanglingRootGraph,
    DanglingAllomorphGraph,
    DanglingDerivationGraph,
    WrongGraphKind,
    UnknownCs,
    UnreachableGraph,
    NoFinalState,
    CyclicRuleGraph,
    OutputCount,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub loc: SourceLoc,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}: {}: {}", self.loc, sev, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

/// Cross-file consistency checks. An empty list means every invariant holds.
pub fn validate(resources: &ResourceSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut error = |kind, loc: &SourceLoc, message: String| {
        out.push(Diagnostic { severity: Severity::Error, kind, loc: loc.clone(), message })
    };
    let graphs = &resources.graphs;

    // Roots of everything that gets compiled.
    let mut suffix_roots: Vec<&str> = Vec::new();
    for (cs, entry) in resources.cs.iter() {
        match graphs.get(&entry.root_graph) {
            None => error(
                DiagnosticKind::DanglingRootGraph,
                &entry.loc,
                format!("CS `{cs}` names root graph `{}`, which does not exist", entry.root_graph),
            ),
            Some(g) if g.kind() == GraphKind::Allomorph => error(
                DiagnosticKind::WrongGraphKind,
                &entry.loc,
                format!("root graph `{}` of CS `{cs}` is an allomorph rule graph", g.name),
            ),
            Some(g) => suffix_roots.push(&g.name),
        }
        if let Some(rule) = &entry.allomorph_graph {
            match graphs.get(rule) {
                None => error(
                    DiagnosticKind::DanglingAllomorphGraph,
                    &entry.loc,
                    format!("CS `{cs}` names allomorph graph `{rule}`, which does not exist"),
                ),
                Some(g) if g.kind() == GraphKind::Suffix => error(
                    DiagnosticKind::WrongGraphKind,
                    &entry.loc,
                    format!("allomorph graph `{rule}` of CS `{cs}` contains morpheme arcs"),
                ),
                Some(_) => {}
            }
        }
    }
    for d in &resources.derivations {
        match graphs.get(&d.root_graph) {
            None => error(
                DiagnosticKind::DanglingDerivationGraph,
                &d.loc,
                format!("derivation names graph `{}`, which does not exist", d.root_graph),
            ),
            Some(g) if g.kind() == GraphKind::Allomorph => error(
                DiagnosticKind::WrongGraphKind,
                &d.loc,
                format!("derivation graph `{}` is an allomorph rule graph", g.name),
            ),
            Some(g) => suffix_roots.push(&g.name),
        }
    }

    for graph in graphs.graphs() {
        for (arc, target) in graph.calls() {
            if !graphs.contains(target) {
                error(
                    DiagnosticKind::DanglingCall,
                    &graph.arcs[arc].loc,
                    format!("call to undefined graph `{target}`"),
                );
            } else if graphs.get(target).map(Graph::kind) == Some(GraphKind::Allomorph) {
                error(
                    DiagnosticKind::WrongGraphKind,
                    &graph.arcs[arc].loc,
                    format!("call to allomorph rule graph `{target}`"),
                );
            }
        }
        match graph.kind() {
            GraphKind::Allomorph => {
                if graph.has_cycle() {
                    error(
                        DiagnosticKind::CyclicRuleGraph,
                        &graph.loc,
                        format!("allomorph graph `{}` has a cycle", graph.name),
                    );
                } else {
                    for path in rule_paths(graph) {
                        let outputs = path.iter().filter(|l| matches!(l, ArcLabel::Output(_))).count();
                        if outputs != 1 {
                            error(
                                DiagnosticKind::OutputCount,
                                &graph.loc,
                                format!(
                                    "accepting path of `{}` assigns {outputs} CSs, expected exactly 1",
                                    graph.name
                                ),
                            );
                        }
                        for label in path {
                            if let ArcLabel::Output(o) = label {
                                if resources.cs.get(&o.cs).is_none() {
                                    error(
                                        DiagnosticKind::UnknownCs,
                                        &graph.loc,
                                        format!("allomorph graph `{}` outputs unknown CS `{}`", graph.name, o.cs),
                                    );
                                }
                            }
                        }
                    }
                }
            }
            GraphKind::Suffix | GraphKind::Empty => {
                if graph.finals.is_empty() && graph.kind() == GraphKind::Suffix {
                    error(
                        DiagnosticKind::NoFinalState,
                        &graph.loc,
                        format!("graph `{}` has no final state", graph.name),
                    );
                }
            }
        }
    }

    // Reachability over the call graph.
    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut stack = suffix_roots;
    while let Some(name) = stack.pop() {
        if !reached.insert(name) {
            continue;
        }
        if let Some(g) = graphs.get(name) {
            stack.extend(g.calls().map(|(_, t)| t).filter(|t| graphs.contains(t)));
        }
    }
    for (_, entry) in resources.cs.iter() {
        if let Some(rule) = &entry.allomorph_graph {
            reached.insert(rule);
        }
    }
    for graph in graphs.graphs() {
        if !reached.contains(graph.name.as_str()) {
            out.push(Diagnostic {
                severity: Severity::Warning,
                kind: DiagnosticKind::UnreachableGraph,
                loc: graph.loc.clone(),
                message: format!("graph `{}` is not reachable from any CS or derivation", graph.name),
            });
        }
    }
    out
}

/// Label sequences of every accepting path of an acyclic graph.
pub(crate) fn rule_paths(graph: &Graph) -> Vec<Vec<&ArcLabel>> {
    let adj = graph.adjacency();
    let mut paths = Vec::new();
    let mut current = Vec::new();
    fn walk<'g>(
        graph: &'g Graph,
        adj: &[Vec<usize>],
        state: usize,
        current: &mut Vec<&'g ArcLabel>,
        paths: &mut Vec<Vec<&'g ArcLabel>>,
    ) {
        if graph.is_final(state) {
            paths.push(current.clone());
        }
        for &a in &adj[state] {
            let arc = &graph.arcs[a];
            current.push(&arc.label);
            walk(graph, adj, arc.dst, current, paths);
            current.pop();
        }
    }
    walk(graph, &adj, graph.initial, &mut current, &mut paths);
    paths
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn features() -> FeatureRegistry {
        FeatureRegistry::parse("past\ty,n\nhon\ty\nirreg\teu\n").unwrap()
    }

    fn cs() -> CsRegistry {
        CsRegistry::parse("CS_A1\tA1_END\tEU_DROP\nCS_A1k\tA1K_END\n", "toy.cs").unwrap()
    }

    #[test]
    fn parses_stem_line() {
        let stems = parse_stem_lexicon("크\tA\tCS_A1\n", "a.stems", &cs(), &features()).unwrap();
        assert_eq!(stems.len(), 1);
        assert_eq!(stems[0].base_form, "크");
        assert_eq!(stems[0].tag.to_string(), "A");
        assert_eq!(stems[0].cs, CsId::new("CS_A1"));
        assert_eq!(stems[0].hanja, None);
        assert_eq!(stems[0].loc.line, 1);
    }

    #[test]
    fn empty_and_comment_only_lexicons() {
        assert!(parse_stem_lexicon("", "a.stems", &cs(), &features()).unwrap().is_empty());
        assert!(parse_stem_lexicon("# c\n\n", "a.stems", &cs(), &features()).unwrap().is_empty());
    }

    #[test]
    fn stem_errors_are_line_precise() {
        let err = parse_stem_lexicon("# x\n크\tA\tCS_MISSING\n", "a.stems", &cs(), &features()).unwrap_err();
        match err {
            ResourceError::UnknownCs { loc, cs } => {
                assert_eq!(loc.line, 2);
                assert_eq!(cs, "CS_MISSING");
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse_stem_lexicon("크\tQ\tCS_A1\n", "a.stems", &cs(), &features()).unwrap_err();
        assert!(matches!(err, ResourceError::InvalidTag { .. }));
        let err = parse_stem_lexicon("크 A CS_A1\n", "a.stems", &cs(), &features()).unwrap_err();
        assert!(matches!(err, ResourceError::Syntax { ref loc, .. } if loc.line == 1));
        let err = parse_stem_lexicon("학교\tN\tCS_A1\thakgyo\n", "a.stems", &cs(), &features()).unwrap_err();
        assert!(matches!(err, ResourceError::Syntax { .. }));
        let ok = parse_stem_lexicon("학교\tN\tCS_A1\t學校\n", "a.stems", &cs(), &features()).unwrap();
        assert_eq!(ok[0].hanja.as_deref(), Some("學校"));
    }

    #[test]
    fn parses_sequence_graph() {
        let g = parse_graph(
            "SEQ",
            "states 3 initial 0 final 2\n0\t1\tm:었/었.Morph+past=y\n1\t2\tm:다/다.St\n",
            "SEQ.grf",
            &features(),
        )
        .unwrap();
        assert_eq!(g.state_count, 3);
        assert_eq!(g.arcs.len(), 2);
        assert_eq!(g.kind(), GraphKind::Suffix);
        let rtn = parse_rtn([("SEQ", "SEQ.grf", "states 3 initial 0 final 2\n0\t1\tm:었/었.Morph\n1\t2\tm:다/다.St\n")], &features()).unwrap();
        assert_eq!(rtn.len(), 1);
        assert_eq!(rtn.get("SEQ").unwrap().state_count, 3);
    }

    #[test]
    fn parses_call_and_contraction_arcs() {
        let g = parse_graph(
            "G",
            "states 3 initial 0 final 2\n0\t1\tm:셨/으시.Morph+hon=y\n1\t2\tm:0/었.Morph\n1\t2\tc:H\n",
            "G.grf",
            &features(),
        )
        .unwrap();
        assert!(matches!(&g.arcs[2].label, ArcLabel::Call(h) if h == "H"));
        match &g.arcs[1].label {
            ArcLabel::Morpheme(m) => {
                assert!(m.surface.is_empty());
                assert_eq!(m.base, hangul::decompose_text("었"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn graph_errors() {
        let f = features();
        let undeclared = parse_graph("G", "states 2 initial 0 final 1\n0\t5\tm:다/다.St\n", "G.grf", &f);
        assert!(matches!(undeclared, Err(ResourceError::Syntax { ref loc, .. }) if loc.line == 2));
        assert!(parse_graph("G", "", "G.grf", &f).is_err());
        assert!(parse_graph("G", "states 1 initial 0 final 0\n0\t0\tm:0/0.St\n", "G.grf", &f).is_err());
        assert!(parse_graph("G", "states 1 initial 0 final 0\n0\t0\tx:foo\n", "G.grf", &f).is_err());
        assert!(parse_graph(
            "G",
            "states 2 initial 0 final 1\n0\t1\te:-ㅡ\n0\t1\tm:다/다.St\n",
            "G.grf",
            &f
        )
        .is_err());
        let dup = parse_rtn(
            [("G", "a/G.grf", "states 1 initial 0 final 0\n"), ("G", "b/G.grf", "states 1 initial 0 final 0\n")],
            &f,
        );
        assert!(matches!(dup, Err(ResourceError::DuplicateGraphName { .. })));
    }

    #[test]
    fn parses_rule_graph() {
        let g = parse_graph(
            "EU_DROP",
            "states 3 initial 0 final 2\n0\t1\te:-ㅡ\n1\t2\to:CS_A1k+irreg=eu\n",
            "EU_DROP.grf",
            &features(),
        )
        .unwrap();
        assert_eq!(g.kind(), GraphKind::Allomorph);
        assert_eq!(g.arcs[0].label, ArcLabel::Remove('\u{1173}'));
        assert_eq!(rule_paths(&g).len(), 1);
    }

    fn toy_set() -> ResourceSet {
        let f = features();
        let mut graphs = SuffixRtn::new();
        for (name, text) in [
            ("A1_END", "states 2 initial 0 final 1\n0\t1\tm:다/다.St\n0\t1\tc:COMMON\n"),
            ("A1K_END", "states 3 initial 0 final 2\n0\t1\tm:ㅓㅆ/었.Morph+past=y\n1\t2\tm:다/다.St\n"),
            ("COMMON", "states 2 initial 0 final 1\n0\t1\tm:고/고.Sc\n"),
            ("EU_DROP", "states 3 initial 0 final 2\n0\t1\te:-ㅡ\n1\t2\to:CS_A1k\n"),
        ] {
            graphs.insert(parse_graph(name, text, &format!("{name}.grf"), &f).unwrap()).unwrap();
        }
        let cs = cs();
        let stems = parse_stem_lexicon("크\tA+irreg=eu\tCS_A1\n쓰\tA\tCS_A1\n", "toy.stems", &cs, &f).unwrap();
        ResourceSet { features: f, cs, stems, graphs, derivations: Vec::new() }
    }

    #[test]
    fn validate_consistent_set() {
        assert_eq!(validate(&toy_set()), vec![]);
    }

    #[test]
    fn validate_dangling_root_and_unreachable() {
        let mut set = toy_set();
        set.cs.insert(CsId::new("CS_X"), "NOPE", None);
        let diags = validate(&set);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::DanglingRootGraph);

        let mut set = toy_set();
        set.graphs
            .insert(parse_graph("ORPHAN", "states 1 initial 0 final 0\n", "ORPHAN.grf", &set.features).unwrap())
            .unwrap();
        let diags = validate(&set);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::UnreachableGraph);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert!(!has_errors(&diags));
    }

    #[test]
    fn validate_dangling_call_and_rule_outputs() {
        let mut set = toy_set();
        set.graphs
            .insert(parse_graph("COMMON2", "states 2 initial 0 final 1\n0\t1\tc:MISSING\n", "COMMON2.grf", &set.features).unwrap())
            .unwrap();
        set.cs.insert(CsId::new("CS_Y"), "COMMON2", None);
        let diags = validate(&set);
        assert!(diags.iter().any(|d| d.kind == DiagnosticKind::DanglingCall && d.loc.line == 2));

        let mut set = toy_set();
        set.graphs = {
            let mut g = set.graphs.clone();
            g.graphs.insert(
                "EU_DROP".into(),
                parse_graph("EU_DROP", "states 2 initial 0 final 1\n0\t1\te:-ㅡ\n", "EU_DROP.grf", &set.features).unwrap(),
            );
            g
        };
        assert!(validate(&set).iter().any(|d| d.kind == DiagnosticKind::OutputCount));
    }

    #[test]
    fn canonical_text_roundtrip_via_directory() {
        let set = toy_set();
        let dir = tempfile::tempdir().unwrap();
        set.write_dir(dir.path()).unwrap();
        let back = ResourceSet::load_dir(dir.path()).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.fingerprint(), set.fingerprint());
    }

    proptest! {
        #[test]
        fn parsers_survive_mutations(
            seed in proptest::collection::vec((0usize..400, any::<u8>()), 0..8)
        ) {
            let f = features();
            let c = cs();
            let graph = "states 3 initial 0 final 2\n0\t1\tm:셨/으시.Morph+hon=y\n1\t2\tm:0/었.Morph\n1\t2\tc:H\n";
            let stems = "크\tA+irreg=eu\tCS_A1\n학교\tN\tCS_A1k\t學校\n";
            let cs_text = "CS_A1\tA1_END\tEU_DROP\nCS_A1k\tA1K_END\n";
            for text in [graph, stems, cs_text] {
                let mut bytes = text.as_bytes().to_vec();
                for &(pos, b) in &seed {
                    if !bytes.is_empty() {
                        let p = pos % bytes.len();
                        bytes[p] = b;
                    }
                }
                let mutated = String::from_utf8_lossy(&bytes);
                let _ = parse_graph("G", &mutated, "G.grf", &f);
                let _ = parse_stem_lexicon(&mutated, "x.stems", &c, &f);
                let _ = CsRegistry::parse(&mutated, "x.cs");
                let _ = FeatureRegistry::parse(&mutated);
                let _ = parse_derivations(&mutated, "x.deriv", &c, &features());
            }
        }

        #[test]
        fn graph_format_roundtrip(
            arcs in proptest::collection::vec(
                (0usize..4, 0usize..4, "[가-힣]{0,2}", "[가-힣]{1,2}", prop_oneof![Just("St"), Just("Post"), Just("Morph+past=y")]),
                0..10,
            )
        ) {
            let f = features();
            let mut text = String::from("states 4 initial 0 final 1,3\n");
            for (s, d, surf, base, tag) in &arcs {
                let surf = if surf.is_empty() { "0" } else { surf.as_str() };
                text.push_str(&format!("{s}\t{d}\tm:{surf}/{base}.{tag}\n"));
            }
            let g = parse_graph("G", &text, "G.grf", &f).unwrap();
            let again = parse_graph("G", &format_graph(&g), "G.grf", &f).unwrap();
            prop_assert_eq!(again, g);
        }
    }
}
