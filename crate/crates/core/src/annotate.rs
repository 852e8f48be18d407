//! Sentence segmentation, tokenization and morpheme lattices.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hangul::{self, compose_letters};
use crate::link::{Analysis, WordLexicon};
use crate::resources::is_ideograph;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("no lexicon loaded")]
    LexiconNotLoaded,
    #[error("unsupported output format `{0}` (expected json or tsv)")]
    UnsupportedFormat(String),
    #[error("lattice json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A sentence and the character offset where it starts in the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence<'t> {
    pub text: &'t str,
    pub offset: usize,
}

const TERMINATORS: &[char] = &['.', '?', '!', '…', '。', '？', '！'];

/// Splits after sentence-final punctuation followed by whitespace or the
/// end of text, and at blank lines. Whitespace after a boundary stays with
/// the sentence before it, so the sentences concatenate to `text`.
pub fn segment_sentences(text: &str) -> Vec<Sentence<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let (mut start_byte, mut start_char) = (0, 0);
    let mut has_content = false;
    let mut i = 0;
    while i < chars.len() {
        let (_, ch) = chars[i];
        if !ch.is_whitespace() {
            has_content = true;
            i += 1;
            continue;
        }
        let run_start = i;
        let mut newlines = 0;
        while i < chars.len() && chars[i].1.is_whitespace() {
            newlines += usize::from(chars[i].1 == '\n');
            i += 1;
        }
        let after_terminator = run_start > 0 && TERMINATORS.contains(&chars[run_start - 1].1);
        if has_content && (after_terminator || newlines >= 2) && i < chars.len() {
            let end_byte = chars[i].0;
            out.push(Sentence { text: &text[start_byte..end_byte], offset: start_char });
            start_byte = end_byte;
            start_char = i;
            has_content = false;
        }
    }
    if start_byte < text.len() {
        out.push(Sentence { text: &text[start_byte..], offset: start_char });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Word,
    HanjaWord,
    Separator,
    Punctuation,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token<'t> {
    pub text: &'t str,
    pub kind: TokenKind,
    /// Character offset in the sentence.
    pub offset: usize,
}

pub fn is_punctuation(ch: char) -> bool {
    ch.is_ascii_punctuation()
        || matches!(ch as u32,
            0x00A1..=0x00BF
            | 0x2010..=0x2027
            | 0x2030..=0x205E
            | 0x3001..=0x3003
            | 0x3008..=0x3011
            | 0x3014..=0x301F
            | 0xFF01..=0xFF0F
            | 0xFF1A..=0xFF20
            | 0xFF3B..=0xFF40
            | 0xFF5B..=0xFF65)
}

fn classify(ch: char) -> TokenKind {
    if ch.is_whitespace() {
        TokenKind::Separator
    } else if hangul::is_hangul(ch) {
        TokenKind::Word
    } else if is_ideograph(ch) {
        TokenKind::HanjaWord
    } else if is_punctuation(ch) {
        TokenKind::Punctuation
    } else {
        TokenKind::Other
    }
}

/// Maximal runs of one class; punctuation marks are tokens on their own.
pub fn tokenize(sentence: &str) -> Vec<Token<'_>> {
    let mut out: Vec<Token<'_>> = Vec::new();
    let mut run: Option<(usize, usize, TokenKind)> = None;
    for (char_idx, (byte, ch)) in sentence.char_indices().enumerate() {
        let kind = classify(ch);
        match run {
            Some((_, _, k)) if k == kind && kind != TokenKind::Punctuation => {}
            _ => {
                if let Some((b, c, k)) = run {
                    out.push(Token { text: &sentence[b..byte], kind: k, offset: c });
                }
                run = Some((byte, char_idx, kind));
            }
        }
    }
    if let Some((b, c, k)) = run {
        out.push(Token { text: &sentence[b..], kind: k, offset: c });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Source,
    Sink,
    Morpheme,
    Separator,
    Punctuation,
    Unknown,
    Other,
}

impl NodeKind {
    fn tsv_tag(self) -> Option<&'static str> {
        match self {
            NodeKind::Separator => Some("SEP"),
            NodeKind::Punctuation => Some("PUNCT"),
            NodeKind::Unknown => Some("UNK"),
            NodeKind::Other => Some("OTHER"),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub surface: String,
    pub base: String,
    pub tag: String,
    /// Character range in the sentence.
    pub span: (usize, usize),
    /// Token index, absent on source and sink.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<usize>,
    /// Analysis index within the token.
    #[serde(default)]
    pub path: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub text: String,
    /// Character offset of the sentence in the input.
    pub offset: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
}

impl Lattice {
    pub const SOURCE: usize = 0;

    pub fn sink(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of source-to-sink paths, saturating.
    pub fn path_count(&self) -> u128 {
        let mut counts = vec![0u128; self.nodes.len()];
        counts[Self::SOURCE] = 1;
        let mut edges = self.edges.clone();
        edges.sort_unstable();
        for (a, b) in edges {
            counts[b] = counts[b].saturating_add(counts[a]);
        }
        counts[self.sink()]
    }

    /// Whether every edge goes from a lower to a higher node id, which makes
    /// the id order a topological order.
    pub fn is_topologically_numbered(&self) -> bool {
        self.edges.iter().all(|&(a, b)| a < b && b < self.nodes.len())
    }
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    #[allow(clippy::too_many_arguments)]
    fn node(&mut self, kind: NodeKind, surface: String, base: String, tag: String, span: (usize, usize), token: Option<usize>, path: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { id, kind, surface, base, tag, span, token, path });
        id
    }
}

/// Character range covering letters `span` of a token whose characters
/// produce `letter_ends[i]` letters up to and including character `i`.
fn char_span(letter_ends: &[usize], span: (usize, usize), token_offset: usize) -> (usize, usize) {
    let first = letter_ends.partition_point(|&e| e <= span.0);
    let last = if span.1 > span.0 { letter_ends.partition_point(|&e| e < span.1) + 1 } else { first };
    (token_offset + first.min(letter_ends.len()), token_offset + last.min(letter_ends.len()))
}

fn add_analyses(
    b: &mut Builder,
    analyses: &[Analysis],
    token: &Token<'_>,
    index: usize,
    letter_ends: Option<&[usize]>,
) -> (Vec<usize>, Vec<usize>) {
    let whole = (token.offset, token.offset + token.text.chars().count());
    let mut entries = Vec::with_capacity(analyses.len());
    let mut exits = Vec::with_capacity(analyses.len());
    for (path, a) in analyses.iter().enumerate() {
        let mut prev = None;
        for m in &a.morphemes {
            let (surface, span) = match letter_ends {
                Some(ends) => (compose_letters(&m.surface), char_span(ends, m.span, token.offset)),
                None => (token.text.to_string(), whole),
            };
            let id = b.node(NodeKind::Morpheme, surface, compose_letters(&m.base), m.tag.to_string(), span, Some(index), path);
            match prev {
                None => entries.push(id),
                Some(p) => b.edges.push((p, id)),
            }
            prev = Some(id);
        }
        exits.extend(prev);
    }
    (entries, exits)
}

/// Lattice of one sentence: each token contributes one chain per analysis,
/// and every chain of a token connects to every chain of the next.
pub fn build_lattice(lex: &WordLexicon, sentence: &Sentence<'_>) -> Lattice {
    let tokens = tokenize(sentence.text);
    let mut b = Builder { nodes: Vec::new(), edges: Vec::new() };
    let end = sentence.text.chars().count();
    b.node(NodeKind::Source, String::new(), String::new(), String::new(), (0, 0), None, 0);
    let mut exits = vec![Lattice::SOURCE];
    let mut letters = Vec::new();
    let mut letter_ends = Vec::new();
    for (index, token) in tokens.iter().enumerate() {
        let whole = (token.offset, token.offset + token.text.chars().count());
        let (entries, next_exits) = match token.kind {
            TokenKind::Word | TokenKind::HanjaWord => {
                let analyses = if token.kind == TokenKind::Word {
                    letters.clear();
                    letter_ends.clear();
                    for ch in token.text.chars() {
                        letters.extend(hangul::decompose_syllable(ch));
                        letter_ends.push(letters.len());
                    }
                    lex.lookup(&letters)
                } else {
                    lex.lookup_hanja(token.text)
                };
                if analyses.is_empty() {
                    let id = b.node(NodeKind::Unknown, token.text.to_string(), String::new(), "UNK".into(), whole, Some(index), 0);
                    (vec![id], vec![id])
                } else {
                    let ends = (token.kind == TokenKind::Word).then_some(letter_ends.as_slice());
                    add_analyses(&mut b, &analyses, token, index, ends)
                }
            }
            kind => {
                let (kind, tag) = match kind {
                    TokenKind::Separator => (NodeKind::Separator, "SEP"),
                    TokenKind::Punctuation => (NodeKind::Punctuation, "PUNCT"),
                    _ => (NodeKind::Other, "OTHER"),
                };
                let id = b.node(kind, token.text.to_string(), token.text.to_string(), tag.into(), whole, Some(index), 0);
                (vec![id], vec![id])
            }
        };
        for &x in &exits {
            for &e in &entries {
                b.edges.push((x, e));
            }
        }
        exits = next_exits;
    }
    let sink = b.node(NodeKind::Sink, String::new(), String::new(), String::new(), (end, end), None, 0);
    for &x in &exits {
        b.edges.push((x, sink));
    }
    b.edges.sort_unstable();
    Lattice { text: sentence.text.to_string(), offset: sentence.offset, nodes: b.nodes, edges: b.edges }
}

/// One lattice per sentence, in input order.
pub fn annotate(lex: &WordLexicon, text: &str) -> Vec<Lattice> {
    segment_sentences(text).par_iter().map(|s| build_lattice(lex, s)).collect()
}

/// Holds an optional shared lexicon.
#[derive(Clone, Default)]
pub struct Annotator {
    lexicon: Option<Arc<WordLexicon>>,
}

impl Annotator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_lexicon(lexicon: Arc<WordLexicon>) -> Self {
        Annotator { lexicon: Some(lexicon) }
    }

    pub fn lexicon(&self) -> Option<&WordLexicon> {
        self.lexicon.as_deref()
    }

    pub fn annotate(&self, text: &str) -> Result<Vec<Lattice>, AnnotateError> {
        let lex = self.lexicon.as_deref().ok_or(AnnotateError::LexiconNotLoaded)?;
        Ok(annotate(lex, text))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Tsv,
}

impl FromStr for Format {
    type Err = AnnotateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "tsv" => Ok(Format::Tsv),
            other => Err(AnnotateError::UnsupportedFormat(other.to_string())),
        }
    }
}

fn escape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// json: an array of sentences. tsv: one line per node,
/// `sentence<TAB>path<TAB>surface<TAB>base<TAB>tag`, where `path` is the
/// analysis index within the token and non-morpheme nodes carry SEP, PUNCT,
/// UNK or OTHER as tag.
pub fn write_lattice<W: Write>(lattices: &[Lattice], format: Format, mut out: W) -> Result<(), AnnotateError> {
    match format {
        Format::Json => {
            serde_json::to_writer(&mut out, lattices)?;
            out.write_all(b"\n")?;
        }
        Format::Tsv => {
            for (s, lattice) in lattices.iter().enumerate() {
                for node in &lattice.nodes {
                    let tag = match node.kind {
                        NodeKind::Source | NodeKind::Sink => continue,
                        NodeKind::Morpheme => node.tag.as_str(),
                        kind => kind.tsv_tag().expect("non-morpheme kinds have a tsv tag"),
                    };
                    writeln!(
                        out,
                        "{s}\t{}\t{}\t{}\t{tag}",
                        node.path,
                        escape_tsv(&node.surface),
                        escape_tsv(&node.base)
                    )?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_lattice_json(bytes: &[u8]) -> Result<Vec<Lattice>, AnnotateError> {
    Ok(serde_json::from_slice(bytes)?)
}
