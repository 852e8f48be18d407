//! Seeded synthetic resources and corpora for scale tests and benchmarks.
//!
//! Each CS gets a root graph calling three slot graphs (pre-final,
//! second pre-final, final), so its ending count is the product of the slot
//! sizes. Every fourth CS is an adjective class whose stems end in ㅡ and
//! have an ㅡ-dropping allomorph with its own CS; adjective stems also
//! derive adverbs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hangul::{compose_letters, SYLLABLE_BASE};
use crate::link::WordLexicon;
use crate::resources::{ResourceError, ResourceSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub seed: u64,
    pub stems: usize,
    /// Inflection classes, not counting allomorph and adverb CSs.
    pub classes: usize,
    pub min_endings: usize,
    pub max_endings: usize,
    /// One stem in this many gets a hanja spelling.
    pub hanja_every: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { seed: 7, stems: 39_130, classes: 24, min_endings: 600, max_endings: 5_500, hanja_every: 10 }
    }
}

const FEATURES: &str = "\
tense\tpast,fut
hon\ty
mood\tdecl,inter,imp,conn
case\tnom,acc,top,gen,dat
irreg\teu
";

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Noun,
    Verb,
    AdjEu,
}

fn class_of(i: usize) -> Class {
    match i % 4 {
        0 | 2 => Class::Noun,
        1 => Class::Verb,
        _ => Class::AdjEu,
    }
}

fn syllable(lead: u32, vowel: u32, trail: u32) -> char {
    char::from_u32(SYLLABLE_BASE + (lead * 21 + vowel) * 28 + trail).expect("valid syllable")
}

fn random_syllable(rng: &mut ChaCha8Rng) -> char {
    let trail = if rng.gen_bool(0.3) { rng.gen_range(1..28) } else { 0 };
    syllable(rng.gen_range(0..19), rng.gen_range(0..21), trail)
}

fn random_word(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| random_syllable(rng)).collect()
}

/// Three slot sizes whose product is close to `target`.
fn slot_sizes(target: usize) -> (usize, usize, usize) {
    let c = 10.min(target.max(1));
    let rest = (target / c).max(1);
    let a = ((rest as f64).sqrt().floor() as usize).max(1);
    let b = (rest / a).max(1);
    (a, b, c)
}

fn slot_graph(rng: &mut ChaCha8Rng, size: usize, tags: &[&str], vowel_initial: bool) -> String {
    let mut seen = BTreeSet::new();
    let mut out = String::from("states 2 initial 0 final 1\n");
    while seen.len() < size {
        let surface = if vowel_initial {
            // ㅓ + one or two syllables, attaching to a stem ending in a bare consonant.
            format!("ㅓ{}", random_word(rng, 1, 1))
        } else {
            random_word(rng, 1, 2)
        };
        let tag = tags[rng.gen_range(0..tags.len())];
        let base = if rng.gen_bool(0.1) { random_word(rng, 1, 2) } else { surface.clone() };
        if seen.insert((surface.clone(), tag)) {
            let _ = writeln!(out, "0\t1\tm:{surface}/{base}.{tag}");
        }
    }
    out
}

/// Resource files as `(relative path, text)` pairs. `classes` root graphs
/// are generated; when one of them is an adjective class, the ㅡ-dropping
/// allomorph CSs and an adverb CS are added.
pub fn resource_files(config: &SynthConfig) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut files = vec![("registry.feats".to_string(), FEATURES.to_string())];
    let mut cs = String::new();
    let mut graphs = Vec::new();
    let classes = config.classes.max(1);
    for i in 0..classes {
        let span = config.max_endings.saturating_sub(config.min_endings);
        let target = if classes == 1 { config.max_endings } else { config.min_endings + span * i / (classes - 1) };
        let (a, b, c) = slot_sizes(target);
        let (pre, fin): (&[&str], &[&str]) = match class_of(i) {
            Class::Noun => (&["Post", "Post+case=gen"], &["Post+case=nom", "Post+case=acc", "Post+case=top", "Post+case=dat"]),
            _ => (&["Morph+tense=past", "Morph+hon=y", "Morph+tense=fut"], &["St+mood=decl", "St+mood=inter", "Sc+mood=conn", "St+mood=imp"]),
        };
        for (slot, size, tags) in [("A", a, pre), ("B", b, pre), ("C", c, fin)] {
            graphs.push((format!("graphs/S{i}_{slot}.grf"), slot_graph(&mut rng, size, tags, false)));
        }
        graphs.push((
            format!("graphs/R{i}.grf"),
            format!("states 4 initial 0 final 3\n0\t1\tc:S{i}_A\n1\t2\tc:S{i}_B\n2\t3\tc:S{i}_C\n"),
        ));
        if class_of(i) == Class::AdjEu {
            let _ = writeln!(cs, "CS_{i}\tR{i}\tEU{i}");
            let _ = writeln!(cs, "CS_{i}K\tR{i}K");
            graphs.push((format!("graphs/EU{i}.grf"), format!("states 3 initial 0 final 2\n0\t1\te:-ㅡ\n1\t2\to:CS_{i}K\n")));
            graphs.push((format!("graphs/S{i}K_A.grf"), slot_graph(&mut rng, 8, pre, true)));
            graphs.push((
                format!("graphs/R{i}K.grf"),
                format!("states 3 initial 0 final 2\n0\t1\tc:S{i}K_A\n1\t2\tc:S{i}_C\n"),
            ));
        } else {
            let _ = writeln!(cs, "CS_{i}\tR{i}");
        }
    }
    let adjectives = (0..classes).any(|i| class_of(i) == Class::AdjEu);
    if adjectives {
        let _ = writeln!(cs, "CS_ADV\tR_ADV");
        graphs.push(("graphs/R_ADV.grf".to_string(), "states 2 initial 0 final 0,1\n0\t1\tm:도/도.Post\n0\t1\tm:만/만.Post\n".to_string()));
        graphs.push(("graphs/D_GE.grf".to_string(), "states 2 initial 0 final 1\n0\t1\tm:게/게.Sfx\n0\t1\tm:히/히.Sfx\n".to_string()));
    }
    files.push(("registry.cs".to_string(), cs));
    files.extend(graphs);

    let eu_vowel = 18; // ㅡ
    let mut stems = String::new();
    let mut derivations = String::new();
    for i in 0..classes {
        if class_of(i) == Class::AdjEu {
            let _ = writeln!(derivations, "CS_{i}\tD_GE\tCS_ADV\tADV");
        }
    }
    let mut seen = std::collections::HashSet::new();
    let mut n = 0;
    while n < config.stems {
        let i = rng.gen_range(0..classes);
        let (base, tag) = match class_of(i) {
            Class::Noun => (random_word(&mut rng, 1, 3), if rng.gen_bool(0.05) { "PRO" } else { "N" }),
            Class::Verb => (random_word(&mut rng, 1, 2), "V"),
            Class::AdjEu => {
                let mut w = random_word(&mut rng, 0, 1);
                w.push(syllable(rng.gen_range(0..19), eu_vowel, 0));
                (w, "A+irreg=eu")
            }
        };
        if !seen.insert((base.clone(), i)) {
            continue;
        }
        let _ = write!(stems, "{base}\t{tag}\tCS_{i}");
        if config.hanja_every > 0 && n % config.hanja_every == 0 && class_of(i) == Class::Noun {
            let hanja: String = (0..base.chars().count())
                .map(|_| char::from_u32(rng.gen_range(0x4E00..0x9FA5)).expect("CJK range"))
                .collect();
            let _ = write!(stems, "\t{hanja}");
        }
        stems.push('\n');
        n += 1;
    }
    files.push(("lexicon.stems".to_string(), stems));
    if adjectives {
        files.push(("derivations.deriv".to_string(), derivations));
    }
    files
}

pub fn resource_set(config: &SynthConfig) -> Result<ResourceSet, ResourceError> {
    ResourceSet::from_files(resource_files(config))
}

/// Running text of `words` words sampled from the lexicon's language, with
/// some unknown words, numbers and punctuation mixed in.
pub fn corpus(lexicon: &WordLexicon, words: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stems: Vec<(Vec<char>, Vec<u32>)> = lexicon.stem_automaton().entries();
    let cs_ids: Vec<_> = lexicon.cs_ids().cloned().collect();
    let endings: Vec<Vec<Vec<char>>> = cs_ids
        .iter()
        .map(|cs| lexicon.ending_automaton(cs).map(|a| a.entries().into_iter().map(|(k, _)| k).collect()).unwrap_or_default())
        .collect();
    let cs_of = |payload: u32| -> Option<usize> {
        let record = lexicon.stem_automaton().payloads().get(payload)?;
        let cs = record.split('\t').next()?;
        cs_ids.iter().position(|c| c.as_str() == cs)
    };
    let mut out = String::with_capacity(words * 12);
    let mut in_sentence = 0;
    for _ in 0..words {
        let roll = rng.gen_range(0..100);
        if roll < 2 {
            let _ = write!(out, "{}", rng.gen_range(0..10_000));
        } else if roll < 4 {
            out.push_str(&random_word(&mut rng, 1, 3));
        } else {
            loop {
                let (stem, payloads) = stems.choose(&mut rng).expect("non-empty stem lexicon");
                let Some(cs) = payloads.choose(&mut rng).and_then(|&p| cs_of(p)) else { continue };
                let Some(ending) = endings[cs].choose(&mut rng) else { continue };
                let mut letters = stem.clone();
                letters.extend_from_slice(ending);
                out.push_str(&compose_letters(&letters));
                break;
            }
        }
        in_sentence += 1;
        if in_sentence >= 8 && rng.gen_bool(0.3) {
            out.push_str(if rng.gen_bool(0.8) { ". " } else { "? " });
            in_sentence = 0;
        } else if rng.gen_bool(0.05) {
            out.push_str(", ");
        } else {
            out.push(' ');
        }
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::CyclePolicy;
    use crate::resources::validate;

    fn small() -> SynthConfig {
        SynthConfig { stems: 300, classes: 8, min_endings: 20, max_endings: 200, ..SynthConfig::default() }
    }

    #[test]
    fn deterministic() {
        assert_eq!(resource_files(&small()), resource_files(&small()));
        let other = SynthConfig { seed: 8, ..small() };
        assert_ne!(resource_files(&small()), resource_files(&other));
    }

    #[test]
    fn valid_and_compiles() {
        let set = resource_set(&small()).unwrap();
        assert_eq!(set.stems.len(), 300);
        let diagnostics = validate(&set);
        assert!(!crate::resources::has_errors(&diagnostics), "{diagnostics:?}");
        let compiled = crate::link::compile(&set, CyclePolicy::default()).unwrap();
        let max = compiled.report.ending_counts.values().copied().max().unwrap();
        assert!(max <= 200, "{max}");
        let text = corpus(&compiled.lexicon, 500, 1);
        assert!(text.split_whitespace().count() >= 500);
    }

    #[test]
    fn tiny_config() {
        let config = SynthConfig { stems: 10, classes: 2, min_endings: 3, max_endings: 3, ..SynthConfig::default() };
        let files = resource_files(&config);
        let stems = &files.iter().find(|(n, _)| n == "lexicon.stems").unwrap().1;
        assert_eq!(stems.lines().count(), 10);
        assert_eq!(files.iter().filter(|(n, _)| n.starts_with("graphs/R")).count(), 2);
        let set = resource_set(&config).unwrap();
        let compiled = crate::link::compile(&set, CyclePolicy::default()).unwrap();
        assert!(compiled.report.ending_counts.values().all(|&n| n == 3));
    }

    #[test]
    fn slot_products() {
        for target in [1, 10, 600, 5_500] {
            let (a, b, c) = slot_sizes(target);
            assert!(a * b * c <= target.max(1));
            assert!(a * b * c * 10 >= target * 7, "{target}: {a}x{b}x{c}");
        }
    }
}
