//! Expansion of base-form stems into allomorphs and derived stems.

use rayon::prelude::*;
use thiserror::Error;

use crate::enumerate::{self, CyclePolicy, EnumerateError};
use crate::hangul::{self, JamoClass, LetterString, Role};
use crate::resources::{
    rule_paths, ArcLabel, CsId, Derivation, Graph, MorphemeArc, ResourceSet, SourceLoc, StemEntry,
    SuffixRtn,
};
use crate::tagset::{StructuredTag, TagError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StemForm {
    pub surface: LetterString,
    /// Letters of the originating lexicon entry.
    pub base: LetterString,
    pub tag: StructuredTag,
    pub cs: CsId,
    pub hanja: Option<String>,
    /// The stem morpheme followed by any derivational suffixes.
    pub morphemes: Vec<MorphemeArc>,
}

impl StemForm {
    pub fn identity(entry: &StemEntry) -> Self {
        let base = hangul::to_letters(&entry.base_form, Role::Stem);
        StemForm {
            surface: base.clone(),
            base: base.clone(),
            tag: entry.tag.clone(),
            cs: entry.cs.clone(),
            hanja: entry.hanja.clone(),
            morphemes: vec![MorphemeArc { surface: base.clone(), base, tag: entry.tag.clone() }],
        }
    }

    pub fn is_derived(&self) -> bool {
        self.morphemes.len() > 1
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("{loc}: rule in `{graph}` removes a letter from an empty form of `{stem}`")]
    EditUnderflow { loc: SourceLoc, graph: String, stem: String },
    #[error("{loc}: rule in `{graph}` removes `{expected}` but `{stem}` ends in `{found}`")]
    RemoveMismatch { loc: SourceLoc, graph: String, stem: String, expected: char, found: char },
    #[error("{loc}: rule in `{graph}` sets an invalid feature on `{stem}`: {source}")]
    Feature { loc: SourceLoc, graph: String, stem: String, source: Box<TagError> },
    #[error("{loc}: allomorph graph `{graph}` not found")]
    MissingGraph { loc: SourceLoc, graph: String },
    #[error("derivation via `{graph}`: {source}")]
    Derivation { graph: String, source: EnumerateError },
}

/// The identity form of `entry` followed by one form per accepting path of
/// `graph`, in path order.
pub fn generate_allomorphs(entry: &StemEntry, graph: &Graph) -> Result<Vec<StemForm>, GenerateError> {
    let identity = StemForm::identity(entry);
    let mut out = vec![identity.clone()];
    for path in rule_paths(graph) {
        let mut surface = identity.base.clone();
        let mut form = identity.clone();
        for label in path {
            match label {
                ArcLabel::Remove(letter) => {
                    let Some(&last) = surface.last() else {
                        return Err(GenerateError::EditUnderflow {
                            loc: entry.loc.clone(),
                            graph: graph.name.clone(),
                            stem: entry.base_form.clone(),
                        });
                    };
                    if hangul::letter_identity(last) != hangul::letter_identity(*letter) {
                        return Err(GenerateError::RemoveMismatch {
                            loc: entry.loc.clone(),
                            graph: graph.name.clone(),
                            stem: entry.base_form.clone(),
                            expected: hangul::letter_identity(*letter),
                            found: hangul::letter_identity(last),
                        });
                    }
                    surface.pop();
                }
                ArcLabel::Append(letter) => {
                    let after_vowel = surface.last().is_some_and(|&c| hangul::jamo_class(c) == Some(JamoClass::Vowel));
                    surface.push(hangul::consonant_at(*letter, !after_vowel));
                }
                ArcLabel::Output(output) => {
                    form.cs = output.cs.clone();
                    for (name, value) in &output.features {
                        form.tag.put_feature(name, value).map_err(|source| {
                            GenerateError::Feature {
                                loc: entry.loc.clone(),
                                graph: graph.name.clone(),
                                stem: entry.base_form.clone(),
                                source: Box::new(source),
                            }
                        })?;
                    }
                }
                ArcLabel::Morpheme(_) | ArcLabel::Call(_) => {}
            }
        }
        form.surface = surface.clone();
        form.hanja = None;
        form.morphemes = vec![MorphemeArc { surface, base: form.base.clone(), tag: form.tag.clone() }];
        out.push(form);
    }
    Ok(out)
}

/// `stems` followed by every derived form. Derived forms are produced from
/// the stems given, not from other derived forms.
pub fn generate_derived(
    stems: Vec<StemForm>,
    rtn: &SuffixRtn,
    derivations: &[Derivation],
    policy: CyclePolicy,
) -> Result<Vec<StemForm>, GenerateError> {
    let mut paths = Vec::with_capacity(derivations.len());
    for d in derivations {
        let endings = enumerate::enumerate_paths(rtn, &d.root_graph, policy)
            .map_err(|source| GenerateError::Derivation { graph: d.root_graph.clone(), source })?;
        paths.push(endings);
    }
    let derived: Vec<Vec<StemForm>> = stems
        .par_iter()
        .map(|stem| {
            let mut out = Vec::new();
            for (d, endings) in derivations.iter().zip(&paths) {
                if d.source != stem.cs {
                    continue;
                }
                for ending in endings {
                    let mut surface = stem.surface.clone();
                    surface.extend_from_slice(&ending.surface);
                    let tag = match (&d.tag, ending.morphemes.last()) {
                        (Some(tag), _) => tag.clone(),
                        (None, Some(m)) => m.tag.clone(),
                        (None, None) => stem.tag.clone(),
                    };
                    let mut morphemes = stem.morphemes.clone();
                    morphemes.extend(ending.morphemes.iter().cloned());
                    out.push(StemForm {
                        surface,
                        base: stem.base.clone(),
                        tag,
                        cs: d.target.clone(),
                        hanja: None,
                        morphemes,
                    });
                }
            }
            out
        })
        .collect();
    let mut out = stems;
    out.extend(derived.into_iter().flatten());
    Ok(out)
}

/// Every stem form of a resource set: entries in order, each followed by its
/// allomorphs, then all derived forms.
pub fn generate_all(resources: &ResourceSet, policy: CyclePolicy) -> Result<Vec<StemForm>, GenerateError> {
    let per_entry: Vec<Result<Vec<StemForm>, GenerateError>> = resources
        .stems
        .par_iter()
        .map(|entry| {
            let graph = resources.cs.get(&entry.cs).and_then(|c| c.allomorph_graph.as_deref());
            match graph {
                None => Ok(vec![StemForm::identity(entry)]),
                Some(name) => match resources.graphs.get(name) {
                    Some(graph) => generate_allomorphs(entry, graph),
                    None => Err(GenerateError::MissingGraph { loc: entry.loc.clone(), graph: name.to_string() }),
                },
            }
        })
        .collect();
    let mut stems = Vec::new();
    for forms in per_entry {
        stems.extend(forms?);
    }
    generate_derived(stems, &resources.graphs, &resources.derivations, policy)
}

/// Debug listing: `base<TAB>tag<TAB>cs<TAB>hanja<TAB>surface[<TAB>morphemes]`.
pub fn format_stem_forms(forms: &[StemForm]) -> String {
    let mut out = String::new();
    for f in forms {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}",
            hangul::compose_letters(&f.base),
            f.tag,
            f.cs,
            f.hanja.as_deref().unwrap_or(""),
            hangul::compose_letters(&f.surface),
        ));
        if f.is_derived() {
            let parts: Vec<String> = f
                .morphemes
                .iter()
                .map(|m| format!("{}/{}.{}", hangul::compose_letters(&m.surface), hangul::compose_letters(&m.base), m.tag))
                .collect();
            out.push('\t');
            out.push_str(&parts.join("+"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::{parse_graph, CsRegistry, parse_stem_lexicon, parse_rtn};
    use crate::tagset::{FeatureRegistry, GeneralTag};

    fn features() -> FeatureRegistry {
        FeatureRegistry::parse("irreg\teu\nconj\ty\n").unwrap()
    }

    fn cs() -> CsRegistry {
        CsRegistry::parse("CS_A1\tA1\tEU_DROP\nCS_A1k\tA1K\nCS_ADV\tADV\n", "t.cs").unwrap()
    }

    fn entry(line: &str) -> StemEntry {
        parse_stem_lexicon(line, "t.stems", &cs(), &features()).unwrap().remove(0)
    }

    fn graph(name: &str, text: &str) -> Graph {
        parse_graph(name, text, "t.grf", &features()).unwrap()
    }

    #[test]
    fn eu_drop() {
        let g = graph("EU_DROP", "states 3 initial 0 final 2\n0\t1\te:-ㅡ\n1\t2\to:CS_A1k\n");
        let forms = generate_allomorphs(&entry("크\tA\tCS_A1\n"), &g).unwrap();
        assert_eq!(forms.len(), 2);
        assert_eq!(forms[0].surface, vec!['\u{110F}', '\u{1173}']);
        assert_eq!(forms[1].surface, vec!['\u{110F}']);
        assert_eq!(forms[1].base, vec!['\u{110F}', '\u{1173}']);
        assert_eq!(forms[1].cs, CsId::new("CS_A1k"));
        assert_eq!(forms[1].tag.general(), GeneralTag::A);
    }

    #[test]
    fn empty_graph_gives_identity_only() {
        let g = graph("NONE", "states 1 initial 0 final -\n");
        let e = entry("크\tA\tCS_A1\n");
        assert_eq!(generate_allomorphs(&e, &g).unwrap(), vec![StemForm::identity(&e)]);
    }

    #[test]
    fn remove_mismatch_and_underflow() {
        let g = graph("BAD", "states 3 initial 0 final 2\n0\t1\te:-ㅏ\n1\t2\to:CS_A1k\n");
        assert!(matches!(
            generate_allomorphs(&entry("크\tA\tCS_A1\n"), &g),
            Err(GenerateError::RemoveMismatch { expected: 'ㅏ', found: 'ㅡ', .. })
        ));
        let g = graph("DEEP", "states 4 initial 0 final 3\n0\t1\te:-ㅡ\n1\t2\te:-ㅋ\n2\t3\te:-ㅋ\n");
        assert!(matches!(
            generate_allomorphs(&entry("크\tA\tCS_A1\n"), &g),
            Err(GenerateError::EditUnderflow { .. })
        ));
    }

    #[test]
    fn append_and_features() {
        let g = graph("ADD_L", "states 3 initial 0 final 2\n0\t1\te:+ㄹ\n1\t2\to:CS_A1k+irreg=eu\n");
        let forms = generate_allomorphs(&entry("크\tA\tCS_A1\n"), &g).unwrap();
        assert_eq!(hangul::compose_letters(&forms[1].surface), "클");
        assert_eq!(forms[1].tag.feature("irreg"), Some("eu"));
        assert_eq!(hangul::compose_letters(&forms[1].base), "크");
    }

    #[test]
    fn removal_keeps_leading_consonant() {
        let g = graph("EU_DROP", "states 3 initial 0 final 2\n0\t1\te:-ㅡ\n1\t2\to:CS_A1k\n");
        let forms = generate_allomorphs(&entry("아프\tA\tCS_A1\n"), &g).unwrap();
        let mut word = forms[1].surface.clone();
        word.extend(hangul::to_letters("ㅏㅆ다", Role::Suffix));
        assert_eq!(hangul::compose_letters(&word), "아팠다");
    }

    #[test]
    fn appended_consonants_follow_context() {
        // 모르 -> 몰ㄹ before 아: drop ㅡ and ㄹ, then ㄹ closes 모 and ㄹ opens the next syllable.
        let g = graph(
            "REU",
            "states 6 initial 0 final 5\n0\t1\te:-ㅡ\n1\t2\te:-ㄹ\n2\t3\te:+ㄹ\n3\t4\te:+ㄹ\n4\t5\to:CS_A1k\n",
        );
        let forms = generate_allomorphs(&entry("모르\tA\tCS_A1\n"), &g).unwrap();
        let mut word = forms[1].surface.clone();
        word.extend(hangul::to_letters("ㅏ", Role::Suffix));
        assert_eq!(hangul::compose_letters(&word), "몰라");
    }

    #[test]
    fn two_paths_give_two_allomorphs() {
        let g = graph(
            "TWO",
            "states 4 initial 0 final 3\n0\t1\te:-ㅡ\n1\t3\to:CS_A1k\n0\t2\te:+ㄹ\n2\t3\to:CS_ADV\n",
        );
        assert_eq!(generate_allomorphs(&entry("예쁘\tA\tCS_A1\n"), &g).unwrap().len(), 3);
    }

    #[test]
    fn adverbializer() {
        let rtn = parse_rtn(
            [("DERIV_GE", "d.grf", "states 2 initial 0 final 1\n0\t1\tm:게/게.Sfx\n")],
            &FeatureRegistry::new(),
        )
        .unwrap();
        let deriv = vec![Derivation {
            source: CsId::new("CS_A1"),
            root_graph: "DERIV_GE".into(),
            target: CsId::new("CS_ADV"),
            tag: Some(StructuredTag::new(GeneralTag::Adv)),
            loc: SourceLoc::new("d", 1),
        }];
        let stem = StemForm::identity(&entry("크\tA\tCS_A1\n"));
        let out = generate_derived(vec![stem.clone()], &rtn, &deriv, CyclePolicy::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], stem);
        let d = &out[1];
        assert_eq!(hangul::compose_letters(&d.surface), "크게");
        assert_eq!(d.tag.general(), GeneralTag::Adv);
        assert_eq!(d.cs, CsId::new("CS_ADV"));
        assert_eq!(d.morphemes.len(), 2);
        assert_eq!(d.morphemes[0].tag.general(), GeneralTag::A);
        assert_eq!(d.base, stem.base);

        let mut untagged = deriv.clone();
        untagged[0].tag = None;
        let out = generate_derived(vec![stem.clone()], &rtn, &untagged, CyclePolicy::default()).unwrap();
        assert_eq!(out[1].tag.general(), GeneralTag::Sfx);

        assert_eq!(generate_derived(vec![stem.clone()], &rtn, &[], CyclePolicy::default()).unwrap(), vec![stem]);
    }

    #[test]
    fn derivation_cardinality() {
        let rtn = parse_rtn(
            [("D2", "d.grf", "states 2 initial 0 final 1\n0\t1\tm:게/게.Sfx\n0\t1\tm:히/히.Sfx\n")],
            &FeatureRegistry::new(),
        )
        .unwrap();
        let deriv = vec![Derivation {
            source: CsId::new("CS_A1"),
            root_graph: "D2".into(),
            target: CsId::new("CS_ADV"),
            tag: None,
            loc: SourceLoc::new("d", 1),
        }];
        let stem = StemForm::identity(&entry("크\tA\tCS_A1\n"));
        assert_eq!(generate_derived(vec![stem], &rtn, &deriv, CyclePolicy::default()).unwrap().len(), 3);
    }
}
