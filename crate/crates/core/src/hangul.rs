//! Conversion between precomposed hangul syllables and conjoining jamo.
//!
//! The lexicon alphabet is the modern conjoining-jamo block: leading
//! consonants U+1100..=U+1112, vowels U+1161..=U+1175 and trailing
//! consonants U+11A8..=U+11C2. Every other character is carried through
//! unchanged as a passthrough letter.
//!
//! Resources may also be written with compatibility jamo (U+3131..=U+3163)
//! where a morpheme boundary cuts through a syllable. Those have no
//! positional information, so [`to_letters`] resolves each consonant to its
//! leading or trailing form from its neighbours.

use arrayvec::ArrayVec;

pub const SYLLABLE_BASE: u32 = 0xAC00;
pub const LEAD_BASE: u32 = 0x1100;
pub const VOWEL_BASE: u32 = 0x1161;
/// Trailing index 0 means "no trailing consonant".
pub const TRAIL_BASE: u32 = 0x11A7;

pub const LEAD_COUNT: u32 = 19;
pub const VOWEL_COUNT: u32 = 21;
pub const TRAIL_COUNT: u32 = 28;
pub const BLOCK_COUNT: u32 = VOWEL_COUNT * TRAIL_COUNT; // 588
pub const SYLLABLE_COUNT: u32 = LEAD_COUNT * BLOCK_COUNT; // 11172

const COMPAT_CONSONANT_FIRST: u32 = 0x3131;
const COMPAT_CONSONANT_LAST: u32 = 0x314E;
const COMPAT_VOWEL_FIRST: u32 = 0x314F;
const COMPAT_VOWEL_LAST: u32 = 0x3163;

/// Compatibility consonants in codepoint order (U+3131..=U+314E) with their
/// leading index and trailing index (1-based, as in the syllable formula).
const COMPAT_CONSONANTS: [(Option<u8>, Option<u8>); 30] = [
    (Some(0), Some(1)),   // ㄱ
    (Some(1), Some(2)),   // ㄲ
    (None, Some(3)),      // ㄳ
    (Some(2), Some(4)),   // ㄴ
    (None, Some(5)),      // ㄵ
    (None, Some(6)),      // ㄶ
    (Some(3), Some(7)),   // ㄷ
    (Some(4), None),      // ㄸ
    (Some(5), Some(8)),   // ㄹ
    (None, Some(9)),      // ㄺ
    (None, Some(10)),     // ㄻ
    (None, Some(11)),     // ㄼ
    (None, Some(12)),     // ㄽ
    (None, Some(13)),     // ㄾ
    (None, Some(14)),     // ㄿ
    (None, Some(15)),     // ㅀ
    (Some(6), Some(16)),  // ㅁ
    (Some(7), Some(17)),  // ㅂ
    (Some(8), None),      // ㅃ
    (None, Some(18)),     // ㅄ
    (Some(9), Some(19)),  // ㅅ
    (Some(10), Some(20)), // ㅆ
    (Some(11), Some(21)), // ㅇ
    (Some(12), Some(22)), // ㅈ
    (Some(13), None),     // ㅉ
    (Some(14), Some(23)), // ㅊ
    (Some(15), Some(24)), // ㅋ
    (Some(16), Some(25)), // ㅌ
    (Some(17), Some(26)), // ㅍ
    (Some(18), Some(27)), // ㅎ
];

/// Positional class of a modern conjoining jamo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JamoClass {
    Leading,
    Vowel,
    Trailing,
}

/// A single modern conjoining jamo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Jamo(char);

impl Jamo {
    pub fn new(ch: char) -> Option<Jamo> {
        jamo_class(ch).map(|_| Jamo(ch))
    }

    pub fn class(self) -> JamoClass {
        jamo_class(self.0).expect("Jamo holds a modern conjoining jamo")
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

/// A word or morpheme spelled over the letter alphabet: conjoining jamo plus
/// passthrough characters.
pub type LetterString = Vec<char>;

pub fn jamo_class(ch: char) -> Option<JamoClass> {
    let c = ch as u32;
    if (LEAD_BASE..LEAD_BASE + LEAD_COUNT).contains(&c) {
        Some(JamoClass::Leading)
    } else if (VOWEL_BASE..VOWEL_BASE + VOWEL_COUNT).contains(&c) {
        Some(JamoClass::Vowel)
    } else if (TRAIL_BASE + 1..TRAIL_BASE + TRAIL_COUNT).contains(&c) {
        Some(JamoClass::Trailing)
    } else {
        None
    }
}

pub fn is_syllable(ch: char) -> bool {
    (SYLLABLE_BASE..SYLLABLE_BASE + SYLLABLE_COUNT).contains(&(ch as u32))
}

pub fn is_compat_jamo(ch: char) -> bool {
    (COMPAT_CONSONANT_FIRST..=COMPAT_VOWEL_LAST).contains(&(ch as u32))
}

/// Any character that belongs to a hangul word: syllables, conjoining jamo
/// (including the archaic extension blocks) and compatibility jamo.
pub fn is_hangul(ch: char) -> bool {
    let c = ch as u32;
    is_syllable(ch)
        || (0x1100..=0x11FF).contains(&c)
        || (0x3131..=0x318E).contains(&c)
        || (0xA960..=0xA97F).contains(&c)
        || (0xD7B0..=0xD7FF).contains(&c)
}

/// Splits a precomposed syllable into its 2 or 3 jamo; any other character
/// comes back alone.
pub fn decompose_syllable(ch: char) -> ArrayVec<char, 3> {
    let mut out = ArrayVec::new();
    if !is_syllable(ch) {
        out.push(ch);
        return out;
    }
    let index = ch as u32 - SYLLABLE_BASE;
    let lead = index / BLOCK_COUNT;
    let vowel = (index % BLOCK_COUNT) / TRAIL_COUNT;
    let trail = index % TRAIL_COUNT;
    out.push(from_u32(LEAD_BASE + lead));
    out.push(from_u32(VOWEL_BASE + vowel));
    if trail != 0 {
        out.push(from_u32(TRAIL_BASE + trail));
    }
    out
}

pub fn decompose_text(text: &str) -> LetterString {
    let mut out = Vec::with_capacity(text.len());
    decompose_into(text, &mut out);
    out
}

/// Appends the letters of `text` to `out`.
pub fn decompose_into(text: &str, out: &mut LetterString) {
    for ch in text.chars() {
        out.extend(decompose_syllable(ch));
    }
}

/// Greedy left-to-right recomposition. Jamo that cannot start or extend a
/// syllable are shown as compatibility jamo.
pub fn compose_letters(letters: &[char]) -> String {
    let mut out = String::with_capacity(letters.len() * 2);
    let mut i = 0;
    while i < letters.len() {
        let ch = letters[i];
        if jamo_class(ch) == Some(JamoClass::Leading) {
            if let Some(&v) = letters.get(i + 1) {
                if jamo_class(v) == Some(JamoClass::Vowel) {
                    let lead = ch as u32 - LEAD_BASE;
                    let vowel = v as u32 - VOWEL_BASE;
                    let mut trail = 0;
                    i += 2;
                    if let Some(&t) = letters.get(i) {
                        if jamo_class(t) == Some(JamoClass::Trailing) {
                            trail = t as u32 - TRAIL_BASE;
                            i += 1;
                        }
                    }
                    out.push(from_u32(
                        SYLLABLE_BASE + lead * BLOCK_COUNT + vowel * TRAIL_COUNT + trail,
                    ));
                    continue;
                }
            }
        }
        out.push(to_compat(ch).unwrap_or(ch));
        i += 1;
    }
    out
}

/// Compatibility (display) form of a modern conjoining jamo.
pub fn to_compat(ch: char) -> Option<char> {
    let c = ch as u32;
    match jamo_class(ch)? {
        JamoClass::Vowel => Some(from_u32(COMPAT_VOWEL_FIRST + (c - VOWEL_BASE))),
        JamoClass::Leading => {
            let lead = (c - LEAD_BASE) as u8;
            COMPAT_CONSONANTS
                .iter()
                .position(|&(l, _)| l == Some(lead))
                .map(|k| from_u32(COMPAT_CONSONANT_FIRST + k as u32))
        }
        JamoClass::Trailing => {
            let trail = (c - TRAIL_BASE) as u8;
            COMPAT_CONSONANTS
                .iter()
                .position(|&(_, t)| t == Some(trail))
                .map(|k| from_u32(COMPAT_CONSONANT_FIRST + k as u32))
        }
    }
}

/// Position-free identity of a letter: the compatibility form for jamo,
/// the character itself otherwise. ᄀ and ᆨ share an identity.
pub fn letter_identity(ch: char) -> char {
    to_compat(ch).unwrap_or(ch)
}

/// Which side of a morpheme boundary a string sits on. Decides the position
/// of a consonant that touches no vowel (e.g. the stem allomorph `ㅋ` or the
/// ending `ㅆ다`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Followed by an ending: a bare consonant starts the next syllable.
    Stem,
    /// Preceded by a stem: a bare consonant closes the previous syllable.
    Suffix,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Fixed(char),
    Consonant(usize),
}

/// Converts resource text (syllables, conjoining or compatibility jamo,
/// other characters) into a letter string.
pub fn to_letters(text: &str, role: Role) -> LetterString {
    let mut slots: Vec<Slot> = Vec::with_capacity(text.len());
    for ch in text.chars() {
        let c = ch as u32;
        if (COMPAT_CONSONANT_FIRST..=COMPAT_CONSONANT_LAST).contains(&c) {
            slots.push(Slot::Consonant((c - COMPAT_CONSONANT_FIRST) as usize));
        } else if (COMPAT_VOWEL_FIRST..=COMPAT_VOWEL_LAST).contains(&c) {
            slots.push(Slot::Fixed(from_u32(VOWEL_BASE + (c - COMPAT_VOWEL_FIRST))));
        } else {
            slots.extend(decompose_syllable(ch).into_iter().map(Slot::Fixed));
        }
    }
    let is_vowel = |s: Option<&Slot>| match s {
        Some(Slot::Fixed(c)) => jamo_class(*c) == Some(JamoClass::Vowel),
        _ => false,
    };
    let mut out = Vec::with_capacity(slots.len());
    for (i, slot) in slots.iter().enumerate() {
        match *slot {
            Slot::Fixed(c) => out.push(c),
            Slot::Consonant(k) => {
                let next_vowel = is_vowel(slots.get(i + 1));
                let prev_vowel = i > 0 && is_vowel(slots.get(i - 1));
                let leading = if next_vowel {
                    true
                } else if prev_vowel {
                    false
                } else {
                    role == Role::Stem
                };
                out.push(consonant_form(k, leading));
            }
        }
    }
    out
}

/// Re-derives leading/trailing forms of every consonant in `letters` from
/// context, after edits that may have moved syllable boundaries.
pub fn fix_positions(letters: &mut [char], role: Role) {
    let text: String = letters
        .iter()
        .map(|&c| match jamo_class(c) {
            Some(JamoClass::Leading | JamoClass::Trailing) => letter_identity(c),
            _ => c,
        })
        .collect();
    let fixed = to_letters(&text, role);
    debug_assert_eq!(fixed.len(), letters.len());
    letters.copy_from_slice(&fixed);
}

/// `ch` as a leading or trailing consonant, falling back to the other form
/// when the requested one does not exist. Other letters come back unchanged.
pub fn consonant_at(ch: char, leading: bool) -> char {
    let c = letter_identity(ch) as u32;
    if (COMPAT_CONSONANT_FIRST..=COMPAT_CONSONANT_LAST).contains(&c) {
        consonant_form((c - COMPAT_CONSONANT_FIRST) as usize, leading)
    } else {
        ch
    }
}

fn consonant_form(compat_index: usize, leading: bool) -> char {
    let (lead, trail) = COMPAT_CONSONANTS[compat_index];
    let lead = lead.map(|l| from_u32(LEAD_BASE + l as u32));
    let trail = trail.map(|t| from_u32(TRAIL_BASE + t as u32));
    if leading {
        lead.or(trail)
    } else {
        trail.or(lead)
    }
    .expect("every compatibility consonant has a conjoining form")
}

fn from_u32(c: u32) -> char {
    char::from_u32(c).expect("hangul arithmetic stays in valid scalar range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Expected letters below were taken from Unicode NFD, an implementation
    // independent of the arithmetic under test.
    #[test]
    fn decomposes_open_and_closed_syllables() {
        assert_eq!(decompose_syllable('가').as_slice(), &['\u{1100}', '\u{1161}']);
        assert_eq!(
            decompose_syllable('한').as_slice(),
            &['\u{1112}', '\u{1161}', '\u{11AB}']
        );
        assert_eq!(decompose_syllable('a').as_slice(), &['a']);
    }

    #[test]
    fn decomposes_text() {
        assert_eq!(decompose_text("크"), vec!['\u{110F}', '\u{1173}']);
        assert!(decompose_text("").is_empty());
        assert_eq!(
            decompose_text("한글!"),
            vec!['\u{1112}', '\u{1161}', '\u{11AB}', '\u{1100}', '\u{1173}', '\u{11AF}', '!']
        );
        assert_eq!(
            decompose_text("하셨다"),
            vec!['\u{1112}', '\u{1161}', '\u{1109}', '\u{1167}', '\u{11BB}', '\u{1103}', '\u{1161}']
        );
    }

    #[test]
    fn composes_syllables_and_remnants() {
        assert_eq!(compose_letters(&['\u{1112}', '\u{1161}', '\u{11AB}']), "한");
        assert_eq!(compose_letters(&[]), "");
        assert_eq!(compose_letters(&['\u{110F}']), "ㅋ");
        assert_eq!(compose_letters(&['\u{1165}', '\u{11BB}', '\u{1103}', '\u{1161}']), "ㅓㅆ다");
    }

    #[test]
    fn roundtrips_every_syllable() {
        for c in SYLLABLE_BASE..SYLLABLE_BASE + SYLLABLE_COUNT {
            let s = char::from_u32(c).unwrap();
            let letters = decompose_syllable(s);
            assert!((2..=3).contains(&letters.len()));
            assert_eq!(compose_letters(&letters), s.to_string());
        }
    }

    #[test]
    fn compat_consonants_resolve_from_context() {
        // Stem allomorph of 크 before a vowel-initial ending.
        assert_eq!(to_letters("ㅋ", Role::Stem), vec!['\u{110F}']);
        // Ending that closes the stem's last syllable.
        assert_eq!(to_letters("ㅆ다", Role::Suffix), decompose_text("갔다")[2..].to_vec());
        assert_eq!(to_letters("ㅓㅆ", Role::Suffix), vec!['\u{1165}', '\u{11BB}']);
        // ㄸ has no trailing form, ㄳ no leading form.
        assert_eq!(to_letters("ㄸ", Role::Suffix), vec!['\u{1104}']);
        assert_eq!(to_letters("ㄳ", Role::Stem), vec!['\u{11AA}']);
        // Syllables pass through unchanged.
        assert_eq!(to_letters("먹었다", Role::Suffix), decompose_text("먹었다"));
    }

    #[test]
    fn fix_positions_after_edit() {
        // 춥 -> remove ㅂ, append ㅇ ㅜ -> 추우
        let mut letters = decompose_text("추");
        letters.push('\u{11BC}'); // trailing ㅇ, wrong once a vowel follows
        letters.push('\u{116E}');
        fix_positions(&mut letters, Role::Stem);
        assert_eq!(compose_letters(&letters), "추우");
    }

    #[test]
    fn compat_mapping_covers_every_modern_jamo() {
        for c in LEAD_BASE..LEAD_BASE + LEAD_COUNT {
            let ch = char::from_u32(c).unwrap();
            let compat = to_compat(ch).unwrap();
            assert_eq!(to_letters(&compat.to_string(), Role::Stem), vec![ch]);
        }
        for c in TRAIL_BASE + 1..TRAIL_BASE + TRAIL_COUNT {
            let ch = char::from_u32(c).unwrap();
            let compat = to_compat(ch).unwrap();
            assert_eq!(to_letters(&compat.to_string(), Role::Suffix), vec![ch]);
        }
    }

    fn letter() -> impl Strategy<Value = char> {
        prop_oneof![
            (LEAD_BASE..LEAD_BASE + LEAD_COUNT),
            (VOWEL_BASE..VOWEL_BASE + VOWEL_COUNT),
            (TRAIL_BASE + 1..TRAIL_BASE + TRAIL_COUNT),
            (0x20u32..0x7F),
            (SYLLABLE_BASE..SYLLABLE_BASE + SYLLABLE_COUNT),
        ]
        .prop_map(|c| char::from_u32(c).unwrap())
    }

    proptest! {
        #[test]
        fn compose_never_emits_conjoining_jamo(letters in proptest::collection::vec(letter(), 0..24)) {
            let s = compose_letters(&letters);
            prop_assert!(s.chars().all(|c| jamo_class(c).is_none()));
        }

        #[test]
        fn non_hangul_text_passes_through(s in "[a-zA-Z0-9 .,!?]{0,32}") {
            let letters: String = decompose_text(&s).into_iter().collect();
            prop_assert_eq!(letters, s);
        }

        #[test]
        fn decompose_then_compose_is_identity(s in "[가-힣a-z ]{0,16}") {
            prop_assert_eq!(compose_letters(&decompose_text(&s)), s);
        }
    }
}
