//! Compile readable Korean lexical resources (stem lexicons, allomorph rule
//! graphs, suffix networks) into one minimized finite-state word lexicon,
//! and annotate text as lattices of morphemes.
//!
//! The pipeline:
//!
//! 1. [`resources`] parses the resource files and [`resources::validate`]
//!    checks them.
//! 2. [`generate`] expands base-form stems into allomorphs and derived stems.
//! 3. [`enumerate`] flattens each CS's suffix network into a finite list of
//!    endings.
//! 4. [`fst`] builds and minimizes letter automata over [`hangul`] jamo.
//! 5. [`link`] assembles them into a [`link::WordLexicon`] and looks words up.
//! 6. [`annotate`] turns text into morpheme lattices.

pub mod hangul;
pub mod resources;
pub mod tagset;
pub mod enumerate;
pub mod fst;
pub mod generate;
pub mod link;
pub mod annotate;
pub mod synth;
