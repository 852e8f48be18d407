mod config;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use klex::annotate::{self, Annotator, Format, TokenKind};
use klex::enumerate::{self, CyclePolicy, DEFAULT_PATH_CAP};
use klex::generate;
use klex::link::{self, LinkError, WordLexicon};
use klex::resources::{self, ResourceSet, Severity};
use klex::synth::{self, SynthConfig};

use config::FileConfig;

#[derive(Parser)]
#[command(name = "klex", version, about = "Compile Korean lexical resources into a finite-state word lexicon and annotate text")]
struct Cli {
    /// key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// How often a path may take each cycle.
    #[arg(long)]
    max_unroll: Option<u32>,
    /// Maximum endings enumerated per root graph.
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and compile resources into a .klex lexicon.
    Compile {
        #[arg(long)]
        resources: Option<PathBuf>,
        /// Output lexicon file.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Print trie and minimal automaton sizes.
        #[arg(long)]
        stats: bool,
        /// Write generated stems and enumerated endings to this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Annotate text files (or standard input) as morpheme lattices.
    Annotate {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
        /// Report throughput on standard error; lattices are written only
        /// with --output.
        #[arg(long)]
        bench: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
        inputs: Vec<PathBuf>,
    },
    /// Print the enumerated endings of one CS.
    Enumerate {
        #[arg(long)]
        resources: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyArgs,
        cs: String,
    },
    /// Print statistics of a compiled lexicon.
    Stats {
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Check resources and print diagnostics.
    Validate {
        #[arg(long)]
        resources: Option<PathBuf>,
    },
    /// Write a synthetic resource set (and optionally a corpus).
    Synth {
        /// Output resource directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 39_130)]
        stems: usize,
        /// Endings per CS (the largest CS when --min-endings is lower).
        #[arg(long, default_value_t = 5_500)]
        endings: usize,
        /// Endings of the smallest CS; CS sizes spread evenly up to --endings.
        #[arg(long)]
        min_endings: Option<usize>,
        /// Inflection classes (root graphs).
        #[arg(long = "cs", default_value_t = 24)]
        cs: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Words in the corpus written by --corpus.
        #[arg(long, default_value_t = 1_000_000)]
        corpus_words: usize,
        /// Also compile the resources and write a sampled corpus here.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    User(anyhow::Error),
    Compile(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::User(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

struct Ctx {
    file: FileConfig,
}

impl Ctx {
    fn resources(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.file.path("resources"))
            .ok_or_else(|| anyhow!("no resource directory (use --resources or `resources=` in the config file)"))
    }

    fn lexicon(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.file.path("lexicon"))
            .ok_or_else(|| anyhow!("no lexicon file (use --lexicon or `lexicon=` in the config file)"))
    }

    fn policy(&self, args: &PolicyArgs) -> Result<CyclePolicy> {
        let max_unroll = match args.max_unroll {
            Some(v) => v,
            None => self.file.get("max_unroll")?.unwrap_or(0),
        };
        let max_paths = match args.cap {
            Some(v) => v,
            None => self.file.get("cap")?.unwrap_or(DEFAULT_PATH_CAP),
        };
        if max_paths == 0 {
            return Err(anyhow!("--cap must be at least 1"));
        }
        Ok(CyclePolicy { max_unroll, max_paths })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Compile(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => file.get("threads")?,
    };
    if let Some(t) = threads.filter(|&t| t > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let ctx = Ctx { file };
    match cli.command {
        Command::Compile { resources, lexicon, policy, stats, dump } => {
            cmd_compile(ctx.resources(resources)?, ctx.lexicon(lexicon)?, ctx.policy(&policy)?, stats, dump)
        }
        Command::Annotate { lexicon, format, bench, output, inputs } => {
            let format = match format {
                Some(f) => f,
                None => ctx.file.get("format")?.unwrap_or_else(|| "tsv".to_string()),
            };
            let format: Format = format.parse().map_err(anyhow::Error::from)?;
            cmd_annotate(ctx.lexicon(lexicon)?, format, bench, output, inputs)
        }
        Command::Enumerate { resources, policy, cs } => {
            cmd_enumerate(ctx.resources(resources)?, ctx.policy(&policy)?, &cs)
        }
        Command::Stats { lexicon } => cmd_stats(ctx.lexicon(lexicon)?),
        Command::Validate { resources } => cmd_validate(ctx.resources(resources)?),
        Command::Synth { out, stems, endings, min_endings, cs, seed, corpus_words, corpus } => {
            let seed = match seed {
                Some(s) => s,
                None => ctx.file.get("seed")?.unwrap_or(SynthConfig::default().seed),
            };
            if stems == 0 || endings == 0 || cs == 0 {
                return Err(anyhow!("--stems, --endings and --cs must be at least 1").into());
            }
            let config = SynthConfig {
                seed,
                stems,
                classes: cs,
                min_endings: min_endings.unwrap_or(SynthConfig::default().min_endings).min(endings),
                max_endings: endings,
                ..SynthConfig::default()
            };
            cmd_synth(&config, &out, corpus.map(|p| (p, corpus_words)))
        }
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| anyhow!("writing {}: {}", path.display(), e.error))?;
    Ok(())
}

fn load_resources(dir: &Path) -> Result<ResourceSet> {
    if !dir.is_dir() {
        return Err(anyhow!("resource directory {} does not exist", dir.display()));
    }
    ResourceSet::load_dir(dir).with_context(|| format!("loading resources from {}", dir.display()))
}

/// Prints diagnostics; true when any is an error.
fn report_diagnostics(set: &ResourceSet) -> bool {
    let diagnostics = resources::validate(set);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    resources::has_errors(&diagnostics)
}

fn load_lexicon(path: &Path) -> Result<WordLexicon> {
    let bytes = fs::read(path).with_context(|| format!("reading lexicon {}", path.display()))?;
    WordLexicon::from_bytes(&bytes).with_context(|| format!("loading lexicon {}", path.display()))
}

fn cmd_compile(
    resources: PathBuf,
    output: PathBuf,
    policy: CyclePolicy,
    stats: bool,
    dump: Option<PathBuf>,
) -> CmdResult {
    let set = load_resources(&resources)?;
    if report_diagnostics(&set) {
        return Err(anyhow!("validation failed").into());
    }
    let compiled = match link::compile(&set, policy) {
        Ok(c) => c,
        Err(LinkError::Invalid(d)) => return Err(anyhow!("validation failed: {}", d[0]).into()),
        Err(e) => return Err(Failure::Compile(e.into())),
    };
    let report = &compiled.report;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let bytes = compiled.lexicon.to_bytes();
    write_atomic(&output, &bytes)?;
    for (step, (name, time)) in report.steps.iter().enumerate() {
        println!("step {} {:<10} {:>10.3} ms", step + 1, name, time.as_secs_f64() * 1e3);
    }
    println!("stem forms        {}", report.stem_forms);
    println!("ending lists      {} CSs, {} endings", report.ending_counts.len(), report.ending_counts.values().sum::<usize>());
    println!("word forms        {}", report.word_forms);
    if let Some(m) = report.stem_minimal {
        println!("stem automaton    {} states, {} transitions", m.states, m.transitions);
    }
    if let Some(m) = report.ending_minimal {
        println!("ending automata   {} states, {} transitions", m.states, m.transitions);
    }
    println!("lexicon           {} bytes -> {}", bytes.len(), output.display());
    if stats {
        println!("{:<16} {:>10} {:>12} {:>12}", "automaton", "states", "transitions", "bytes");
        let rows = [
            ("stems trie", report.stem_trie),
            ("stems minimal", report.stem_minimal),
            ("endings trie", report.ending_trie),
            ("endings minimal", report.ending_minimal),
        ];
        for (name, s) in rows {
            if let Some(s) = s {
                println!("{name:<16} {:>10} {:>12} {:>12}", s.states, s.transitions, s.serialized_bytes);
            }
        }
        println!("total trie {} bytes, minimal {} bytes", report.trie_bytes(), report.minimal_bytes());
    }
    if let Some(dir) = dump {
        write_atomic(&dir.join("stems.generated"), generate::format_stem_forms(&compiled.stem_forms).as_bytes())?;
        for (cs, endings) in &compiled.endings {
            write_atomic(&dir.join("endings").join(format!("{cs}.txt")), enumerate::format_endings(endings).as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_annotate(lexicon: PathBuf, format: Format, bench: bool, output: Option<PathBuf>, inputs: Vec<PathBuf>) -> CmdResult {
    let lex = load_lexicon(&lexicon)?;
    let annotator = Annotator::with_lexicon(Arc::new(lex));
    let mut texts = Vec::new();
    if inputs.is_empty() {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text).context("reading standard input")?;
        texts.push(text);
    } else {
        for path in &inputs {
            texts.push(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?);
        }
    }
    let start = Instant::now();
    let mut lattices = Vec::new();
    for text in &texts {
        lattices.extend(annotator.annotate(text).map_err(anyhow::Error::from)?);
    }
    let elapsed = start.elapsed();
    if bench {
        let words: usize = texts
            .iter()
            .flat_map(|t| annotate::segment_sentences(t))
            .map(|s| {
                annotate::tokenize(s.text)
                    .iter()
                    .filter(|t| matches!(t.kind, TokenKind::Word | TokenKind::HanjaWord))
                    .count()
            })
            .sum();
        let rate = words as f64 / elapsed.as_secs_f64();
        eprintln!("annotated {words} words in {:.3} s: {rate:.0} words/s", elapsed.as_secs_f64());
    }
    if bench && output.is_none() {
        return Ok(());
    }
    let mut buf = Vec::new();
    annotate::write_lattice(&lattices, format, &mut buf).map_err(anyhow::Error::from)?;
    match output {
        Some(path) => write_atomic(&path, &buf)?,
        None => io::stdout().lock().write_all(&buf).context("writing standard output")?,
    }
    Ok(())
}

fn cmd_enumerate(resources: PathBuf, policy: CyclePolicy, cs: &str) -> CmdResult {
    let set = load_resources(&resources)?;
    if report_diagnostics(&set) {
        return Err(anyhow!("validation failed").into());
    }
    let entry = set
        .cs
        .iter()
        .find(|(id, _)| id.as_str() == cs)
        .map(|(_, e)| e)
        .ok_or_else(|| anyhow!("unknown CS `{cs}`"))?;
    let endings = enumerate::enumerate_paths(&set.graphs, &entry.root_graph, policy)
        .map_err(|e| Failure::Compile(e.into()))?;
    io::stdout().lock().write_all(enumerate::format_endings(&endings).as_bytes()).context("writing standard output")?;
    Ok(())
}

fn cmd_stats(lexicon: PathBuf) -> CmdResult {
    let size = fs::metadata(&lexicon).with_context(|| format!("reading {}", lexicon.display()))?.len();
    let lex = load_lexicon(&lexicon)?;
    println!("file              {} ({size} bytes)", lexicon.display());
    for (k, v) in lex.metadata() {
        println!("{k:<17} {v}");
    }
    let s = lex.stem_automaton().stats();
    println!("stems             {} states, {} transitions, {} bytes, {} records", s.states, s.transitions, s.serialized_bytes, lex.stem_automaton().payloads().len());
    for cs in lex.cs_ids() {
        let a = lex.ending_automaton(cs).expect("listed CS");
        let s = a.stats();
        println!("endings {cs:<9} {} states, {} transitions, {} bytes, {} records", s.states, s.transitions, s.serialized_bytes, a.payloads().len());
    }
    println!("hanja entries     {}", lex.hanja_index().len());
    Ok(())
}

fn cmd_validate(resources: PathBuf) -> CmdResult {
    let set = load_resources(&resources)?;
    let diagnostics = resources::validate(&set);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    println!(
        "{} stems, {} CSs, {} graphs, {} derivations: {errors} error(s), {} warning(s)",
        set.stems.len(),
        set.cs.len(),
        set.graphs.len(),
        set.derivations.len(),
        diagnostics.len() - errors
    );
    if errors > 0 {
        return Err(anyhow!("validation failed").into());
    }
    Ok(())
}

fn cmd_synth(config: &SynthConfig, out: &Path, corpus: Option<(PathBuf, usize)>) -> CmdResult {
    let files = synth::resource_files(config);
    for (name, text) in &files {
        write_atomic(&out.join(name), text.as_bytes())?;
    }
    println!("wrote {} files to {}", files.len(), out.display());
    if let Some((path, words)) = corpus {
        let set = ResourceSet::from_files(files).context("parsing synthetic resources")?;
        let compiled = link::compile(&set, CyclePolicy::default()).map_err(|e| Failure::Compile(e.into()))?;
        let text = synth::corpus(&compiled.lexicon, words, config.seed);
        write_atomic(&path, text.as_bytes())?;
        println!("wrote {words}-word corpus to {}", path.display());
    }
    Ok(())
}
