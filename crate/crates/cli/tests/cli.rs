use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn klex() -> Command {
    Command::new(env!("CARGO_BIN_EXE_klex"))
}

fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/toy")
}

fn run(args: &[&str]) -> Output {
    klex().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn compile_toy(dir: &Path) -> PathBuf {
    let lex = dir.join("toy.klex");
    let o = run(&["compile", "--resources", toy_dir().to_str().unwrap(), "--lexicon", lex.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    lex
}

#[test]
fn validate_toy_succeeds() {
    let o = run(&["validate", "--resources", toy_dir().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 error(s)"));
}

#[test]
fn validate_reports_broken_resources_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    klex::resources::ResourceSet::load_dir(&toy_dir()).unwrap().write_dir(dir.path()).unwrap();
    std::fs::write(dir.path().join("extra.stems"), "뭐\tN\tCS_MISSING\n").unwrap();
    let o = run(&["validate", "--resources", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CS_MISSING"));
    let lex = dir.path().join("out.klex");
    let o = run(&["compile", "--resources", dir.path().to_str().unwrap(), "--lexicon", lex.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!lex.exists());
}

#[test]
fn missing_inputs_exit_1() {
    assert_eq!(run(&["stats", "--lexicon", "/nonexistent/x.klex"]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--resources", "/nonexistent"]).status.code(), Some(1));
    assert_eq!(run(&["stats"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.klex");
    std::fs::write(&bad, b"not a lexicon").unwrap();
    assert_eq!(run(&["stats", "--lexicon", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn compile_stats_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("toy.klex");
    let dump = dir.path().join("dump");
    let o = run(&[
        "compile",
        "--resources",
        toy_dir().to_str().unwrap(),
        "--lexicon",
        lex.to_str().unwrap(),
        "--max-unroll",
        "1",
        "--stats",
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("stems minimal"));
    assert!(out.contains("step 5 link"));
    assert!(std::fs::read_to_string(dump.join("stems.generated")).unwrap().contains("예ㅃ"));
    assert!(dump.join("endings/CS_V.txt").exists());
    let stats = stdout(&run(&["stats", "--lexicon", lex.to_str().unwrap()]));
    assert!(stats.contains("max_unroll        1"));
    assert!(stats.contains("endings CS_V"));
}

#[test]
fn annotate_stdin_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let lex = compile_toy(dir.path());
    let mut child = klex()
        .args(["annotate", "--lexicon", lex.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all("하셨다.".as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let tsv = stdout(&o);
    assert!(tsv.contains("0\t0\t셨\t으시\tMorph+hon=y"));
    assert!(tsv.contains("0\t0\t\t었\tMorph+past=y"));
    assert!(tsv.contains("0\t0\t.\t.\tPUNCT"));

    let input = dir.path().join("in.txt");
    std::fs::write(&input, "사과를 먹었다").unwrap();
    let out = dir.path().join("out.json");
    let o = run(&["annotate", "--lexicon", lex.to_str().unwrap(), "--format", "json", "-o", out.to_str().unwrap(), input.to_str().unwrap()]);
    assert!(o.status.success());
    let lattices = klex::annotate::read_lattice_json(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(lattices.len(), 1);
    assert_eq!(lattices[0].path_count(), 2);

    let o = run(&["annotate", "--lexicon", lex.to_str().unwrap(), "--format", "xml", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn annotate_bench_reports_rate() {
    let dir = tempfile::tempdir().unwrap();
    let lex = compile_toy(dir.path());
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "학교에 갔다. 빨리도 먹었다.\n".repeat(50)).unwrap();
    let o = run(&["annotate", "--lexicon", lex.to_str().unwrap(), "--bench", input.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("annotated 200 words"));
}

#[test]
fn enumerate_lists_endings() {
    let o = run(&["enumerate", "--resources", toy_dir().to_str().unwrap(), "--max-unroll", "1", "CS_ADV"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2, "{out}");
    assert!(out.lines().any(|l| l.starts_with("도\t")));
    assert_eq!(run(&["enumerate", "--resources", toy_dir().to_str().unwrap(), "CS_NOPE"]).status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("cfg.klex");
    let cfg = dir.path().join("klex.conf");
    std::fs::write(&cfg, format!("resources={}\nlexicon={}\nmax_unroll=2\n", toy_dir().display(), lex.display())).unwrap();
    assert!(run(&["--config", cfg.to_str().unwrap(), "compile"]).status.success());
    assert!(stdout(&run(&["stats", "--config", cfg.to_str().unwrap()])).contains("max_unroll        2"));
    assert!(run(&["compile", "--config", cfg.to_str().unwrap(), "--max-unroll", "0"]).status.success());
    assert!(stdout(&run(&["stats", "--config", cfg.to_str().unwrap()])).contains("max_unroll        0"));
    std::fs::write(&cfg, "colour=blue\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "validate"]).status.code(), Some(1));
}

#[test]
fn synth_writes_resources_and_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("res");
    let corpus = dir.path().join("corpus.txt");
    let o = run(&[
        "--threads", "1", "synth", "--out", res.to_str().unwrap(), "--stems", "200", "--endings", "40", "--min-endings", "10",
        "--cs", "4", "--corpus", corpus.to_str().unwrap(), "--corpus-words", "300",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run(&["validate", "--resources", res.to_str().unwrap()]).status.success());
    assert!(std::fs::read_to_string(&corpus).unwrap().split_whitespace().count() >= 250);
    let lex = dir.path().join("s.klex");
    assert!(run(&["compile", "--resources", res.to_str().unwrap(), "--lexicon", lex.to_str().unwrap()]).status.success());
}
