#![allow(dead_code)]

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn qscan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qscan"))
}

/// Runs qscan with `args` in `dir` and returns the raw output.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    qscan().current_dir(dir).args(args).output().expect("spawn qscan")
}

/// Runs qscan and panics with its stderr unless it exits 0.
pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "qscan {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

/// The bundled State of the Union corpus, one JSON object per address.
pub fn sotu_documents() -> Vec<serde_json::Value> {
    let path = workspace_root().join("data/corpora/sotu.jsonl.gz");
    let f = std::fs::File::open(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut text = String::new();
    flate2::read::GzDecoder::new(f).read_to_string(&mut text).unwrap();
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

pub fn write_jsonl(path: &Path, docs: &[(String, String)]) {
    let mut s = String::new();
    for (id, text) in docs {
        s.push_str(&serde_json::json!({ "id": id, "text": text }).to_string());
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

pub fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Splits texts into consecutive windows of `n` whitespace-separated words.
pub fn word_windows<'a>(texts: impl IntoIterator<Item = &'a str>, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for t in texts {
        let words: Vec<&str> = t.split_whitespace().collect();
        for chunk in words.chunks_exact(n) {
            out.push(chunk.join(" "));
        }
    }
    out
}

pub const SMALL_TEXT: &str = "the cat sat on the mat . the dog sat on the rug . \
a cat saw a dog and the dog saw a cat . the cat ran to the mat and the dog ran to the rug . \
a bird sat on the cat . the end of the story is near . the story of the cat and the dog .";
