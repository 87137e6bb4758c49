//! Replays the fuzz corpus seeds through the parsers on stable.

use std::path::{Path, PathBuf};

use dcsim::config::ScenarioConfig;
use dcsim::mptcp::{Insert, ReorderBuffer};
use dcsim::trace::read_trace;

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    assert!(!v.is_empty());
    v
}

fn stem(p: &Path) -> &str {
    p.file_stem().unwrap().to_str().unwrap()
}

#[test]
fn scenario_seeds() {
    for p in seeds("scenario_toml") {
        let text = std::fs::read_to_string(&p).unwrap();
        let parsed = ScenarioConfig::from_toml_str(&text);
        if stem(&p).starts_with("bad") {
            assert!(parsed.is_err(), "{}", p.display());
        } else {
            let cfg = parsed.unwrap();
            dcsim::harness::validate(&cfg).unwrap();
        }
    }
}

#[test]
fn trace_seeds() {
    for p in seeds("trace_csv") {
        let rows = read_trace(std::fs::File::open(&p).unwrap());
        assert_eq!(rows.is_err(), stem(&p).starts_with("bad"), "{}", p.display());
    }
}

#[test]
fn reorder_seeds() {
    for p in seeds("reorder_ops") {
        let data = std::fs::read(&p).unwrap();
        let mut buf = ReorderBuffer::new(data[0] as usize % 64 + 1);
        let mut out = 0usize;
        for c in data[1..].chunks_exact(2) {
            if let Insert::Accepted { released, dropped } = buf.insert(u16::from_le_bytes([c[0], c[1]]) as u64, ()) {
                out += released.len() + dropped.len();
            }
            assert_eq!(out as u64, buf.expected(), "{}", p.display());
        }
    }
}
