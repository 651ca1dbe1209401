#![allow(dead_code)]

use std::path::PathBuf;

use otdm_sim::Scenario;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn bundled(name: &str) -> Scenario {
    Scenario::load(scenario_dir().join(name)).unwrap()
}

/// A short version of a bundled scenario.
pub fn short(name: &str, symbols: usize) -> Scenario {
    Scenario {
        symbols_per_branch: symbols,
        ..bundled(name)
    }
}

/// Every file under `dir`, sorted, with its bytes.
pub fn read_tree(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}
