use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rank2sr::config::{load_scenario, Settings};
use rank2sr::run::run_scenario;
use rank2sr::suites::{run_suite, Criterion, SUITES};

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Criterion {
    let (sc, base) = load_scenario("free4-pipeline").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_scenario(&sc, &base, &a, Settings { jobs: 1, tol_scale: 1.0 }).unwrap();
    run_scenario(&sc, &base, &b, Settings { jobs: 4, tol_scale: 1.0 }).unwrap();
    let (fa, fb) = (data_files(&a), data_files(&b));
    let differing = fa.keys().chain(fb.keys()).filter(|k| fa.get(*k) != fb.get(*k)).count() as f64;
    Criterion {
        id: 12,
        name: "determinism".into(),
        measured: differing,
        bound: 0.0,
        pass: differing == 0.0 && !fa.is_empty(),
        detail: format!("{} data files compared across --jobs 1 and --jobs 4", fa.len()),
    }
}

fn main() {
    let settings = Settings { jobs: 4, tol_scale: 1.0 };
    let mut by_id: BTreeMap<u32, Vec<Criterion>> = BTreeMap::new();
    for suite in SUITES {
        let rep = run_suite(suite, settings).unwrap_or_else(|e| panic!("suite {suite}: {e}"));
        for c in rep.criteria {
            by_id.entry(c.id).or_default().push(c);
        }
    }
    by_id.entry(12).or_default().push(determinism());
    let mut failed = Vec::new();
    for id in 1..=12 {
        let parts = by_id.get(&id).unwrap_or_else(|| panic!("criterion {id} was not measured"));
        let pass = parts.iter().all(|c| c.pass);
        let text: Vec<String> =
            parts.iter().map(|c| format!("{} = {:.3e} (bound {:.1e}): {}", c.name, c.measured, c.bound, c.detail)).collect();
        println!("criterion {id:>2} {}  {}", if pass { "PASS" } else { "FAIL" }, text.join(" | "));
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
