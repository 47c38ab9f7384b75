use nanosqueeze::config::ScanConfig;
use nanosqueeze::grid::ResultGrid;
use nanosqueeze::output::to_csv;
use sha2::{Digest, Sha256};

/// Caps every linear range in a config document at `n` samples.
pub fn reduce(text: &str, n: usize) -> ScanConfig {
    fn walk(v: &mut serde_json::Value, n: usize) {
        match v {
            serde_json::Value::Object(map) => {
                if let Some(p) = map.get_mut("points") {
                    if p.as_u64().is_some_and(|p| p > n as u64) {
                        *p = n.into();
                    }
                }
                map.values_mut().for_each(|c| walk(c, n));
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(|c| walk(c, n)),
            _ => {}
        }
    }
    let mut doc: serde_json::Value = serde_json::from_str(text).unwrap();
    walk(&mut doc, n);
    ScanConfig::from_json(&doc.to_string()).unwrap()
}

pub fn run_on(cfg: &ScanConfig, threads: usize) -> ResultGrid {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| nanosqueeze::run(cfg)).unwrap()
}

pub fn csv_digest(grid: &ResultGrid) -> String {
    hex::encode(Sha256::digest(to_csv(grid).as_bytes()))
}
