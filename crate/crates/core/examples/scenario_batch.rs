//! Runs every shipped scenario file in parallel and prints a summary table.

use std::path::PathBuf;

use adaptive_consensus::scenario::Scenario;

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("scenario directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();

    let rows: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| {
                s.spawn(move || match Scenario::from_file(f).and_then(|sc| sc.run()) {
                    Ok(run) => format!(
                        "{:<16} {:<24} {:>12.3e} {:>12}",
                        run.trace.metadata.name.unwrap_or_default(),
                        run.network.kind().name(),
                        run.metrics.trailing_sup,
                        run.bound.map_or("-".to_string(), |b| format!("{:.3e}", b.bound_sq)),
                    ),
                    Err(e) => format!("{}: {e}", f.display()),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    println!("{:<16} {:<24} {:>12} {:>12}", "scenario", "protocol", "sup |xi|", "bound");
    for r in rows {
        println!("{r}");
    }
}
