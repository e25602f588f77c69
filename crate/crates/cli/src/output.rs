use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sdna::erm::TraceRecord;

pub const TRACE_HEADER: [&str; 9] = [
    "solver", "tau", "seed", "iter", "epoch", "seconds", "primal", "dual", "gap",
];
pub const TIMING_HEADER: [&str; 3] = ["tau", "solver", "seconds_per_epoch"];

/// Writes to a sibling temp file and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn trace_csv(records: &[TraceRecord]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn timing_csv(rows: &[(usize, &str, f64)]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TIMING_HEADER)?;
    for (tau, solver, secs) in rows {
        w.write_record([tau.to_string(), solver.to_string(), format!("{secs:e}")])?;
    }
    Ok(w.into_inner()?)
}

pub fn trace_file_name(solver: &str, tau: usize, seed: u64) -> String {
    format!("{solver}_tau{tau}_seed{seed}.csv")
}
