use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Writes one `<prefix>_<k>.csv` per recorded time (columns `<coord>,value`)
/// and an index `<prefix>_index.csv` (columns `index,time,file`).
pub fn write_snapshots(
    dir: &Path,
    prefix: &str,
    coord: &str,
    times: &[f64],
    grids: &[Vec<(f64, f64)>],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut index = csv::Writer::from_path(dir.join(format!("{prefix}_index.csv")))?;
    index.write_record(["index", "time", "file"])?;
    let mut written = Vec::with_capacity(times.len());
    for (k, (t, grid)) in times.iter().zip(grids).enumerate() {
        let name = format!("{prefix}_{k:04}.csv");
        let path = dir.join(&name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([coord, "value"])?;
        for (c, v) in grid {
            w.write_record([format!("{c:.16e}"), format!("{v:.16e}")])?;
        }
        w.flush()?;
        index.write_record([k.to_string(), format!("{t:.16e}"), name])?;
        written.push(path);
    }
    index.flush()?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_index_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let grids = vec![vec![(0.0, 0.0), (1.0, 1.0)], vec![(0.0, 0.0), (1.0, 1.0)]];
        let files = write_snapshots(dir.path(), "lag", "theta", &[0.0, 0.5], &grids).unwrap();
        assert_eq!(files.len(), 2);
        let idx = std::fs::read_to_string(dir.path().join("lag_index.csv")).unwrap();
        assert_eq!(idx.lines().count(), 3);
        let first = std::fs::read_to_string(&files[0]).unwrap();
        assert!(first.starts_with("theta,value\n"));
    }
}
