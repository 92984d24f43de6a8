use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::graph::is_plain_file_name;

/// Write `content` to `output_dir/name` atomically: a temporary file in the
/// same directory is renamed over the destination, so readers never see a
/// partial file.
pub fn write_output_file(output_dir: &Path, name: &str, content: &[u8]) -> io::Result<PathBuf> {
    if !is_plain_file_name(name) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("output file name '{name}' must not contain path separators"),
        ));
    }
    fs::create_dir_all(output_dir)?;
    let target = output_dir.join(name);
    let mut tmp = NamedTempFile::new_in(output_dir)?;
    tmp.write_all(content)?;
    tmp.as_file().sync_data()?;
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}
