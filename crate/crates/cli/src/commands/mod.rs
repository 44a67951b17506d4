pub mod difficulty;
pub mod evaluate;
pub mod inspect;
pub mod plot;
pub mod train;

use std::path::Path;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.toml";

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Writes the fully resolved config next to a command's outputs.
pub(crate) fn dump_config(dir: &Path, cfg: &RunConfig) -> CliResult<()> {
    write_file(&dir.join(CONFIG_FILE), cfg.to_toml())
}
