use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("{}: {source}", .path.display())]
    InFile { path: PathBuf, source: Box<Error> },
    #[error("{}: {}", .0.display(), .1)]
    Path(PathBuf, #[source] io::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] obsflow_core::Error),
    #[error("invalid quantity {0:?}")]
    Unit(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    TomlRead(#[from] toml::de::Error),
    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("cell {cell}: {source}")]
    Cell { cell: String, source: obsflow_core::Error },
}

impl Error {
    pub(crate) fn in_file(self, path: &Path) -> Error {
        Error::InFile { path: path.to_path_buf(), source: Box::new(self) }
    }
}
