use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const INCOMPLETE_FILE: &str = "INCOMPLETE";

#[derive(Debug)]
pub enum CliError {
    /// Bad input, configuration or environment: exit code 1.
    User(String),
    /// Broken invariant: exit code 2.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => f.write_str(m),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

pub fn user(e: impl fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

impl From<mvforge::annotate::FormatError> for CliError {
    fn from(e: mvforge::annotate::FormatError) -> Self {
        CliError::User(e.to_string())
    }
}

/// An output directory for one run. The resolved configuration is echoed on
/// creation; a failed run leaves an `INCOMPLETE` marker behind.
pub struct RunDir {
    pub root: PathBuf,
}

#[derive(Serialize)]
struct Echo<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a T,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, config: &impl Serialize) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::User(format!("cannot create {}: {e}", root.display())))?;
        let dir = RunDir {
            root: root.to_path_buf(),
        };
        dir.write(INCOMPLETE_FILE, "run in progress\n")?;
        let echo = Echo {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
        };
        let text =
            serde_json::to_string_pretty(&echo).map_err(|e| CliError::Internal(e.to_string()))?;
        dir.write(RUN_CONFIG_FILE, &(text + "\n"))?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display())))
    }

    /// Clears the marker on success, or records the error in it.
    pub fn finish<T>(&self, result: Result<T, CliError>) -> Result<T, CliError> {
        match &result {
            Ok(_) => {
                let _ = std::fs::remove_file(self.path(INCOMPLETE_FILE));
            }
            Err(e) => {
                let _ = std::fs::write(self.path(INCOMPLETE_FILE), format!("{e}\n"));
            }
        }
        result
    }
}

/// Accepts either a manifest file or the directory holding `manifest.json`.
pub fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(mvforge::annotate::MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}
