//! Command-line driver for the prepare-and-measure toolkit: exact protocol
//! simulation, see-saw optimization, reference designs, and bound tables.
//!
//! The binary is `qpm`.  Every artifact it writes embeds the fully resolved
//! configuration (built-in defaults, then config file, then flags), so a
//! result is reproducible from the artifact alone.  Exit codes: `0` on
//! success, `2` for configuration or usage errors, `3` for numerical
//! failures during a run.

mod commands;
mod opts;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

/// Everything that can go wrong after argument parsing, split by whether
/// the user's configuration or the numerics are at fault.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration; maps to exit code 2.
    Config(String),
    /// A computation failed (solver breakdown, invalid state); exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Numeric(msg) => write!(f, "{msg}"),
        }
    }
}

/// Core errors raised while *running* a configured computation are
/// numerical failures; use [`config_err`] at construction sites instead.
impl From<qpm_core::Error> for CliError {
    fn from(e: qpm_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

/// Wraps an error from building user-specified objects (bad dimension,
/// oversized alphabet, …) as a configuration error.
pub(crate) fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses `args` (including the program name), runs the selected command,
/// and returns the process exit code.  Tables and reports go to `stdout`;
/// error messages go to stderr.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser as _;
    let cli = match opts::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed; real
            // parse errors are usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Floating-point cell format used in CSV artifacts: 12 significant digits,
/// scientific notation, locale-independent.
pub(crate) fn sig(v: f64) -> String {
    format!("{v:.11e}")
}

/// Applies the `QPM_OUT_DIR` convention: relative output paths resolve
/// against that directory when the variable is set and non-empty.
pub(crate) fn resolve_out(out: &Option<PathBuf>) -> Option<PathBuf> {
    let path = out.as_ref()?;
    if path.is_absolute() {
        return Some(path.clone());
    }
    match std::env::var_os("QPM_OUT_DIR") {
        Some(dir) if !dir.is_empty() => Some(PathBuf::from(dir).join(path)),
        _ => Some(path.clone()),
    }
}

/// Writes `body` to the resolved output target.  When the target is a file,
/// the one-line `summary` (and the path written) are echoed to stdout so an
/// interactive run still reports its headline numbers.
pub(crate) fn emit(
    out: &Option<PathBuf>,
    body: &str,
    summary: &str,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    match resolve_out(out) {
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}"))),
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| {
                        CliError::Config(format!("cannot create {}: {e}", parent.display()))
                    })?;
                }
            }
            std::fs::write(&path, body)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            let _ = writeln!(stdout, "{summary}");
            let _ = writeln!(stdout, "wrote {}", path.display());
            Ok(())
        }
    }
}
