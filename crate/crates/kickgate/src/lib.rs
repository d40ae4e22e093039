//! Front-end for kick-based trapped-ion gate design: configuration,
//! subcommands and the file formats they emit. Numerics live in
//! `kickgate-core`.

pub mod bitstream;
pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

pub use commands::{run, Artifact, Command, Invocation, Run, Status};
pub use config::RunConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    /// Bad configuration or an input outside a module's domain.
    pub const DOMAIN: u8 = 2;
    /// The optimizer met no tolerance; best-effort artifacts were written.
    pub const INFEASIBLE: u8 = 3;
}

/// Exit code for a failed run: IO failures anywhere in the chain map to
/// [`exit::IO`], everything else is a configuration or domain problem.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|c| c.is::<std::io::Error>()) {
        exit::IO
    } else {
        exit::DOMAIN
    }
}

/// Writes the artifacts whose extension is in `formats` (all when empty).
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact], formats: &[&str]) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for a in artifacts.iter().filter(|a| formats.is_empty() || formats.contains(&a.extension())) {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
        written.push(a.name.clone());
    }
    Ok(written)
}
