//! Verification against PhysioNet-style `SHA256SUMS.txt` listings.

use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, Result};

pub const CHECKSUM_FILES: [&str; 2] = ["SHA256SUMS.txt", "SHA256SUMS"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(io_err(path))?))
}

/// `(hex digest, relative path)` pairs of a listing; `*` binary markers are dropped.
pub fn parse_listing(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|line| {
            let (hash, name) = line.trim().split_once(char::is_whitespace)?;
            let name = name.trim_start().trim_start_matches('*');
            (hash.len() == 64 && !name.is_empty()).then(|| (hash.to_ascii_lowercase(), name.to_string()))
        })
        .collect()
}

/// Checks every listed file that exists under `dir`. Returns the number
/// verified, or `None` when the directory has no listing.
pub fn verify_dir(dir: &Path) -> Result<Option<usize>> {
    let Some(listing) = CHECKSUM_FILES.iter().map(|f| dir.join(f)).find(|p| p.is_file()) else {
        warn!("no checksum listing in {}; inputs are not verified", dir.display());
        return Ok(None);
    };
    let text = std::fs::read_to_string(&listing).map_err(io_err(&listing))?;
    let mut verified = 0;
    for (expected, name) in parse_listing(&text) {
        let path: PathBuf = dir.join(&name);
        if !path.is_file() {
            continue;
        }
        let actual = sha256_file(&path)?;
        if actual != expected {
            return Err(CliError::Checksum {
                file: name,
                expected,
                actual,
            });
        }
        verified += 1;
    }
    info!("verified {verified} files against {}", listing.display());
    Ok(Some(verified))
}
