use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance block embedded in every report.
///
/// Identical config and input digests give identical report payloads; only
/// `timestamp` varies between such runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command_line: Vec<String>,
    pub config_digest: String,
    pub input_digest: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8], input_bytes: &[u8]) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            command_line: std::env::args().collect(),
            config_digest: sha256_hex(config_bytes),
            input_digest: sha256_hex(input_bytes),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
