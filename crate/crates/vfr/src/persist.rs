//! Versioned JSON storage for trained models.
//!
//! Files carry a `kind` tag and a `format_version` so a loader can reject
//! foreign or stale files with a precise error instead of a deserialization
//! failure deep inside the payload.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    format_version: u32,
    data: T,
}

/// Header-only view used to validate before decoding the payload.
#[derive(Deserialize)]
struct Header {
    kind: String,
    format_version: u32,
}

pub(crate) fn save_json<T: Serialize>(
    path: &Path,
    kind: &str,
    version: u32,
    data: &T,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let envelope = Envelope {
        kind: kind.to_string(),
        format_version: version,
        data,
    };
    serde_json::to_writer(BufWriter::new(file), &envelope)
        .map_err(|e| Error::DataFormat(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub(crate) fn load_json<T: DeserializeOwned>(path: &Path, kind: &str, version: u32) -> Result<T> {
    let read_all = || -> Result<String> {
        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
    };
    let text = read_all()?;
    let header: Header = serde_json::from_str(&text)
        .map_err(|e| Error::DataFormat(format!("{}: {e}", path.display())))?;
    if header.kind != kind {
        return Err(Error::DataFormat(format!(
            "{}: file holds a '{}' model, expected '{kind}'",
            path.display(),
            header.kind
        )));
    }
    if header.format_version != version {
        return Err(Error::ModelVersion {
            found: header.format_version,
            expected: version,
        });
    }
    let envelope: Envelope<T> = serde_json::from_str(&text)
        .map_err(|e| Error::DataFormat(format!("{}: {e}", path.display())))?;
    Ok(envelope.data)
}
