//! Corpus readers and writers.

mod conll;
mod corpus;
mod sidecar;
mod standoff;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use conll::{export_conll, import_conll, ConllDocument};
pub use corpus::{dialogue_from_record, dialogue_to_record, load_corpus, load_corpus_unvalidated, parse_corpus, write_corpus};
pub use sidecar::{
    attach_sidecar, parse_sidecar, sidecar_entry, sidecar_to_string, write_sidecar, ChainRecord, FieldMap, MentionRecord,
    SidecarEntry, SidecarFile,
};
pub use standoff::{import_standoff, standoff_text, OffsetMisaligned, StandoffImport};

use crate::error::{Error, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to a temporary file next to `path`, then renames it into
/// place so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
