//! Reading and writing tensor containers over byte streams and files.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use hintscout_core::blob::{decode, encode};
use hintscout_core::TensorBlob;

use crate::error::{Error, Result};

/// Serialize `blob` into `sink`.
pub fn write_blob<W: Write>(blob: &TensorBlob, sink: &mut W) -> std::io::Result<()> {
    let bytes = encode(blob).map_err(std::io::Error::other)?;
    sink.write_all(&bytes)
}

/// Read one container; the stream must end where the payload does.
pub fn read_blob<R: Read>(source: &mut R) -> Result<TensorBlob> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<stream>", e))?;
    Ok(decode(&bytes)?)
}

pub fn read_blob_file(path: &Path) -> Result<TensorBlob> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}

pub fn write_blob_file(blob: &TensorBlob, path: &Path) -> Result<()> {
    let bytes = encode(blob)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
