//! Reading and writing field files through `std::io`.

use std::fs::File;
use std::io::{self, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use radfield_core::codec::{self, ByteSource, DecodeError, FileHeader};
use radfield_core::{FieldError, Layer, RadiationField};

use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// [`ByteSource`] over any reader, counting the bytes consumed.
pub struct ReadSource<R> {
    inner: R,
    consumed: u64,
}

impl<R: Read> ReadSource<R> {
    pub fn new(inner: R) -> Self {
        ReadSource { inner, consumed: 0 }
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: Read> ByteSource for ReadSource<R> {
    fn read_into(&mut self, buf: &mut [u8], what: &str) -> Result<(), DecodeError> {
        self.inner
            .read_exact(buf)
            .map_err(|e| map_read_error(e, what))?;
        self.consumed += buf.len() as u64;
        Ok(())
    }
}

fn map_read_error(e: io::Error, what: &str) -> DecodeError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        DecodeError::Truncated(what.to_string())
    } else {
        DecodeError::Source(e.to_string())
    }
}

/// Encodes `field` into `sink` and returns the number of bytes written.
///
/// Nothing is written when the field violates an invariant.
pub fn write_field<W: Write>(field: &RadiationField, sink: &mut W) -> Result<u64, WriteError> {
    let bytes = codec::encode(field)?;
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(bytes.len() as u64)
}

/// Reads a complete field.
pub fn read_field<R: Read>(source: &mut R) -> Result<RadiationField, DecodeError> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| DecodeError::Source(e.to_string()))?;
    codec::decode(&bytes)
}

/// Parses only the header of a field file.
pub fn read_header<R: Read>(source: &mut R) -> Result<FileHeader, DecodeError> {
    codec::decode_header(&mut ReadSource::new(source))
}

/// Reads one layer, touching only the header and that layer's data block.
pub fn read_layer<R: Read + Seek>(
    source: &mut R,
    channel: &str,
    layer: &str,
) -> Result<Layer, DecodeError> {
    let start = source
        .stream_position()
        .map_err(|e| DecodeError::Source(e.to_string()))?;
    let header = read_header(source)?;
    let entry = header.find(channel, layer)?;
    let what = format!("layer {channel}/{layer}");
    let offset = start
        .checked_add(entry.offset)
        .ok_or_else(|| DecodeError::Truncated(what.clone()))?;
    source
        .seek(SeekFrom::Start(offset))
        .map_err(|e| DecodeError::Source(e.to_string()))?;
    // Grows with the data actually present, so a lying length cannot force a huge allocation.
    let mut block = Vec::new();
    source
        .take(entry.length)
        .read_to_end(&mut block)
        .map_err(|e| map_read_error(e, &what))?;
    if block.len() as u64 != entry.length {
        return Err(DecodeError::Truncated(what));
    }
    codec::decode_layer(channel, entry, &block)
}

pub fn save(path: &Path, field: &RadiationField) -> Result<u64, Error> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_field(field, &mut out).map_err(|e| match e {
        WriteError::Io(e) => Error::io(path, e),
        WriteError::Field(e) => Error::Config(format!("{}: {e}", path.display())),
    })
}

fn decode_error(path: &Path, source: DecodeError) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load(path: &Path) -> Result<RadiationField, Error> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_field(&mut file).map_err(|e| decode_error(path, e))
}

/// Header of a file plus its actual length in bytes.
pub fn load_header(path: &Path) -> Result<(FileHeader, u64), Error> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let header = read_header(&mut io::BufReader::new(file)).map_err(|e| decode_error(path, e))?;
    Ok((header, len))
}

pub fn load_layer(path: &Path, channel: &str, layer: &str) -> Result<Layer, Error> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_layer(&mut file, channel, layer).map_err(|e| decode_error(path, e))
}
