//! Binary encoding of client updates.
//!
//! Frame: `u32_be len | payload | u32_be crc32(payload)`.
//! Payload: `u32 round | u32 client_id | u32 P | P × f64 | u32 num_samples`,
//! every payload field little-endian.

use std::io::{ErrorKind, Read};

use crate::error::TransportError;
use crate::qnn::ParameterVector;

/// Largest payload accepted in a frame.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

const HEADER: usize = 4;
const TRAILER: usize = 4;

/// One client's trained parameters for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub round: u32,
    pub client_id: u32,
    pub params: ParameterVector,
    pub num_samples: u32,
}

impl ClientUpdate {
    pub fn encode_payload(&self) -> Vec<u8> {
        let p = self.params.len();
        let mut out = Vec::with_capacity(16 + 8 * p);
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&self.client_id.to_le_bytes());
        out.extend_from_slice(&(p as u32).to_le_bytes());
        for v in self.params.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.num_samples.to_le_bytes());
        out
    }

    pub fn decode_payload(bytes: &[u8]) -> Result<Self, TransportError> {
        let mut cursor = Cursor { bytes, pos: 0 };
        let round = cursor.u32()?;
        let client_id = cursor.u32()?;
        let p = cursor.u32()? as usize;
        if bytes.len() != 16 + 8 * p {
            return Err(TransportError::Malformed(format!(
                "payload of {} bytes cannot hold {p} parameters",
                bytes.len()
            )));
        }
        let values = (0..p).map(|_| cursor.f64()).collect::<Result<Vec<_>, _>>()?;
        let num_samples = cursor.u32()?;
        let params = ParameterVector::new(values)
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        Ok(Self {
            round,
            client_id,
            params,
            num_samples,
        })
    }

    /// CRC32 of the serialized payload; the frame trailer carries the same value.
    pub fn checksum(&self) -> u32 {
        crc32fast::hash(&self.encode_payload())
    }

    pub fn to_frame(&self) -> Result<Vec<u8>, TransportError> {
        encode_frame(&self.encode_payload())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], TransportError> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or(TransportError::Truncated {
            needed: end,
            got: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length is N"))
    }

    fn u32(&mut self) -> Result<u32, TransportError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, TransportError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn encode_frame(payload: &[u8]) -> Result<Vec<u8>, TransportError> {
    if payload.len() > MAX_FRAME_BYTES {
        return Err(TransportError::Oversize {
            len: payload.len(),
            max: MAX_FRAME_BYTES,
        });
    }
    let mut out = Vec::with_capacity(HEADER + payload.len() + TRAILER);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_be_bytes());
    Ok(out)
}

/// Decodes the first frame of `buf`, returning its payload and the bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Vec<u8>, usize), TransportError> {
    if buf.len() < HEADER {
        return Err(TransportError::Truncated {
            needed: HEADER,
            got: buf.len(),
        });
    }
    let len = u32::from_be_bytes(buf[..HEADER].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(TransportError::Oversize {
            len,
            max: MAX_FRAME_BYTES,
        });
    }
    let total = HEADER + len + TRAILER;
    if buf.len() < total {
        return Err(TransportError::Truncated {
            needed: total,
            got: buf.len(),
        });
    }
    let payload = &buf[HEADER..HEADER + len];
    let expected = u32::from_be_bytes(buf[HEADER + len..total].try_into().expect("4 bytes"));
    let actual = crc32fast::hash(payload);
    if expected != actual {
        return Err(TransportError::ChecksumMismatch { expected, actual });
    }
    Ok((payload.to_vec(), total))
}

/// Decodes a buffer that must hold exactly one frame.
pub fn decode_single_frame(buf: &[u8]) -> Result<Vec<u8>, TransportError> {
    let (payload, used) = decode_frame(buf)?;
    if used != buf.len() {
        return Err(TransportError::Malformed(format!(
            "{} trailing bytes after frame",
            buf.len() - used
        )));
    }
    Ok(payload)
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize, TransportError> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(TransportError::Socket(e.to_string())),
        }
    }
    Ok(filled)
}

/// Reads one frame from a stream. `Ok(None)` on a clean end of stream
/// between frames; an end of stream inside a frame is a truncation error.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Vec<u8>>, TransportError> {
    let mut header = [0u8; HEADER];
    let got = read_full(reader, &mut header)?;
    if got == 0 {
        return Ok(None);
    }
    if got < HEADER {
        return Err(TransportError::Truncated {
            needed: HEADER,
            got,
        });
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(TransportError::Oversize {
            len,
            max: MAX_FRAME_BYTES,
        });
    }
    let mut rest = vec![0u8; len + TRAILER];
    let got = read_full(reader, &mut rest)?;
    if got < rest.len() {
        return Err(TransportError::Truncated {
            needed: HEADER + rest.len(),
            got: HEADER + got,
        });
    }
    let mut frame = header.to_vec();
    frame.extend_from_slice(&rest);
    decode_single_frame(&frame).map(Some)
}
