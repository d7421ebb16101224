//! Framed JSON protocol spoken with an embedding server.
//!
//! Each frame is a 4-byte big-endian payload length followed by that many
//! bytes of UTF-8 JSON. A session starts with `{"op":"hello"}`, answered by
//! `{"dim": k, "model": "..."}`; every later request carries a numeric `id`
//! that the matching response echoes back.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Upper bound on a single frame payload (64 MiB).
pub const MAX_FRAME_LEN: usize = 64 << 20;

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&n| n as usize <= MAX_FRAME_LEN)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)
}

pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Vec<u8>> {
    let mut header = [0u8; 4];
    r.read_exact(&mut header)?;
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(payload)
}

pub fn write_message<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    let payload = serde_json::to_vec(msg).map_err(io::Error::other)?;
    write_frame(w, &payload)
}

pub fn read_message<R: Read, T: DeserializeOwned>(r: &mut R) -> io::Result<T> {
    let payload = read_frame(r)?;
    serde_json::from_slice(&payload).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Hello,
    EmbedText,
    EmbedImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Request {
    EmbedText {
        id: u64,
        op: Op,
        text: String,
    },
    EmbedImage {
        id: u64,
        op: Op,
        png_b64: String,
        out_size: u32,
    },
    Hello {
        op: Op,
    },
}

impl Request {
    pub fn hello() -> Self {
        Self::Hello { op: Op::Hello }
    }

    pub fn text(id: u64, text: impl Into<String>) -> Self {
        Self::EmbedText {
            id,
            op: Op::EmbedText,
            text: text.into(),
        }
    }

    pub fn image(id: u64, png_b64: String, out_size: u32) -> Self {
        Self::EmbedImage {
            id,
            op: Op::EmbedImage,
            png_b64,
            out_size,
        }
    }

    pub fn id(&self) -> Option<u64> {
        match self {
            Self::EmbedText { id, .. } | Self::EmbedImage { id, .. } => Some(*id),
            Self::Hello { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloReply {
    pub dim: usize,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Embedding {
        id: u64,
        dim: usize,
        embedding: Vec<f64>,
    },
    Error {
        #[serde(default)]
        id: Option<u64>,
        error: String,
    },
}

impl Response {
    pub fn id(&self) -> Option<u64> {
        match self {
            Self::Embedding { id, .. } => Some(*id),
            Self::Error { id, .. } => *id,
        }
    }
}
