use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Cursor, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;

use crate::embedding::wire::{self, HelloReply, Request, Response};
use crate::embedding::{EmbedRequest, EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::geometry::{extract_patch, ImageFrame, Region, DEFAULT_PATCH_SIZE};

#[derive(Debug, Clone)]
pub struct RemoteOptions {
    pub connect_timeout: Duration,
    pub io_timeout: Duration,
    /// Requests written before reading replies back.
    pub pipeline_depth: usize,
    pub out_size: u32,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self {
            connect_timeout: Duration::from_secs(5),
            io_timeout: Duration::from_secs(60),
            pipeline_depth: 16,
            out_size: DEFAULT_PATCH_SIZE,
        }
    }
}

#[derive(Debug)]
struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

fn unavailable(addr: &str, e: io::Error) -> Error {
    Error::EncoderUnavailable(format!("{addr}: {e}"))
}

fn io_error(addr: &str, e: io::Error) -> Error {
    match e.kind() {
        io::ErrorKind::InvalidData => Error::Protocol(format!("{addr}: {e}")),
        _ => unavailable(addr, e),
    }
}

/// Client for an embedding server over the framed JSON protocol.
///
/// Idle connections are pooled; concurrent callers each check out their own
/// connection, so requests from different threads never share a stream.
#[derive(Debug)]
pub struct RemoteEncoder {
    addr: String,
    resolved: Vec<SocketAddr>,
    options: RemoteOptions,
    dim: usize,
    model: String,
    next_id: AtomicU64,
    idle: Mutex<Vec<Connection>>,
}

impl RemoteEncoder {
    /// Connects and performs the hello handshake.
    pub fn connect(addr: &str, options: RemoteOptions) -> Result<Self> {
        let resolved: Vec<SocketAddr> = addr
            .to_socket_addrs()
            .map_err(|e| unavailable(addr, e))?
            .collect();
        let mut encoder = Self {
            addr: addr.to_string(),
            resolved,
            options,
            dim: 0,
            model: String::new(),
            next_id: AtomicU64::new(1),
            idle: Mutex::new(Vec::new()),
        };
        let (conn, hello) = encoder.open()?;
        if hello.dim < 2 {
            return Err(Error::Protocol(format!("server reported dim {}", hello.dim)));
        }
        encoder.dim = hello.dim;
        encoder.model = hello.model;
        encoder.checkin(conn);
        Ok(encoder)
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn open(&self) -> Result<(Connection, HelloReply)> {
        let mut last = io::Error::new(io::ErrorKind::NotFound, "address resolved to nothing");
        for sa in &self.resolved {
            match TcpStream::connect_timeout(sa, self.options.connect_timeout) {
                Ok(stream) => {
                    let setup = || -> io::Result<(Connection, HelloReply)> {
                        stream.set_nodelay(true)?;
                        stream.set_read_timeout(Some(self.options.io_timeout))?;
                        stream.set_write_timeout(Some(self.options.io_timeout))?;
                        let mut conn = Connection {
                            reader: BufReader::new(stream.try_clone()?),
                            writer: BufWriter::new(stream),
                        };
                        wire::write_message(&mut conn.writer, &Request::hello())?;
                        conn.writer.flush()?;
                        let hello: HelloReply = wire::read_message(&mut conn.reader)?;
                        Ok((conn, hello))
                    };
                    return setup().map_err(|e| io_error(&self.addr, e));
                }
                Err(e) => last = e,
            }
        }
        Err(unavailable(&self.addr, last))
    }

    fn checkout(&self) -> Result<Connection> {
        let pooled = self.idle.lock().expect("pool lock").pop();
        match pooled {
            Some(conn) => Ok(conn),
            None => {
                let (conn, hello) = self.open()?;
                if hello.dim != self.dim {
                    return Err(Error::DimMismatch {
                        expected: self.dim,
                        got: hello.dim,
                    });
                }
                Ok(conn)
            }
        }
    }

    fn checkin(&self, conn: Connection) {
        self.idle.lock().expect("pool lock").push(conn);
    }

    fn encode_png(&self, image: &ImageFrame) -> Result<String> {
        let mut png = Vec::new();
        image
            .to_rgb()
            .write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
            .map_err(|e| Error::Protocol(format!("png encoding failed: {e}")))?;
        Ok(BASE64.encode(png))
    }

    fn to_wire(&self, item: &EmbedRequest<'_>) -> Result<Request> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let out_size = self.options.out_size;
        Ok(match *item {
            EmbedRequest::Text(text) => {
                if text.trim().is_empty() {
                    return Err(Error::EmptyInput("text is empty"));
                }
                Request::text(id, text)
            }
            EmbedRequest::Image(image) => Request::image(id, self.encode_png(image)?, out_size),
            EmbedRequest::Patch { image, region } => {
                let patch = extract_patch(image, region, out_size)?;
                Request::image(id, self.encode_png(&patch)?, out_size)
            }
        })
    }

    fn decode(&self, response: Response) -> Result<EmbeddingVector> {
        match response {
            Response::Embedding { dim, embedding, .. } => {
                if dim != self.dim || embedding.len() != self.dim {
                    return Err(Error::DimMismatch {
                        expected: self.dim,
                        got: if dim != self.dim { dim } else { embedding.len() },
                    });
                }
                // servers return near-unit vectors; cosine math needs exact ones
                EmbeddingVector::normalized(embedding)
            }
            Response::Error { error, .. } => Err(Error::Protocol(format!("server error: {error}"))),
        }
    }

    /// Writes up to `pipeline_depth` requests, then collects their replies.
    fn exchange(&self, conn: &mut Connection, requests: &[Request]) -> Result<Vec<Response>> {
        let mut out = Vec::with_capacity(requests.len());
        for window in requests.chunks(self.options.pipeline_depth.max(1)) {
            for req in window {
                wire::write_message(&mut conn.writer, req).map_err(|e| io_error(&self.addr, e))?;
            }
            conn.writer.flush().map_err(|e| io_error(&self.addr, e))?;
            let mut by_id = HashMap::with_capacity(window.len());
            for _ in window {
                let resp: Response =
                    wire::read_message(&mut conn.reader).map_err(|e| io_error(&self.addr, e))?;
                match resp.id() {
                    Some(id) => {
                        by_id.insert(id, resp);
                    }
                    None => {
                        return Err(Error::Protocol(format!(
                            "response without id: {resp:?}"
                        )))
                    }
                }
            }
            for req in window {
                let id = req.id().expect("embed requests carry ids");
                let resp = by_id
                    .remove(&id)
                    .ok_or_else(|| Error::Protocol(format!("no response for request {id}")))?;
                out.push(resp);
            }
        }
        Ok(out)
    }
}

impl Encoder for RemoteEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image: &ImageFrame) -> Result<EmbeddingVector> {
        self.embed_one(&EmbedRequest::Image(image))
    }

    fn embed_image_patch(&self, image: &ImageFrame, region: Region) -> Result<EmbeddingVector> {
        self.embed_one(&EmbedRequest::Patch { image, region })
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.embed_one(&EmbedRequest::Text(text))
    }

    fn embed_one(&self, item: &EmbedRequest<'_>) -> Result<EmbeddingVector> {
        let mut v = self.embed_batch(std::slice::from_ref(item)).map_err(|e| match e {
            Error::Batch { source, .. } => *source,
            other => other,
        })?;
        Ok(v.pop().expect("one response per request"))
    }

    fn embed_batch(&self, items: &[EmbedRequest<'_>]) -> Result<Vec<EmbeddingVector>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let requests = items
            .iter()
            .enumerate()
            .map(|(index, item)| {
                self.to_wire(item).map_err(|e| Error::Batch {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut conn = self.checkout()?;
        let responses = self.exchange(&mut conn, &requests)?;
        // the stream is in a clean state once every reply has been read
        self.checkin(conn);

        responses
            .into_iter()
            .enumerate()
            .map(|(index, resp)| {
                self.decode(resp).map_err(|e| Error::Batch {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}
