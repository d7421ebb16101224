//! A scripted embedding server for exercising the remote client.

use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use lgca::embedding::wire::{self, HelloReply, Request, Response};
use lgca::rng::{fnv1a64, Stream};

#[derive(Debug, Clone)]
pub struct StubConfig {
    pub dim: usize,
    /// Dim reported in embedding responses, if different from the hello.
    pub reply_dim: Option<usize>,
    /// Texts answered with an error response.
    pub fail_text: Option<String>,
    /// Close the connection after this many embed requests.
    pub hang_up_after: Option<usize>,
}

impl Default for StubConfig {
    fn default() -> Self {
        Self {
            dim: 6,
            reply_dim: None,
            fail_text: None,
            hang_up_after: None,
        }
    }
}

pub struct Stub {
    pub addr: String,
    pub connections: Arc<AtomicUsize>,
    pub images: Arc<std::sync::Mutex<Vec<(u32, u32, u32)>>>,
}

/// Deterministic unnormalized vector for a text.
pub fn text_vector(text: &str, dim: usize) -> Vec<f64> {
    let mut rng = Stream::new(fnv1a64(text));
    (0..dim).map(|_| 2.0 * rng.unit() - 1.0).collect()
}

/// Mean colour in the first three components, then a constant.
pub fn image_vector(rgb: &image::RgbImage, dim: usize) -> Vec<f64> {
    let n = f64::from(rgb.width() * rgb.height());
    let mut v = vec![0.0; dim];
    for p in rgb.pixels() {
        for (acc, &ch) in v.iter_mut().zip(&p.0) {
            *acc += f64::from(ch) / 255.0 / n;
        }
    }
    v[3] = 0.5;
    v
}

fn serve(stream: TcpStream, cfg: StubConfig, images: Arc<std::sync::Mutex<Vec<(u32, u32, u32)>>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = BufWriter::new(stream);
    let mut served = 0;
    while let Ok(req) = wire::read_message::<_, Request>(&mut reader) {
        let reply_dim = cfg.reply_dim.unwrap_or(cfg.dim);
        let resp = match req {
            Request::Hello { .. } => {
                wire::write_message(&mut writer, &HelloReply { dim: cfg.dim, model: "stub".into() }).unwrap();
                writer.flush().unwrap();
                continue;
            }
            Request::EmbedText { id, text, .. } => {
                if cfg.fail_text.as_deref() == Some(text.as_str()) {
                    Response::Error { id: Some(id), error: "refused".into() }
                } else {
                    Response::Embedding { id, dim: reply_dim, embedding: text_vector(&text, reply_dim) }
                }
            }
            Request::EmbedImage { id, png_b64, out_size, .. } => {
                let bytes = BASE64.decode(png_b64).unwrap();
                let rgb = image::load_from_memory(&bytes).unwrap().to_rgb8();
                images.lock().unwrap().push((rgb.width(), rgb.height(), out_size));
                Response::Embedding { id, dim: reply_dim, embedding: image_vector(&rgb, reply_dim) }
            }
        };
        served += 1;
        if cfg.hang_up_after.is_some_and(|n| served > n) {
            return;
        }
        wire::write_message(&mut writer, &resp).unwrap();
        writer.flush().unwrap();
    }
}

pub fn spawn(cfg: StubConfig) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let connections = Arc::new(AtomicUsize::new(0));
    let images = Arc::new(std::sync::Mutex::new(Vec::new()));
    let (count, seen) = (connections.clone(), images.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            count.fetch_add(1, Ordering::SeqCst);
            let (cfg, seen) = (cfg.clone(), seen.clone());
            thread::spawn(move || serve(stream, cfg, seen));
        }
    });
    Stub { addr, connections, images }
}
