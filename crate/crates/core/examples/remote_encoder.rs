// Talk to an embedding server over the framed JSON protocol. A tiny
// in-process server stands in for the real one: text embeds to a hashed
// vector, images to their mean colour.
//
//     cargo run --example remote_encoder

use std::io::{BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::thread;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use lgca::embedding::wire::{self, HelloReply, Request, Response};
use lgca::rng::{fnv1a64, Stream};
use lgca::{EmbedRequest, Encoder, ImageFrame, Region, RemoteEncoder, RemoteOptions};

const DIM: usize = 4;

fn respond(req: Request) -> Option<Response> {
    match req {
        Request::Hello { .. } => None,
        Request::EmbedText { id, text, .. } => {
            let mut rng = Stream::new(fnv1a64(&text));
            let embedding = (0..DIM).map(|_| rng.unit() - 0.5).collect();
            Some(Response::Embedding { id, dim: DIM, embedding })
        }
        Request::EmbedImage { id, png_b64, .. } => {
            let Ok(png) = BASE64.decode(png_b64) else {
                return Some(Response::Error { id: Some(id), error: "bad base64".into() });
            };
            let rgb = image::load_from_memory(&png).expect("valid png").to_rgb8();
            let n = f64::from(rgb.width() * rgb.height());
            let mut embedding = vec![0.0, 0.0, 0.0, 0.1];
            for p in rgb.pixels() {
                for (acc, &ch) in embedding.iter_mut().zip(&p.0) {
                    *acc += f64::from(ch) / 255.0 / n;
                }
            }
            Some(Response::Embedding { id, dim: DIM, embedding })
        }
    }
}

fn serve(listener: TcpListener) {
    for stream in listener.incoming().flatten() {
        thread::spawn(move || {
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut writer = BufWriter::new(stream);
            while let Ok(req) = wire::read_message::<_, Request>(&mut reader) {
                let sent = match respond(req) {
                    Some(resp) => wire::write_message(&mut writer, &resp),
                    None => wire::write_message(&mut writer, &HelloReply { dim: DIM, model: "mean-colour".into() }),
                };
                if sent.and_then(|_| writer.flush()).is_err() {
                    break;
                }
            }
        });
    }
}

fn main() -> lgca::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    thread::spawn(move || serve(listener));

    let encoder = RemoteEncoder::connect(&addr, RemoteOptions { out_size: 16, ..RemoteOptions::default() })?;
    println!("connected to {addr}: model '{}', dim {}", encoder.model(), encoder.dim());

    let mut img = image::RgbImage::new(64, 32);
    for (x, _, p) in img.enumerate_pixels_mut() {
        *p = if x < 32 { image::Rgb([200, 30, 30]) } else { image::Rgb([30, 30, 200]) };
    }
    let image = ImageFrame::from_rgb("flag", img);
    let items = [
        EmbedRequest::Text("a red square"),
        EmbedRequest::Patch { image: &image, region: Region::new(0, 0, 32) },
        EmbedRequest::Patch { image: &image, region: Region::new(32, 0, 32) },
        EmbedRequest::Image(&image),
    ];
    for (item, emb) in items.iter().zip(encoder.embed_batch(&items)?) {
        let what = match item {
            EmbedRequest::Text(t) => format!("text '{t}'"),
            EmbedRequest::Patch { region, .. } => format!("patch {region:?}"),
            EmbedRequest::Image(_) => "whole image".into(),
        };
        let v: Vec<String> = emb.as_slice().iter().map(|x| format!("{x:+.3}")).collect();
        println!("{what:<40} [{}]", v.join(", "));
    }
    Ok(())
}
