#[path = "common/stub.rs"]
mod stub;

use std::net::TcpListener;
use std::sync::atomic::Ordering;
use std::thread;

use lgca::{EmbedRequest, EmbeddingVector, Encoder, Error, ImageFrame, Region, RemoteEncoder, RemoteOptions};
use stub::{spawn, text_vector, StubConfig};

fn connect(addr: &str) -> lgca::Result<RemoteEncoder> {
    RemoteEncoder::connect(addr, RemoteOptions { out_size: 32, ..RemoteOptions::default() })
}

fn two_tone() -> ImageFrame {
    // left half red, right half blue
    let mut img = image::RgbImage::new(80, 40);
    for (x, _, p) in img.enumerate_pixels_mut() {
        *p = if x < 40 { image::Rgb([255, 0, 0]) } else { image::Rgb([0, 0, 255]) };
    }
    ImageFrame::from_rgb("two_tone", img)
}

#[test]
fn handshake_reports_dim_and_model() {
    let stub = spawn(StubConfig::default());
    let enc = connect(&stub.addr).unwrap();
    assert_eq!(enc.dim(), 6);
    assert_eq!(enc.model(), "stub");
}

#[test]
fn text_embeddings_are_normalized_server_vectors() {
    let stub = spawn(StubConfig::default());
    let enc = connect(&stub.addr).unwrap();
    let got = enc.embed_text("a white swan").unwrap();
    let want = EmbeddingVector::normalized(text_vector("a white swan", 6)).unwrap();
    assert_eq!(got, want);
}

#[test]
fn long_batches_keep_order_across_pipeline_windows() {
    let stub = spawn(StubConfig::default());
    let enc = connect(&stub.addr).unwrap();
    let texts: Vec<String> = (0..40).map(|i| format!("description {i}")).collect();
    let items: Vec<_> = texts.iter().map(|t| EmbedRequest::Text(t)).collect();
    let got = enc.embed_batch(&items).unwrap();
    for (t, g) in texts.iter().zip(&got) {
        assert_eq!(*g, enc.embed_text(t).unwrap());
    }
}

#[test]
fn patches_are_resampled_before_sending() {
    let stub = spawn(StubConfig::default());
    let enc = connect(&stub.addr).unwrap();
    let img = two_tone();
    let red = enc.embed_image_patch(&img, Region::new(0, 0, 40)).unwrap();
    let blue = enc.embed_image_patch(&img, Region::new(40, 0, 40)).unwrap();
    assert!(red.as_slice()[0] > 0.8 && red.as_slice()[2] == 0.0);
    assert!(blue.as_slice()[2] > 0.8 && blue.as_slice()[0] == 0.0);
    enc.embed_image(&img).unwrap();
    let seen = stub.images.lock().unwrap().clone();
    assert_eq!(seen[0], (32, 32, 32));
    assert_eq!(seen[1], (32, 32, 32));
    // whole frames go out as-is; the server handles its own resizing
    assert_eq!(seen[2], (80, 40, 32));
}

#[test]
fn wrong_dimension_is_rejected() {
    let stub = spawn(StubConfig { reply_dim: Some(5), ..StubConfig::default() });
    let enc = connect(&stub.addr).unwrap();
    let err = enc.embed_text("swan").unwrap_err();
    assert!(matches!(err.root(), Error::DimMismatch { expected: 6, got: 5 }), "{err}");
}

#[test]
fn refused_connection_is_unavailable() {
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().to_string()
    };
    let err = connect(&addr).unwrap_err();
    assert!(matches!(err, Error::EncoderUnavailable(_)), "{err}");
}

#[test]
fn server_error_response_surfaces_as_protocol_error() {
    let stub = spawn(StubConfig { fail_text: Some("bad".into()), ..StubConfig::default() });
    let enc = connect(&stub.addr).unwrap();
    let items = [EmbedRequest::Text("good"), EmbedRequest::Text("bad")];
    match enc.embed_batch(&items).unwrap_err() {
        Error::Batch { index, source } => {
            assert_eq!(index, 1);
            assert!(matches!(*source, Error::Protocol(_)));
        }
        other => panic!("unexpected {other}"),
    }
    // the connection stays usable after an error reply
    assert!(enc.embed_text("good").is_ok());
}

#[test]
fn server_hanging_up_is_unavailable() {
    let stub = spawn(StubConfig { hang_up_after: Some(1), ..StubConfig::default() });
    let enc = connect(&stub.addr).unwrap();
    enc.embed_text("one").unwrap();
    let err = enc.embed_text("two").unwrap_err();
    assert!(matches!(err.root(), Error::EncoderUnavailable(_)), "{err}");
}

#[test]
fn eight_concurrent_callers_share_one_client() {
    let stub = spawn(StubConfig::default());
    let enc = connect(&stub.addr).unwrap();
    thread::scope(|s| {
        for t in 0..8 {
            let enc = &enc;
            s.spawn(move || {
                let texts: Vec<String> = (0..25).map(|i| format!("thread {t} text {i}")).collect();
                let items: Vec<_> = texts.iter().map(|x| EmbedRequest::Text(x)).collect();
                let got = enc.embed_batch(&items).unwrap();
                for (x, g) in texts.iter().zip(got) {
                    assert_eq!(g, EmbeddingVector::normalized(text_vector(x, 6)).unwrap());
                }
            });
        }
    });
    let opened = stub.connections.load(Ordering::SeqCst);
    assert!((1..=9).contains(&opened), "{opened} connections");
}
