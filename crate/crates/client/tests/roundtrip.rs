use std::net::SocketAddr;

use tiltseg_client::{Client, ClientError};
use tiltseg_core::annotation::{AnnotatedObject, AnnotationFile};
use tiltseg_core::geometry::{ClickSequence, ExtremePoints, Point2};
use tiltseg_service::{bind, serve, AppState};

struct Running {
    _images: tempfile::TempDir,
    annotations: tempfile::TempDir,
    client: Client,
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
}

impl Drop for Running {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}

async fn start() -> Running {
    let images = tempfile::tempdir().unwrap();
    let annotations = tempfile::tempdir().unwrap();
    for (name, w, h) in [("one", 32, 24), ("two", 10, 12), ("three", 8, 8)] {
        image::GrayImage::new(w, h).save(images.path().join(format!("{name}.png"))).unwrap();
    }
    let listener = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = AppState::new(images.path(), annotations.path()).unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel();
    tokio::spawn(serve(listener, state, async {
        let _ = rx.await;
    }));
    Running {
        _images: images,
        annotations,
        client: Client::new(format!("http://{addr}/")),
        addr,
        stop: Some(tx),
    }
}

fn clicks() -> ClickSequence {
    ClickSequence {
        orientation_clicks: [Point2::new(14.0, 12.0), Point2::new(18.0, 14.0)],
        extreme_points: ExtremePoints {
            top: Point2::new(17.0, 5.0),
            bottom: Point2::new(15.0, 19.0),
            left: Point2::new(6.0, 11.0),
            right: Point2::new(26.0, 13.0),
        },
    }
}

#[tokio::test]
async fn lists_and_fetches_images() {
    let s = start().await;
    let infos = s.client.list_images().await.unwrap();
    let got: Vec<_> = infos.iter().map(|i| (i.id.as_str(), i.width, i.height)).collect();
    assert_eq!(got, vec![("one", 32, 24), ("three", 8, 8), ("two", 10, 12)]);
    let png = s.client.image("two").await.unwrap();
    let img = image::load_from_memory(&png).unwrap();
    assert_eq!((img.width(), img.height()), (10, 12));
    assert!(matches!(s.client.image("four").await, Err(ClientError::Status { status, .. }) if status == 404));
}

#[tokio::test]
async fn saves_and_reloads_annotations() {
    let s = start().await;
    assert_eq!(s.client.annotation("one").await.unwrap(), None);
    assert!(s.client.annotation("nope").await.is_err());

    let mut file = AnnotationFile::new("one", 32, 24);
    file.objects.push(AnnotatedObject::from_clicks(1, &clicks()).unwrap());
    s.client.save_annotation(&file).await.unwrap();
    assert_eq!(s.client.annotation("one").await.unwrap(), Some(file.clone()));
    assert_eq!(
        s.client.annotation_bytes("one").await.unwrap().unwrap(),
        std::fs::read(s.annotations.path().join("one.json")).unwrap()
    );

    file.objects[0].bx.as_mut().unwrap().angle += 0.01;
    match s.client.save_annotation(&file).await {
        Err(ClientError::Status { status, message }) => {
            assert_eq!(status, 400);
            assert!(message.contains("angle"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[tokio::test]
async fn derive_box_matches_core() {
    let s = start().await;
    let res = s.client.derive_box(&clicks()).await.unwrap();
    let want = tiltseg_core::box_from_clicks(&clicks()).unwrap();
    assert!(res.valid);
    let bx = res.bx.unwrap();
    assert_eq!((bx.center, bx.angle, bx.half_u, bx.half_v), (want.center, want.angle, want.half_u, want.half_v));
    assert_eq!(res.object_center, Some(want.object_center));
}

#[tokio::test]
async fn second_bind_on_a_used_port_fails() {
    let s = start().await;
    assert!(bind(s.addr).await.is_err());
}
