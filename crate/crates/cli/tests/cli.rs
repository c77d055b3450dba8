use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn tiltseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiltseg")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                if rel != "run_manifest.json" && !rel.starts_with("timings") {
                    out.insert(rel, std::fs::read(&path).unwrap());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn synth(dir: &Path, n: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--out", p(dir), "--n", n, "--seed", "7"];
    args.extend_from_slice(extra);
    let out = tiltseg(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn synth_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), "2", &[]);
    synth(b.path(), "2", &[]);
    let ta = tree(a.path());
    assert_eq!(ta.len(), 7);
    assert_eq!(ta, tree(b.path()));
    let m = manifest(&a.path().join("run_manifest.json"));
    assert_eq!(m["subcommand"], "synth");
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["exit_code"], 0);
    assert!(m["started_at"].is_string() && m["finished_at"].is_string());
}

#[test]
fn usage_errors_exit_two() {
    let out = tiltseg(&["synth", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tiltseg(&["synth", "--out", p(dir.path()), "--n", "0"]).status.code(), Some(2));
    assert_eq!(tiltseg(&["synth", "--out", p(dir.path()), "--n", "1", "--size", "8"]).status.code(), Some(2));
    let run = |extra: &[&str]| {
        let mut args = vec!["run", "--images", p(dir.path()), "--annotations", p(dir.path()), "--out", p(dir.path())];
        args.extend_from_slice(extra);
        tiltseg(&args).status.code()
    };
    assert_eq!(run(&["--iou-threshold", "1.01"]), Some(2));
    assert_eq!(run(&["--gs-nodes", "4"]), Some(2));
    assert_eq!(tiltseg(&["bogus"]).status.code(), Some(2));
    // nothing was written for rejected invocations
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn pipeline_end_to_end_and_eval() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth(data.path(), "4", &[]);
    let run = tiltseg(&[
        "run",
        "--images",
        p(&data.path().join("images")),
        "--annotations",
        p(&data.path().join("annotations")),
        "--out",
        p(out.path()),
        "--baseline",
        "--jobs",
        "2",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("4 of 4 images processed"), "{stdout}");
    for i in 0..4 {
        for sub in ["boxgt", "rough", "refined", "finegt"] {
            assert!(out.path().join(sub).join(format!("synth_{i:04}.png")).is_file(), "{sub} {i}");
        }
        assert!(out.path().join("report").join(format!("synth_{i:04}.json")).is_file());
    }
    let m = manifest(&out.path().join("run_manifest.json"));
    assert_eq!(m["config"]["jobs"], 2);
    assert_eq!(m["config"]["pipeline"]["matching"]["iou_threshold"], 0.5);

    let report = out.path().join("eval.json");
    let ev = tiltseg(&[
        "eval",
        "--pred",
        p(&out.path().join("refined")),
        "--gt",
        p(&data.path().join("gt")),
        "--report",
        p(&report),
    ]);
    assert!(ev.status.success(), "{}", String::from_utf8_lossy(&ev.stderr));
    let r = manifest(&report);
    let f1 = r["micro"]["f1"].as_f64().unwrap();
    // measured 0.993
    assert!(f1 >= 0.95, "aggregate F1 {f1}");
    assert!(String::from_utf8_lossy(&ev.stdout).contains("synth_0003"));
    assert!(out.path().join("eval.manifest.json").is_file());

    let same = tiltseg(&["eval", "--pred", p(&data.path().join("gt")), "--gt", p(&data.path().join("gt")), "--report", p(&report)]);
    assert!(same.status.success());
    assert_eq!(manifest(&report)["micro"]["f1"], 1.0);
}

#[test]
fn eval_rejects_empty_or_unmatched_sets() {
    let data = tempfile::tempdir().unwrap();
    synth(data.path(), "2", &[]);
    let empty = tempfile::tempdir().unwrap();
    let report = empty.path().join("r.json");
    let gt = data.path().join("gt");
    assert_eq!(tiltseg(&["eval", "--pred", p(empty.path()), "--gt", p(&gt), "--report", p(&report)]).status.code(), Some(1));
    std::fs::remove_file(data.path().join("images/synth_0001.png")).unwrap();
    let out = tiltseg(&["eval", "--pred", p(&data.path().join("images")), "--gt", p(&gt), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("synth_0001"));
    assert_eq!(manifest(&empty.path().join("r.manifest.json"))["exit_code"], 1);
}

#[test]
fn failures_stay_with_their_image() {
    let data = tempfile::tempdir().unwrap();
    synth(data.path(), "3", &["--size", "128", "--objects", "2"]);
    // rough maps for every image, one of them the wrong size
    let rough = tempfile::tempdir().unwrap();
    for i in 0..3 {
        let size = if i == 1 { 64 } else { 128 };
        let src = image::open(data.path().join(format!("gt/synth_{i:04}.png"))).unwrap().to_luma16();
        let mask = image::GrayImage::from_fn(size, size, |x, y| {
            image::Luma([if x < 128 && y < 128 && src.get_pixel(x, y)[0] > 0 { 255 } else { 0 }])
        });
        mask.save(rough.path().join(format!("synth_{i:04}.png"))).unwrap();
    }
    let out = tempfile::tempdir().unwrap();
    let args = |ann: &Path, out: &Path| {
        tiltseg(&[
            "run",
            "--images",
            p(&data.path().join("images")),
            "--annotations",
            p(ann),
            "--out",
            p(out),
            "--rough",
            p(rough.path()),
        ])
    };
    let res = args(&data.path().join("annotations"), out.path());
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("synth_0001: failed: ") && stdout.contains("dimension mismatch"), "{stdout}");
    assert!(stdout.contains("2 of 3 images processed"));
    assert!(!out.path().join("finegt/synth_0001.png").exists());
    assert!(out.path().join("finegt/synth_0002.png").exists());

    // no annotations at all: every image fails
    let none = tempfile::tempdir().unwrap();
    let out2 = tempfile::tempdir().unwrap();
    assert_eq!(args(none.path(), out2.path()).status.code(), Some(1));
    assert_eq!(manifest(&out2.path().join("run_manifest.json"))["exit_code"], 1);
}

mod serve {
    use super::*;
    use std::io::{BufRead, BufReader};
    use std::process::{Child, Stdio};

    struct Server(Child);

    impl Drop for Server {
        fn drop(&mut self) {
            let _ = self.0.kill();
            let _ = self.0.wait();
        }
    }

    fn free_port() -> u16 {
        std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
    }

    fn start(images: &Path, annotations: &Path) -> (Server, String) {
        let port = free_port().to_string();
        let mut child = Command::new(env!("CARGO_BIN_EXE_tiltseg"))
            .args(["serve", "--images", p(images), "--annotations", p(annotations), "--port", &port])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        assert!(line.starts_with("listening on http://"), "{line}");
        (Server(child), line.trim().trim_start_matches("listening on ").to_string())
    }

    #[test]
    fn remote_round_trip_through_the_service() {
        let data = tempfile::tempdir().unwrap();
        synth(data.path(), "3", &["--size", "128", "--objects", "2"]);
        let anns = tempfile::tempdir().unwrap();
        let (_server, url) = start(&data.path().join("images"), anns.path());
        assert!(anns.path().join("run_manifest.json").is_file());

        let images = tiltseg(&["remote", "--url", &url, "images"]);
        assert!(images.status.success());
        assert_eq!(
            String::from_utf8_lossy(&images.stdout),
            "synth_0000\t128\t128\nsynth_0001\t128\t128\nsynth_0002\t128\t128\n"
        );

        let file = data.path().join("annotations/synth_0001.json");
        assert!(tiltseg(&["remote", "--url", &url, "put", p(&file)]).status.success());
        let got = tiltseg(&["remote", "--url", &url, "get", "synth_0001"]);
        assert_eq!(got.stdout, std::fs::read(&file).unwrap());
        assert_eq!(tiltseg(&["remote", "--url", &url, "get", "synth_0002"]).status.code(), Some(1));

        let clicks = data.path().join("clicks.json");
        let ann = manifest(&file);
        let obj = &ann["objects"][0];
        let body = serde_json::json!({"orientation_clicks": obj["orientation_clicks"], "extreme_points": obj["extreme_points"]});
        std::fs::write(&clicks, body.to_string()).unwrap();
        let derived = tiltseg(&["remote", "--url", &url, "derive-box", p(&clicks)]);
        let v: serde_json::Value = serde_json::from_slice(&derived.stdout).unwrap();
        assert_eq!(v["valid"], true);
        assert_eq!(v["box"], obj["box"]);

        let png = data.path().join("dl.png");
        assert!(tiltseg(&["remote", "--url", &url, "image", "synth_0002", "--out", p(&png)]).status.success());
        assert_eq!(std::fs::read(&png).unwrap(), std::fs::read(data.path().join("images/synth_0002.png")).unwrap());
    }

    #[test]
    fn busy_port_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = taken.local_addr().unwrap().port().to_string();
        let out = tiltseg(&["serve", "--images", p(dir.path()), "--annotations", p(dir.path()), "--port", &port]);
        assert_eq!(out.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains("cannot bind"));
        let missing = dir.path().join("missing");
        let out = tiltseg(&["serve", "--images", p(&missing), "--annotations", p(dir.path()), "--port", &port]);
        assert_eq!(out.status.code(), Some(2));
    }

    #[test]
    fn unreachable_service_exits_one() {
        let port = free_port();
        let out = tiltseg(&["remote", "--url", &format!("http://127.0.0.1:{port}"), "images"]);
        assert_eq!(out.status.code(), Some(1));
    }
}
