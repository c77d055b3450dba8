mod args;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use tiltseg_client::Client;
use tiltseg_core::annotation::AnnotationFile;
use tiltseg_core::boxgt::BoxGtConfig;
use tiltseg_core::geometry::ClickSequence;
use tiltseg_core::graphsearch::GsConfig;
use tiltseg_core::pipeline::{run_dataset, MatchConfig, PipelineConfig};
use tiltseg_core::report::{evaluate_dirs, format_table, EvalOptions};
use tiltseg_core::segmenter::{BaselineSegmenter, FileSegmenter, RoughSegmenter};
use tiltseg_core::synth::{write_dataset, SynthConfig};
use tracing::Level;

use args::{Cli, Command, EvalArgs, RemoteAction, RemoteArgs, RunArgs, ServeArgs, SynthArgs};
use manifest::RunManifest;

enum Failure {
    /// Bad flags or configuration; exit 2.
    Usage(String),
    /// Anything that went wrong while doing the work; exit 1.
    Runtime(String),
}

type Outcome = Result<(), Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => Level::WARN,
        1 => Level::INFO,
        _ => Level::DEBUG,
    };
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(level).init();

    let manifest = cli.manifest.clone();
    let result = match &cli.command {
        Command::Synth(a) => synth(a, manifest.or_else(|| Some(a.out.join("run_manifest.json")))),
        Command::Run(a) => run(a, manifest.or_else(|| Some(a.out.join("run_manifest.json")))),
        Command::Eval(a) => eval(a, manifest.or_else(|| Some(a.report.with_extension("manifest.json")))),
        Command::Serve(a) => serve(a, manifest.or_else(|| Some(a.annotations.join("run_manifest.json")))),
        Command::Remote(a) => remote(a, manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

/// Writes the manifest, runs `body`, then records the outcome in it.
fn with_manifest(name: &str, flags: &impl serde::Serialize, path: Option<PathBuf>, body: impl FnOnce() -> Outcome) -> Outcome {
    let mut m = RunManifest::new(name, flags, path);
    m.write()
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", m.path().map_or(String::new(), |p| p.display().to_string()))))?;
    let result = body();
    let code = match &result {
        Ok(()) => 0,
        Err(Failure::Usage(_)) => 2,
        Err(Failure::Runtime(_)) => 1,
    };
    if let Err(e) = m.finish(code) {
        tracing::warn!("cannot update the run manifest: {e}");
    }
    result
}

fn synth(a: &SynthArgs, manifest: Option<PathBuf>) -> Outcome {
    let config = SynthConfig {
        image_size: a.size,
        n_objects: a.objects,
        seed: a.seed,
        click_jitter: a.jitter.unwrap_or(0.0),
        ..Default::default()
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    with_manifest("synth", a, manifest, || {
        let m = write_dataset(&a.out, &config, a.n as usize).map_err(runtime)?;
        println!("wrote {} images to {}", m.images.len(), a.out.display());
        Ok(())
    })
}

fn pipeline_config(a: &RunArgs) -> Result<PipelineConfig, Failure> {
    let config = PipelineConfig {
        boxgt: BoxGtConfig {
            k: a.k,
            spoke_thickness: a.spoke_thickness,
        },
        matching: MatchConfig {
            iou_threshold: a.iou_threshold,
        },
        gs: GsConfig {
            n_columns: a.gs_columns,
            nodes_per_column: a.gs_nodes,
            smoothness_delta: a.gs_delta,
            column_half_length: a.gs_half_length,
            gradient_sigma: a.gs_sigma,
            ..Default::default()
        },
        binarize_threshold: a.binarize_threshold,
        min_component_area: a.min_area,
        debug_dump: a.debug_dump,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn require_dir(flag: &str, dir: &Path) -> Outcome {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{flag} {} is not a directory", dir.display())))
    }
}

fn run(a: &RunArgs, manifest: Option<PathBuf>) -> Outcome {
    let config = pipeline_config(a)?;
    require_dir("--images", &a.images)?;
    require_dir("--annotations", &a.annotations)?;
    if let Some(r) = &a.rough {
        require_dir("--rough", r)?;
    }
    let jobs = a
        .jobs
        .map(|j| j as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    #[derive(serde::Serialize)]
    struct Flags<'a> {
        flags: &'a RunArgs,
        pipeline: &'a PipelineConfig,
        jobs: usize,
    }
    let flags = Flags { flags: a, pipeline: &config, jobs };
    with_manifest("run", &flags, manifest, || {
        let provider: Box<dyn RoughSegmenter> = match &a.rough {
            Some(dir) => Box::new(FileSegmenter::new(dir)),
            None => Box::new(BaselineSegmenter::default()),
        };
        let summary = run_dataset(&a.images, &a.annotations, &a.out, provider.as_ref(), &config, jobs).map_err(runtime)?;
        if summary.images.is_empty() {
            return Err(Failure::Runtime(format!("no images in {}", a.images.display())));
        }
        for o in &summary.images {
            match (&o.report, &o.error) {
                (Some(r), _) => println!("{}", r.summary_line()),
                (None, Some(e)) => println!("{}: failed: {e}", o.id),
                (None, None) => {}
            }
        }
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        std::fs::write(a.out.join("summary.json"), text).map_err(runtime)?;
        println!("{} of {} images processed", summary.images.len() - summary.n_failed(), summary.images.len());
        if summary.all_failed() {
            return Err(Failure::Runtime("every image failed".into()));
        }
        Ok(())
    })
}

fn eval(a: &EvalArgs, manifest: Option<PathBuf>) -> Outcome {
    require_dir("--pred", &a.pred)?;
    require_dir("--gt", &a.gt)?;
    let options = EvalOptions {
        gt_ignore: a.gt_ignore,
        pred_ignore: a.pred_ignore,
    };
    with_manifest("eval", a, manifest, || {
        let report = evaluate_dirs(&a.pred, &a.gt, &options).map_err(runtime)?;
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        std::fs::write(&a.report, text).map_err(|e| Failure::Runtime(format!("{}: {e}", a.report.display())))?;
        print!("{}", format_table(&report));
        Ok(())
    })
}

fn tokio_runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)
}

fn serve(a: &ServeArgs, manifest: Option<PathBuf>) -> Outcome {
    let state = tiltseg_service::AppState::new(&a.images, &a.annotations).map_err(|e| Failure::Usage(e.to_string()))?;
    with_manifest("serve", a, manifest, || {
        tokio_runtime()?.block_on(async {
            let listener = tiltseg_service::bind((a.host, a.port).into()).await.map_err(runtime)?;
            let addr = listener.local_addr().map_err(runtime)?;
            println!("listening on http://{addr}");
            let shutdown = async {
                let _ = tokio::signal::ctrl_c().await;
            };
            tiltseg_service::serve(listener, state, shutdown).await.map_err(runtime)
        })
    })
}

fn remote(a: &RemoteArgs, manifest: Option<PathBuf>) -> Outcome {
    let client = Client::new(&a.url);
    let read = |p: &Path| std::fs::read(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())));
    with_manifest("remote", a, manifest, || {
        tokio_runtime()?.block_on(async {
            match &a.action {
                RemoteAction::Images => {
                    for i in client.list_images().await.map_err(runtime)? {
                        println!("{}\t{}\t{}", i.id, i.width, i.height);
                    }
                }
                RemoteAction::Image { id, out } => {
                    let png = client.image(id).await.map_err(runtime)?;
                    std::fs::write(out, png).map_err(runtime)?;
                }
                RemoteAction::Get { id } => match client.annotation_bytes(id).await.map_err(runtime)? {
                    Some(b) => print!("{}", String::from_utf8_lossy(&b)),
                    None => return Err(Failure::Runtime(format!("no annotation for `{id}`"))),
                },
                RemoteAction::Put { file } => {
                    let bytes = read(file)?;
                    let parsed = AnnotationFile::from_json_bytes(&bytes, file).map_err(|e| Failure::Usage(e.to_string()))?;
                    client.save_annotation_bytes(&parsed.image, bytes).await.map_err(runtime)?;
                    println!("saved {} objects for {}", parsed.objects.len(), parsed.image);
                }
                RemoteAction::DeriveBox { file } => {
                    let clicks: ClickSequence = serde_json::from_slice(&read(file)?)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
                    let res = client.derive_box(&clicks).await.map_err(runtime)?;
                    println!("{}", serde_json::to_string_pretty(&res).expect("response serializes"));
                }
            }
            Ok(())
        })
    })
}
