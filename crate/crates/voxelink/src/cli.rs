//! `voxelink run` replays a stroke log offline; `voxelink serve` starts the
//! HTTP service.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use voxelink_core::annotation::{apply_stroke, parse_stroke_log};
use voxelink_core::stack::{list_stack_dir, load_tiff_stack};
use voxelink_core::{AnnotationError, MaskVolume, Spacing, VolumeError, Window};

use crate::api::{router, AppState, ServiceConfig};
use crate::error::ServiceError;
use crate::pipeline::{export_all, ms, ExportManifest, PipelineConfig, StageTimes};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_PROCESSING: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "voxelink", version, about = "Stylus annotation of CT stacks and surface meshing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a stroke log over a stack and export mask, mesh and metadata.
    Run(RunArgs),
    /// Serve the HTTP/WebSocket API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Directory of .tif/.tiff slices, ordered by file name.
    #[arg(long)]
    pub stack: PathBuf,
    /// Stroke log, one JSON object per line.
    #[arg(long)]
    pub strokes: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Voxel spacing in mm as x,y,z.
    #[arg(long, value_parser = parse_triple, default_value = "0.3,0.3,0.5")]
    pub spacing: [f64; 3],
    /// Intensity window for 16-bit stacks as center,width.
    #[arg(long, value_parser = parse_pair)]
    pub window: Option<[f64; 2]>,
    #[arg(long, default_value_t = 0.5)]
    pub iso: f64,
    /// Fraction of triangles kept by decimation.
    #[arg(long, default_value_t = 0.25)]
    pub keep_ratio: f64,
    /// Cubes per extraction progress chunk.
    #[arg(long = "yield", default_value_t = 1000)]
    pub yield_interval: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "VOXELINK_PORT", default_value_t = 8787)]
    pub port: u16,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

/// A failed command: exit code plus the error body printed on stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "UsageError".into(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message, "exit_code": self.code }).to_string()
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        let code = match &e {
            ServiceError::Volume(_) | ServiceError::Annotation(AnnotationError::Volume(_)) => EXIT_INPUT,
            ServiceError::Annotation(_) => EXIT_SCHEMA,
            ServiceError::Extract(voxelink_core::ExtractError::InvalidConfig(_))
            | ServiceError::Mesh(voxelink_core::MeshError::InvalidConfig(_))
            | ServiceError::BadRequest(_) => EXIT_USAGE,
            _ => EXIT_PROCESSING,
        };
        Self {
            code,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

impl From<VolumeError> for CliError {
    fn from(e: VolumeError) -> Self {
        ServiceError::from(e).into()
    }
}

impl From<AnnotationError> for CliError {
    fn from(e: AnnotationError) -> Self {
        ServiceError::from(e).into()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub strokes: usize,
    pub changed_voxels: usize,
    pub manifest: ExportManifest,
    pub load_ms: f64,
    pub replay_ms: f64,
    #[serde(flatten)]
    pub stages: StageTimes,
    pub total_ms: f64,
}

impl RunReport {
    pub fn metrics_line(&self) -> String {
        format!(
            "strokes={} changed_voxels={} triangles_before={} triangles_after={} \
             load_ms={:.1} replay_ms={:.1} extract_ms={:.1} decimate_ms={:.1} export_ms={:.1} total_ms={:.1}",
            self.strokes,
            self.changed_voxels,
            self.manifest.triangles_before,
            self.manifest.triangles_after,
            self.load_ms,
            self.replay_ms,
            self.stages.extract_ms,
            self.stages.decimate_ms,
            self.stages.export_ms,
            self.total_ms,
        )
    }
}

/// Replays `args.strokes` over an empty mask of the stack and exports the
/// result into `args.out`.
pub fn run(args: &RunArgs) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut pipeline = PipelineConfig::default();
    pipeline.mc.iso_level = args.iso;
    pipeline.mc.yield_interval = args.yield_interval;
    pipeline.decimation.target_ratio = args.keep_ratio;
    pipeline.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let window = args
        .window
        .map(|[c, w]| Window::new(c, w))
        .transpose()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let spacing: Spacing = args.spacing;

    let t = Instant::now();
    let volume = load_tiff_stack(&list_stack_dir(&args.stack)?, spacing, window)?;
    let log = read_text(&args.strokes)?;
    let entries = parse_stroke_log(&log)?;
    let load_ms = ms(t);

    let t = Instant::now();
    let mut mask = MaskVolume::for_volume(&volume);
    let mut changed_voxels = 0;
    for (i, entry) in entries.iter().enumerate() {
        let at_line = |e: AnnotationError| match e {
            AnnotationError::Volume(v) => CliError::from(v),
            other => CliError {
                code: EXIT_SCHEMA,
                kind: crate::error::annotation_kind(&other).into(),
                message: format!("stroke {} (entry {}): {other}", entry.stroke_id, i + 1),
            },
        };
        let (canvas, stroke) = entry.to_stroke().map_err(at_line)?;
        canvas.check_bound(volume.dims()).map_err(at_line)?;
        changed_voxels += apply_stroke(&mut mask, &canvas, &stroke).map_err(at_line)?.len();
    }
    let replay_ms = ms(t);

    let (manifest, stages) = export_all(&volume, &mask, &pipeline, &args.out)?;
    Ok(RunReport {
        strokes: entries.len(),
        changed_voxels,
        manifest,
        load_ms,
        replay_ms,
        stages,
        total_ms: ms(start),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::from(VolumeError::io(path, e)))
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(report) => {
                println!("{}", report.metrics_line());
                0
            }
            Err(e) => {
                eprintln!("{}", e.to_json());
                e.code
            }
        },
        Command::Serve(args) => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let addr: SocketAddr = match format!("{}:{}", args.host, args.port).parse() {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("{}", CliError::usage(format!("bad listen address: {e}")).to_json());
                    return EXIT_USAGE;
                }
            };
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{}", json!({ "error": "IoError", "message": e.to_string() }));
                    return EXIT_INPUT;
                }
            };
            match runtime.block_on(serve(addr, ServiceConfig::from_env())) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("{}", json!({ "error": "IoError", "message": e.to_string() }));
                    EXIT_INPUT
                }
            }
        }
    }
}
