use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use rowstitch::georef::{check_bounds, compare_control_points, georeference_report, read_control_points};
use rowstitch::model::PipelineConfig;
use rowstitch::pipeline::{load_folder, stitch_images, write_outputs, StitchOptions};
use rowstitch::synth::{generate_scene, render_sequence, write_dataset, Jitter, Texture, TrajectorySpec};
use rowstitch::Error;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NO_IMAGES: u8 = 3;
const EXIT_CHAIN_BREAK: u8 = 4;
const EXIT_ASSEMBLY: u8 = 5;

#[derive(Parser)]
#[command(name = "rowstitch", version, about = "Stitch ground-level crop-row image sequences")]
struct Cli {
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextureArg {
    Blobs,
    Checker,
    Noise,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stitch an ordered image folder into one row mosaic.
    Stitch {
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `id latitude longitude` sidecar (defaults to <dir>/geo.txt).
        #[arg(long)]
        geo: Option<PathBuf>,
        /// Directory of precomputed `<a>__<b>.txt` match files.
        #[arg(long)]
        matches: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Fail on the first chain break instead of stitching the prefix.
        #[arg(long)]
        strict: bool,
        /// Write per-batch canvases and transforms under <out>/debug.
        #[arg(long)]
        debug_dumps: bool,
    },
    /// Render a synthetic row dataset with ground truth.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long, default_value_t = 160.0)]
        step: f64,
        /// lateral_px,step_px,roll_deg,scale sigmas.
        #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [3.0, 10.0, 0.5, 0.005])]
        jitter: Vec<f64>,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(long, value_enum, default_value = "blobs")]
        texture: TextureArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regression reports for control points on a mosaic.
    Evaluate {
        #[arg(long)]
        mosaic: PathBuf,
        /// `label x y [lat lon]` per line.
        #[arg(long)]
        points: PathBuf,
        /// Second run's points: compare the two runs instead of fitting geo data.
        #[arg(long)]
        points_b: Option<PathBuf>,
        /// Row length in metres; converts pixel errors to centimetres.
        #[arg(long)]
        row_length_m: Option<f64>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::ConfigParse(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
        Error::ChainBreak(_) => EXIT_CHAIN_BREAK,
        Error::Assembly { .. } | Error::EmptyOverlap | Error::EmptyMask | Error::DegenerateSlice(_) => EXIT_ASSEMBLY,
        _ => EXIT_IO,
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn run_stitch(
    dir: &Path,
    config: Option<&Path>,
    geo: Option<&Path>,
    matches: Option<PathBuf>,
    out: &Path,
    strict: bool,
    debug_dumps: bool,
) -> ExitCode {
    let cfg = match config.map(PipelineConfig::from_file).unwrap_or_else(|| Ok(PipelineConfig::default())) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let images = match load_folder(dir, geo) {
        Ok(v) => v,
        Err(e) => return fail(exit_code(&e), e),
    };
    if images.len() < 2 {
        return fail(
            EXIT_NO_IMAGES,
            format!("{} holds {} image(s); at least 2 are needed", dir.display(), images.len()),
        );
    }
    let opts = StitchOptions {
        strict,
        external_matches: matches,
        debug_dumps: debug_dumps.then(|| out.join("debug")),
    };
    let res = stitch_images(&images, &cfg, &opts).and_then(|o| write_outputs(out, &o).map(|_| o));
    match res {
        Ok(o) => {
            info!("wrote {}", out.join("mosaic.png").display());
            println!(
                "mosaic {}x{}, {} used, {} skipped, {} batches{}",
                o.mosaic.width(),
                o.mosaic.height(),
                o.used.len(),
                o.skipped.len(),
                o.batch_count,
                if o.gap.is_some() { ", chain break (see gaps.txt)" } else { "" }
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(exit_code(&e), e),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_synth(
    seed: u64,
    frames: usize,
    step: f64,
    jitter: &[f64],
    width: u32,
    height: u32,
    texture: TextureArg,
    out: &Path,
) -> ExitCode {
    let traj = TrajectorySpec {
        seed,
        n_frames: frames,
        step_px: step,
        jitter: Jitter {
            lateral_sigma_px: jitter[0],
            step_sigma_px: jitter[1],
            roll_sigma_deg: jitter[2],
            scale_sigma: jitter[3],
        },
        frame_w: width,
        frame_h: height,
    };
    let texture = match texture {
        TextureArg::Blobs => Texture::BlobField,
        TextureArg::Checker => Texture::Checker { period: 24 },
        TextureArg::Noise => Texture::NoiseOctaves { octaves: 4 },
    };
    let res = traj
        .validate()
        .and_then(|_| generate_scene(&traj.scene_for(seed, texture)))
        .and_then(|scene| render_sequence(&scene, &traj))
        .and_then(|seq| write_dataset(out, &seq).map(|_| seq.frames.len()));
    match res {
        Ok(n) => {
            println!("wrote {n} frames to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(exit_code(&e), e),
    }
}

fn run_evaluate(mosaic: &Path, points: &Path, points_b: Option<&Path>, row_length_m: Option<f64>, out: Option<&Path>) -> ExitCode {
    let res = (|| -> rowstitch::Result<String> {
        let (w, h) = image::image_dimensions(mosaic)?;
        let a = read_control_points(points)?;
        let report = match points_b {
            Some(pb) => {
                let b = read_control_points(pb)?;
                check_bounds(&b, w, h)?;
                let ppm = match row_length_m {
                    Some(l) if l > 0.0 => Some(w as f64 / l),
                    Some(l) => return Err(Error::InvalidParameter(format!("row length {l} m must be positive"))),
                    None => None,
                };
                compare_control_points(&a, &b, ppm)?
            }
            None => {
                check_bounds(&a, w, h)?;
                georeference_report(&a, true)?
            }
        };
        Ok(report.to_string())
    })();
    match res {
        Ok(text) => {
            print!("{text}");
            if let Some(p) = out {
                if let Err(e) = fs::write(p, &text) {
                    return fail(EXIT_IO, e);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(exit_code(&e), e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            return fail(EXIT_CONFIG, e);
        }
    }
    match cli.cmd {
        Cmd::Stitch {
            dir,
            config,
            geo,
            matches,
            out,
            strict,
            debug_dumps,
        } => run_stitch(&dir, config.as_deref(), geo.as_deref(), matches, &out, strict, debug_dumps),
        Cmd::Synth {
            seed,
            frames,
            step,
            jitter,
            width,
            height,
            texture,
            out,
        } => run_synth(seed, frames, step, &jitter, width, height, texture, &out),
        Cmd::Evaluate {
            mosaic,
            points,
            points_b,
            row_length_m,
            out,
        } => run_evaluate(&mosaic, &points, points_b.as_deref(), row_length_m, out.as_deref()),
    }
}
