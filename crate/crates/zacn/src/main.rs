//! Command-line surface: offset computation, receptive-field visualization,
//! and the toy segmentation benchmark.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zacn::error::{Error, Result};
use zacn::net::{self, ToyNetConfig};
use zacn::scene::{benchmark_scenes, toy_camera};
use zacn::{adapt_location, compute_offset_field, CameraIntrinsics, ConvSpec, DepthMap, Point3};

/// Depth scale applied to 16-bit PGM depth maps (millimeters to meters).
const PGM_DEPTH_SCALE: f64 = 0.001;

#[derive(Parser)]
#[command(
    name = "zacn",
    version,
    about = "Depth-adapted convolution: geometry-guided sampling offsets from depth maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an offset field from a depth map and write it as ZOFF
    Offsets(OffsetsArgs),
    /// Render the adapted receptive field at one pixel into a PPM
    ShowRf(ShowRfArgs),
    /// Train the toy segmentation network on synthetic scenes
    Train(TrainArgs),
    /// Re-evaluate a trained model on its held-out scenes
    Eval(EvalArgs),
}

#[derive(Args)]
struct OffsetsArgs {
    /// Depth map (16-bit PGM in millimeters, or grayscale PFM in meters)
    #[arg(long)]
    depth: PathBuf,
    /// Intrinsics file with fu=, fv=, cu=, cv= lines
    #[arg(long)]
    intrinsics: PathBuf,
    /// Kernel size N (odd)
    #[arg(long)]
    kernel: usize,
    #[arg(long, default_value_t = 1)]
    dilation: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 0)]
    padding: usize,
    /// Reference depth in meters (defaults to the mean of the depth map)
    #[arg(long)]
    zref: Option<f64>,
    /// Output ZOFF path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShowRfArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    intrinsics: PathBuf,
    /// Pixel as column,row (e.g. --at 12,9)
    #[arg(long, value_parser = parse_pixel_pair)]
    at: (usize, usize),
    #[arg(long)]
    kernel: usize,
    #[arg(long, default_value_t = 1)]
    dilation: usize,
    /// Output PPM path
    #[arg(long)]
    out: PathBuf,
    /// Check that the adapted taps are consistent with the fitted plane
    #[arg(long, default_value_t = false)]
    verify: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// key=value config file
    #[arg(long)]
    config: PathBuf,
    /// Number of training scenes (a quarter of this is held out on top)
    #[arg(long, default_value_t = 64)]
    scenes: usize,
    /// Seed for scene generation and weight initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Model directory written by `train`
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 64)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_pixel_pair(text: &str) -> std::result::Result<(usize, usize), String> {
    let (u, v) = text
        .split_once(',')
        .ok_or_else(|| format!("expected column,row but got {text:?}"))?;
    let u = u.trim().parse().map_err(|_| format!("invalid column {u:?}"))?;
    let v = v.trim().parse().map_err(|_| format!("invalid row {v:?}"))?;
    Ok((u, v))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Offsets(args) => cmd_offsets(args),
        Command::ShowRf(args) => cmd_show_rf(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_offsets(args: OffsetsArgs) -> Result<()> {
    let k = CameraIntrinsics::load(&args.intrinsics)?;
    let depth = zacn::io::load_depth(&args.depth, PGM_DEPTH_SCALE)?;
    let spec = ConvSpec::new(args.kernel, args.dilation, args.stride, args.padding)?;
    let field = compute_offset_field(&depth, &k, &spec, args.zref)?;
    zacn::io::save_offsets(&args.out, &field)?;
    println!(
        "channels={} height={} width={} max_abs_offset={:.6}",
        field.channels(),
        field.height(),
        field.width(),
        field.max_abs()
    );
    Ok(())
}

fn cmd_show_rf(args: ShowRfArgs) -> Result<()> {
    let k = CameraIntrinsics::load(&args.intrinsics)?;
    let depth = zacn::io::load_depth(&args.depth, PGM_DEPTH_SCALE)?;
    let (u, v) = args.at;
    if v >= depth.height() || u >= depth.width() {
        return Err(Error::domain(format!(
            "--at {u},{v} is outside the {}x{} image",
            depth.height(),
            depth.width()
        )));
    }
    // Same-padding, stride 1: output location (v, u) is centered on pixel (v, u).
    let padding = args.dilation * (args.kernel - 1) / 2;
    let spec = ConvSpec::new(args.kernel, args.dilation, 1, padding)?;
    let adapted = adapt_location(&depth, &k, &spec, None, v, u)?;

    render_rf_image(&args.out, &depth, &adapted)?;
    println!(
        "wrote {} with {} taps marked at pixel ({u}, {v})",
        args.out.display(),
        adapted.taps.len()
    );

    if args.verify {
        verify_taps(&adapted, &k)?;
        println!("verify: all taps consistent with the fitted plane");
    }
    Ok(())
}

fn render_rf_image(
    out: &std::path::Path,
    depth: &DepthMap,
    adapted: &zacn::LocationAdaptation,
) -> Result<()> {
    let (h, w) = (depth.height(), depth.width());
    let valid: Vec<f64> = depth
        .values()
        .iter()
        .copied()
        .filter(|&z| DepthMap::is_valid(z))
        .collect();
    let (lo, hi) = valid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
        (lo.min(z), hi.max(z))
    });
    let span = (hi - lo).max(1e-12);

    let mut rgb = vec![0u8; 3 * h * w];
    for r in 0..h {
        for c in 0..w {
            let z = depth.at(r, c);
            let g = if DepthMap::is_valid(z) {
                (255.0 * (z - lo) / span).round() as u8
            } else {
                0
            };
            let at = (r * w + c) * 3;
            rgb[at] = g;
            rgb[at + 1] = g;
            rgb[at + 2] = g;
        }
    }
    for tap in &adapted.taps {
        let r = tap.v.round() as i64;
        let c = tap.u.round() as i64;
        if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
            let at = (r as usize * w + c as usize) * 3;
            rgb[at] = 255;
            rgb[at + 1] = 0;
            rgb[at + 2] = 0;
        }
    }
    zacn::io::save_ppm(out, h, w, &rgb)
}

/// Intersects each tap's camera ray with the fitted plane and checks the
/// recovered 3D point against the planar grid point it projects from.
fn verify_taps(adapted: &zacn::LocationAdaptation, k: &CameraIntrinsics) -> Result<()> {
    let Some(fit) = &adapted.fit else {
        println!("verify: location uses the regular-grid fallback; nothing to check");
        return Ok(());
    };
    let n = fit.normal.as_array();
    let anchor = fit.anchor;
    let n_dot_anchor = n[0] * anchor.x + n[1] * anchor.y + n[2] * anchor.z;
    for (tap_index, (tap, grid_point)) in adapted.taps.iter().zip(&fit.grid).enumerate() {
        let ray = [(tap.u - k.c_u) / k.f_u, (tap.v - k.c_v) / k.f_v, 1.0];
        let denom = n[0] * ray[0] + n[1] * ray[1] + n[2] * ray[2];
        if denom.abs() < 1e-12 {
            return Err(Error::degenerate(format!(
                "tap {tap_index}: viewing ray parallel to the fitted plane"
            )));
        }
        let z = n_dot_anchor / denom;
        let recovered = Point3::new(ray[0] * z, ray[1] * z, z);
        let err = ((recovered.x - grid_point.x).powi(2)
            + (recovered.y - grid_point.y).powi(2)
            + (recovered.z - grid_point.z).powi(2))
        .sqrt();
        if err > 1e-3 {
            return Err(Error::domain(format!(
                "tap {tap_index}: back-projection misses the planar grid by {err:.6} m"
            )));
        }
    }
    Ok(())
}

fn held_out_count(train_scenes: usize) -> usize {
    (train_scenes / 4).max(1)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = ToyNetConfig::load(&args.config)?;
    config.seed = args.seed;
    if args.scenes == 0 {
        return Err(Error::domain("--scenes must be at least 1"));
    }
    let (train_scenes, test_scenes) = benchmark_scenes(
        args.seed,
        args.scenes,
        held_out_count(args.scenes),
        config.height,
        config.width,
    );
    let camera = toy_camera(config.height, config.width);

    let outcome = net::train(&config, &train_scenes, &camera)?;
    net::save_model(&args.out, &outcome.net, &config)?;

    let mut csv = String::from("step,loss\n");
    for (step, loss) in outcome.loss_trace.iter().enumerate() {
        csv.push_str(&format!("{step},{loss}\n"));
    }
    let csv_path = args.out.join("loss.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    // Report held-out metrics from the serialized weights so that `eval`
    // on this directory reproduces the file exactly.
    let (reloaded, reloaded_config) = net::load_model(&args.out)?;
    let report = net::evaluate_model(
        &reloaded,
        &test_scenes,
        &camera,
        reloaded_config.depth_guided,
    )?;
    let metrics_path = args.out.join("metrics.txt");
    fs::write(&metrics_path, report.to_key_values())
        .map_err(|e| Error::io(&metrics_path, e))?;

    println!(
        "trained {} steps on {} scenes (depth_guided={}), final loss {}",
        outcome.loss_trace.len(),
        train_scenes.len(),
        config.depth_guided,
        outcome.loss_trace.last().unwrap_or(&f64::NAN)
    );
    println!(
        "held-out ({} scenes): acc={:.4} m_acc={:.4} m_iou={:.4} fw_iou={:.4}",
        test_scenes.len(),
        report.acc,
        report.m_acc,
        report.m_iou,
        report.fw_iou
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (model, config) = net::load_model(&args.model)?;
    if args.scenes == 0 {
        return Err(Error::domain("--scenes must be at least 1"));
    }
    let (_, test_scenes) = benchmark_scenes(
        args.seed,
        args.scenes,
        held_out_count(args.scenes),
        config.height,
        config.width,
    );
    let camera = toy_camera(config.height, config.width);
    let report = net::evaluate_model(&model, &test_scenes, &camera, config.depth_guided)?;
    print!("{}", report.to_key_values());
    Ok(())
}
