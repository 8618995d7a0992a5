//! Command-line front end.
//!
//! Exit codes: 0 converged, 1 finished without meeting the stopping rule,
//! 2 usage or input error, 3 numerical blow-up.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use l0tv_core::harness::{
    self, best_csv, image_label, load_gray, metrics_csv, parse_noise, run, run_color, ExperimentPlan,
    KernelSpec, MaskChoice, MetricsRow, RunOutput, RunSpec, SolverKind, COLOR_LAMBDA, DEFAULT_CROP,
};
use l0tv_core::io::{read_rgb, write_image, write_rgb, BitDepth};
use l0tv_core::{Error, ImageGrid, SolverConfig, TvNorm};

#[derive(Parser)]
#[command(name = "l0tv", version, about = "Impulse-noise image restoration with l0 data fidelity and TV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt a grayscale image with impulse noise and restore it.
    Denoise(RunArgs),
    /// Blur, corrupt and restore a grayscale image.
    Deblur {
        #[command(flatten)]
        run: RunArgs,
        /// identity, gauss9[:sigma], disc:r or file:path
        #[arg(long, default_value = "gauss9:2")]
        kernel: KernelSpec,
    },
    /// Run a JSON experiment plan and write the metrics table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restore an RGB image channel by channel.
    Color {
        #[command(flatten)]
        run: RunArgs,
        /// Channels that receive noise, e.g. `r` or `rgb`.
        #[arg(long, default_value = "rgb")]
        channels: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// rv, sp, mixed or none
    #[arg(long, default_value = "sp")]
    noise: String,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    /// Defaults to 1.1, or 8 for `color`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "auto")]
    mask: MaskChoice,
    /// TV norm: 1 anisotropic, 2 isotropic.
    #[arg(long, default_value_t = 1)]
    p: u8,
    #[arg(long, default_value = "l0tv")]
    solver: SolverKind,
    #[arg(long)]
    out: PathBuf,
    /// Use the whole image instead of the centre 64x64 crop.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    /// Image format of the outputs: png or pgm.
    #[arg(long, default_value = "png")]
    format: String,
    /// Also save the iterate every N iterations.
    #[arg(long)]
    frames: Option<usize>,
}

enum Failure {
    Usage(String),
    BlowUp(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalBlowUp { .. } => Failure::BlowUp(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256_file(path: &Path) -> Result<String, Failure> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

impl RunArgs {
    fn spec(&self, kernel: KernelSpec, default_lambda: f64) -> Result<RunSpec, Failure> {
        let norm = TvNorm::from_p(self.p).ok_or_else(|| usage("--p must be 1 or 2"))?;
        let spec = RunSpec {
            noise: parse_noise(&self.noise)?,
            density: self.density,
            seed: self.seed,
            mask: self.mask,
            kernel,
            solver: self.solver,
            config: SolverConfig {
                lambda: self.lambda.unwrap_or(default_lambda),
                norm,
                max_iters: self.max_iters,
                ..SolverConfig::default()
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    fn ext(&self) -> Result<&str, Failure> {
        match self.format.as_str() {
            "png" | "pgm" => Ok(&self.format),
            other => Err(usage(format!("unknown --format {other:?}"))),
        }
    }

    fn check_input(&self) -> Result<(), Failure> {
        if self.input.is_file() {
            Ok(())
        } else {
            Err(usage(format!("cannot read input {}", self.input.display())))
        }
    }

    fn crop(&self) -> Option<usize> {
        (!self.full).then_some(DEFAULT_CROP)
    }
}

struct Manifest<'a> {
    command: &'a str,
    input: &'a Path,
    spec: &'a RunSpec,
    extra: serde_json::Value,
    outputs: Vec<String>,
}

impl Manifest<'_> {
    /// Deterministic: no timestamps, the input is identified by content.
    fn write(&self, out: &Path, summary: serde_json::Value) -> Result<(), Failure> {
        let config = json!({
            "command": self.command,
            "run": self.spec,
            "options": self.extra,
        });
        let config_hash = hex(&Sha256::digest(serde_json::to_vec(&config).map_err(Error::from)?));
        let manifest = json!({
            "tool": "l0tv",
            "version": env!("CARGO_PKG_VERSION"),
            "inputs": [{ "path": self.input.display().to_string(), "sha256": sha256_file(self.input)? }],
            "seed": self.spec.seed,
            "config": config,
            "config_sha256": config_hash,
            "outputs": self.outputs,
            "result": summary,
        });
        write_json(&out.join("manifest.json"), &manifest)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

struct Writer<'a> {
    dir: &'a Path,
    ext: &'a str,
    written: Vec<String>,
}

impl Writer<'_> {
    fn image(&mut self, stem: &str, grid: &ImageGrid) -> Result<(), Failure> {
        let name = format!("{stem}.{}", self.ext);
        write_image(&self.dir.join(&name), grid, BitDepth::Eight)?;
        self.written.push(name);
        Ok(())
    }

    fn rgb(&mut self, stem: &str, channels: [&ImageGrid; 3]) -> Result<(), Failure> {
        let name = format!("{stem}.png");
        write_rgb(&self.dir.join(&name), &channels.map(Clone::clone))?;
        self.written.push(name);
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        fs::write(self.dir.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn summary(out: &RunOutput, cfg: &SolverConfig) -> serde_json::Value {
    json!({
        "converged": out.solve.converged,
        "iterations": out.solve.iterations(),
        "best_iter": out.solve.best_iter,
        "multipliers_growing": out.solve.trace.multipliers_growing(cfg.beta_period, cfg.beta_factor),
    })
}

fn single(command: &str, args: &RunArgs, kernel: KernelSpec) -> Result<bool, Failure> {
    let ext = args.ext()?;
    args.check_input()?;
    let spec = args.spec(kernel, SolverConfig::default().lambda)?;
    let clean = load_gray(&args.input, args.crop())?;
    fs::create_dir_all(&args.out)?;
    let mut w = Writer {
        dir: &args.out,
        ext,
        written: Vec::new(),
    };

    let mut frame_error = None;
    let out = run(&clean, &spec, |state, row| {
        if let Some(every) = args.frames.filter(|&n| n > 0) {
            if row.iter % every == 0 && frame_error.is_none() {
                let path = args.out.join(format!("frame_{:04}.{ext}", row.iter));
                let grid = clean.with_data(state.u.clone());
                if let Err(e) = grid.and_then(|g| write_image(&path, &g, BitDepth::Eight)) {
                    frame_error = Some(e);
                }
            }
        }
    })?;
    if let Some(e) = frame_error {
        return Err(e.into());
    }

    w.image("clean", &clean)?;
    if command == "deblur" {
        w.image("blurred", &out.blurred)?;
        let text = spec.kernel.kernel()?.map(|k| k.to_text()).unwrap_or_else(|| "1\n".into());
        w.text("kernel.txt", &text)?;
    }
    w.image("corrupted", &out.corrupted)?;
    w.image("restored", &out.solve.u)?;
    w.image("residual", &out.residual)?;
    w.text("trace.csv", &out.solve.trace.to_csv())?;
    let label = image_label(&args.input);
    let rows = [
        MetricsRow::input(&label, &spec, out.input_quality),
        MetricsRow::restored(&label, &spec, &out),
    ];
    w.text("metrics.csv", &metrics_csv(&rows))?;
    w.written.push("manifest.json".into());
    Manifest {
        command,
        input: &args.input,
        spec: &spec,
        extra: json!({ "crop": args.crop(), "format": ext, "frames": args.frames }),
        outputs: w.written,
    }
    .write(&args.out, summary(&out, &spec.config))?;

    let q = out.restored_quality;
    println!(
        "{label}: converged={} iterations={} snr0={:.2} snr1={:.2} snr2={:.2}",
        out.solve.converged,
        out.solve.iterations(),
        q.snr0,
        q.snr1,
        q.snr2
    );
    Ok(out.solve.converged)
}

fn color(args: &RunArgs, channels: &str) -> Result<bool, Failure> {
    let mut noisy = [false; 3];
    for c in channels.chars() {
        match c {
            'r' => noisy[0] = true,
            'g' => noisy[1] = true,
            'b' => noisy[2] = true,
            _ => return Err(usage(format!("--channels takes letters from \"rgb\", got {channels:?}"))),
        }
    }
    args.check_input()?;
    let spec = args.spec(KernelSpec::Identity, COLOR_LAMBDA)?;
    let rgb = read_rgb(&args.input)?;
    let rgb = rgb.map(|c| match args.crop() {
        Some(s) => c.center_crop(s, s),
        None => c,
    });
    fs::create_dir_all(&args.out)?;
    let outs = run_color(&rgb, &spec, noisy)?;
    let mut w = Writer {
        dir: &args.out,
        ext: "png",
        written: Vec::new(),
    };
    w.rgb("clean", [&rgb[0], &rgb[1], &rgb[2]])?;
    w.rgb("corrupted", [&outs[0].corrupted, &outs[1].corrupted, &outs[2].corrupted])?;
    w.rgb("restored", [&outs[0].solve.u, &outs[1].solve.u, &outs[2].solve.u])?;
    w.rgb("residual", [&outs[0].residual, &outs[1].residual, &outs[2].residual])?;
    let label = image_label(&args.input);
    let mut rows = Vec::new();
    for (k, name) in ["r", "g", "b"].iter().enumerate() {
        w.text(&format!("trace_{name}.csv"), &outs[k].solve.trace.to_csv())?;
        let ch_spec = RunSpec {
            noise: if noisy[k] { spec.noise } else { None },
            ..spec.clone()
        };
        let ch_label = format!("{label}:{name}");
        rows.push(MetricsRow::input(&ch_label, &ch_spec, outs[k].input_quality));
        rows.push(MetricsRow::restored(&ch_label, &ch_spec, &outs[k]));
    }
    w.text("metrics.csv", &metrics_csv(&rows))?;
    w.written.push("manifest.json".into());
    let converged = outs.iter().all(|o| o.solve.converged);
    Manifest {
        command: "color",
        input: &args.input,
        spec: &spec,
        extra: json!({ "crop": args.crop(), "channels": channels }),
        outputs: w.written,
    }
    .write(
        &args.out,
        json!({
            "converged": converged,
            "channels": outs.iter().map(|o| summary(o, &spec.config)).collect::<Vec<_>>(),
        }),
    )?;
    println!("{label}: converged={converged}");
    Ok(converged)
}

fn sweep(config: &Path, out: &Path) -> Result<bool, Failure> {
    let text = fs::read_to_string(config)
        .map_err(|e| usage(format!("cannot read {}: {e}", config.display())))?;
    let plan: ExperimentPlan = serde_json::from_str(&text).map_err(Error::from)?;
    let result = harness::run_sweep(&plan)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.csv"), metrics_csv(&result.rows))?;
    fs::write(out.join("best.csv"), best_csv(&result.best))?;
    let inputs: Vec<serde_json::Value> = plan
        .images
        .iter()
        .map(|p| {
            let sha = sha256_file(p).ok();
            json!({ "path": p.display().to_string(), "sha256": sha })
        })
        .collect();
    let plan_json = serde_json::to_value(&plan).map_err(Error::from)?;
    let hash = hex(&Sha256::digest(serde_json::to_vec(&plan_json).map_err(Error::from)?));
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    let unconverged = result.rows.iter().filter(|r| r.converged == Some(false)).count();
    write_json(
        &out.join("manifest.json"),
        &json!({
            "tool": "l0tv",
            "version": env!("CARGO_PKG_VERSION"),
            "inputs": inputs,
            "seeds": plan.seeds,
            "config": plan_json,
            "config_sha256": hash,
            "outputs": ["sweep.csv", "best.csv", "manifest.json"],
            "result": { "rows": result.rows.len(), "failed": failed, "unconverged": unconverged },
        }),
    )?;
    println!("{} rows, {failed} failed, {unconverged} not converged", result.rows.len());
    Ok(failed == 0 && unconverged == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Denoise(args) => single("denoise", args, KernelSpec::Identity),
        Command::Deblur { run, kernel } => single("deblur", run, kernel.clone()),
        Command::Sweep { config, out } => sweep(config, out),
        Command::Color { run, channels } => color(run, channels),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::BlowUp(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
