use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use ldes::bench::metrics::curves_csv;
use ldes::bench::run::evaluate_results;
use ldes::bench::{load_sequence, parse_script, run_sequences, synth_sequence, RunOptions, RunResult};
use ldes::imgproc::load_frame;
use ldes::{Rect, TrackerConfig};

/// Similarity-transformation tracker: track sequences, score results and
/// render synthetic benchmarks.
#[derive(Parser)]
#[command(name = "ldes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one or more sequences, initialized on their first ground-truth box.
    Track {
        /// Sequence directory; repeat to run several concurrently.
        #[arg(long = "seq", required = true, num_args = 1..)]
        seqs: Vec<PathBuf>,
        /// key=value tracker config. Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Results file, or a directory when several sequences are given.
        #[arg(long)]
        out: PathBuf,
        /// Report axis-aligned boxes instead of rotated ones.
        #[arg(long)]
        axis_aligned: bool,
        /// Write annotated frames here.
        #[arg(long)]
        dump_frames: Option<PathBuf>,
    },
    /// Score a results file against a sequence's ground truth.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the curves as CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Render a synthetic sequence from a seed image and a motion script.
    Synth {
        #[arg(long)]
        seed: PathBuf,
        /// One `dtx dty dtheta_deg dscale` row per frame.
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Initial target box `x,y,w,h` (0-based). Defaults to the central
        /// quarter of the seed.
        #[arg(long = "box", value_parser = parse_box)]
        target: Option<Rect>,
    },
}

fn parse_box(s: &str) -> Result<Rect, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] if w > 0.0 && h > 0.0 => Ok(Rect::new(x, y, w, h)),
        [_, _, _, _] => Err("width and height must be positive".into()),
        _ => Err(format!("expected x,y,w,h, got {} numbers", v.len())),
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<ldes::Error> for Failure {
    fn from(e: ldes::Error) -> Self {
        Failure {
            code: if e.is_parse_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn track(
    seqs: &[PathBuf],
    config: Option<&Path>,
    out: &Path,
    axis_aligned: bool,
    dump_frames: Option<PathBuf>,
) -> Result<(), Failure> {
    let config = match config {
        Some(p) => TrackerConfig::load(p)?,
        None => TrackerConfig::default(),
    };
    let loaded = seqs
        .iter()
        .map(|d| load_sequence(d))
        .collect::<ldes::Result<Vec<_>>>()?;
    let opts = RunOptions {
        axis_aligned,
        dump_frames,
    };
    let single = loaded.len() == 1;
    for (seq, result) in loaded.iter().zip(run_sequences(&loaded, &config, &opts)) {
        let r = result?;
        let path = if single {
            out.to_path_buf()
        } else {
            out.join(format!("{}.json", seq.name))
        };
        write(&path, &r.to_json())?;
        match &r.metrics {
            Some(m) => println!(
                "{}: {} frames, {:.1} fps, AUC {:.3}, precision@20 {:.3}, mean IoU {:.3}",
                r.sequence,
                r.frames.len(),
                r.fps,
                m.auc,
                m.precision_20,
                m.mean_iou
            ),
            None => println!("{}: {} frames, {:.1} fps", r.sequence, r.frames.len(), r.fps),
        }
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn eval(results: &Path, seq: &Path, out: &Path, csv: bool) -> Result<(), Failure> {
    let r = RunResult::load(results)?;
    let seq = load_sequence(seq)?;
    if r.sequence != seq.name {
        warn!("results are for {:?}, scoring against {:?}", r.sequence, seq.name);
    }
    let m = evaluate_results(&r, &seq)?;
    let text = if csv {
        curves_csv(&m)
    } else {
        serde_json::to_string_pretty(&m).expect("metrics serialize")
    };
    write(out, &text)?;
    println!(
        "{}: AUC {:.3}, precision@20 {:.3}, mean IoU {:.3}, mean alignment error {:.2} px",
        seq.name, m.auc, m.precision_20, m.mean_iou, m.mean_alignment_error
    );
    Ok(())
}

fn synth(seed: &Path, script: &Path, out: &Path, target: Option<Rect>) -> Result<(), Failure> {
    let image = load_frame(seed)?;
    let text = std::fs::read_to_string(script).map_err(|e| io_failure(script, e))?;
    let steps = parse_script(&text, script)?;
    let (h, w) = image.dims();
    let target = target.unwrap_or_else(|| {
        let (w, h) = (w as f64, h as f64);
        Rect::new(w * 3.0 / 8.0, h * 3.0 / 8.0, w / 4.0, h / 4.0)
    });
    let s = synth_sequence(&image, target, &steps)?;
    s.write(out)?;
    println!("{}: {} frames", out.display(), s.frames.len());
    Ok(())
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var("LDES_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or(Failure {
                code: 2,
                message: format!("LDES_THREADS must be a positive integer, got {v:?}"),
            }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let work = move || match cli.command {
        Command::Track {
            seqs,
            config,
            out,
            axis_aligned,
            dump_frames,
        } => track(&seqs, config.as_deref(), &out, axis_aligned, dump_frames),
        Command::Eval {
            results,
            seq,
            out,
            csv,
        } => eval(&results, &seq, &out, csv),
        Command::Synth {
            seed,
            script,
            out,
            target,
        } => synth(&seed, &script, &out, target),
    };
    match threads()? {
        Some(n) => ldes::par::with_threads(n, work)?,
        None => work(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
