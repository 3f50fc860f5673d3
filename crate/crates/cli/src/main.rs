use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use chromaforest::io::{load_png, save_label_png, save_png};
use chromaforest::model_file::{load_model, save_model};
use chromaforest::segment::parse_merge_map;
use chromaforest::{
    colorize_detailed, colorize_sequence, evaluate, to_grayscale, train_model_with_summary, Error,
    PipelineConfig,
};

mod config;

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "chromaforest",
    version,
    about = "Colorize grayscale images from color references"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a model from color reference images.
    Train {
        #[arg(long, required = true, num_args = 1..)]
        refs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
        /// Master random seed [default: 42]
        #[arg(long)]
        seed: Option<u64>,
        /// key = value file; flags given on the command line win.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Colorize one grayscale image.
    Colorize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Segment pairs to join, one `<id> <id>` per line.
        #[arg(long)]
        merge_map: Option<PathBuf>,
        /// Write the segment ids (before merging) as a 16-bit PNG.
        #[arg(long)]
        dump_segments: Option<PathBuf>,
        /// Write the superpixel ids as a 16-bit PNG.
        #[arg(long)]
        dump_superpixels: Option<PathBuf>,
        /// Write the scribbles as `row col U V` lines.
        #[arg(long)]
        dump_scribbles: Option<PathBuf>,
    },
    /// Colorize every PNG frame in a directory.
    Video {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a colorized image with ground truth.
    Eval {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_PIPELINE };
        Failure {
            code,
            error: e.into(),
        }
    }
}

fn failure(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(|e| failure(EXIT_IO, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(|e| failure(EXIT_IO, e))
}

fn train(
    refs: &[PathBuf],
    out: &Path,
    clusters: Option<usize>,
    trees: Option<usize>,
    seed: Option<u64>,
    config_file: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = config_file {
        let text = read_text(path)?;
        config::apply_config_text(&mut cfg, &text)
            .with_context(|| format!("config file {}", path.display()))
            .map_err(|e| failure(EXIT_USAGE, e))?;
    }
    cfg.clusters = clusters.unwrap_or(cfg.clusters);
    cfg.trees = trees.unwrap_or(cfg.trees);
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.validate().map_err(|e| failure(EXIT_USAGE, e.into()))?;

    let images = refs.iter().map(load_png).collect::<Result<Vec<_>, _>>()?;
    let start = Instant::now();
    let (model, summary) = train_model_with_summary(&images, &cfg)?;
    let elapsed = start.elapsed();
    for (path, n) in refs.iter().zip(&summary.superpixels) {
        println!("{}: {n} superpixels", path.display());
    }
    println!("palette size: {}", summary.palette_size);
    println!(
        "trained {} trees in {:.2}s",
        cfg.trees,
        elapsed.as_secs_f64()
    );
    save_model(&model, out)?;
    Ok(())
}

struct ColorizeArgs<'a> {
    model: &'a Path,
    input: &'a Path,
    output: &'a Path,
    merge_map: Option<&'a Path>,
    dump_segments: Option<&'a Path>,
    dump_superpixels: Option<&'a Path>,
    dump_scribbles: Option<&'a Path>,
}

fn colorize(args: ColorizeArgs) -> Result<(), Failure> {
    let model = load_model(args.model)?;
    let img = load_png(args.input)?;
    let merges = match args.merge_map {
        Some(path) => {
            let text = read_text(path)?;
            Some(
                parse_merge_map(&text)
                    .map_err(|e| failure(EXIT_IO, anyhow!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let result = colorize_detailed(&img, &model, &model.config, merges.as_deref())?;
    let (w, h) = (img.width(), img.height());
    if let Some(path) = args.dump_segments {
        save_label_png(result.segments.labels(), w, h, path)?;
    }
    if let Some(path) = args.dump_superpixels {
        save_label_png(result.superpixels.labels(), w, h, path)?;
    }
    if let Some(path) = args.dump_scribbles {
        write_text(path, &result.scribbles.to_text())?;
    }
    save_png(&result.output, args.output)?;
    Ok(())
}

fn video(model: &Path, frames: &Path, out: &Path) -> Result<(), Failure> {
    let model = load_model(model)?;
    let entries = fs::read_dir(frames)
        .with_context(|| format!("cannot list {}", frames.display()))
        .map_err(|e| failure(EXIT_IO, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(failure(
            EXIT_IO,
            anyhow!("no PNG frames in {}", frames.display()),
        ));
    }
    let images = paths
        .iter()
        .map(|p| load_png(p).map(|img| to_grayscale(&img)))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = colorize_sequence(&images, &model, &model.config)?;
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(|e| failure(EXIT_IO, e))?;
    for (path, img) in paths.iter().zip(&outputs) {
        let name = path.file_name().expect("listed files have names");
        save_png(img, out.join(name))?;
    }
    println!("colorized {} frames", outputs.len());
    Ok(())
}

fn eval(result: &Path, truth: &Path) -> Result<(), Failure> {
    let m = evaluate(&load_png(result)?, &load_png(truth)?)?;
    println!("mean_ab_error={:.3} psnr={:.3}", m.mean_ab_error, m.psnr);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train {
            refs,
            out,
            clusters,
            trees,
            seed,
            config,
        } => train(&refs, &out, clusters, trees, seed, config.as_deref()),
        Command::Colorize {
            model,
            input,
            output,
            merge_map,
            dump_segments,
            dump_superpixels,
            dump_scribbles,
        } => colorize(ColorizeArgs {
            model: &model,
            input: &input,
            output: &output,
            merge_map: merge_map.as_deref(),
            dump_segments: dump_segments.as_deref(),
            dump_superpixels: dump_superpixels.as_deref(),
            dump_scribbles: dump_scribbles.as_deref(),
        }),
        Command::Video { model, frames, out } => video(&model, &frames, &out),
        Command::Eval { result, truth } => eval(&result, &truth),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::debug!("exit code {}", f.code);
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
