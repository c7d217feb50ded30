use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use octogan::error::Error;
use octogan::gradcheck::{run_gradcheck, DEFAULT_INSTANCES, TOLERANCE};
use octogan::harness::experiment::{to_unit, CHECKPOINT_FILE};
use octogan::harness::image::{sample_grid, write_image, Image};
use octogan::harness::record::csv_row;
use octogan::harness::{load_checkpoint, parse_config, run_training, DataSource, ImageDataset};
use octogan::metrics::{
    extract_features, fid, fit_stats, power_spectrum_1d, spectrum_distance, Band, FeatureExtractor, SpectrumProfile,
};
use octogan::{gan, Tensor32};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "octogan", version, about = "Soft octave convolution GAN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a GAN; writes metrics.csv, sample grids and checkpoints to out_dir.
    Train(TrainArgs),
    /// Write samples from a checkpoint as PPM files.
    Generate(GenerateArgs),
    /// FID-proxy between two image sources.
    Fid(FidArgs),
    /// Radial power spectra of one or two image sources.
    Spectrum(SpectrumArgs),
    /// Finite-difference check of every differentiable operator.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Config file followed by key=value overrides; a lone key=value is an override.
    #[arg(value_name = "CONFIG | KEY=VALUE")]
    items: Vec<String>,
    /// Continue from a checkpoint; only out_dir may be overridden.
    #[arg(long, value_name = "CHECKPOINT")]
    resume: Option<PathBuf>,
    /// Stop once this many epochs are complete.
    #[arg(long, value_name = "EPOCHS")]
    stop_after: Option<usize>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct GenerateArgs {
    checkpoint: PathBuf,
    #[arg(long, short, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for sample_NNNN.ppm and grid.ppm.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Extractor {
    Conv,
    Raw,
}

/// A directory of PGM/PPM images or a `shapes:count:seed[:texture]` spec.
#[derive(Args)]
struct SourceArgs {
    /// Side length images are cropped and resized to.
    #[arg(long, default_value_t = 32)]
    size: usize,
}

#[derive(Args)]
struct FidArgs {
    a: String,
    b: String,
    #[arg(long, value_enum, default_value = "conv")]
    extractor: Extractor,
    #[command(flatten)]
    source: SourceArgs,
}

#[derive(Args)]
struct SpectrumArgs {
    a: String,
    b: Option<String>,
    /// Directory for the profile CSVs.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    source: SourceArgs,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = DEFAULT_INSTANCES)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Generate(a) => generate(a),
        Command::Fid(a) => fid_cmd(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_USAGE,
                Error::Divergence(_) => EXIT_DIVERGENCE,
                _ => EXIT_RUNTIME,
            })
        }
    }
}

type CmdResult = octogan::Result<ExitCode>;

fn train(args: TrainArgs) -> CmdResult {
    let (file, overrides): (Vec<String>, Vec<String>) = args.items.into_iter().partition(|s| !s.contains('='));
    if file.len() > 1 {
        return Err(Error::Config(format!("expected at most one config file, got {}", file.len())));
    }
    let (cfg, state) = match &args.resume {
        Some(path) => {
            if !file.is_empty() {
                return Err(Error::Config("--resume takes its config from the checkpoint; drop the config file".into()));
            }
            if let Some(o) = overrides.iter().find(|o| !o.starts_with("out_dir=")) {
                return Err(Error::Config(format!("argument `{o}` contradicts --resume (only out_dir may change)")));
            }
            let (state, cfg) = load_checkpoint(path)?;
            let text = octogan::harness::print_config(&cfg);
            (parse_config(&text, &overrides)?, Some(state))
        }
        None => {
            let text = match file.first() {
                Some(p) => fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read config {p}: {e}")))?,
                None => String::new(),
            };
            (parse_config(&text, &overrides)?, None)
        }
    };
    let quiet = args.quiet;
    let state = run_training(&cfg, state, args.stop_after, &mut |r| {
        if !quiet {
            println!("{}", csv_row(r));
        }
    })?;
    if !quiet {
        println!("checkpoint: {}", cfg.out_dir.join(CHECKPOINT_FILE).display());
        println!("epochs completed: {}", state.epoch);
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(args: GenerateArgs) -> CmdResult {
    if args.n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    let (mut state, cfg) = load_checkpoint::<f32>(&args.checkpoint)?;
    let samples = gan::generate(&mut state.generator, args.n, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let s = cfg.gan.image_size;
    let plane = 3 * s * s;
    for (i, img) in samples.data().chunks(plane).enumerate() {
        let mut px = Vec::with_capacity(plane);
        for p in 0..s * s {
            px.extend((0..3).map(|c| (img[c * s * s + p] + 1.0) * 0.5));
        }
        write_image(&args.out.join(format!("sample_{i:04}.ppm")), &Image::new(s, s, 3, px)?)?;
    }
    write_image(&args.out.join("grid.ppm"), &sample_grid(samples.data(), args.n.min(64), s, 8))?;
    println!("wrote {} samples to {}", args.n, args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn load_source(spec: &str, size: usize) -> octogan::Result<Tensor32> {
    let source = if spec.starts_with("shapes:") {
        DataSource::Synthetic(spec.parse()?)
    } else {
        let path = Path::new(spec);
        if !path.is_dir() {
            return Err(Error::Config(format!("`{spec}` is neither a directory nor a shapes:count:seed spec")));
        }
        DataSource::Directory(path.to_path_buf())
    };
    if size < 4 || !size.is_power_of_two() {
        return Err(Error::Config(format!("--size must be a power of two >= 4, got {size}")));
    }
    ImageDataset::load(&source, size)?.all()
}

fn fid_cmd(args: FidArgs) -> CmdResult {
    let fe = match args.extractor {
        Extractor::Conv => FeatureExtractor::DEFAULT,
        Extractor::Raw => FeatureExtractor::RawMoments,
    };
    let stats = |spec: &str| -> octogan::Result<_> {
        let images = load_source(spec, args.source.size)?;
        fit_stats(&extract_features(&images, &fe)?)
    };
    let value = fid(&stats(&args.a)?, &stats(&args.b)?)?;
    println!("{value}");
    Ok(ExitCode::SUCCESS)
}

fn write_profile(path: &Path, p: &SpectrumProfile) -> octogan::Result<()> {
    let mut s = String::from("bin,power\n");
    for (i, v) in p.power.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> CmdResult {
    let mut profiles = Vec::new();
    for (tag, spec) in [("a", Some(&args.a)), ("b", args.b.as_ref())] {
        let Some(spec) = spec else { continue };
        let p = power_spectrum_1d(&to_unit(&load_source(spec, args.source.size)?))?;
        let below = 10.0 * (p.power[0] / p.high_band_power()).log10();
        println!("{tag}: high_band_power={:e} high_band_db_below_dc={below:.2}", p.high_band_power());
        if let Some(dir) = &args.out {
            fs::create_dir_all(dir)?;
            write_profile(&dir.join(format!("spectrum_{tag}.csv")), &p)?;
        }
        profiles.push(p);
    }
    if let [a, b] = &profiles[..] {
        let full = spectrum_distance(a, b, Band::Full)?;
        let high = spectrum_distance(a, b, Band::High)?;
        println!("distance_full={full}\ndistance_high={high}");
        if let Some(dir) = &args.out {
            fs::write(dir.join("distance.csv"), format!("band,distance\nfull,{full}\nhigh,{high}\n"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(args: GradcheckArgs) -> CmdResult {
    let reports = run_gradcheck(args.instances, args.seed)?;
    let mut ok = true;
    for r in &reports {
        let verdict = if r.passed() { "ok" } else { "FAIL" };
        println!("{:<24} {:>4} instances  max rel err {:.3e}  {verdict}", r.op, r.instances, r.max_rel_err);
        ok &= r.passed();
    }
    if ok {
        println!("all {} operators within {TOLERANCE:e}", reports.len());
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_RUNTIME))
    }
}
