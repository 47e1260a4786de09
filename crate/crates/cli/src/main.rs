use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use raylight::display::ViewRes;
use raylight::pipeline::{
    bench, compare_files, load_field, load_poses, precompute, FieldOptions, FieldSource, Mode,
    PrecomputeCache, RenderJob,
};
use raylight::radiance::{AnalyticKind, BLACK};
use raylight::{DisplayProfile, Error};

/// Ray-order rendering for lenticular light-field displays.
#[derive(Parser, Debug)]
#[command(name = "raylight", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the index matrix and ray set for a display and save them.
    Precompute {
        /// Profile TOML file or built-in name (7.9-inch, 15.6-inch, 65-inch, desk).
        #[arg(long)]
        profile: String,
        /// Repurposing area width in grating units.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
        pw: u32,
        /// Emit the one-to-one mapping instead.
        #[arg(long)]
        no_repurpose: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render encoded frames for every pose in a pose file.
    Render {
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the RMSE between two images on the 0-255 scale.
    Compare { a: PathBuf, b: PathBuf },
    /// Time frames without writing them.
    Bench {
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        frames: u32,
        /// Also time the multi-view path and report the ratio of frame times.
        #[arg(long)]
        compare_standard: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Directl,
    Standard,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ResArg {
    Lr,
    Mr,
    Hr,
}

impl From<ResArg> for ViewRes {
    fn from(r: ResArg) -> Self {
        match r {
            ResArg::Lr => ViewRes::Low,
            ResArg::Mr => ViewRes::Mid,
            ResArg::Hr => ViewRes::High,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AnalyticArg {
    ConstantSphere,
    TwoSpheres,
    GradientBox,
}

impl From<AnalyticArg> for AnalyticKind {
    fn from(a: AnalyticArg) -> Self {
        match a {
            AnalyticArg::ConstantSphere => AnalyticKind::ConstantSphere,
            AnalyticArg::TwoSpheres => AnalyticKind::TwoSpheres,
            AnalyticArg::GradientBox => AnalyticKind::GradientBox,
        }
    }
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    profile: String,
    /// Precompute cache, required for directl.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Gaussian scene (binary PLY).
    #[arg(
        long,
        conflicts_with = "analytic",
        required_unless_present = "analytic"
    )]
    scene: Option<PathBuf>,
    #[arg(long, value_enum)]
    analytic: Option<AnalyticArg>,
    /// One row-major 4x4 centre pose per line.
    #[arg(long)]
    poses: PathBuf,
    /// Per-view resolution in standard mode.
    #[arg(long, value_enum, default_value = "hr")]
    view_res: ResArg,
    /// Camera arc radius; defaults to the centre camera's distance from the origin.
    #[arg(long)]
    radius: Option<f64>,
    /// Heap capacity for Gaussian scenes.
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..))]
    capacity: u32,
    /// Samples per ray for analytic fields.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(1..))]
    samples: u32,
}

type Loaded = (
    DisplayProfile,
    Option<PrecomputeCache>,
    Box<dyn raylight::RadianceField>,
);

fn load(args: &RenderArgs) -> Result<Loaded, Error> {
    if let Some(r) = args.radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive, got {r}"
            )));
        }
    }
    let profile = DisplayProfile::load(&args.profile)?;
    let cache = match (&args.cache, args.mode) {
        (Some(path), _) => Some(PrecomputeCache::load(path, &profile)?),
        (None, ModeArg::Directl) => {
            return Err(Error::InvalidArgument(
                "--mode directl needs --cache".into(),
            ))
        }
        (None, ModeArg::Standard) => None,
    };
    let source = match (&args.scene, args.analytic) {
        (Some(p), _) => FieldSource::Scene(p.clone()),
        (None, Some(k)) => FieldSource::Analytic(k.into()),
        (None, None) => return Err(Error::InvalidArgument("need --scene or --analytic".into())),
    };
    let field = load_field(
        &source,
        FieldOptions {
            samples: args.samples as usize,
            capacity: args.capacity as usize,
        },
    )?;
    Ok((profile, cache, field))
}

fn mode(args: &RenderArgs) -> Mode {
    match args.mode {
        ModeArg::Directl => Mode::RayOrder,
        ModeArg::Standard => Mode::Standard(args.view_res.into()),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Precompute {
            profile,
            pw,
            no_repurpose,
            out,
        } => {
            let profile = DisplayProfile::load(&profile)?;
            let cache = precompute(&profile, (!no_repurpose).then_some(pw as usize))?;
            cache.save(&out)?;
            println!("beta {:.4}", cache.beta());
            println!("n_rays {}", cache.rays.n_rays());
        }
        Command::Render { render, out } => {
            let (profile, cache, field) = load(&render)?;
            let poses = load_poses(&render.poses)?;
            let job = RenderJob {
                profile: &profile,
                field: field.as_ref(),
                mode: mode(&render),
                cache: cache.as_ref(),
                poses: &poses,
                radius: render.radius,
                background: BLACK,
            };
            let stats = job.run(&out)?;
            let mean = stats.iter().map(|s| s.total_secs).sum::<f64>() / stats.len() as f64;
            println!("frames {}", stats.len());
            println!("mean_frame_secs {mean:.4}");
        }
        Command::Compare { a, b } => {
            println!("{:.3}", compare_files(a, b)?);
        }
        Command::Bench {
            render,
            frames,
            compare_standard,
        } => {
            let (profile, cache, field) = load(&render)?;
            let poses = load_poses(&render.poses)?;
            let mut job = RenderJob {
                profile: &profile,
                field: field.as_ref(),
                mode: mode(&render),
                cache: cache.as_ref(),
                poses: &poses,
                radius: render.radius,
                background: BLACK,
            };
            let main = bench(&job, frames as usize)?;
            println!("frames {}", main.frame_secs.len());
            println!("mean_frame_secs {:.6}", main.mean());
            println!("rays_per_frame {}", main.rays_per_frame);
            println!("rays_per_sec {:.4e}", main.rays_per_sec());
            if let Some(c) = &cache {
                println!("beta {:.4}", c.beta());
                println!("three_over_beta {:.4}", 3.0 / c.beta());
            }
            if compare_standard && job.mode == Mode::RayOrder {
                job.mode = Mode::Standard(render.view_res.into());
                let std_run = bench(&job, frames as usize)?;
                println!("standard_mean_frame_secs {:.6}", std_run.mean());
                println!("standard_over_directl {:.4}", std_run.mean() / main.mean());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
