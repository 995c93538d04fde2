use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cldmap::optimize::DEFAULT_GRID;
use cldmap::render::MapFormat;
use cldmap::SyntheticSpec;
use cldmap_cli::artifacts::{self, Selection, TauChoice, DEFAULT_K};
use cldmap_cli::commands;
use cldmap_cli::service::{self, DEFAULT_PORT, PORT_ENV};
use serde::Serialize;

/// Coherence length diagrams, support and defect maps for grayscale
/// textures. Thresholds are given in percent.
#[derive(Parser)]
#[command(name = "cldmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the CLD, support map and quality curve.
    Analyze {
        image: PathBuf,
        #[command(flatten)]
        tau: TauArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Render the defect map at a coverage percentage or tolerance.
    Dmap {
        image: PathBuf,
        #[command(flatten)]
        tau: TauArgs,
        /// Share of successful pixels, in percent.
        #[arg(long, conflicts_with = "tau_prime", required_unless_present = "tau_prime")]
        coverage: Option<f64>,
        /// Explicit vote tolerance (unit ratio).
        #[arg(long)]
        tau_prime: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Render the directional defect map at a defect percentage or
    /// threshold.
    Ddmap {
        image: PathBuf,
        #[command(flatten)]
        tau: TauArgs,
        /// Share of defective pixels, in percent.
        #[arg(long, conflicts_with = "tau_doubleprime", required_unless_present = "tau_doubleprime")]
        defect_pct: Option<f64>,
        /// Explicit mismatch threshold (unit ratio).
        #[arg(long)]
        tau_doubleprime: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tune tau, then emit one defect map per coverage with a per-half
    /// report.
    Segment {
        image: PathBuf,
        /// Coverage percentages, comma separated.
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        coverage: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a synthetic texture image.
    Fixture {
        #[command(subcommand)]
        kind: FixtureKind,
        /// Destination file; `.bmp` selects BMP, anything else PNG.
        #[arg(long, global = true, default_value = "fixture.png")]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Args)]
struct TauArgs {
    /// Saturation threshold in percent, (0, 100].
    #[arg(long, conflicts_with = "auto")]
    tau: Option<f64>,
    /// Tune tau automatically; the default when --tau is absent.
    #[arg(long)]
    auto: bool,
    /// Points on the tuning grid.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
}

impl TauArgs {
    fn choice(&self) -> TauChoice {
        match self.tau {
            Some(p) => TauChoice::Percent(p),
            None => TauChoice::Auto { grid: self.grid },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Png,
    Bmp,
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Png)]
    format: Format,
}

impl OutputArgs {
    fn format(&self) -> MapFormat {
        match self.format {
            Format::Png => MapFormat::Png,
            Format::Bmp => MapFormat::Bmp,
        }
    }
}

#[derive(Args)]
struct Dims {
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
}

#[derive(Subcommand)]
enum FixtureKind {
    Checkerboard {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 8)]
        cell: usize,
    },
    TwoTextureComposite {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 2)]
        left_cell: usize,
        #[arg(long, default_value_t = 8)]
        right_cell: usize,
    },
    Constant {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 128)]
        value: u8,
    },
    UniformNoise {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    MissingCell {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 4)]
        cell: usize,
        #[arg(long, default_value_t = 7)]
        cell_x: usize,
        #[arg(long, default_value_t = 7)]
        cell_y: usize,
    },
    SmoothNoise {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl FixtureKind {
    fn spec(&self) -> SyntheticSpec {
        match *self {
            FixtureKind::Checkerboard { ref dims, cell } => SyntheticSpec::Checkerboard {
                width: dims.width,
                height: dims.height,
                cell,
            },
            FixtureKind::TwoTextureComposite { ref dims, left_cell, right_cell } => {
                SyntheticSpec::TwoTextureComposite {
                    width: dims.width,
                    height: dims.height,
                    left_cell,
                    right_cell,
                }
            }
            FixtureKind::Constant { ref dims, value } => SyntheticSpec::Constant {
                width: dims.width,
                height: dims.height,
                value,
            },
            FixtureKind::UniformNoise { ref dims, seed } => SyntheticSpec::UniformNoise {
                width: dims.width,
                height: dims.height,
                seed,
            },
            FixtureKind::MissingCell { ref dims, cell, cell_x, cell_y } => SyntheticSpec::MissingCell {
                width: dims.width,
                height: dims.height,
                cell,
                cell_x,
                cell_y,
            },
            FixtureKind::SmoothNoise { ref dims, radius, seed } => SyntheticSpec::SmoothNoise {
                width: dims.width,
                height: dims.height,
                radius,
                seed,
            },
        }
    }
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    print!("{}", String::from_utf8(artifacts::json_bytes(value)?)?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { image, tau, output } => {
            print(&commands::analyze(&image, tau.choice(), tau.grid, &output.out, output.format())?)
        }
        Command::Dmap { image, tau, coverage, tau_prime, k, output } => {
            let sel = match coverage {
                Some(p) => Selection::Percent(p),
                None => Selection::Value(tau_prime.expect("clap requires one")),
            };
            print(&commands::dmap(&image, tau.choice(), sel, k, &output.out, output.format())?)
        }
        Command::Ddmap { image, tau, defect_pct, tau_doubleprime, k, output } => {
            let sel = match defect_pct {
                Some(p) => Selection::Percent(p),
                None => Selection::Value(tau_doubleprime.expect("clap requires one")),
            };
            print(&commands::ddmap(&image, tau.choice(), sel, k, &output.out, output.format())?)
        }
        Command::Segment { image, coverage, k, grid, output } => {
            print(&commands::segment(&image, &coverage, k, grid, &output.out, output.format())?)
        }
        Command::Fixture { kind, out } => commands::fixture(&kind.spec(), &out),
        Command::Serve { port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(port))?;
            Ok(())
        }
    }
}
