//! Command-line front end.
//!
//! Exit codes: 0 success (simulation converged), 2 configuration, usage or
//! parse error, 3 photon budget exhausted (the field is still written),
//! 4 I/O error. Failures print one line to standard error, starting with an
//! `E_*` code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use radfield_core::codec::{self, SliceSource};
use radfield_core::dosimetry::{
    conversion_factor, error_stats, kerma_tensor, polar_scan, polar_scan_at, relative_errors,
    ErrorStats, KermaTensor, Plane, Sampling, TransmissionTable,
};
use radfield_core::engine::RunStatus;
use radfield_core::{Channel, FieldShape, RadiationField, Vec3};

use crate::config::{workers_from_env, RunConfig};
use crate::error::{Error, EXIT_OK};
use crate::formats;
use crate::io;
use crate::simulate::simulate;

#[derive(Debug, Parser)]
#[command(
    name = "radfield",
    version,
    about = "Voxelized photon radiation fields: simulate, inspect, scan and compare",
    after_help = "Exit codes: 0 success, 2 config/parse error, 3 photon budget exhausted, 4 I/O error.\n\
                  RADFIELD_THREADS overrides the configured worker count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation described by a JSON configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the header, metadata and layer table of a field file.
    Inspect { file: PathBuf },
    /// Sample relative air kerma on a circle and write it as CSV.
    Scan {
        file: PathBuf,
        #[command(flatten)]
        scan: ScanArgs,
        /// Angular step in degrees.
        #[arg(long, default_value_t = 10.0)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate a simulated scan against a measured curve and report relative errors.
    Compare {
        #[arg(long)]
        measured: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[command(flatten)]
        scan: ScanArgs,
        /// Angles left out of the second set of statistics.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        exclude: Vec<f64>,
        /// Per-angle comparison CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct ScanArgs {
    /// Channels summed into the kerma tensor.
    #[arg(long, value_delimiter = ',', default_value = "beam,scatter")]
    channels: Vec<String>,
    /// Circle center as x,y,z in meters.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    center: Vec3,
    /// Circle radius in meters.
    #[arg(long)]
    radius: f64,
    #[arg(long, value_enum, default_value_t = PlaneArg::Xy)]
    plane: PlaneArg,
    /// Use the containing voxel's value instead of trilinear interpolation.
    #[arg(long)]
    nearest: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlaneArg {
    Xy,
    Xz,
    Yz,
}

impl From<PlaneArg> for Plane {
    fn from(p: PlaneArg) -> Self {
        match p {
            PlaneArg::Xy => Plane::XY,
            PlaneArg::Xz => Plane::XZ,
            PlaneArg::Yz => Plane::YZ,
        }
    }
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("{p:?} is not a number"))
        })
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let err = Error::Usage(first.to_string());
            eprintln!("{}", err.report());
            return err.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let _ = out.flush();
            eprintln!("{}", err.report());
            err.exit_code()
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Error> {
    match command {
        Command::Simulate { config } => cmd_simulate(&config, out),
        Command::Inspect { file } => cmd_inspect(&file, out),
        Command::Scan {
            file,
            scan,
            step,
            out: path,
        } => cmd_scan(&file, &scan, step, &path, out),
        Command::Compare {
            measured,
            field,
            scan,
            exclude,
            out: path,
        } => cmd_compare(&measured, &field, &scan, &exclude, path.as_deref(), out),
    }
}

fn stdout_error(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn cmd_simulate(config_path: &Path, out: &mut dyn Write) -> Result<(), Error> {
    let config = RunConfig::load(config_path)?;
    let prepared = config.prepare(config_path, workers_from_env()?)?;
    let report = simulate(&prepared)?;
    let bytes = io::save(&prepared.output_path, &report.field)?;
    writeln!(
        out,
        "primaries {}\nfield_epsilon {}\nwall_time_s {:.3}\ncapped_tracks {}\nwrote {} ({} bytes)",
        report.primaries,
        report.field_epsilon,
        report.wall_time.as_secs_f64(),
        report.capped_tracks,
        prepared.output_path.display(),
        bytes
    )
    .map_err(stdout_error)?;
    match report.status {
        RunStatus::Converged => Ok(()),
        RunStatus::BudgetExhausted => Err(Error::BudgetExhausted {
            primaries: report.primaries,
            achieved: report.field_epsilon,
            threshold: prepared.limits.epsilon_threshold,
        }),
    }
}

fn cmd_inspect(path: &Path, out: &mut dyn Write) -> Result<(), Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decode_err = |source| Error::Decode {
        path: path.to_path_buf(),
        source,
    };
    let header = codec::decode_header(&mut SliceSource::new(&bytes)).map_err(decode_err)?;
    // Full decode verifies lengths and checksums of every block.
    codec::decode(&bytes).map_err(decode_err)?;

    let v = |p: Vec3| format!("({}, {}, {})", p.x, p.y, p.z);
    let g = &header.grid;
    let m = &header.metadata;
    let mut text = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(text, "file {} ({} bytes)", path.display(), bytes.len());
    let _ = writeln!(
        text,
        "grid {}x{}x{} voxels, extent_m {}, voxel_m {}, origin_m {}",
        g.counts[0],
        g.counts[1],
        g.counts[2],
        v(g.extent_m),
        v(g.voxel_m),
        v(g.origin_m)
    );
    let _ = writeln!(
        text,
        "binning {} bins x {} keV (max {} keV)",
        header.binning.bin_count,
        header.binning.bin_width_keV,
        header.binning.max_energy_keV()
    );
    let _ = writeln!(text, "metadata");
    let shape = match m.field_shape {
        FieldShape::Cone { opening_angle_deg } => {
            format!("cone opening_angle_deg={opening_angle_deg}")
        }
        FieldShape::Pyramid {
            rect_w_m,
            rect_h_m,
            at_distance_m,
        } => {
            format!("pyramid rect_w_m={rect_w_m} rect_h_m={rect_h_m} at_distance_m={at_distance_m}")
        }
    };
    for (k, val) in [
        ("software_name", m.software_name.clone()),
        ("software_version", m.software_version.clone()),
        ("physics_model_id", m.physics_model_id.clone()),
        ("scene_digest", m.scene_digest.clone()),
        ("tube_position_m", v(m.tube_position_m)),
        ("tube_direction", v(m.tube_direction)),
        ("field_shape", shape),
        ("spectrum_id", m.spectrum_id.clone()),
        ("primary_count", m.primary_count.to_string()),
        ("rng_seed", m.rng_seed.to_string()),
        ("epsilon_rel_achieved", m.epsilon_rel_achieved.to_string()),
        ("timestamp_utc", m.timestamp_utc.clone()),
    ] {
        let _ = writeln!(text, "  {k}: {val}");
    }
    let _ = writeln!(text, "dynamic metadata ({} entries)", m.dynamic.len());
    for (k, val) in &m.dynamic {
        let _ = writeln!(text, "  {k}: {val}");
    }
    let _ = writeln!(text, "layers");
    let _ = writeln!(
        text,
        "  {:<12} {:<12} {:<12} {:<16} {:>12} {:>12}",
        "channel", "layer", "unit", "kind", "stat_error", "bytes"
    );
    for ch in &header.channels {
        for l in &ch.layers {
            let kind = match l.kind {
                radfield_core::ElementKind::ScalarF32 => "scalar-f32".to_string(),
                radfield_core::ElementKind::ScalarF64 => "scalar-f64".to_string(),
                radfield_core::ElementKind::VectorF32(n) => format!("vector-f32({n})"),
                radfield_core::ElementKind::HistogramF32(n) => format!("histogram-f32({n})"),
            };
            let _ = writeln!(
                text,
                "  {:<12} {:<12} {:<12} {:<16} {:>12.6} {:>12}",
                ch.name, l.name, l.unit, kind, l.statistical_error, l.length
            );
        }
    }
    out.write_all(text.as_bytes()).map_err(stdout_error)
}

/// Kerma tensor from only the layers it needs.
fn load_tensor(path: &Path, channels: &[String]) -> Result<KermaTensor, Error> {
    let (header, _) = io::load_header(path)?;
    let mut loaded = Vec::with_capacity(channels.len());
    for name in channels {
        let mut ch = Channel::new(name.clone());
        for layer in ["spectrum", "hits"] {
            ch.layers.push(io::load_layer(path, name, layer)?);
        }
        loaded.push(ch);
    }
    let field = RadiationField {
        grid: header.grid,
        binning: header.binning,
        metadata: header.metadata,
        channels: loaded,
    };
    let names: Vec<&str> = channels.iter().map(String::as_str).collect();
    Ok(kerma_tensor(&field, &names, &TransmissionTable::air())?)
}

fn sampling(nearest: bool) -> Sampling {
    if nearest {
        Sampling::Nearest
    } else {
        Sampling::Trilinear
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_error(path: &Path, e: formats::FormatError) -> Error {
    match e {
        formats::FormatError::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        },
        other => Error::Format {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

fn cmd_scan(
    file: &Path,
    scan: &ScanArgs,
    step: f64,
    csv_path: &Path,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let tensor = load_tensor(file, &scan.channels)?;
    let curve = polar_scan(
        &tensor,
        scan.center,
        scan.radius,
        scan.plane.into(),
        step,
        sampling(scan.nearest),
    )?;
    formats::write_curve(create(csv_path)?, &curve).map_err(|e| write_error(csv_path, e))?;
    writeln!(
        out,
        "wrote {} angles to {}",
        curve.samples.len(),
        csv_path.display()
    )
    .map_err(stdout_error)
}

fn stats_line(label: &str, s: &ErrorStats) -> String {
    format!(
        "{label}: n={} median_rel={:.6} mean_rel={:.6} std_rel={:.6}",
        s.angles.len(),
        s.median_rel,
        s.mean_rel,
        s.std_rel
    )
}

fn cmd_compare(
    measured_path: &Path,
    field: &Path,
    scan: &ScanArgs,
    exclude: &[f64],
    csv_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let file = File::open(measured_path).map_err(|e| Error::io(measured_path, e))?;
    let measured =
        formats::read_curve(std::io::BufReader::new(file)).map_err(|source| Error::Format {
            path: measured_path.to_path_buf(),
            source,
        })?;
    let tensor = load_tensor(field, &scan.channels)?;
    let angles: Vec<f64> = measured.samples.iter().map(|&(a, _)| a).collect();
    let simulated = polar_scan_at(
        &tensor,
        scan.center,
        scan.radius,
        scan.plane.into(),
        &angles,
        sampling(scan.nearest),
    )?;
    let factor = conversion_factor(&measured, &simulated)?;
    let scaled = simulated.scaled(factor);
    let all = error_stats(&measured, &scaled, &[])?;
    let mut report = format!("S_c {factor}\n{}\n", stats_line("all angles", &all));
    if !exclude.is_empty() {
        let list: Vec<String> = exclude.iter().map(f64::to_string).collect();
        let kept = error_stats(&measured, &scaled, exclude)?;
        report.push_str(&stats_line(&format!("excluding {}", list.join(",")), &kept));
        report.push('\n');
    }
    if let Some(path) = csv_path {
        let errors = relative_errors(&measured, &scaled, &[])?;
        let rows: Vec<(f64, f64, f64, f64)> = errors
            .iter()
            .map(|&(a, e)| {
                let m = measured.value_at(a).expect("matched angle");
                let s = scaled.value_at(a).expect("matched angle");
                (a, m, s, e)
            })
            .collect();
        formats::write_comparison(create(path)?, &rows).map_err(|e| write_error(path, e))?;
        report.push_str(&format!("wrote {}\n", path.display()));
    }
    out.write_all(report.as_bytes()).map_err(stdout_error)
}
