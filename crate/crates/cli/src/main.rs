use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pidregion_core::delay::{quasi_rhp_zeros, window, DelayCurve};
use pidregion_core::kp_analysis::{interval_union, kp_plot, stability_peaks, KpInterval};
use pidregion_core::plantfile::{from_transfer_function, parse_plant_file};
use pidregion_core::region_builder::{build_region, export_region, family_slice_record, ExportFormat, GridConfig};
use pidregion_core::render::{kp_plot_csv, kp_plot_svg, slice_svg};
use pidregion_core::robust::{member_partition, robust_intervals, PlantFamily};
use pidregion_core::slicing::{is_stable_point, verify_point};
use pidregion_core::{Error, GammaRegion, PidGains, PlantModel};

/// Stabilizing PID / three-term controller regions by parameter-space slicing.
#[derive(Parser)]
#[command(name = "pidregion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Plant file (JSON with "plant" or "plants")
    file: Option<PathBuf>,
    /// Unity-feedback PID around num/den instead of a file; coefficients
    /// ascending and comma separated, giving A = num, B = s·den
    #[arg(long, num_args = 2, value_names = ["NUM", "DEN"], allow_hyphen_values = true, conflicts_with = "file")]
    from_tf: Option<Vec<String>>,
    /// Plant input delay for --from-tf
    #[arg(long, requires = "from_tf")]
    delay: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the singular-frequency curve r3(ω)
    KpPlot {
        #[command(flatten)]
        input: Input,
        /// Boundary parameter range (ω or α)
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
        range: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "csv")]
        out: PlotFormat,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Family member to plot
        #[arg(long, default_value_t = 0)]
        member: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the r3 cells with their singular-frequency counts
    Intervals {
        #[command(flatten)]
        input: Input,
        /// r3 search range
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
        range: Option<Vec<f64>>,
        #[arg(long)]
        json: bool,
    },
    /// Stable polygons of one r3 slice
    Slice {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true)]
        r3: f64,
        #[arg(long, value_enum, default_value = "text")]
        out: SliceFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep the admissible intervals and dump the slice stack
    Region {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 30)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        refine: usize,
        /// Directory for region.json; JSON goes to stdout otherwise
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one SVG per slice into --out
        #[arg(long, requires = "out")]
        svg: bool,
    },
    /// Stability verdict at one parameter point
    Check {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true, requires_all = ["ki", "kd"], conflicts_with_all = ["r1", "r2", "r3"])]
        kp: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ki: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        kd: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires_all = ["r2", "r3"])]
        r1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        r2: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        r3: Option<f64>,
    },
    /// Stability peaks inside the admissible intervals
    Peaks {
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotFormat {
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SliceFormat {
    Text,
    Json,
    Svg,
}

enum Failure {
    Usage(String),
    Diagnostic(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PlantFile { .. } | Error::Io { .. } => Failure::Usage(e.to_string()),
            other => Failure::Diagnostic(other.to_string()),
        }
    }
}

macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Diagnostic(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn coefficients(text: &str) -> std::result::Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad coefficient {t:?} in {text:?}")))
        })
        .collect()
}

fn load(input: &Input) -> std::result::Result<PlantFamily, Failure> {
    match (&input.file, &input.from_tf) {
        (Some(path), _) => Ok(parse_plant_file(path)?),
        (None, Some(tf)) => {
            let plant = from_transfer_function(&coefficients(&tf[0])?, &coefficients(&tf[1])?, input.delay)?;
            Ok(PlantFamily::single(plant, GammaRegion::hurwitz())?)
        }
        (None, None) => Err(Failure::Usage("a plant file or --from-tf NUM DEN is required".into())),
    }
}

fn range_arg(r: &Option<Vec<f64>>) -> Option<(f64, f64)> {
    r.as_ref().map(|v| (v[0], v[1]))
}

fn emit(text: &str, output: &Option<PathBuf>) -> CliResult {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|source| {
            Failure::from(Error::Io {
                path: path.clone(),
                source,
            })
        }),
        None => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            Ok(())
        }
    }
}

/// Six significant digits.
fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::KpPlot {
            input,
            range,
            out,
            samples,
            member,
            output,
        } => {
            let fam = load(&input)?;
            let plant = fam
                .members
                .get(member)
                .ok_or_else(|| Failure::Usage(format!("no member {member} in the family")))?;
            let (samples_v, branches, xlabel) = kp_curve(plant, &fam.region, range_arg(&range), samples)?;
            let ylabel = if fam.region.is_hurwitz() { "kP" } else { "r3" };
            let text = match out {
                PlotFormat::Csv => kp_plot_csv(&samples_v),
                PlotFormat::Svg => kp_plot_svg(&branches, xlabel, ylabel),
            };
            emit(&text, &output)
        }
        Command::Intervals { input, range, json } => intervals(&load(&input)?, range_arg(&range), json),
        Command::Slice {
            input,
            r3,
            out,
            output,
        } => {
            let fam = load(&input)?;
            let rec = family_slice_record(&fam, r3, None)?;
            let text = match out {
                SliceFormat::Json => serde_json::to_string_pretty(&rec).map_err(Error::from)? + "\n",
                SliceFormat::Svg => slice_svg(&rec, &fam.region),
                SliceFormat::Text => {
                    let mut s = format!("r3 = {}\nsingular frequencies:", sig(r3));
                    for f in &rec.frequencies {
                        s.push_str(&format!(" {}", sig(f.param)));
                    }
                    s.push_str(&format!(
                        "\nboundary lines: {}\nstable polygons: {}\n",
                        rec.lines.len(),
                        rec.polygons.len()
                    ));
                    for (i, p) in rec.polygons.iter().enumerate() {
                        let v: Vec<String> =
                            p.vertices.iter().map(|v| format!("({}, {})", sig(v[0]), sig(v[1]))).collect();
                        s.push_str(&format!("  #{i} verified={} {}\n", p.verified, v.join(" ")));
                    }
                    for n in &rec.notes {
                        s.push_str(&format!("note: {n}\n"));
                    }
                    s
                }
            };
            emit(&text, &output)
        }
        Command::Region {
            input,
            grid,
            refine,
            out,
            svg,
        } => {
            let fam = load(&input)?;
            let region = build_region(
                &fam,
                GridConfig {
                    per_interval_count: grid,
                    refine_depth: refine,
                },
            )?;
            match out {
                None => emit(&region.to_json()?, &None),
                Some(dir) => {
                    let mut files = export_region(&region, ExportFormat::Json, &dir)?;
                    if svg {
                        files.extend(export_region(&region, ExportFormat::SvgSlices, &dir)?);
                    }
                    let failed = region.slices.iter().filter(|s| s.error.is_some()).count();
                    say!(
                        "{} intervals, {} slices ({} failed), {} files in {}",
                        region.intervals.len(),
                        region.slices.len(),
                        failed,
                        files.len(),
                        dir.display()
                    );
                    Ok(())
                }
            }
        }
        Command::Check {
            input,
            kp,
            ki,
            kd,
            r1,
            r2,
            r3,
        } => {
            let fam = load(&input)?;
            let r = match (kp, ki, kd, r1, r2, r3) {
                (Some(kp), Some(ki), Some(kd), ..) => fam
                    .region
                    .from_pid(PidGains { kp, ki, kd })
                    .map_err(|e| Failure::Usage(format!("{e}; use --r1 --r2 --r3")))?,
                (.., Some(a), Some(b), Some(c)) => [a, b, c],
                _ => return Err(Failure::Usage("give --kp --ki --kd or --r1 --r2 --r3".into())),
            };
            check(&fam, r)
        }
        Command::Peaks { input } => peaks(&load(&input)?),
    }
}

type Curve = (Vec<(f64, f64)>, Vec<Vec<(f64, f64)>>, &'static str);

fn kp_curve(
    plant: &PlantModel,
    region: &GammaRegion,
    range: Option<(f64, f64)>,
    samples: usize,
) -> std::result::Result<Curve, Failure> {
    if let Some(q) = plant.as_quasi() {
        let curve = DelayCurve::new(&q)?;
        let (lo, hi) = range.unwrap_or((0.0, 2.0 * window(&q, 1, std::f64::consts::PI)));
        let n = samples.max(2);
        let start = if lo <= 0.0 { hi * 1e-6 } else { lo };
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let w = start + (hi - start) * k as f64 / (n - 1) as f64;
                (w, curve.kp(w))
            })
            .collect();
        return Ok((pts.clone(), vec![pts], "ω"));
    }
    let (default, label) = if region.is_hurwitz() {
        let scale = plant
            .a
            .roots()
            .unwrap_or_default()
            .iter()
            .chain(&plant.b.roots().unwrap_or_default())
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        ((0.0, 3.0 * scale), "ω")
    } else {
        ((0.0, std::f64::consts::PI), "α")
    };
    let plot = kp_plot(plant, region, range.unwrap_or(default), samples)?;
    Ok((plot.samples, plot.branches, label))
}

fn intervals(fam: &PlantFamily, range: Option<(f64, f64)>, json: bool) -> CliResult {
    let cells: Vec<KpInterval> = if fam.len() == 1 {
        member_partition(&fam.members[0], &fam.region, range)?
    } else {
        robust_intervals(fam, range)?
    };
    let admissible: Vec<KpInterval> = cells.iter().filter(|c| c.admissible).cloned().collect();
    let union = interval_union(&admissible);
    if json {
        let v = serde_json::json!({ "cells": cells, "admissible_union": union });
        say!("{}", serde_json::to_string_pretty(&v).map_err(Error::from)?);
        return Ok(());
    }
    say!(
        "{:>14} {:>14} {:>4} {:>11} {:>10}  {}",
        "lo", "hi", "Z", "required_Z", "admissible", "sufficiency"
    );
    for c in &cells {
        let suff = serde_json::to_value(c.sufficiency).map_err(Error::from)?;
        say!(
            "{:>14} {:>14} {:>4} {:>11} {:>10}  {}",
            sig(c.lo),
            sig(c.hi),
            c.z,
            c.required_z,
            c.admissible,
            suff.as_str().unwrap_or("")
        );
    }
    if union.is_empty() {
        say!("admissible union: empty");
    } else {
        let parts: Vec<String> = union.iter().map(|(a, b)| format!("({}, {})", sig(*a), sig(*b))).collect();
        say!("admissible union: {}", parts.join(" ∪ "));
    }
    Ok(())
}

fn check(fam: &PlantFamily, r: [f64; 3]) -> CliResult {
    let mut all = true;
    for (i, plant) in fam.members.iter().enumerate() {
        let prefix = if fam.len() > 1 { format!("member {i}: ") } else { String::new() };
        let stable = match plant.as_quasi() {
            Some(q) => {
                let c = quasi_rhp_zeros(&q, r, 0.0)?;
                let stable = c.stable();
                let z = if c.rhp_zeros == usize::MAX { "infinitely many".to_string() } else { c.rhp_zeros.to_string() };
                say!(
                    "{prefix}{} (right half-plane zeros: {z})",
                    if stable { "stable" } else { "unstable" }
                );
                stable
            }
            None => {
                let stable = is_stable_point(plant, &fam.region, r)?;
                let c = verify_point(plant, &fam.region, r[0], r[1], r[2])?;
                say!(
                    "{prefix}{} (inside {}, on boundary {}, outside {}, degree {})",
                    if stable { "stable" } else { "unstable" },
                    c.inside,
                    c.on_boundary,
                    c.outside,
                    plant.closed_loop(&fam.region, r).degree()
                );
                stable
            }
        };
        all &= stable;
    }
    if fam.len() > 1 {
        say!("family: {}", if all { "stable" } else { "unstable" });
    }
    Ok(())
}

fn peaks(fam: &PlantFamily) -> CliResult {
    for (i, plant) in fam.members.iter().enumerate() {
        if fam.len() > 1 {
            say!("member {i}:");
        }
        if plant.is_delay() || !fam.region.is_hurwitz() {
            return Err(Failure::Diagnostic(
                "peak search needs a delay-free plant and the left half-plane".into(),
            ));
        }
        if plant.nominal_degree() <= 6 {
            say!("no peaks: order {} <= 6, the counting condition is sufficient", plant.nominal_degree());
            continue;
        }
        let cells = member_partition(plant, &fam.region, None)?;
        say!("{:>12} {:>12} {:>12} {:>12} {:>12} {:>12}  remainder", "kP", "kI", "kD", "ω1", "ω2", "ω3");
        for c in cells.iter().filter(|c| c.admissible) {
            for p in stability_peaks(plant, &fam.region, c)? {
                say!(
                    "{:>12} {:>12} {:>12} {:>12} {:>12} {:>12}  {}",
                    sig(p.kp),
                    sig(p.ki),
                    sig(p.kd),
                    sig(p.omegas[0]),
                    sig(p.omegas[1]),
                    sig(p.omegas[2]),
                    if p.remainder_stable { "stable" } else { "unstable" }
                );
            }
        }
    }
    Ok(())
}
