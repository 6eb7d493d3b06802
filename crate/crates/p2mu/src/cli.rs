//! Command-line front end. Every subcommand writes its outputs into
//! `--out-dir` (CSV/JSON with floats at 17 significant digits, so identical
//! invocations produce byte-identical files) and finishes with a
//! `<stem>_manifest.json` recording the command, parameters, results, output
//! hashes, and wall-clock duration — the duration is the only field that
//! varies between runs.
//!
//! Exit codes: 0 success, 2 domain error (including argument parsing),
//! 3 nonexistence, 4 numerical failure. `P2MU_DEFAULT_TOL` overrides the
//! default tolerance of `hm --ktol` and `ed --tol`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::connection::{self, ShootingOutcome};
use crate::electrodiffusion::{self, EdParams, EdState};
use crate::series;
use crate::specfun;
use crate::tritronquee::{self, SectorSpec};
use crate::{Error, ProblemSpec};

/// Parse the process arguments, run one subcommand, and return the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version arrive here too; they are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Parser)]
#[command(
    name = "p2mu",
    version,
    about = "Numerics for the perturbed Painlevé II equation y'' = 2y^3 + x^mu y: \
             generalized Airy functions, formal series, the Hastings-McLeod-type \
             connection problem, tritronquée fans, Stokes gaps, and the \
             electro-diffusion model behind mu = 2"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Formal-series coefficients a_n = i q_n / sqrt(2) with exact rational q_n
    Coeffs {
        #[arg(long)]
        mu: u32,
        /// Highest coefficient index (inclusive)
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Connection constant k* of the Hastings-McLeod-type solution (odd mu)
    Hm {
        #[arg(long)]
        mu: u32,
        /// Bisection tolerance on k* (default: P2MU_DEFAULT_TOL or 1e-6)
        #[arg(long)]
        ktol: Option<f64>,
        /// Trim the trajectory file to x >= xleft
        #[arg(long, allow_hyphen_values = true)]
        xleft: Option<f64>,
        /// Lower end of the initial k bracket
        #[arg(long = "k-lo", default_value_t = 0.05)]
        k_lo: f64,
        /// Upper end of the initial k bracket
        #[arg(long = "k-hi", default_value_t = 1.0)]
        k_hi: f64,
        /// Also write an SVG plot of the trajectory
        #[arg(long)]
        plot: bool,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Classify one decay coefficient k: blowup, sign-cross, or bounded
    Classify {
        #[arg(long)]
        mu: u32,
        /// Coefficient of the decaying seed y ~ k f(x) at the right end
        #[arg(long)]
        k: f64,
        /// Left end of the classification window (default: the depth hm uses)
        #[arg(long, allow_hyphen_values = true)]
        xmin: Option<f64>,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Tritronquée-type solution on a fan of rays; exits 4 if poles appear
    Tritronquee {
        #[arg(long)]
        mu: u32,
        #[arg(long, default_value_t = 9)]
        rays: usize,
        #[arg(long, default_value_t = 40.0)]
        rfar: f64,
        #[arg(long, default_value_t = 3.0)]
        rin: f64,
        /// Inset from the maximal sector |arg x| < 2pi/(mu+2); negative values
        /// push the fan past the guaranteed pole-free region
        #[arg(long = "sector-margin", default_value_t = 0.1, allow_hyphen_values = true)]
        sector_margin: f64,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Measure the exponentially small Stokes gap along an anti-Stokes ray
    Stokes {
        #[arg(long)]
        mu: u32,
        /// Radius window "LO:HI" (default: a mu-dependent window in z)
        #[arg(long)]
        rrange: Option<String>,
        /// Ray angle theta (default: pi/(mu+2))
        #[arg(long, allow_hyphen_values = true)]
        ray: Option<f64>,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Integrate the electro-diffusion model ODEs and audit its first integral
    Ed {
        /// Debye length scale lambda > 0
        #[arg(long)]
        lambda: f64,
        /// Constant part A0 of the flux difference A(x) = A0 + eps x
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        a0: f64,
        /// Slope eps of the flux difference
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eps: f64,
        /// First-integral constant retained in the field equation
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        x1: f64,
        /// Initial cation concentration c+(x0)
        #[arg(long, default_value_t = 1.0)]
        cp: f64,
        /// Initial anion concentration c-(x0)
        #[arg(long, default_value_t = 1.0)]
        cm: f64,
        /// Initial field E(x0)
        #[arg(long = "E", default_value_t = 0.0, allow_hyphen_values = true)]
        e0: f64,
        /// Integrator tolerance (default: P2MU_DEFAULT_TOL or 1e-10)
        #[arg(long)]
        tol: Option<f64>,
        /// Also write an SVG plot of c+, c-, and E
        #[arg(long)]
        plot: bool,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Scaling constants (a, b) reducing the field equation to mu = 2
    EdReduce {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Table of the generalized Airy pair f, g and their Wronskian
    SpecfunTable {
        #[arg(long)]
        mu: u32,
        #[arg(long = "x-lo", default_value_t = 0.1)]
        x_lo: f64,
        #[arg(long = "x-hi", default_value_t = 20.0)]
        x_hi: f64,
        /// Number of grid points
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, value_enum, default_value = "log")]
        spacing: Spacing,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Spacing {
    Log,
    Linear,
}

fn dispatch(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Coeffs { mu, n, format, out_dir } => cmd_coeffs(mu, n, format, &out_dir),
        Cmd::Hm { mu, ktol, xleft, k_lo, k_hi, plot, out_dir } => {
            cmd_hm(mu, ktol, xleft, k_lo, k_hi, plot, &out_dir)
        }
        Cmd::Classify { mu, k, xmin, out_dir } => cmd_classify(mu, k, xmin, &out_dir),
        Cmd::Tritronquee { mu, rays, rfar, rin, sector_margin, out_dir } => {
            cmd_tritronquee(mu, rays, rfar, rin, sector_margin, &out_dir)
        }
        Cmd::Stokes { mu, rrange, ray, out_dir } => cmd_stokes(mu, rrange, ray, &out_dir),
        Cmd::Ed { lambda, a0, eps, c, x0, x1, cp, cm, e0, tol, plot, out_dir } => {
            cmd_ed(lambda, a0, eps, c, (x0, x1), (cp, cm, e0), tol, plot, &out_dir)
        }
        Cmd::EdReduce { lambda, eps, out_dir } => cmd_ed_reduce(lambda, eps, &out_dir),
        Cmd::SpecfunTable { mu, x_lo, x_hi, n, spacing, out_dir } => {
            cmd_specfun_table(mu, x_lo, x_hi, n, spacing, &out_dir)
        }
    }
}

// ---------------------------------------------------------------- plumbing

/// serde_json formatter printing every f64 as `{:.16e}` (17 significant
/// digits), matching the CSV convention.
struct Sci;

impl serde_json::ser::Formatter for Sci {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.8e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

fn to_json_16e<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci);
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Clone, Serialize)]
struct OutputFile {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    version: String,
    parameters: Value,
    results: Value,
    outputs: Vec<OutputFile>,
    duration_seconds: f64,
}

/// One command's output directory plus the growing list of files written,
/// closed by `finish`, which writes `<stem>_manifest.json`.
struct Run {
    t0: Instant,
    dir: PathBuf,
    command: String,
    parameters: Value,
    outputs: Vec<OutputFile>,
}

impl Run {
    fn new(dir: &Path, command: &str, parameters: Value) -> Run {
        Run {
            t0: Instant::now(),
            dir: dir.to_path_buf(),
            command: command.to_string(),
            parameters,
            outputs: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), Error> {
        let file = write_file(&self.dir, name, content)?;
        self.outputs.push(file);
        Ok(())
    }

    fn finish(self, stem: &str, results: Value) -> Result<(), Error> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            parameters: self.parameters,
            results,
            outputs: self.outputs,
            duration_seconds: self.t0.elapsed().as_secs_f64(),
        };
        write_file(&self.dir, &format!("{stem}_manifest.json"), &to_json_16e(&manifest))?;
        Ok(())
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<OutputFile, Error> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Numerical(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| Error::Numerical(format!("cannot write {}: {e}", path.display())))?;
    let digest = Sha256::digest(content.as_bytes());
    let mut sha256 = String::with_capacity(64);
    for b in digest {
        let _ = write!(sha256, "{b:02x}");
    }
    Ok(OutputFile {
        path: name.to_string(),
        bytes: content.len() as u64,
        sha256,
    })
}

/// Explicit flag value, else `P2MU_DEFAULT_TOL`, else the built-in default.
fn resolve_tol(explicit: Option<f64>, fallback: f64) -> Result<f64, Error> {
    let tol = match explicit {
        Some(t) => t,
        None => match std::env::var("P2MU_DEFAULT_TOL") {
            Ok(s) => s.trim().parse::<f64>().map_err(|_| {
                Error::Domain(format!("P2MU_DEFAULT_TOL is not a number: {s:?}"))
            })?,
            Err(_) => fallback,
        },
    };
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(Error::Domain(format!(
            "tolerance must be a positive number, got {tol}"
        )))
    }
}

fn outcome_parts(outcome: &ShootingOutcome) -> (&'static str, f64) {
    match outcome {
        ShootingOutcome::Blowup { x0 } => ("blowup", *x0),
        ShootingOutcome::SignCross { x_zero } => ("sign-cross", *x_zero),
        ShootingOutcome::Bounded { x_reach } => ("bounded", *x_reach),
    }
}

/// Minimal deterministic line plot: fixed canvas, fixed palette, `{:.3}`
/// coordinates. Non-finite points are dropped.
fn svg_plot(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    const L: f64 = 70.0;
    const R: f64 = 780.0;
    const T: f64 = 40.0;
    const B: f64 = 460.0;

    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in series {
        for p in pts.iter().filter(finite) {
            x_min = x_min.min(p.0);
            x_max = x_max.max(p.0);
            y_min = y_min.min(p.1);
            y_max = y_max.max(p.1);
        }
    }
    if !(x_min < x_max) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if !(y_min < y_max) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = 0.04 * (y_max - y_min);
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);
    let sx = |x: f64| L + (x - x_min) / (x_max - x_min) * (R - L);
    let sy = |y: f64| B - (y - y_lo) / (y_hi - y_lo) * (B - T);

    let mut s = String::new();
    s.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n",
    );
    s.push_str("<rect width=\"800\" height=\"500\" fill=\"#ffffff\"/>\n");
    let _ = writeln!(
        s,
        "<text x=\"{L}\" y=\"24\" font-family=\"monospace\" font-size=\"15\">{title}</text>"
    );
    let _ = writeln!(
        s,
        "<rect x=\"{L}\" y=\"{T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\"/>",
        R - L,
        B - T
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut line = String::new();
        for p in pts.iter().filter(finite) {
            let _ = write!(line, "{:.3},{:.3} ", sx(p.0), sy(p.1));
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            line.trim_end()
        );
        let ly = 50.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"620\" y1=\"{ly}\" x2=\"650\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"656\" y=\"{}\" font-family=\"monospace\" font-size=\"13\">{name}</text>",
            ly + 4.0
        );
    }
    for (x, y, anchor, label) in [
        (L, B + 20.0, "middle", format!("{x_min:.3e}")),
        (R, B + 20.0, "middle", format!("{x_max:.3e}")),
        (L - 6.0, B, "end", format!("{y_lo:.3e}")),
        (L - 6.0, T + 4.0, "end", format!("{y_hi:.3e}")),
    ] {
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-family=\"monospace\" font-size=\"12\">{label}</text>"
        );
    }
    s.push_str("</svg>\n");
    s
}

// ------------------------------------------------------------- subcommands

fn cmd_coeffs(mu: u32, n: usize, format: OutFormat, dir: &Path) -> Result<(), Error> {
    let format_name = match format {
        OutFormat::Csv => "csv",
        OutFormat::Json => "json",
    };
    let mut run = Run::new(dir, "coeffs", json!({"mu": mu, "n": n, "format": format_name}));
    let coeffs = series::series_coefficients(mu, n)?;

    println!("a_n = i q_n / sqrt(2), mu = {mu}");
    println!("{:>3}  {:>28}  {:>24}", "n", "q_n", "Im a_n");
    for i in 0..=n {
        println!("{i:>3}  {:>28}  {:>24.16e}", coeffs.exact[i].to_string(), coeffs.a_imag(i));
    }

    let stem = format!("coeffs_mu{mu}");
    match format {
        OutFormat::Csv => {
            let mut csv = String::from("n,q_rational,imag\n");
            for i in 0..=n {
                let _ = writeln!(csv, "{i},{},{:.16e}", coeffs.exact[i], coeffs.a_imag(i));
            }
            run.write(&format!("{stem}.csv"), &csv)?;
        }
        OutFormat::Json => {
            let rows: Vec<Value> = (0..=n)
                .map(|i| {
                    json!({
                        "n": i,
                        "q_numer": coeffs.exact[i].numer().to_string(),
                        "q_denom": coeffs.exact[i].denom().to_string(),
                        "imag": coeffs.a_imag(i),
                    })
                })
                .collect();
            run.write(
                &format!("{stem}.json"),
                &to_json_16e(&json!({"mu": mu, "coefficients": rows})),
            )?;
        }
    }
    let nonzero = (0..=n).filter(|&i| coeffs.a_imag(i) != 0.0).count();
    run.finish(&stem, json!({"rows": n + 1, "nonzero": nonzero}))
}

fn cmd_hm(
    mu: u32,
    ktol: Option<f64>,
    xleft: Option<f64>,
    k_lo: f64,
    k_hi: f64,
    plot: bool,
    dir: &Path,
) -> Result<(), Error> {
    let spec = ProblemSpec::new(mu)?;
    let ktol = resolve_tol(ktol, 1e-6)?;
    let mut run = Run::new(
        dir,
        "hm",
        json!({
            "mu": mu, "ktol": ktol, "xleft": xleft,
            "k_lo": k_lo, "k_hi": k_hi, "plot": plot
        }),
    );

    let result = connection::find_kstar(&spec, (k_lo, k_hi), ktol).map_err(|e| match e {
        Error::NoSolution(m) => Error::NoSolution(format!(
            "no Hastings-McLeod-type solution exists for even mu: {m}"
        )),
        other => other,
    })?;

    let x_cut = match xleft {
        Some(xl) => {
            if !(xl >= result.x_left && xl < result.x_start) {
                return Err(Error::Domain(format!(
                    "xleft = {xl} is outside the computed trajectory [{}, {}]",
                    result.x_left, result.x_start
                )));
            }
            xl
        }
        None => result.x_left,
    };

    let mut samples: Vec<_> = result.hm_trajectory.samples.iter().collect();
    if samples.len() > 1 && samples[0].x.re > samples[samples.len() - 1].x.re {
        samples.reverse();
    }
    let mut csv = String::from("x,y,yp\n");
    let mut pts_y = Vec::new();
    let mut pts_yp = Vec::new();
    for s in &samples {
        let x = s.x.re;
        if x + 1e-12 < x_cut {
            continue;
        }
        let _ = writeln!(csv, "{x:.16e},{:.16e},{:.16e}", s.y.re, s.yp.re);
        pts_y.push((x, s.y.re));
        pts_yp.push((x, s.yp.re));
    }

    let stem = format!("hm_mu{mu}");
    run.write(&format!("{stem}_trajectory.csv"), &csv)?;
    let history: Vec<Value> = result
        .history
        .iter()
        .map(|(k, o)| {
            let (kind, x) = outcome_parts(o);
            json!({"k": k, "outcome": kind, "x": x})
        })
        .collect();
    run.write(
        &format!("{stem}.json"),
        &to_json_16e(&json!({
            "mu": mu,
            "k_star": result.k_star,
            "bracket": [result.bracket.0, result.bracket.1],
            "x_start": result.x_start,
            "x_left": result.x_left,
            "history": history,
        })),
    )?;
    if plot {
        let svg = svg_plot(
            &format!("Hastings-McLeod-type trajectory, mu = {mu}"),
            &[("y", pts_y.clone()), ("y'", pts_yp)],
        );
        run.write(&format!("{stem}.svg"), &svg)?;
    }

    // Left-end report: the accepted trajectory against the real-mode series.
    let sc = series::series_coefficients(mu, 48)?;
    let y_series = sc.eval_real_negative(result.x_left, 48)?.value;
    let y_end = samples
        .first()
        .map(|s| s.y.re)
        .ok_or_else(|| Error::Numerical("empty accepted trajectory".into()))?;
    let dev = ((y_end - y_series) / y_series).abs();

    println!("k* = {:.16e}", result.k_star);
    println!(
        "bracket = [{:.16e}, {:.16e}] after {} shots",
        result.bracket.0,
        result.bracket.1,
        result.history.len()
    );
    println!(
        "trajectory: {} samples on [{:.6}, {:.6}]",
        pts_y.len(),
        x_cut,
        result.x_start
    );
    println!(
        "left end: y({:.6}) = {y_end:.10e}, real-mode series {y_series:.10e} (rel dev {dev:.2e})",
        result.x_left
    );

    run.finish(
        &stem,
        json!({
            "k_star": result.k_star,
            "bracket": [result.bracket.0, result.bracket.1],
            "shots": result.history.len(),
            "x_left": result.x_left,
            "x_start": result.x_start,
            "trajectory_rows": pts_y.len(),
            "left_end_series_rel_dev": dev,
        }),
    )
}

fn cmd_classify(mu: u32, k: f64, xmin: Option<f64>, dir: &Path) -> Result<(), Error> {
    let spec = ProblemSpec::new(mu)?;
    // Same default depth hm validates against: |x|^alpha >= 15, and the
    // classical -10 for mu = 1.
    let deep = if mu == 1 { 10.0 } else { 0.0 };
    let x_min = xmin.unwrap_or_else(|| -(15.0f64.powf(1.0 / spec.alpha).max(deep)));
    let mut run = Run::new(dir, "classify", json!({"mu": mu, "k": k, "xmin": xmin}));

    let outcome = connection::classify_k(&spec, k, x_min)?;
    let (kind, x) = outcome_parts(&outcome);
    match outcome {
        ShootingOutcome::Blowup { x0 } => println!("blowup: movable pole near x = {x0:.6}"),
        ShootingOutcome::SignCross { x_zero } => println!("sign-cross: y = 0 near x = {x_zero:.6}"),
        ShootingOutcome::Bounded { x_reach } => {
            println!("bounded: positive and finite down to x = {x_reach:.6}")
        }
    }

    let stem = format!("classify_mu{mu}");
    let payload = json!({"mu": mu, "k": k, "x_min": x_min, "outcome": kind, "x": x});
    run.write(&format!("{stem}.json"), &to_json_16e(&payload))?;
    run.finish(&stem, json!({"outcome": kind, "x": x}))
}

fn cmd_tritronquee(
    mu: u32,
    rays: usize,
    rfar: f64,
    rin: f64,
    sector_margin: f64,
    dir: &Path,
) -> Result<(), Error> {
    let spec = ProblemSpec::new(mu)?;
    let mut sector = SectorSpec::default_for(&spec);
    sector.margin = sector_margin;
    sector.half_width = 2.0 * std::f64::consts::PI / (mu as f64 + 2.0) - sector_margin;
    sector.r_in = rin;
    sector.r_far = rfar;
    let mut run = Run::new(
        dir,
        "tritronquee",
        json!({
            "mu": mu, "rays": rays, "rfar": rfar, "rin": rin,
            "sector_margin": sector_margin
        }),
    );

    let fan = tritronquee::build_tritronquee(&spec, &sector, rays)?;

    let mut csv = String::from("ray_theta,s,x_re,x_im,y_re,y_im,yp_re,yp_im\n");
    let mut n_samples = 0usize;
    for ray in &fan.rays {
        for s in &ray.trajectory.samples {
            let _ = writeln!(
                csv,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                ray.theta, s.s, s.x.re, s.x.im, s.y.re, s.y.im, s.yp.re, s.yp.im
            );
            n_samples += 1;
        }
    }
    let stem = format!("tritronquee_mu{mu}");
    run.write(&format!("{stem}_fan.csv"), &csv)?;

    let poles: Vec<Value> = fan
        .pole_events
        .iter()
        .map(|p| {
            json!({
                "ray_theta": p.ray_theta,
                "waypoint_r": p.waypoint_r,
                "x0_re": p.event.x0.re,
                "x0_im": p.event.x0.im,
                "residue_sign": p.event.residue_sign,
                "quality": p.event.quality,
            })
        })
        .collect();
    let n_poles = poles.len();
    let worst = fan.worst_cross_check();
    run.finish(
        &stem,
        json!({
            "rays": fan.rays.len(),
            "samples": n_samples,
            "pole_events": poles,
            "cross_checks": fan.cross_checks.len(),
            "worst_cross_check": worst,
        }),
    )?;

    if n_poles > 0 {
        for p in &fan.pole_events {
            println!(
                "pole on ray theta = {:+.6} near waypoint r = {:.3}: x0 = {:.6} {:+.6}i \
                 (residue sign {:+.0}, fit quality {:.2e})",
                p.ray_theta, p.waypoint_r, p.event.x0.re, p.event.x0.im,
                p.event.residue_sign, p.event.quality
            );
        }
        return Err(Error::Numerical(format!(
            "{n_poles} pole event(s) in the requested sector"
        )));
    }
    println!(
        "fan: {} rays, r in [{rin}, {rfar}], 0 pole events, worst cross-check {worst:.3e}",
        fan.rays.len()
    );
    Ok(())
}

fn cmd_stokes(mu: u32, rrange: Option<String>, ray: Option<f64>, dir: &Path) -> Result<(), Error> {
    let spec = ProblemSpec::new(mu)?;
    let (r_lo, r_hi) = match &rrange {
        Some(s) => parse_range(s)?,
        None => {
            // Fixed window in z = x^alpha/alpha so every mu sees the same
            // exponential decade; mu = 1 gives exactly [4, 9].
            let r_of_z = |z: f64| (spec.alpha * z).powf(1.0 / spec.alpha);
            (r_of_z(16.0 / 3.0), r_of_z(18.0))
        }
    };
    let mut run = Run::new(
        dir,
        "stokes",
        json!({"mu": mu, "rrange": rrange, "ray": ray, "r_lo": r_lo, "r_hi": r_hi}),
    );

    let fit = tritronquee::stokes_gap(&spec, ray, r_lo, r_hi)?;
    let points: Vec<Value> = fit
        .points
        .iter()
        .map(|p| json!({"r": p.r, "gap": p.gap, "noise_floor": p.noise_floor, "used": p.used}))
        .collect();
    let used = fit.points.iter().filter(|p| p.used).count();

    let stem = format!("stokes_mu{mu}");
    run.write(
        &format!("{stem}.json"),
        &to_json_16e(&json!({
            "mu": fit.mu,
            "ray_angle": fit.ray_angle,
            "slope": fit.slope,
            "expected_slope": fit.expected_slope,
            "prefactor_exponent": fit.prefactor_exponent,
            "fit_residual": fit.fit_residual,
            "points": points,
        })),
    )?;

    println!("ray theta = {:.6}, window r in [{r_lo:.6}, {r_hi:.6}]", fit.ray_angle);
    println!(
        "slope vs z = {:.6e} (expected {:.6e}, deviation {:+.2}%)",
        fit.slope,
        fit.expected_slope,
        (fit.slope / fit.expected_slope - 1.0) * 100.0
    );
    println!(
        "prefactor exponent = {:.3e}, fit residual = {:.2e}, used {used} of {} radii",
        fit.prefactor_exponent,
        fit.fit_residual,
        fit.points.len()
    );

    run.finish(
        &stem,
        json!({
            "slope": fit.slope,
            "expected_slope": fit.expected_slope,
            "prefactor_exponent": fit.prefactor_exponent,
            "fit_residual": fit.fit_residual,
            "used": used,
            "points": fit.points.len(),
        }),
    )
}

fn parse_range(s: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Domain(format!("--rrange wants \"LO:HI\" with numbers, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

#[allow(clippy::too_many_arguments)]
fn cmd_ed(
    lambda: f64,
    a0: f64,
    eps: f64,
    c: f64,
    (x0, x1): (f64, f64),
    (cp, cm, e0): (f64, f64, f64),
    tol: Option<f64>,
    plot: bool,
    dir: &Path,
) -> Result<(), Error> {
    let params = EdParams::new(lambda, a0, eps)?.with_c(c);
    if !(x1 > x0) {
        return Err(Error::Domain(format!("need x1 > x0 (got x0 = {x0}, x1 = {x1})")));
    }
    let tol = resolve_tol(tol, 1e-10)?;
    let mut run = Run::new(
        dir,
        "ed",
        json!({
            "lambda": lambda, "a0": a0, "eps": eps, "c": c,
            "x0": x0, "x1": x1, "cp": cp, "cm": cm, "E": e0,
            "tol": tol, "plot": plot
        }),
    );

    let init = EdState::new(x0, cp, cm, e0);
    let q0 = electrodiffusion::conserved_quantity(&params, &init);
    let traj = electrodiffusion::integrate_ed(&params, &init, x1, tol)?;
    let drift = traj
        .samples
        .iter()
        .map(|s| (electrodiffusion::conserved_quantity(&params, s) - q0).abs())
        .fold(0.0, f64::max);
    let residual = electrodiffusion::field_equation_residual(&params, &traj);

    run.write("ed_trajectory.csv", &traj.to_csv())?;
    if plot {
        let series: Vec<(&str, Vec<(f64, f64)>)> = vec![
            ("c+", traj.samples.iter().map(|s| (s.x, s.c_plus)).collect()),
            ("c-", traj.samples.iter().map(|s| (s.x, s.c_minus)).collect()),
            ("E", traj.samples.iter().map(|s| (s.x, s.e)).collect()),
        ];
        run.write("ed.svg", &svg_plot("electro-diffusion trajectory", &series))?;
    }

    println!("integrated [{x0}, {x1}]: {} samples", traj.samples.len());
    println!("Q = {q0:.16e}, max drift = {drift:.3e}");
    println!("field-equation residual (C = {c}) = {residual:.3e}");
    if let Some(xv) = traj.positivity_violation {
        println!("warning: a concentration goes negative near x = {xv:.6}");
    }

    run.finish(
        "ed",
        json!({
            "q0": q0,
            "q_drift_abs": drift,
            "field_residual": residual,
            "positivity_violation": traj.positivity_violation,
            "samples": traj.samples.len(),
        }),
    )
}

fn cmd_ed_reduce(lambda: f64, eps: f64, dir: &Path) -> Result<(), Error> {
    let _ = EdParams::new(lambda, 0.0, eps)?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!(
            "not reducible to the mu = 2 equation: need eps > 0 (got {eps})"
        )));
    }
    let mut run = Run::new(dir, "ed-reduce", json!({"lambda": lambda, "eps": eps}));
    let b = (lambda * lambda / eps).powf(0.25);
    let a = 2.0 / b;

    let stem = "ed_reduce";
    run.write(
        &format!("{stem}.json"),
        &to_json_16e(&json!({"lambda": lambda, "eps": eps, "a": a, "b": b})),
    )?;
    println!("a = {a:.16e}");
    println!("b = {b:.16e}");
    println!("y(t) = E(b t)/a solves y'' = 2 y^3 + t^2 y in the mapped variable t = x/b");
    run.finish(stem, json!({"a": a, "b": b}))
}

fn cmd_specfun_table(
    mu: u32,
    x_lo: f64,
    x_hi: f64,
    n: usize,
    spacing: Spacing,
    dir: &Path,
) -> Result<(), Error> {
    let spec = ProblemSpec::new(mu)?;
    if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) || n < 2 {
        return Err(Error::Domain(format!(
            "need finite x_lo < x_hi and n >= 2 (got x_lo = {x_lo}, x_hi = {x_hi}, n = {n})"
        )));
    }
    if matches!(spacing, Spacing::Log) && !(x_lo > 0.0) {
        return Err(Error::Domain(format!(
            "log spacing needs x_lo > 0, got {x_lo}"
        )));
    }
    let spacing_name = match spacing {
        Spacing::Log => "log",
        Spacing::Linear => "linear",
    };
    let mut run = Run::new(
        dir,
        "specfun-table",
        json!({"mu": mu, "x_lo": x_lo, "x_hi": x_hi, "n": n, "spacing": spacing_name}),
    );

    let grid: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            match spacing {
                Spacing::Log => x_lo * (x_hi / x_lo).powf(t),
                Spacing::Linear => x_lo + t * (x_hi - x_lo),
            }
        })
        .collect();

    let mut csv = String::from("x,f,fp,g,gp,wronskian\n");
    let mut worst = 0.0f64;
    for &x in &grid {
        let v = specfun::gen_airy(&spec, x)?;
        worst = worst.max((v.wronskian() - 2.0).abs() / 2.0);
        let _ = writeln!(
            csv,
            "{x:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            v.f(),
            v.fp(),
            v.g(),
            v.gp(),
            v.wronskian()
        );
    }
    let stem = format!("specfun_mu{mu}");
    run.write(&format!("{stem}.csv"), &csv)?;
    println!(
        "{n} points on [{x_lo}, {x_hi}] ({spacing_name}), max |W/2 - 1| = {worst:.3e}"
    );
    run.finish(&stem, json!({"points": n, "max_wronskian_rel_dev": worst}))
}
