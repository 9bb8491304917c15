//! Command-line driver: `synth`, `degrade`, `fuse`, `eval`, `render`.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for failures while
//! running a command. Diagnostics go to stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::degradation::{blur_downsample_matrix, DegradationModel};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_mat, read_tensor, render_composite, write_mat, write_tensor};
use crate::metrics::evaluate;
use crate::solver::{run, DlrrfConfig, FusionResult};
use crate::synth::{generate_scene, make_variability_pair, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// File names written by `degrade` into its output directory.
pub const Y_FILE: &str = "y.tensor";
pub const Z_FILE: &str = "z.tensor";
pub const R_FILE: &str = "r.tensor";
pub const SRF_TRUE_FILE: &str = "srf_true.tensor";
pub const X_CHANGED_FILE: &str = "x_changed.tensor";
/// Scene parameters plus the degradation flags, as `key = value` lines.
pub const DEGRADE_RECORD_FILE: &str = "degrade.scenario";

#[derive(Parser, Debug)]
#[command(name = "dlrrf", version, about = "Hyperspectral/multispectral fusion under inter-image variability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a ground-truth scene and its scenario sidecar.
    Synth(SynthArgs),
    /// Simulate the HSI/MSI observation pair from a scene.
    Degrade(DegradeArgs),
    /// Fuse an observation pair.
    Fuse(FuseArgs),
    /// Compare an estimate against a reference.
    Eval(EvalArgs),
    /// Write a three-band PPM composite.
    Render(RenderArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "W")]
    width: usize,
    #[arg(long = "H")]
    height: usize,
    #[arg(long = "S")]
    bands: usize,
    #[arg(long, default_value_t = 4)]
    endmembers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "dr-mag", default_value_t = 0.0)]
    dr_mag: f64,
    #[arg(long = "change-frac", default_value_t = 0.0)]
    change_frac: f64,
}

#[derive(Args, Debug)]
struct DegradeArgs {
    /// Scene written by `synth`; its sidecar supplies the variability settings.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    sf: usize,
    #[arg(long = "blur-sigma", default_value_t = 1.0)]
    blur_sigma: f64,
    /// `inf` disables noise.
    #[arg(long = "hsi-snr", default_value_t = 30.0)]
    hsi_snr: f64,
    #[arg(long = "msi-snr", default_value_t = 40.0)]
    msi_snr: f64,
    /// Number of multispectral bands.
    #[arg(long = "s")]
    ms_bands: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to the directory of `--in`.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    z: PathBuf,
    /// Nominal spectral response.
    #[arg(long)]
    r: PathBuf,
    /// Key-value solver configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Blur used when the HSI was simulated.
    #[arg(long = "blur-sigma", default_value_t = 1.0)]
    blur_sigma: f64,
    /// Where to write `R + dR`; defaults to `<out>.srf`.
    #[arg(long = "srf-out")]
    srf_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    sf: usize,
    /// Metric CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-band PSNR CSV.
    #[arg(long = "per-band")]
    per_band: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Band indices as `r,g,b`.
    #[arg(long, value_parser = parse_bands)]
    bands: [usize; 3],
    #[arg(long)]
    out: PathBuf,
}

fn parse_bands(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated band indices, got '{s}'"));
    }
    let mut out = [0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|_| format!("invalid band index '{p}'"))?;
    }
    Ok(out)
}

/// Sidecar path of a scene file.
pub fn sidecar_path(scene: &Path) -> PathBuf {
    let mut name = scene.as_os_str().to_owned();
    name.push(".scenario");
    PathBuf::from(name)
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SceneSpec {
        width: a.width,
        height: a.height,
        bands: a.bands,
        n_endmembers: a.endmembers,
        seed: a.seed,
        dr_magnitude: a.dr_mag,
        change_fraction: a.change_frac,
    };
    let x = generate_scene(&spec)?;
    write_tensor(&a.out, &x)?;
    fs::write(sidecar_path(&a.out), spec.to_kv_string())?;
    info!("wrote {}x{}x{} scene to {}", a.width, a.height, a.bands, a.out.display());
    Ok(())
}

fn degrade(a: DegradeArgs) -> Result<()> {
    let x = read_tensor(&a.input)?;
    let [w, h, s] = x.dims();
    let sidecar = sidecar_path(&a.input);
    let spec = if sidecar.exists() {
        SceneSpec::from_kv_str(&fs::read_to_string(&sidecar)?)?
    } else {
        SceneSpec::new(w, h, s, 1, 0)
    };
    if [spec.width, spec.height, spec.bands] != [w, h, s] {
        return Err(Error::DimensionMismatch(format!(
            "sidecar describes {}x{}x{}, scene is {w}x{h}x{s}",
            spec.width, spec.height, spec.bands
        )));
    }
    let model = DegradationModel::new(w, h, s, a.ms_bands, a.sf, a.blur_sigma, a.hsi_snr, a.msi_snr)?;
    let pair = make_variability_pair(&x, &spec, &model, a.seed)?;
    let dir = match a.out_dir {
        Some(d) => d,
        None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir)?;
    }
    write_tensor(dir.join(Y_FILE), &pair.y)?;
    write_tensor(dir.join(Z_FILE), &pair.z)?;
    write_mat(dir.join(R_FILE), &model.r)?;
    write_mat(dir.join(SRF_TRUE_FILE), &pair.srf_true)?;
    write_tensor(dir.join(X_CHANGED_FILE), &pair.x_changed)?;
    let record = format!(
        "{}sf = {}\nblur_sigma = {}\nhsi_snr = {}\nmsi_snr = {}\nms_bands = {}\ndegrade_seed = {}\n",
        spec.to_kv_string(),
        a.sf,
        a.blur_sigma,
        a.hsi_snr,
        a.msi_snr,
        a.ms_bands,
        a.seed
    );
    fs::write(dir.join(DEGRADE_RECORD_FILE), record)?;
    info!("wrote observation pair to {}", dir.display());
    Ok(())
}

fn fuse(a: FuseArgs) -> Result<()> {
    let y = read_tensor(&a.y)?;
    let z = read_tensor(&a.z)?;
    let r = read_mat(&a.r)?;
    let config = match &a.config {
        Some(p) => DlrrfConfig::from_kv_str(&fs::read_to_string(p)?)?,
        None => DlrrfConfig::default(),
    };
    let [w, h, _] = y.dims();
    let [big_w, big_h, _] = z.dims();
    if w == 0 || h == 0 || big_w % w != 0 || big_h % h != 0 || big_w / w != big_h / h {
        return Err(Error::DimensionMismatch(format!(
            "MSI grid {big_w}x{big_h} is not an integer multiple of the HSI grid {w}x{h}"
        )));
    }
    let sf = big_w / w;
    let p1 = blur_downsample_matrix(big_w, sf, a.blur_sigma)?;
    let p2 = blur_downsample_matrix(big_h, sf, a.blur_sigma)?;
    let result = run(&y, &z, &p1, &p2, &r, &config)?;
    info!(
        "{} iterations, converged: {}, final h {:.6e}",
        result.iterations,
        result.converged,
        result.objective_trace.last().copied().unwrap_or(f64::NAN)
    );
    write_tensor(&a.out, &result.x_hat)?;
    let srf_out = a.srf_out.clone().unwrap_or_else(|| {
        let mut p = a.out.as_os_str().to_owned();
        p.push(".srf");
        PathBuf::from(p)
    });
    write_mat(srf_out, &result.srf_hat)?;
    fs::write(&a.trace, trace_csv(&result))?;
    Ok(())
}

/// `iter,h,f_explicit_or_blank,eta_k`; row 0 is the initial state and has no `eta_k`.
pub fn trace_csv(result: &FusionResult) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut out = String::from("iter,h,f_explicit_or_blank,eta_k\n");
    for (k, h) in result.objective_trace.iter().enumerate() {
        let f = result.explicit_trace.as_ref().map(|t| t[k]);
        let eta = k.checked_sub(1).map(|i| result.eta_trace[i]);
        out.push_str(&format!("{k},{},{},{}\n", fmt_f64(*h), opt(f), opt(eta)));
    }
    out
}

fn eval(a: EvalArgs) -> Result<()> {
    let reference = read_tensor(&a.reference)?;
    let est = read_tensor(&a.est)?;
    let report = evaluate(&reference, &est, a.sf)?;
    match &a.out {
        Some(p) => fs::write(p, report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    if let Some(p) = &a.per_band {
        fs::write(p, report.per_band_csv())?;
    }
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let x = read_tensor(&a.input)?;
    render_composite(&x, a.bands, &a.out)
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Degrade(a) => degrade(a),
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
