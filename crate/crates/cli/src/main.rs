use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bbl_core::hull::{is_p_concave, p_concave_hull};
use bbl_core::lab::{parse_delta_grid, sweep, symdiff_slope, write_sweep_csv, Family};
use bbl_core::means::parse_ratio;
use bbl_core::stability::{default_c, WITNESS_REL_TOL};
use bbl_core::transport::HConvention;
use bbl_core::{
    certify_linear, certify_main, certify_symmetric_difference, cone_equipartition_2d, gfn, level_diagnostics,
    sup_convolution, GridFunction, MeanParams, StabilityReport,
};
use clap::{Args, Parser, Subcommand};

/// Sup-convolutions, p-concave hulls and stability certificates on grids.
#[derive(Parser)]
#[command(name = "bbl", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct MeanArgs {
    /// Weight λ, as a decimal or a fraction such as 1/2.
    #[arg(long, default_value = "1/2")]
    lambda: String,
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
}

impl MeanArgs {
    fn params(&self, dim: usize) -> Result<MeanParams> {
        let lambda = parse_ratio(&self.lambda)?;
        Ok(MeanParams::new(lambda, self.p, dim)?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Writes M*_{λ,p}(f, g).
    Supconv {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[command(flatten)]
        mean: MeanArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes the p-concave hull of f.
    Hull {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Level-set diagnostics of a one-dimensional triple.
    Diagnose {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[command(flatten)]
        mean: MeanArgs,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best translation and the square-root ratio.
    CertifySymdiff {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[command(flatten)]
        mean: MeanArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Shaving, p-concave witness and the linear ratio.
    CertifyLinear {
        #[arg(long)]
        f: PathBuf,
        /// Defaults to M*(f, f).
        #[arg(long)]
        h: Option<PathBuf>,
        #[command(flatten)]
        mean: MeanArgs,
        /// Shaving constant; defaults to 0.1·λ.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Writes the witness ℓ.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Translation, shaving of min(f, g(·+v)) and the combined distance.
    CertifyMain {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[command(flatten)]
        mean: MeanArgs,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Runs a scenario family over a grid of δ₀ values.
    Sweep {
        #[arg(long)]
        family: String,
        #[command(flatten)]
        mean: MeanArgs,
        /// lo:hi:logN, lo:hi:linN, or a comma-separated list.
        #[arg(long)]
        delta0: String,
        #[arg(long)]
        spacing: f64,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Adds a runtime_ms column (breaks byte-for-byte reproducibility).
        #[arg(long)]
        timing: bool,
    },
    /// Apex splitting a 2-D function evenly among the three sectors.
    Equipartition {
        #[arg(long)]
        f: PathBuf,
    },
}

fn load(path: &Path) -> Result<GridFunction> {
    gfn::load(path).with_context(|| format!("reading {}", path.display()))
}

fn save(f: &GridFunction, path: &Path) -> Result<()> {
    gfn::save(f, path).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

const REPORT_HEADER: [&str; 13] = [
    "command",
    "delta",
    "mass_f",
    "shift",
    "symdiff_distance",
    "linear_gap",
    "main_distance",
    "ratio_sqrt",
    "ratio_linear",
    "ratio_main",
    "shave_removed",
    "hypothesis_violations",
    "valid",
];

fn write_report(path: &Path, command: &str, r: &StabilityReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(REPORT_HEADER)?;
    let shift = r
        .best_shift
        .as_ref()
        .map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    w.write_record([
        command.to_string(),
        r.delta.to_string(),
        r.mass_f.to_string(),
        shift,
        opt(r.symdiff_distance),
        opt(r.linear_gap),
        opt(r.main_distance),
        opt(r.ratio_sqrt),
        opt(r.ratio_linear),
        opt(r.ratio_main),
        opt(r.shave_removed),
        r.hypothesis_violations.to_string(),
        r.valid().to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn summarize(command: &str, r: &StabilityReport) {
    println!("{command}: delta = {}", r.delta);
    if let Some(v) = &r.best_shift {
        println!("  best shift = {v:?}");
    }
    for (name, val) in [
        ("symdiff_distance", r.symdiff_distance),
        ("ratio_sqrt", r.ratio_sqrt),
        ("linear_gap", r.linear_gap),
        ("ratio_linear", r.ratio_linear),
        ("main_distance", r.main_distance),
        ("ratio_main", r.ratio_main),
        ("shave_removed", r.shave_removed),
    ] {
        if let Some(v) = val {
            println!("  {name} = {v}");
        }
    }
    if r.hypothesis_violations > 0 {
        println!("  hypothesis violations: {}", r.hypothesis_violations);
    }
    println!("  valid = {}", r.valid());
}

fn finish(command: &str, r: &StabilityReport, report: Option<&PathBuf>, witness: Option<&PathBuf>) -> Result<bool> {
    summarize(command, r);
    if let Some(path) = report {
        write_report(path, command, r)?;
    }
    if let (Some(path), Some(ell)) = (witness, &r.witness) {
        save(ell, path)?;
    }
    Ok(r.valid())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Supconv { f, g, mean, out } => {
            let (f, g) = (load(&f)?, load(&g)?);
            let h = sup_convolution(&f, &g, &mean.params(f.dim())?)?;
            save(&h, &out)?;
            println!("integral = {}", h.integral());
            Ok(true)
        }
        Cmd::Hull { f, p, out, report } => {
            let f = load(&f)?;
            let res = p_concave_hull(&f, p)?;
            save(&res.hull, &out)?;
            let ok = is_p_concave(&res.hull, p, WITNESS_REL_TOL * res.hull.max_value()).holds;
            println!("gap_mass = {}  facets = {}  p_concave = {ok}", res.gap_mass, res.facets.len());
            if let Some(path) = report {
                let mut w = csv::Writer::from_writer(create(&path)?);
                w.write_record(["p", "mass_f", "hull_mass", "gap_mass", "facets", "p_concave"])?;
                w.write_record([
                    p.to_string(),
                    f.integral().to_string(),
                    res.hull.integral().to_string(),
                    res.gap_mass.to_string(),
                    res.facets.len().to_string(),
                    ok.to_string(),
                ])?;
                w.flush()?;
            }
            Ok(ok)
        }
        Cmd::Diagnose { f, g, h, mean, alpha, out } => {
            let (f, g, h) = (load(&f)?, load(&g)?, load(&h)?);
            let d = level_diagnostics(&f, &g, &h, &mean.params(f.dim())?, alpha)?;
            let (conv, excess) = match d.h_convention {
                HConvention::SupConvolution => ("sup-convolution", 0.0),
                HConvention::Majorant { excess } => ("majorant", excess),
            };
            let mut w = csv::Writer::from_writer(create(&out)?);
            w.write_record([
                "alpha", "I1", "I2", "I3", "I4", "I5", "union_mass", "hull_gap_integral", "mass_f", "intervals",
                "h_convention", "h_excess",
            ])?;
            let mut rec = vec![d.alpha.to_string()];
            rec.extend(d.masses.iter().map(|m| m.to_string()));
            rec.extend([
                d.union_mass.to_string(),
                d.hull_gap_integral.to_string(),
                d.mass_f.to_string(),
                d.intervals.to_string(),
                conv.to_string(),
                excess.to_string(),
            ]);
            w.write_record(&rec)?;
            w.flush()?;
            println!("I-masses = {:?}  union = {}  h = {conv}", d.masses, d.union_mass);
            Ok(true)
        }
        Cmd::CertifySymdiff { f, g, h, mean, report } => {
            let (f, g, h) = (load(&f)?, load(&g)?, load(&h)?);
            let r = certify_symmetric_difference(&f, &g, &h, &mean.params(f.dim())?)?;
            finish("certify-symdiff", &r, report.as_ref(), None)
        }
        Cmd::CertifyLinear { f, h, mean, c, report, witness } => {
            let f = load(&f)?;
            let h = h.map(|p| load(&p)).transpose()?;
            let params = mean.params(f.dim())?;
            let c = c.unwrap_or_else(|| default_c(&params));
            let r = certify_linear(&f, h.as_ref(), &params, c)?;
            finish("certify-linear", &r, report.as_ref(), witness.as_ref())
        }
        Cmd::CertifyMain { f, g, h, mean, c, report, witness } => {
            let (f, g, h) = (load(&f)?, load(&g)?, load(&h)?);
            let params = mean.params(f.dim())?;
            let c = c.unwrap_or_else(|| default_c(&params));
            let r = certify_main(&f, &g, &h, &params, c)?;
            finish("certify-main", &r, report.as_ref(), witness.as_ref())
        }
        Cmd::Sweep { family, mean, delta0, spacing, c, seed, out, timing } => {
            let family: Family = family.parse()?;
            let params = mean.params(1)?;
            let grid = parse_delta_grid(&delta0)?;
            let c = c.unwrap_or_else(|| default_c(&params));
            let rows = sweep(family, &grid, &params, spacing, c, seed)?;
            write_sweep_csv(create(&out)?, &rows, params.p(), timing)?;
            let ok = rows.iter().all(|r| r.valid);
            println!("{} rows written to {}", rows.len(), out.display());
            if let Ok(fit) = symdiff_slope(&rows) {
                println!("symdiff slope = {:.4} ± {:.4}", fit.slope, fit.stderr);
            }
            Ok(ok)
        }
        Cmd::Equipartition { f } => {
            let f = load(&f)?;
            let e = cone_equipartition_2d(&f)?;
            println!("apex = {} {}", e.cone.apex[0], e.cone.apex[1]);
            println!("masses = {} {} {}", e.masses[0], e.masses[1], e.masses[2]);
            println!("residual = {}", e.residual);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validity check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
