use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lod_stokes::experiment::{
    coefficient_for, fit_eoc, run_convergence_study, run_decay_study, saturating_ell, write_csv, Ell, ErrorColumn, ExperimentConfig,
    StudyResult,
};
use lod_stokes::fem::FineSpace;
use lod_stokes::lod::{write_basis, LodContext};
use lod_stokes::mesh::MeshHierarchy;
use lod_stokes::{Error, Result};

#[derive(Parser)]
#[command(name = "lod-stokes", version, about = "High-order LOD for heterogeneous Stokes flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Errors against the fine reference over a list of coarse sizes.
    Converge(Common),
    /// Patch-order sweep at the first coarse size.
    Decay(Common),
    /// Write the multiscale basis at the first coarse size and patch order.
    BasisDump(Common),
    /// Single cell: first coarse size, first patch order.
    Solve(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    /// Comma separated patch orders, `full` for whole-domain patches.
    #[arg(long)]
    ell: Option<String>,
    /// Comma separated coarse sizes, e.g. `2^-1,2^-2,0.125`.
    #[arg(long = "H-list")]
    h_list: Option<String>,
    #[arg(long)]
    fine_level: Option<usize>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nu_min: Option<f64>,
    #[arg(long)]
    nu_max: Option<f64>,
    #[arg(long)]
    inclusion_value: Option<f64>,
    /// Constant viscosity instead of the random field.
    #[arg(long)]
    nu: Option<f64>,
    /// `default` for f = (-y, x^4), or `zero`.
    #[arg(long)]
    source: Option<String>,
    /// Write 0 in the wall_s column so output is byte reproducible.
    #[arg(long)]
    no_time: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_kv(&std::fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        let flags: [(&str, Option<String>); 12] = [
            ("m", self.m.map(|v| v.to_string())),
            ("ell", self.ell.clone()),
            ("H-list", self.h_list.clone()),
            ("fine-level", self.fine_level.map(|v| v.to_string())),
            ("nu", self.nu.map(|v| v.to_string())),
            ("eps", self.eps.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("nu-min", self.nu_min.map(|v| v.to_string())),
            ("nu-max", self.nu_max.map(|v| v.to_string())),
            ("inclusion-value", self.inclusion_value.map(|v| v.to_string())),
            ("source", self.source.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if self.no_time {
            cfg.record_time = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn report(result: &StudyResult) {
    for f in &result.failures {
        eprintln!("cell H={} ell={} failed: {}", f.h, f.ell, f.message);
    }
    for (h, ell) in &result.saturating_ell {
        eprintln!("H={h}: patches cover the domain from ell={ell}");
    }
}

fn converge(cfg: &ExperimentConfig) -> Result<()> {
    let result = run_convergence_study(cfg)?;
    let mut out = output(cfg)?;
    write_csv(&result.records, &mut out)?;
    out.flush()?;
    report(&result);
    let mut ells: Vec<usize> = result.records.iter().map(|r| r.ell).collect();
    ells.sort();
    ells.dedup();
    for ell in ells {
        let rows: Vec<_> = result.records.iter().filter(|r| r.ell == ell && !r.is_failed()).cloned().collect();
        if rows.len() < 2 {
            continue;
        }
        for (name, col) in [
            ("err_u_H1", ErrorColumn::UH1),
            ("err_u_L2", ErrorColumn::UL2),
            ("err_p_pp_L2", ErrorColumn::PressurePP),
        ] {
            match fit_eoc(&rows, col) {
                Ok(rates) => {
                    let r: Vec<String> = rates
                        .iter()
                        .map(|e| if e.flagged { "inf".to_string() } else { format!("{:.2}", e.rate) })
                        .collect();
                    eprintln!("ell={ell} EOC {name}: {}", r.join(" "));
                }
                Err(e) => eprintln!("ell={ell} EOC {name}: {e}"),
            }
        }
    }
    Ok(())
}

fn decay(cfg: &ExperimentConfig) -> Result<()> {
    let result = run_decay_study(cfg)?;
    let mut out = output(cfg)?;
    write_csv(&result.records, &mut out)?;
    out.flush()?;
    report(&result);
    Ok(())
}

fn first_cell(cfg: &ExperimentConfig) -> Result<(FineSpace, usize)> {
    let level = cfg.h_levels[0];
    let space = FineSpace::new(MeshHierarchy::new(level, cfg.fine_level, true)?);
    let ell = match cfg.ell[0] {
        Ell::Fixed(l) => l,
        Ell::Full => saturating_ell(space.hierarchy().coarse())?,
    };
    Ok((space, ell))
}

fn basis_dump(cfg: &ExperimentConfig) -> Result<()> {
    let (space, ell) = first_cell(cfg)?;
    let coeff = coefficient_for(cfg, space.hierarchy())?;
    let ctx = LodContext::new(&space, &coeff, cfg.m)?;
    let basis = ctx.build_basis(ell)?;
    let mut out = output(cfg)?;
    write_basis(&basis, space.num_velocity_dofs(), space.num_pressure_dofs(), &mut out)?;
    out.flush()?;
    eprintln!("{} basis functions, ell={ell}", basis.len());
    Ok(())
}

fn solve(cfg: &ExperimentConfig) -> Result<()> {
    let mut single = cfg.clone();
    single.h_levels.truncate(1);
    single.ell.truncate(1);
    let result = run_convergence_study(&single)?;
    report(&result);
    if let Some(f) = result.failures.first() {
        return Err(Error::Cell(f.message.clone()));
    }
    let mut out = output(cfg)?;
    write_csv(&result.records, &mut out)?;
    Ok(out.flush()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = |c: &Common, f: fn(&ExperimentConfig) -> Result<()>| c.config().and_then(|cfg| f(&cfg));
    let res = match &cli.command {
        Command::Converge(c) => run(c, converge),
        Command::Decay(c) => run(c, decay),
        Command::BasisDump(c) => run(c, basis_dump),
        Command::Solve(c) => run(c, solve),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
