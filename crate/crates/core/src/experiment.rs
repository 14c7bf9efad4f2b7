//! Convergence and localization studies, EOC fitting and CSV output.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Instant;

use crate::coefficient::{gen_coefficient, CoefficientSpec, Parabola};
use crate::error::{Error, Result};
use crate::fem::{error_norms, solve_reference, stiffness_matrix, velocity_mass_matrix, CoefficientField, FineSolution, FineSpace};
use crate::lod::LodContext;
use crate::mesh::{MeshHierarchy, SimplicialMesh};

pub const CSV_HEADER: &str = "H,ell,m,err_u_H1,err_u_L2,err_p_pp_L2,err_PiHp_L2,wall_s";

/// Patch order of a study cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ell {
    Fixed(usize),
    /// Smallest order whose patches all cover the domain.
    Full,
}

impl fmt::Display for Ell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ell::Fixed(l) => write!(f, "{l}"),
            Ell::Full => write!(f, "full"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientChoice {
    Random(CoefficientSpec),
    Constant { nu: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// `f = (-y, x^4)`.
    Default,
    Zero,
}

impl Source {
    pub fn eval(self, x: [f64; 2]) -> [f64; 2] {
        match self {
            Source::Default => [-x[1], x[0].powi(4)],
            Source::Zero => [0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub ell: Vec<Ell>,
    /// Coarse levels, `H = 2^-level`.
    pub h_levels: Vec<usize>,
    pub fine_level: usize,
    pub coefficient: CoefficientChoice,
    pub source: Source,
    pub out: Option<PathBuf>,
    /// Write measured wall times; zeros keep the CSV reproducible.
    pub record_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 0,
            ell: vec![Ell::Full],
            h_levels: vec![1, 2, 3],
            fine_level: 6,
            coefficient: CoefficientChoice::Random(CoefficientSpec::default()),
            source: Source::Default,
            out: None,
            record_time: true,
        }
    }
}

/// Parses `2^-k`, `2^k` or a decimal power of two into the level `k`
/// with `value = 2^-k`.
pub fn parse_dyadic(s: &str) -> Result<usize> {
    let s = s.trim();
    let bad = || Error::Parse(format!("`{s}` is not a negative power of two"));
    if let Some(rest) = s.strip_prefix("2^") {
        let k: i64 = rest.trim().parse().map_err(|_| bad())?;
        return usize::try_from(-k).map_err(|_| bad());
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(bad());
    }
    let k = (-v.log2()).round();
    if (0.5f64.powi(k as i32) - v).abs() > 1e-12 * v {
        return Err(bad());
    }
    Ok(k as usize)
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| f(t.trim())).collect()
}

pub fn parse_ell(s: &str) -> Result<Ell> {
    if s == "full" {
        return Ok(Ell::Full);
    }
    let l: usize = s.parse().map_err(|_| Error::Parse(format!("bad patch order `{s}`")))?;
    Ok(Ell::Fixed(l))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("bad value `{v}` for `{key}`")))
}

impl ExperimentConfig {
    /// Applies one `key = value` setting. Keys match the CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let spec = || CoefficientSpec::default();
        match key.trim() {
            "m" => self.m = parse_num(key, value)?,
            "ell" => self.ell = parse_list(value, parse_ell)?,
            "H-list" => self.h_levels = parse_list(value, parse_dyadic)?,
            "fine-level" => self.fine_level = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "record-time" => self.record_time = parse_num(key, value)?,
            "source" => {
                self.source = match value {
                    "default" => Source::Default,
                    "zero" => Source::Zero,
                    _ => return Err(Error::Parse(format!("unknown source `{value}`"))),
                }
            }
            "nu" => self.coefficient = CoefficientChoice::Constant { nu: parse_num(key, value)? },
            "coefficient" => match value {
                "random" => {
                    if !matches!(self.coefficient, CoefficientChoice::Random(_)) {
                        self.coefficient = CoefficientChoice::Random(spec());
                    }
                }
                "constant" => {
                    if !matches!(self.coefficient, CoefficientChoice::Constant { .. }) {
                        self.coefficient = CoefficientChoice::Constant { nu: 1.0 };
                    }
                }
                _ => return Err(Error::Parse(format!("unknown coefficient `{value}`"))),
            },
            k @ ("eps" | "seed" | "nu-min" | "nu-max" | "inclusion-value" | "inclusion-width" | "parabola") => {
                let CoefficientChoice::Random(s) = &mut self.coefficient else {
                    return Err(Error::validation(format!("`{k}` requires a random coefficient")));
                };
                match k {
                    "eps" => s.eps_level = parse_dyadic(value)?,
                    "seed" => s.seed = parse_num(key, value)?,
                    "nu-min" => s.nu_min = parse_num(key, value)?,
                    "nu-max" => s.nu_max = parse_num(key, value)?,
                    "inclusion-value" => s.inclusion_value = parse_num(key, value)?,
                    "inclusion-width" => s.inclusion_width = parse_num(key, value)?,
                    _ => {
                        let c = parse_list(value, |t| parse_num::<f64>(key, t))?;
                        if c.len() != 3 {
                            return Err(Error::Parse("`parabola` takes three coefficients a,b,c".into()));
                        }
                        s.parabola = Parabola { a: c[0], b: c[1], c: c[2] };
                    }
                }
            }
            other => return Err(Error::Parse(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Reads flat `key = value` lines; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.update_from_kv(text)?;
        Ok(cfg)
    }

    pub fn update_from_kv(&mut self, text: &str) -> Result<()> {
        // `coefficient` first so that field keys land in the right variant
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        entries.sort_by_key(|(k, _)| k != "coefficient");
        for (k, v) in entries {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_levels.is_empty() || self.ell.is_empty() {
            return Err(Error::validation("H list and ell list must not be empty"));
        }
        if let Some(&l) = self.h_levels.iter().find(|&&l| l >= self.fine_level) {
            return Err(Error::validation(format!(
                "fine level {} is not finer than H = 2^-{l}",
                self.fine_level
            )));
        }
        if self.ell.contains(&Ell::Fixed(0)) {
            return Err(Error::validation("patch order must be at least 1"));
        }
        match &self.coefficient {
            CoefficientChoice::Random(s) if s.eps_level > self.fine_level => Err(Error::validation(format!(
                "fine level {} does not resolve eps = 2^-{}",
                self.fine_level, s.eps_level
            ))),
            CoefficientChoice::Constant { nu } if nu.is_nan() || *nu <= 0.0 => Err(Error::validation("nu must be positive")),
            _ => Ok(()),
        }
    }
}

/// One row of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub h: f64,
    pub ell: usize,
    pub m: usize,
    pub err_u_h1: f64,
    pub err_u_l2: f64,
    pub err_p_pp_l2: f64,
    pub err_pihp_l2: f64,
    pub wall_s: f64,
}

impl ErrorRecord {
    fn failed(h: f64, ell: usize, m: usize) -> Self {
        ErrorRecord {
            h,
            ell,
            m,
            err_u_h1: f64::NAN,
            err_u_l2: f64::NAN,
            err_p_pp_l2: f64::NAN,
            err_pihp_l2: f64::NAN,
            wall_s: f64::NAN,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.err_u_h1.is_nan()
    }
}

/// A study cell that could not be computed.
#[derive(Clone, Debug)]
pub struct CellFailure {
    pub h: f64,
    pub ell: Ell,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct StudyResult {
    pub records: Vec<ErrorRecord>,
    pub failures: Vec<CellFailure>,
    /// Smallest `ell` whose patches cover the domain, per coarse level.
    pub saturating_ell: Vec<(f64, usize)>,
}

/// Smallest patch order for which every patch is the whole mesh.
pub fn saturating_ell(mesh: &SimplicialMesh) -> Result<usize> {
    let mut ell = 1;
    loop {
        if (0..mesh.num_triangles()).all(|t| mesh.patch(t, ell).map(|p| p.covers_domain).unwrap_or(false)) {
            return Ok(ell);
        }
        ell += 1;
    }
}

/// `2^-level` of the coarse mesh (the legs of its right triangles).
pub fn nominal_h(h: &MeshHierarchy) -> f64 {
    0.5f64.powi(h.coarse_level() as i32)
}

pub fn coefficient_for(cfg: &ExperimentConfig, h: &MeshHierarchy) -> Result<CoefficientField> {
    match &cfg.coefficient {
        CoefficientChoice::Random(spec) => gen_coefficient(spec, h),
        CoefficientChoice::Constant { nu } => Ok(CoefficientField::constant(h.fine().num_triangles(), *nu, 0.0)),
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    space: &FineSpace,
    coeff: &CoefficientField,
    reference: &FineSolution,
    ell: usize,
) -> Result<ErrorRecord> {
    let start = Instant::now();
    let src = cfg.source;
    let f = move |x: [f64; 2]| src.eval(x);
    let ctx = LodContext::new(space, coeff, cfg.m)?;
    let basis = ctx.build_basis(ell)?;
    let mut sol = ctx.assemble_and_solve_coarse(&basis, &f)?;
    drop(basis);
    ctx.postprocess_pressure(&mut sol, &f)?;
    let wall = start.elapsed().as_secs_f64();
    let (e1, e2) = error_norms(&stiffness_matrix(space), &velocity_mass_matrix(space), &reference.u, &sol.velocity)?;
    Ok(ErrorRecord {
        h: nominal_h(space.hierarchy()),
        ell,
        m: cfg.m,
        err_u_h1: e1,
        err_u_l2: e2,
        err_p_pp_l2: ctx.pressure_error(&sol, &reference.p),
        err_pihp_l2: ctx.coarse_pressure_error(&sol, &reference.p),
        wall_s: if cfg.record_time { wall } else { 0.0 },
    })
}

/// Errors of the multiscale solution against the fine reference for every
/// `(H, ell)` cell. Failed cells become rows of NaN and are listed in
/// `failures`.
pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let mut result = StudyResult::default();
    let mut reference: Option<(CoefficientField, FineSolution)> = None;
    let src = cfg.source;
    let f = move |x: [f64; 2]| src.eval(x);
    for &level in &cfg.h_levels {
        let space = FineSpace::new(MeshHierarchy::new(level, cfg.fine_level, true)?);
        // the fine mesh does not depend on H, so one reference serves all
        if reference.is_none() {
            let coeff = coefficient_for(cfg, space.hierarchy())?;
            let sol = solve_reference(&space, &coeff, &f)?;
            reference = Some((coeff, sol));
        }
        let (coeff, sol) = reference.as_ref().unwrap();
        let h = nominal_h(space.hierarchy());
        let full = saturating_ell(space.hierarchy().coarse())?;
        result.saturating_ell.push((h, full));
        for &ell in &cfg.ell {
            let l = match ell {
                Ell::Fixed(l) => l,
                Ell::Full => full,
            };
            match run_cell(cfg, &space, coeff, sol, l) {
                Ok(r) => result.records.push(r),
                Err(e) => {
                    result.records.push(ErrorRecord::failed(h, l, cfg.m));
                    result.failures.push(CellFailure {
                        h,
                        ell,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(result)
}

/// Patch-order sweep at the first coarse level of `cfg`.
pub fn run_decay_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    let mut single = cfg.clone();
    single.h_levels.truncate(1);
    run_convergence_study(&single)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorColumn {
    UH1,
    UL2,
    PressurePP,
    PressurePiH,
}

impl ErrorColumn {
    pub fn of(self, r: &ErrorRecord) -> f64 {
        match self {
            ErrorColumn::UH1 => r.err_u_h1,
            ErrorColumn::UL2 => r.err_u_l2,
            ErrorColumn::PressurePP => r.err_p_pp_l2,
            ErrorColumn::PressurePiH => r.err_pihp_l2,
        }
    }
}

/// Convergence rate between two consecutive mesh sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EocRate {
    pub h_coarse: f64,
    pub h_fine: f64,
    pub rate: f64,
    /// The finer error vanished, so the rate is infinite.
    pub flagged: bool,
}

/// `log2(err(H) / err(H/2))` for consecutive records (sorted by
/// decreasing `H`).
pub fn fit_eoc(records: &[ErrorRecord], column: ErrorColumn) -> Result<Vec<EocRate>> {
    if records.len() < 2 {
        return Err(Error::validation("at least two records are needed for a rate"));
    }
    let mut sorted: Vec<&ErrorRecord> = records.iter().collect();
    sorted.sort_by(|a, b| b.h.total_cmp(&a.h));
    sorted
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if ((a.h / b.h) - 2.0).abs() > 1e-9 {
                return Err(Error::validation(format!("H = {} and {} are not halving", a.h, b.h)));
            }
            let (ea, eb) = (column.of(a), column.of(b));
            let flagged = eb == 0.0;
            let rate = if flagged {
                f64::INFINITY
            } else if ea == eb {
                0.0
            } else {
                (ea / eb).log2()
            };
            Ok(EocRate {
                h_coarse: a.h,
                h_fine: b.h,
                rate,
                flagged,
            })
        })
        .collect()
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[ErrorRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f(r.h),
            r.ell,
            r.m,
            fmt_f(r.err_u_h1),
            fmt_f(r.err_u_l2),
            fmt_f(r.err_p_pp_l2),
            fmt_f(r.err_pihp_l2),
            fmt_f(r.wall_s)
        )?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<ErrorRecord>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))??;
    if header.trim() != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header `{header}`")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!("expected 8 fields in `{line}`")));
        }
        let num = |s: &str| -> Result<f64> { s.trim().parse().map_err(|_| Error::Parse(format!("bad number `{s}`"))) };
        let int = |s: &str| -> Result<usize> { s.trim().parse().map_err(|_| Error::Parse(format!("bad integer `{s}`"))) };
        out.push(ErrorRecord {
            h: num(f[0])?,
            ell: int(f[1])?,
            m: int(f[2])?,
            err_u_h1: num(f[3])?,
            err_u_l2: num(f[4])?,
            err_p_pp_l2: num(f[5])?,
            err_pihp_l2: num(f[6])?,
            wall_s: num(f[7])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_parsing() {
        assert_eq!(parse_dyadic("2^-3").unwrap(), 3);
        assert_eq!(parse_dyadic("0.25").unwrap(), 2);
        assert!(parse_dyadic("0.3").is_err());
    }

    #[test]
    fn kv_config() {
        let cfg = ExperimentConfig::from_kv("m = 1\nell = 1, 2, full # sweep\nH-list = 2^-1,2^-2\nseed = 7\n").unwrap();
        assert_eq!(cfg.m, 1);
        assert_eq!(cfg.ell, vec![Ell::Fixed(1), Ell::Fixed(2), Ell::Full]);
        assert_eq!(cfg.h_levels, vec![1, 2]);
        let CoefficientChoice::Random(s) = &cfg.coefficient else { panic!() };
        assert_eq!(s.seed, 7);
        assert!(ExperimentConfig::from_kv("bogus = 1").is_err());
    }
}
