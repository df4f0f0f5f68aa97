//! Commands behind the `hybridkinetics` binary.

pub mod output;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::ValueEnum;

use hybridkinetics_core::conservation::detect_conservation_laws;
use hybridkinetics_core::ensemble::{run_ensemble, EnsembleSummary};
use hybridkinetics_core::models;
use hybridkinetics_core::partition::class_counts;
use hybridkinetics_core::rng::stream_seed;
use hybridkinetics_core::ssa::DEFAULT_MAX_JUMPS;
use hybridkinetics_core::{
    classify_reactions, serialize_model, simulate_ode, simulate_pdmp, simulate_ssa,
    uniform_grid, validate_model, Diagnostic, HybridModel, IntegratorConfig, Kinetics,
    ModelDocument, Partition, PdmpConfig, SampleTable, Severity, SsaOptions, SystemState,
};

use output::{fmt_g9, gnuplot_script, write_jumps, write_summary, write_table, JumpTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Ssa,
    Pdmp,
    Ode,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Ssa => "ssa",
            Engine::Pdmp => "pdmp",
            Engine::Ode => "ode",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSource {
    Path(PathBuf),
    Builtin(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ModelSource,
    pub engine: Engine,
    pub t_max: f64,
    pub seed: u64,
    pub samples: usize,
    pub runs: usize,
    pub out: Option<PathBuf>,
    pub record_jumps: bool,
    pub displacement: bool,
    pub rtol: f64,
    pub atol: f64,
    pub gnuplot: bool,
}

impl RunConfig {
    pub fn new(source: ModelSource, engine: Engine) -> Self {
        RunConfig {
            source,
            engine,
            t_max: 10.0,
            seed: 1,
            samples: 1000,
            runs: 100,
            out: None,
            record_jumps: false,
            displacement: true,
            rtol: 1e-6,
            atol: 1e-9,
            gnuplot: false,
        }
    }

    fn check(&self) -> anyhow::Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            bail!("--tmax must be positive and finite, got {}", self.t_max);
        }
        if self.samples < 1 {
            bail!("--samples must be at least 1");
        }
        if self.runs < 1 {
            bail!("--runs must be at least 1");
        }
        Ok(())
    }

    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            rtol: self.rtol,
            atol: self.atol,
            ..IntegratorConfig::default()
        }
    }
}

/// Failure split by exit code: 1 for model diagnostics, 2 for everything
/// else.
#[derive(Debug)]
pub enum CliError {
    Diagnostics(Vec<Diagnostic>),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Diagnostics(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn load_model(source: &ModelSource) -> CliResult<ModelDocument> {
    match source {
        ModelSource::Builtin(name) => models::builtin(name).ok_or_else(|| {
            CliError::Runtime(anyhow!(
                "unknown builtin `{name}`; available: {}",
                models::BUILTIN_NAMES.join(", ")
            ))
        }),
        ModelSource::Path(path) => {
            let bytes = fs::read(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            hybridkinetics_core::dsl::parse_model_bytes(&bytes).map_err(CliError::Diagnostics)
        }
    }
}

/// An engine with its model compiled, ready for repeated runs.
pub enum Prepared {
    Ssa(Kinetics),
    Pdmp(HybridModel, PdmpConfig),
    Ode(Box<ModelDocument>, Partition, IntegratorConfig),
}

/// One run's output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: SampleTable,
    pub jump_count: u64,
    pub jumps: Option<JumpTable>,
    /// ODE output is in concentrations; the other engines report counts.
    pub concentration: bool,
}

fn scale_of(doc: &ModelDocument) -> f64 {
    doc.partition.as_ref().map_or(1.0, Partition::scale)
}

pub fn prepare(doc: &ModelDocument, engine: Engine, cfg: &RunConfig) -> anyhow::Result<Prepared> {
    let ode = cfg.integrator();
    if engine != Engine::Ssa {
        ode.validate()?;
    }
    Ok(match engine {
        Engine::Ssa => Prepared::Ssa(Kinetics::new(&doc.network, scale_of(doc))?),
        Engine::Pdmp => {
            let partition = doc
                .partition
                .as_ref()
                .ok_or_else(|| anyhow!("partition required for pdmp"))?;
            Prepared::Pdmp(
                HybridModel::new(&doc.network, partition)?,
                PdmpConfig {
                    ode,
                    displacement: cfg.displacement,
                    record_jumps: false,
                    max_jumps: DEFAULT_MAX_JUMPS,
                },
            )
        }
        Engine::Ode => {
            let partition = Partition::all_continuous(doc.network.n_species(), scale_of(doc))?;
            Prepared::Ode(Box::new(doc.clone()), partition, ode)
        }
    })
}

impl Prepared {
    pub fn run(
        &self,
        init: &SystemState,
        t_max: f64,
        seed: u64,
        grid: &[f64],
        record_jumps: bool,
    ) -> anyhow::Result<RunOutput> {
        Ok(match self {
            Prepared::Ssa(k) => {
                let opts = SsaOptions {
                    record_jumps,
                    ..SsaOptions::default()
                };
                let tr = simulate_ssa(k, init, t_max, seed, grid, opts)?;
                let jumps = tr.jumps.as_ref().map(|records| JumpTable {
                    columns: tr.species.clone(),
                    rows: records
                        .iter()
                        .map(|j| {
                            (
                                j.time,
                                k.reaction_name(j.reaction).to_string(),
                                j.state.iter().map(|&c| c as f64).collect(),
                            )
                        })
                        .collect(),
                });
                RunOutput {
                    table: tr.to_table(),
                    jump_count: tr.jump_count,
                    jumps,
                    concentration: false,
                }
            }
            Prepared::Pdmp(model, config) => {
                let config = PdmpConfig {
                    record_jumps,
                    ..*config
                };
                let tr = simulate_pdmp(model, init, t_max, seed, &config, grid)?;
                let table = tr.to_table();
                let jumps = tr.jumps.as_ref().map(|records| JumpTable {
                    columns: table.columns.clone(),
                    rows: records
                        .iter()
                        .map(|j| {
                            let state = j
                                .x_c_after
                                .iter()
                                .map(|x| x * tr.scale)
                                .chain(j.x_d_after.iter().map(|&c| c as f64))
                                .collect();
                            (
                                j.time,
                                model.scaled().reaction_name(j.reaction).to_string(),
                                state,
                            )
                        })
                        .collect(),
                });
                RunOutput {
                    table,
                    jump_count: tr.jump_count,
                    jumps,
                    concentration: false,
                }
            }
            Prepared::Ode(doc, partition, config) => {
                let tr = simulate_ode(&doc.network, partition, init, t_max, *config, grid)?;
                RunOutput {
                    table: tr.to_table(),
                    jump_count: 0,
                    jumps: None,
                    concentration: true,
                }
            }
        })
    }
}

fn print_warnings(doc: &ModelDocument, engine: Engine, err: &mut dyn Write) {
    for d in validate_model(doc, engine == Engine::Pdmp) {
        let _ = writeln!(err, "{d}");
    }
}

fn open_out<'a>(
    path: Option<&Path>,
    stdout: &'a mut dyn Write,
) -> anyhow::Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(stdout),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

/// `simulate`: one trajectory as CSV.
pub fn cmd_simulate(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    cfg.check()?;
    let doc = load_model(&cfg.source)?;
    print_warnings(&doc, cfg.engine, stderr);
    if (cfg.record_jumps || cfg.gnuplot) && cfg.out.is_none() {
        return Err(anyhow!("--record-jumps and --gnuplot need --out").into());
    }
    let engine = prepare(&doc, cfg.engine, cfg)?;
    let grid = uniform_grid(cfg.t_max, cfg.samples);
    let run = engine.run(&doc.initial, cfg.t_max, cfg.seed, &grid, cfg.record_jumps)?;
    let suffix = if run.concentration { "#units=concentration" } else { "" };
    {
        let mut w = open_out(cfg.out.as_deref(), stdout)?;
        write_table(&mut w, &run.table, suffix)?;
        w.flush()?;
    }
    if let Some(out) = &cfg.out {
        if let Some(jumps) = &run.jumps {
            let path = sibling(out, ".jumps.csv");
            let mut w = open_out(Some(&path), stdout)?;
            write_jumps(&mut w, jumps)?;
            w.flush()?;
        }
        if cfg.gnuplot {
            let title = format!("{} ({})", doc.name, cfg.engine.name());
            let script = gnuplot_script(&out.to_string_lossy(), &run.table.columns, &title);
            fs::write(sibling(out, ".gp"), script)?;
        }
    }
    Ok(())
}

/// Runs `cfg.runs` replicates with split seeds and summarizes them.
pub fn ensemble_summary(doc: &ModelDocument, cfg: &RunConfig) -> anyhow::Result<EnsembleSummary> {
    let engine = prepare(doc, cfg.engine, cfg)?;
    let grid = uniform_grid(cfg.t_max, cfg.samples);
    let tables = run_ensemble(cfg.runs, cfg.seed, |_, seed| {
        engine
            .run(&doc.initial, cfg.t_max, seed, &grid, false)
            .map(|r| r.table)
            .map_err(|e| hybridkinetics_core::SimError::Precondition(format!("{e:#}")))
    })?;
    Ok(EnsembleSummary::from_tables(&tables)?)
}

/// `ensemble`: per grid point mean, variance, min and max over runs.
pub fn cmd_ensemble(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    cfg.check()?;
    if cfg.runs < 2 {
        return Err(anyhow!("an ensemble needs --runs >= 2").into());
    }
    let doc = load_model(&cfg.source)?;
    print_warnings(&doc, cfg.engine, stderr);
    let summary = ensemble_summary(&doc, cfg)?;
    let mut w = open_out(cfg.out.as_deref(), stdout)?;
    write_summary(&mut w, &summary)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineTiming {
    pub engine: Engine,
    /// Wall time per timed repeat, seconds.
    pub seconds: Vec<f64>,
    pub mean_seconds: f64,
    pub sd_seconds: f64,
    pub mean_jumps: f64,
    /// `(column, mean, variance)` of the final state over repeats.
    pub endpoint: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub baseline: EngineTiming,
    pub candidate: EngineTiming,
    /// Baseline time over candidate time.
    pub speedup: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn time_engine(
    doc: &ModelDocument,
    engine: Engine,
    cfg: &RunConfig,
    repeats: usize,
) -> anyhow::Result<EngineTiming> {
    let prepared = prepare(doc, engine, cfg)?;
    let grid = uniform_grid(cfg.t_max, cfg.samples);
    prepared.run(&doc.initial, cfg.t_max, stream_seed(cfg.seed, u64::MAX), &grid, false)?;
    let mut seconds = Vec::with_capacity(repeats);
    let mut jumps = Vec::with_capacity(repeats);
    let mut finals: Vec<Vec<f64>> = Vec::with_capacity(repeats);
    let mut columns = Vec::new();
    for k in 0..repeats {
        let seed = stream_seed(cfg.seed, k as u64);
        let start = Instant::now();
        let out = prepared.run(&doc.initial, cfg.t_max, seed, &grid, false)?;
        seconds.push(start.elapsed().as_secs_f64());
        jumps.push(out.jump_count as f64);
        let last = out.table.n_rows() - 1;
        finals.push(out.table.row(last).to_vec());
        columns = out.table.columns;
    }
    let (mean_seconds, sd_seconds) = mean_sd(&seconds);
    let endpoint = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let xs: Vec<f64> = finals.iter().map(|f| f[j]).collect();
            let (m, sd) = mean_sd(&xs);
            (c.clone(), m, sd * sd)
        })
        .collect();
    Ok(EngineTiming {
        engine,
        seconds,
        mean_seconds,
        sd_seconds,
        mean_jumps: mean_sd(&jumps).0,
        endpoint,
    })
}

/// Times `baseline` and `candidate` on the same model. Each engine gets one
/// untimed warm-up run, then `repeats` timed runs; repeat `k` uses the same
/// seed for both engines. Only the simulation call is timed.
pub fn run_bench(
    doc: &ModelDocument,
    baseline: Engine,
    candidate: Engine,
    cfg: &RunConfig,
    repeats: usize,
) -> anyhow::Result<BenchReport> {
    if repeats < 5 {
        bail!("a benchmark needs at least 5 repeats, got {repeats}");
    }
    let baseline = time_engine(doc, baseline, cfg, repeats)?;
    let candidate = time_engine(doc, candidate, cfg, repeats)?;
    let speedup = baseline.mean_seconds / candidate.mean_seconds.max(f64::MIN_POSITIVE);
    Ok(BenchReport {
        baseline,
        candidate,
        speedup,
    })
}

pub fn format_report(r: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>14} {:>14} {:>14}",
        "engine", "wall mean [s]", "wall sd [s]", "jumps"
    );
    for e in [&r.baseline, &r.candidate] {
        let _ = writeln!(
            s,
            "{:<8} {:>14.6} {:>14.6} {:>14.1}",
            e.engine.name(),
            e.mean_seconds,
            e.sd_seconds,
            e.mean_jumps
        );
    }
    let _ = writeln!(s, "\nendpoint statistics");
    for e in [&r.baseline, &r.candidate] {
        for (c, m, v) in &e.endpoint {
            let _ = writeln!(s, "{:<8} {:<8} mean {:>14} var {:>14}", e.engine.name(), c, fmt_g9(*m), fmt_g9(*v));
        }
    }
    let _ = writeln!(
        s,
        "\nspeedup {}/{}: {:.2}x",
        r.baseline.engine.name(),
        r.candidate.engine.name(),
        r.speedup
    );
    s
}

fn write_report_csv(w: &mut dyn Write, r: &BenchReport) -> std::io::Result<()> {
    writeln!(w, "engine,repeat,seconds")?;
    for e in [&r.baseline, &r.candidate] {
        for (k, t) in e.seconds.iter().enumerate() {
            writeln!(w, "{},{k},{}", e.engine.name(), fmt_g9(*t))?;
        }
    }
    Ok(())
}

/// `bench`: prints the table; with `--out`, also writes per-repeat timings.
pub fn cmd_bench(
    cfg: &RunConfig,
    baseline: Engine,
    repeats: usize,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<BenchReport> {
    cfg.check()?;
    let doc = load_model(&cfg.source)?;
    print_warnings(&doc, cfg.engine, stderr);
    let report = run_bench(&doc, baseline, cfg.engine, cfg, repeats)?;
    write!(stdout, "{}", format_report(&report))?;
    if let Some(out) = &cfg.out {
        let mut w = open_out(Some(out), stdout)?;
        write_report_csv(&mut w, &report)?;
        w.flush()?;
    }
    Ok(report)
}

/// `G + G* = 1` style rendering of a conservation law.
pub fn format_law(doc: &ModelDocument, law: &[i64]) -> String {
    let mut s = String::new();
    for (i, &c) in law.iter().enumerate().filter(|(_, c)| **c != 0) {
        let name = doc.species_name(i);
        let sign = if c < 0 { "-" } else { "+" };
        if s.is_empty() {
            if c < 0 {
                s.push('-');
            }
        } else {
            let _ = write!(s, " {sign} ");
        }
        if c.abs() != 1 {
            let _ = write!(s, "{} ", c.abs());
        }
        s.push_str(name);
    }
    let total: i64 = law
        .iter()
        .zip(doc.initial.counts())
        .map(|(a, b)| a * b)
        .sum();
    let _ = write!(s, " = {total}");
    s
}

/// `validate`: summary, reaction classes and conservation laws.
pub fn cmd_validate(
    source: &ModelSource,
    hybrid_requested: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    let doc = load_model(source)?;
    let net = &doc.network;
    writeln!(stdout, "model {}", doc.name)?;
    if let Some(d) = &doc.description {
        writeln!(stdout, "  {d}")?;
    }
    writeln!(
        stdout,
        "{} species, {} reactions, {} parameters",
        net.n_species(),
        net.reactions().len(),
        net.parameters().len()
    )?;
    match &doc.partition {
        Some(p) => {
            let classes = classify_reactions(net, p);
            let (rc, rd, rdc) = class_counts(&classes);
            writeln!(stdout, "classes {{RC: {rc}, RD: {rd}, RDC: {rdc}}}")?;
            for (r, c) in net.reactions().iter().zip(&classes) {
                writeln!(stdout, "  {:<4} {}", c.to_string(), r.name)?;
            }
        }
        None => writeln!(stdout, "no partition")?,
    }
    let laws = detect_conservation_laws(net);
    writeln!(stdout, "conservation laws: {}", laws.len())?;
    for law in &laws {
        writeln!(stdout, "  {}", format_law(&doc, law))?;
    }
    let warnings = validate_model(&doc, hybrid_requested);
    for d in &warnings {
        writeln!(stderr, "{d}")?;
    }
    debug_assert!(warnings.iter().all(|d| d.severity == Severity::Warning));
    Ok(())
}

/// `export`: canonical model text.
pub fn cmd_export(source: &ModelSource, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    let doc = load_model(source)?;
    let mut w = open_out(out, stdout)?;
    w.write_all(serialize_model(&doc).as_bytes())?;
    w.flush()?;
    Ok(())
}
