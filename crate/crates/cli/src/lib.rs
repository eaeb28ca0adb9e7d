//! Command-line front end: archive generation, compression, verification,
//! lower bounds and sweeps.
//!
//! Exit codes are 0 on success, 1 when verification fails, 2 for bad input and
//! 3 when the retry budget runs out.

pub mod archive;
pub mod report;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use psdcompress::bounds::{equality_protocol, lower_bound, BoundsError};
use psdcompress::compressor::{
    compress_model_tail_factored, compress_psd, error_report, psd_error_report, tail_fit, tail_spectrum, CompressError,
    PreparedModel, TailProfile,
};
use psdcompress::models::{
    binary_rank_one_model, data_table, random_model, random_psd_factorization, random_table, tail_model,
    validate_model, DataTable, RankSpec,
};
use psdcompress::projection::{
    dim_for_model, dim_for_psd, dim_for_tail, CompressionConfig, ProjectionMatrix, DEFAULT_MAX_RETRIES,
};
use serde_json::json;
use thiserror::Error;

use archive::{Archive, ArchiveError, Provenance};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Compress(CompressError::RetriesExhausted { .. })
            | CliError::Bounds(BoundsError::Compress(CompressError::RetriesExhausted { .. })) => 3,
            _ => 2,
        }
    }
}

impl From<psdcompress::projection::ProjectionError> for CliError {
    fn from(e: psdcompress::projection::ProjectionError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<psdcompress::models::ModelError> for CliError {
    fn from(e: psdcompress::models::ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "psdcompress", version, about = "Compress psd factorizations and quantum models by random projection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated archive.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Compress an archive and write the result and a JSON report.
    Compress(CompressArgs),
    /// Print the dimension lower bound of a data table or model.
    LowerBound {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eps_noise: Option<f64>,
    },
    /// Check a compressed archive against its original.
    Verify {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        compressed: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
    /// Compress a model over a grid of dimensions and seeds; write CSV.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated sketch dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<usize>,
        #[arg(long)]
        seeds: u64,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
        max_retries: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write one row per (d, seed) here.
        #[arg(long)]
        cells: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Random model: Wishart states, random effects, last outcome completing the POVM.
    QuantumModel {
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
        #[arg(long)]
        z: usize,
        #[arg(long)]
        dim: usize,
        /// Rank of each effect below the last outcome.
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 1)]
        state_rank: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Basis states and binary measurements {|φ⟩⟨φ|, I − |φ⟩⟨φ|}.
    BinaryRankOne {
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Model whose small-outcome sums have spectrum min(1, e^{−b(j−j*)}).
    TailModel {
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
        #[arg(long)]
        z: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        j_star: usize,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Random psd factorization with Wishart factors.
    PsdFactorization {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Identity table of size N, or a random normalized table.
    DataTable {
        #[arg(long, conflicts_with_all = ["x", "y", "z", "seed"])]
        identity: Option<usize>,
        #[arg(long)]
        x: Option<usize>,
        #[arg(long)]
        y: Option<usize>,
        #[arg(long)]
        z: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// The n-bit equality protocol in dimension 2ⁿ.
    Equality {
        #[arg(long)]
        bits: u32,
    },
    /// A sketch matrix Π.
    Projection {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        attempt: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Psd,
    Model,
    Tail,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub seed: u64,
    /// Sketch dimension; defaults to the mode's formula dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    pub max_retries: usize,
    /// Tail mode: fix j* instead of inferring it.
    #[arg(long)]
    pub j_star: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

fn provenance(generator: String, seed: Option<u64>) -> Option<Provenance> {
    Some(Provenance { generator, seed })
}

fn write_out(a: &Archive, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(p) => a.write(p)?,
        None => stdout.write_all(a.to_json().as_bytes())?,
    }
    Ok(())
}

fn gen(kind: &GenKind, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let a = match *kind {
        GenKind::QuantumModel { x, y, z, dim, rank, state_rank, seed } => {
            let m = random_model(x, y, z, dim, RankSpec { state: state_rank, effect: rank }, seed)?;
            let g = format!("quantum-model x={x} y={y} z={z} dim={dim} rank={rank} state_rank={state_rank}");
            Archive::from_model(&m, provenance(g, Some(seed)))
        }
        GenKind::BinaryRankOne { x, y, dim, seed } => {
            let m = binary_rank_one_model(x, y, dim, seed)?;
            Archive::from_model(&m, provenance(format!("binary-rank-one x={x} y={y} dim={dim}"), Some(seed)))
        }
        GenKind::TailModel { x, y, z, dim, j_star, b, seed } => {
            let m = tail_model(x, y, z, dim, j_star, b, seed)?;
            let g = format!("tail-model x={x} y={y} z={z} dim={dim} j_star={j_star} b={b}");
            Archive::from_model(&m, provenance(g, Some(seed)))
        }
        GenKind::PsdFactorization { n, m, dim, rank, seed } => {
            let f = random_psd_factorization(n, m, dim, rank, seed)?;
            let g = format!("psd-factorization n={n} m={m} dim={dim} rank={rank}");
            Archive::from_factorization(&f, provenance(g, Some(seed)))
        }
        GenKind::DataTable { identity: Some(n), .. } => {
            if n == 0 {
                return Err(CliError::Input("identity size must be positive".into()));
            }
            Archive::from_table(&DataTable::identity(n), provenance(format!("data-table identity={n}"), None))
        }
        GenKind::DataTable { identity: None, x: Some(x), y: Some(y), z: Some(z), seed: Some(seed) } => {
            if x == 0 || y == 0 || z == 0 {
                return Err(CliError::Input("table shape must be positive".into()));
            }
            let t = random_table(x, y, z, seed);
            Archive::from_table(&t, provenance(format!("data-table x={x} y={y} z={z}"), Some(seed)))
        }
        GenKind::DataTable { .. } => {
            return Err(CliError::Input("data-table needs --identity N or all of --x --y --z --seed".into()))
        }
        GenKind::Equality { bits } => {
            let (_, m) = equality_protocol(bits)?;
            Archive::from_model(&m, provenance(format!("equality bits={bits}"), None))
        }
        GenKind::Projection { d, dim, seed, attempt } => {
            if d == 0 || dim == 0 {
                return Err(CliError::Input("sketch dimensions must be positive".into()));
            }
            let p = ProjectionMatrix::sample(d, dim, seed, attempt);
            Archive::from_projection(&p, provenance(format!("projection d={d} dim={dim}"), Some(seed)))
        }
    };
    write_out(&a, out, stdout)
}

fn tail_profiles(m: &psdcompress::models::QuantumModel, hint: Option<usize>) -> Result<Vec<TailProfile>, CliError> {
    (0..m.num_measurements()).map(|y| Ok(tail_fit(&tail_spectrum(&m.small_outcome_sum(y)), hint)?)).collect()
}

fn compress(args: &CompressArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let input = Archive::read(&args.input)?;
    let cfg = CompressionConfig::with_retries(args.epsilon, args.seed, args.max_retries)?;
    let mode = match args.mode {
        Mode::Psd => "psd",
        Mode::Model => "model",
        Mode::Tail => "tail",
    };
    let generator = format!("compress mode={mode} epsilon={}", args.epsilon);
    let mut extra = serde_json::Map::new();
    let result = match args.mode {
        Mode::Psd => {
            let f = input.to_factorization()?;
            let d = match args.d {
                Some(d) => d,
                None => dim_for_psd(args.epsilon, f.num_matrices(), f.dim())?,
            };
            compress_psd(&f, &cfg, d).and_then(|(out, cert)| {
                let report = psd_error_report(&f, &out, cert.certified_epsilon)?;
                Ok((Archive::from_factorization(&out, provenance(generator, Some(args.seed))), cert, report))
            })
        }
        Mode::Model | Mode::Tail => {
            let m = input.to_model()?;
            let prepared = PreparedModel::new(&m)?;
            let out = if args.mode == Mode::Model {
                let d = match args.d {
                    Some(d) => d,
                    None => dim_for_model(args.epsilon, m.num_matrices(), m.dim(), prepared.max_rank())?,
                };
                prepared.compress(&cfg, d)
            } else {
                let profiles = tail_profiles(&m, args.j_star)?;
                let d = match args.d {
                    Some(d) => d,
                    None => profiles.iter().try_fold(1, |acc, p| {
                        dim_for_tail(args.epsilon, m.num_matrices(), m.dim(), p.j_star, p.b).map(|d| acc.max(d))
                    })?,
                };
                extra.insert("tail_profiles".into(), report::profiles(&profiles));
                compress_model_tail_factored(&m, &cfg, d, &profiles)
            };
            out.map(|c| {
                let model = c.model.materialize();
                (Archive::from_model(&model, provenance(generator, Some(args.seed))), c.certificate, c.report)
            })
        }
    };
    let mut doc = json!({ "mode": mode, "input": input.kind() });
    let obj = doc.as_object_mut().expect("object");
    obj.extend(extra);
    match result {
        Ok((archive, cert, rep)) => {
            obj.insert("status".into(), json!("accepted"));
            obj.insert("certificate".into(), report::certificate(&cert));
            obj.insert("report".into(), report::report(&rep));
            archive.write(&args.out)?;
            std::fs::write(&args.report, report::render(&doc))?;
            writeln!(
                stdout,
                "accepted after {} attempt(s) at d = {}; max violation ratio {}",
                cert.attempts, cert.dim, cert.max_violation_ratio
            )?;
            Ok(())
        }
        Err(e) => {
            if matches!(e, CompressError::RetriesExhausted { .. }) {
                obj.insert("status".into(), json!("retries_exhausted"));
                obj.insert("error".into(), json!(e.to_string()));
                std::fs::write(&args.report, report::render(&doc))?;
            }
            Err(e.into())
        }
    }
}

fn lower_bound_cmd(input: &Path, eps_noise: Option<f64>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let a = Archive::read(input)?;
    let t = match &a.payload {
        archive::Payload::QuantumModel { .. } => data_table(&a.to_model()?)?,
        _ => a.to_table()?,
    };
    let r = lower_bound(&t);
    for (y, l) in r.per_measurement.iter().enumerate() {
        writeln!(stdout, "l[{y}] = {l}")?;
    }
    writeln!(stdout, "l = {}", r.bound)?;
    if let Some(eps) = eps_noise {
        if !(eps >= 0.0) {
            return Err(CliError::Input(format!("--eps-noise must be nonnegative, got {eps}")));
        }
        let n = r.noisy(eps);
        writeln!(stdout, "noisy l = {}", n.value)?;
        writeln!(stdout, "noisy l (raw) = {}", n.raw)?;
    }
    Ok(())
}

fn verify(original: &Path, compressed: &Path, epsilon: f64, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (a, b) = (Archive::read(original)?, Archive::read(compressed)?);
    if a.kind() != b.kind() {
        return Err(CliError::Input(format!("kind mismatch: {} vs {}", a.kind(), b.kind())));
    }
    let (rep, violations) = match &a.payload {
        archive::Payload::QuantumModel { .. } => {
            let (m, c) = (a.to_model()?, b.to_model_unchecked()?);
            let v = validate_model(&c);
            for x in &v {
                writeln!(stdout, "violation: {x}")?;
            }
            (error_report(&m, &c, epsilon)?, v.len())
        }
        archive::Payload::PsdFactorization { .. } => {
            let (f, g) = (a.to_factorization()?, b.to_factorization()?);
            (psd_error_report(&f, &g, epsilon)?, 0)
        }
        _ => return Err(CliError::Input(format!("cannot verify {} archives", a.kind()))),
    };
    let ratio = rep.max_violation_ratio();
    let failed = rep.violations().count();
    writeln!(stdout, "pairs = {}", rep.pairs.len())?;
    writeln!(stdout, "uncertified pairs = {}", rep.uncertified().count())?;
    writeln!(stdout, "bound violations = {failed}")?;
    writeln!(stdout, "validity violations = {violations}")?;
    writeln!(stdout, "max violation ratio = {ratio}")?;
    if failed > 0 || violations > 0 {
        writeln!(stdout, "FAIL")?;
        return Err(CliError::Verification(format!("{failed} bound violation(s), {violations} validity violation(s)")));
    }
    writeln!(stdout, "PASS")?;
    Ok(())
}

/// Runs a parsed command, writing human-readable output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen { kind, out } => gen(kind, out.as_deref(), stdout),
        Command::Compress(args) => compress(args, stdout),
        Command::LowerBound { input, eps_noise } => lower_bound_cmd(input, *eps_noise, stdout),
        Command::Verify { original, compressed, epsilon } => verify(original, compressed, *epsilon, stdout),
        Command::Sweep { input, grid, seeds, epsilon, max_retries, out, cells } => {
            let m = Archive::read(input)?.to_model()?;
            if grid.iter().any(|&d| d == 0) {
                return Err(CliError::Input("grid dimensions must be positive".into()));
            }
            let cfg =
                sweep::SweepConfig { grid: grid.clone(), seeds: *seeds, epsilon: *epsilon, max_retries: *max_retries };
            CompressionConfig::with_retries(*epsilon, 0, *max_retries)?;
            let r = sweep::sweep(&m, &cfg)?;
            std::fs::write(out, r.to_csv())?;
            if let Some(p) = cells {
                std::fs::write(p, r.cells_csv())?;
            }
            writeln!(stdout, "{} row(s) written to {}", r.rows.len(), out.display())?;
            Ok(())
        }
    }
}
