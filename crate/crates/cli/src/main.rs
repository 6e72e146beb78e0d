//! `incompat`: compatibility checks, joint-measurement witnesses and
//! incompatibility-probability estimates for binary qubit measurements.
//!
//! Exit status: 0 compatible / valid / success, 1 incompatible / invalid /
//! no witness, 2 on any error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use incompat_core::estimate::{self, format_sig, EstimateResult};
use incompat_core::joint::{construct_unbiased_witness, feasibility_oracle, qubit_joint};
use incompat_core::povm::{validate_povm, BlochPovm, PovmTensor, TOL_PSD};
use incompat_core::sampling::{density_inner_product, inner_product_cdf, norm_constant, sample_pair};
use incompat_core::{yu_compatible, MeasureSpec, RngStream};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "incompat", version, about = "Joint measurability of binary qubit measurements")]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Measure {
    Unbiased,
    General,
    Section,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Quantity {
    /// Probability that a random pair is incompatible.
    Prob,
    /// Volume of the incompatible pairs under the general measure.
    VolNjm,
    /// Mean of `|a|² + |b|² - (a·b)²` over unbiased pairs.
    ExpF,
    /// Mean of `|a + b| + |a - b|` over unbiased pairs.
    ExpG,
    /// Incompatibility probability at biases `(λ, 0)`.
    LambdaSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Mc,
    Quadrature,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long, value_enum, default_value = "unbiased")]
    measure: Measure,
    /// Bias of the first measurement for `--measure section`.
    #[arg(long, allow_hyphen_values = true)]
    a0: Option<f64>,
    /// Bias of the second measurement for `--measure section`.
    #[arg(long, allow_hyphen_values = true)]
    b0: Option<f64>,
}

impl MeasureArgs {
    fn spec(&self) -> Result<MeasureSpec> {
        let spec = match self.measure {
            Measure::Unbiased => MeasureSpec::Unbiased,
            Measure::General => MeasureSpec::General,
            Measure::Section => MeasureSpec::Section {
                a0: self.a0.ok_or_else(|| anyhow!("--measure section needs --a0"))?,
                b0: self.b0.ok_or_else(|| anyhow!("--measure section needs --b0"))?,
            },
        };
        if self.measure != Measure::Section && (self.a0.is_some() || self.b0.is_some()) {
            bail!("--a0/--b0 only apply to --measure section");
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide compatibility of two measurements given as Bloch JSON files.
    Check { povm_a: PathBuf, povm_b: PathBuf },
    /// Construct a joint measurement and write it as a POVM tensor.
    Witness {
        povm_a: PathBuf,
        povm_b: PathBuf,
        /// Grid points per axis for the search used on biased inputs.
        #[arg(long, default_value_t = 32)]
        resolution: usize,
    },
    /// Check positivity and completeness of a POVM tensor or Bloch JSON file.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = TOL_PSD)]
        tol: f64,
    },
    /// Draw random measurement pairs.
    Sample {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate a probability, volume or expectation.
    Estimate {
        #[arg(long, value_enum, default_value = "prob")]
        quantity: Quantity,
        #[arg(long, value_enum, default_value = "mc")]
        method: Method,
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Incompatibility probabilities over a grid of bias sections.
    Grid {
        #[arg(long, default_value_t = 81)]
        resolution: usize,
        /// Samples per cell.
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Density and CDF of the inner product of two random unit vectors in R^m.
    Density {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Evaluate at one point; otherwise tabulate on a grid of [-1, 1].
        #[arg(long, allow_hyphen_values = true)]
        s: Option<f64>,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
}

/// What a command produced: the bytes to emit and whether the physics
/// outcome was positive.
struct Output {
    body: String,
    positive: bool,
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| anyhow!("--seed is required for randomized commands"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_bloch(path: &Path) -> Result<BlochPovm> {
    let m: BlochPovm = read_json(path)?;
    m.validate().with_context(|| format!("invalid measurement in {}", path.display()))?;
    Ok(m)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn estimate_text(e: &EstimateResult) -> String {
    format!(
        "value {} stderr {} n {} seed {} method {}\n",
        format_sig(e.value, 9),
        format_sig(e.stderr, 9),
        e.samples_or_nodes,
        e.seed.map_or_else(|| "-".to_string(), |s| s.to_string()),
        serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    )
}

fn cmd_check(a: &Path, b: &Path, format: Format) -> Result<Output> {
    let (a, b) = (read_bloch(a)?, read_bloch(b)?);
    let v = yu_compatible(&a, &b)?;
    let body = match format {
        Format::Text => format!(
            "{} margin {} lhs {} rhs {}\n",
            if v.compatible { "compatible" } else { "incompatible" },
            format_sig(v.margin, 9),
            format_sig(v.lhs, 9),
            format_sig(v.rhs, 9)
        ),
        Format::Json => json(&v)?,
        Format::Csv => bail!("check has no csv output"),
    };
    Ok(Output { body, positive: v.compatible })
}

fn cmd_witness(a: &Path, b: &Path, resolution: usize) -> Result<(Option<PovmTensor>, String)> {
    let (a, b) = (read_bloch(a)?, read_bloch(b)?);
    if a.bias == 0.0 && b.bias == 0.0 {
        return Ok(match construct_unbiased_witness(&a, &b)? {
            Some((_, m)) => (Some(m), "closed-form witness".into()),
            None => (None, "no witness: |a + b| + |a - b| > 2".into()),
        });
    }
    Ok(match feasibility_oracle(&a, &b, 0.5, 0.5, resolution, 0.0)? {
        Some(noise) => (Some(qubit_joint(&a, &b, 0.5, 0.5, &noise)?), "witness found by grid search".into()),
        None => {
            let margin = yu_compatible(&a, &b)?.margin;
            (None, format!("no witness found by grid search (criterion margin {})", format_sig(margin, 6)))
        }
    })
}

fn cmd_validate(path: &Path, tol: f64, format: Format) -> Result<Output> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tensor: PovmTensor = match serde_json::from_str::<PovmTensor>(&text) {
        Ok(t) => t,
        Err(tensor_err) => match serde_json::from_str::<BlochPovm>(&text) {
            Ok(m) => m.to_tensor()?,
            Err(_) => return Err(anyhow!(tensor_err).context(format!("parsing {}", path.display()))),
        },
    };
    let report = validate_povm(&tensor, tol);
    let body = match format {
        Format::Text => format!("{report}\n"),
        Format::Json => json(&report)?,
        Format::Csv => bail!("validate has no csv output"),
    };
    Ok(Output { body, positive: report.ok })
}

fn cmd_sample(spec: &MeasureSpec, n: u64, seed: u64, format: Format) -> Result<Output> {
    if n == 0 {
        bail!("--samples must be >= 1");
    }
    #[derive(Serialize)]
    struct Row {
        a: BlochPovm,
        b: BlochPovm,
        compatible: bool,
    }
    let mut rng = RngStream::new(seed, 0);
    let mut rows = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let (a, b) = sample_pair(&mut rng, spec)?;
        rows.push(Row { a, b, compatible: yu_compatible(&a, &b)?.compatible });
    }
    let body = match format {
        Format::Json => json(&rows)?,
        Format::Csv | Format::Text => {
            let mut out = String::from("a0,ax,ay,az,b0,bx,by,bz,compatible\n");
            for r in &rows {
                let cells: Vec<String> = [r.a.bias, r.a.vec[0], r.a.vec[1], r.a.vec[2], r.b.bias, r.b.vec[0], r.b.vec[1], r.b.vec[2]]
                    .iter()
                    .map(|x| x.to_string())
                    .collect();
                let _ = writeln!(out, "{},{}", cells.join(","), r.compatible);
            }
            out
        }
    };
    Ok(Output { body, positive: true })
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    quantity: Quantity,
    method: Method,
    measure: &MeasureArgs,
    samples: Option<u64>,
    seed: Option<u64>,
    lambda: Option<f64>,
    tol: f64,
) -> Result<EstimateResult> {
    let mc_inputs = || -> Result<(u64, u64)> {
        Ok((samples.ok_or_else(|| anyhow!("--method mc needs --samples"))?, require_seed(seed)?))
    };
    let quadrature_only = |what: &str| -> Result<()> {
        if samples.is_some() || seed.is_some() {
            bail!("{what} is computed by quadrature; --samples/--seed do not apply");
        }
        Ok(())
    };
    if lambda.is_some() && quantity != Quantity::LambdaSection {
        bail!("--lambda only applies to --quantity lambda-section");
    }
    Ok(match (quantity, method) {
        (Quantity::Prob, Method::Mc) => {
            let (n, seed) = mc_inputs()?;
            estimate::prob_mc(&measure.spec()?, n, seed)?
        }
        (Quantity::Prob, Method::Quadrature) => {
            quadrature_only("the unbiased probability")?;
            if measure.spec()? != MeasureSpec::Unbiased {
                bail!("quadrature is available for --measure unbiased; use --quantity lambda-section for biased sections");
            }
            estimate::prob_unbiased_quadrature(tol)?
        }
        (Quantity::VolNjm, Method::Mc) => {
            if measure.measure != Measure::General {
                bail!("vol-njm is defined under --measure general");
            }
            let (n, seed) = mc_inputs()?;
            estimate::vol_njm_mc(n, seed)?
        }
        (Quantity::VolNjm, Method::Quadrature) => bail!("vol-njm is only available by Monte Carlo"),
        (Quantity::ExpF | Quantity::ExpG, Method::Mc) => {
            let (n, seed) = mc_inputs()?;
            let (f, g) = estimate::expectation_mc(n, seed)?;
            if quantity == Quantity::ExpF { f } else { g }
        }
        (Quantity::ExpF, Method::Quadrature) => {
            quadrature_only("E[f]")?;
            estimate::expectation_f(tol)?
        }
        (Quantity::ExpG, Method::Quadrature) => {
            quadrature_only("E[g]")?;
            estimate::expectation_g(tol)?
        }
        (Quantity::LambdaSection, Method::Quadrature) => {
            quadrature_only("the lambda section")?;
            estimate::prob_lambda_section(lambda.ok_or_else(|| anyhow!("lambda-section needs --lambda"))?, tol)?
        }
        (Quantity::LambdaSection, Method::Mc) => {
            let l = lambda.ok_or_else(|| anyhow!("lambda-section needs --lambda"))?;
            let (n, seed) = mc_inputs()?;
            estimate::prob_mc(&MeasureSpec::Section { a0: l, b0: 0.0 }, n, seed)?
        }
    })
}

fn cmd_density(m: usize, s: Option<f64>, points: usize, format: Format) -> Result<Output> {
    #[derive(Serialize)]
    struct Point {
        s: f64,
        density: f64,
        cdf: f64,
    }
    #[derive(Serialize)]
    struct Table {
        m: usize,
        norm_constant: f64,
        points: Vec<Point>,
    }
    let at = |s: f64| -> Result<Point> {
        Ok(Point { s, density: density_inner_product(s, m)?, cdf: inner_product_cdf(s, m)? })
    };
    let pts = match s {
        Some(s) => vec![at(s)?],
        None => {
            if points < 2 {
                bail!("--points must be >= 2");
            }
            (0..points).map(|i| at(-1.0 + 2.0 * i as f64 / (points - 1) as f64)).collect::<Result<_>>()?
        }
    };
    let table = Table { m, norm_constant: norm_constant(m)?, points: pts };
    let body = match format {
        Format::Json => json(&table)?,
        Format::Csv | Format::Text => {
            let mut out = String::from("s,density,cdf\n");
            for p in &table.points {
                let _ = writeln!(out, "{},{},{}", format_sig(p.s, 9), format_sig(p.density, 9), format_sig(p.cdf, 9));
            }
            out
        }
    };
    Ok(Output { body, positive: true })
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = cli.out.as_deref();
    let output = match cli.command {
        Command::Check { povm_a, povm_b } => cmd_check(&povm_a, &povm_b, cli.format.unwrap_or(Format::Json))?,
        Command::Witness { povm_a, povm_b, resolution } => {
            if matches!(cli.format, Some(Format::Csv | Format::Text)) {
                bail!("witness writes POVM tensor json only");
            }
            let (tensor, note) = cmd_witness(&povm_a, &povm_b, resolution)?;
            eprintln!("{note}");
            match tensor {
                Some(t) => Output { body: json(&t)?, positive: true },
                None => return Ok(false),
            }
        }
        Command::Validate { file, tol } => {
            if !(tol > 0.0) {
                bail!("--tol must be positive");
            }
            cmd_validate(&file, tol, cli.format.unwrap_or(Format::Json))?
        }
        Command::Sample { measure, samples, seed } => {
            cmd_sample(&measure.spec()?, samples, require_seed(seed)?, cli.format.unwrap_or(Format::Csv))?
        }
        Command::Estimate { quantity, method, measure, samples, seed, lambda, tol } => {
            if samples == Some(0) {
                bail!("--samples must be >= 1");
            }
            if !(tol > 0.0) {
                bail!("--tol must be positive");
            }
            let e = cmd_estimate(quantity, method, &measure, samples, seed, lambda, tol)?;
            let body = match cli.format.unwrap_or(Format::Json) {
                Format::Json => json(&e)?,
                Format::Text => estimate_text(&e),
                Format::Csv => bail!("estimate has no csv output"),
            };
            Output { body, positive: true }
        }
        Command::Grid { resolution, samples, seed } => {
            let grid = estimate::prob_grid(resolution, samples, require_seed(seed)?)?;
            let body = match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => grid.to_csv(),
                Format::Json => json(&grid)?,
                Format::Text => bail!("grid has csv or json output"),
            };
            Output { body, positive: true }
        }
        Command::Density { dim, s, points } => cmd_density(dim, s, points, cli.format.unwrap_or(Format::Json))?,
    };
    emit(out, &output.body)?;
    Ok(output.positive)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
