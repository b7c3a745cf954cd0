use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};

use iotax::clearing::{min_excess_equilibrium, verify_partial_clearing, ClearingConfig, QpConfig};
use iotax::equilibrium::{solve_price_balance, SolverConfig};
use iotax::matcheck::{analyze_matrix, DEFAULT_MATRIX_TOL};
use iotax::model::{read_scenario, DemandRegime, ScenarioDocument};
use iotax::report::{to_json, ClearingReport, SubsidyReport, TaxReport, TaxedEquilibrium, ValidationReport};
use iotax::taxation::{
    check_tax_sustainable, perfect_tax, subsidy_requirements, sustainable_tax, NotSustainableReason, Sustainability,
    TaxVector,
};
use iotax::{EconomyModel64, Error};

#[derive(Parser, Debug)]
#[command(name = "iotax", version, about = "Taxation, equilibrium prices and market clearing for input-output economies")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Scenario document (JSON with "A", "x" and optional "c", "e", "i", "b", "name").
    #[arg(long, global = true)]
    economy: Option<PathBuf>,

    /// Activity vector: a JSON array, an object with key "z", or whitespace-separated numbers.
    #[arg(long, global = true)]
    z: Option<PathBuf>,

    /// Tax rates, in the same formats as --z (object key "pi").
    #[arg(long, global = true)]
    pi: Option<PathBuf>,

    /// Scale constant of the constructed tax; defaults to the midpoint of its admissible interval.
    #[arg(long, global = true)]
    scale_b: Option<f64>,

    /// Tolerance for balance, classification and equality-row checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Iteration cap for the price solver.
    #[arg(long, global = true, default_value_t = 100_000)]
    max_iter: usize,

    /// Damping weight of the price iteration, in (0, 1].
    #[arg(long, global = true, default_value_t = 0.5)]
    damping: f64,

    /// Write the structured report here (a directory in batch mode).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run every *.json scenario in this directory, one worker per file.
    #[arg(long, global = true)]
    batch: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Balance, demand regime, irreducibility and productivity of the economy.
    Validate,
    /// Tax built from an activity vector (--z) with z > Az.
    TaxSustainable,
    /// Tax built from gross output.
    TaxPerfect,
    /// Check whether given tax rates (--pi) support sustainable development.
    CheckTax,
    /// Split industries by the sign of final value minus value added.
    Classify,
    /// Minimum subsidies for industries with z < Az (--z, default x).
    Subsidies,
    /// Least-excess clearing solution and its partial-clearing equilibrium.
    Clear,
    /// Validation, perfect tax, value accounts, classification and subsidies.
    Report,
}

#[derive(Clone, Debug)]
struct Settings {
    command: Command,
    z: Option<Vec<f64>>,
    pi: Option<Vec<f64>>,
    scale_b: Option<f64>,
    tol: f64,
    solver: SolverConfig<f64>,
}

/// Text for stdout and the structured document.
struct Rendered {
    table: String,
    json: String,
}

enum Failure {
    Input(anyhow::Error),
    Rejected(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_domain_rejection() {
            Failure::Rejected(e.to_string())
        } else {
            Failure::Input(anyhow!(e))
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Rejected(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Input(e) => format!("error: {e:#}"),
            Failure::Rejected(m) => format!("rejected: {m}"),
        }
    }
}

fn read_vector(path: &Path, key: &str) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) {
        let arr = match &value {
            serde_json::Value::Object(map) => map
                .get(key)
                .ok_or_else(|| anyhow!("{}: object has no key {key:?}", path.display()))?,
            v => v,
        };
        let arr = arr.as_array().ok_or_else(|| anyhow!("{}: expected an array of numbers", path.display()))?;
        return arr
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| anyhow!("{}: non-numeric entry {v}", path.display())))
            .collect();
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("{}: bad number {t:?}", path.display())))
        .collect()
}

fn need<'a>(v: &'a Option<Vec<f64>>, flag: &str, command: &str) -> anyhow::Result<&'a [f64]> {
    v.as_deref().ok_or_else(|| anyhow!("{command} requires {flag}"))
}

fn render<S: serde::Serialize>(table: String, doc: &S) -> Result<Rendered, Failure> {
    Ok(Rendered { table, json: to_json(doc)? })
}

fn not_sustainable(reason: &NotSustainableReason) -> String {
    match reason {
        NotSustainableReason::NoNonnegativeSolution { negative, .. } if !negative.is_empty() => format!(
            "tax is not sustainable: Az = (1-pi)x has no nonnegative solution (negative at industries {})",
            negative.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", ")
        ),
        NotSustainableReason::NoNonnegativeSolution { residual, .. } => {
            format!("tax is not sustainable: Az = (1-pi)x has no nonnegative solution (residual {residual:.3e})")
        }
        NotSustainableReason::Markup { industries } => format!(
            "tax is not sustainable: markup condition z_k > (Az)_k fails at industries {}",
            industries.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", ")
        ),
    }
}

/// The tax a command works with and the equilibrium it supports.
fn taxed(model: &EconomyModel64, s: &Settings) -> Result<(TaxVector<f64>, Vec<f64>), Failure> {
    if let Some(pi) = &s.pi {
        let tax = TaxVector::external(pi.clone())?;
        return match check_tax_sustainable(model, &tax, s.tol)? {
            Sustainability::Sustainable { z, .. } => Ok((tax, z)),
            Sustainability::NotSustainable(r) => Err(Failure::Rejected(not_sustainable(&r))),
        };
    }
    if let Some(z) = &s.z {
        return Ok((sustainable_tax(model, z, s.scale_b)?, z.clone()));
    }
    Ok((perfect_tax(model, s.scale_b)?, model.x().to_vec()))
}

fn tax_report(doc: &ScenarioDocument, model: &EconomyModel64, s: &Settings, tax: &TaxVector<f64>, z: &[f64]) -> Result<TaxReport, Failure> {
    let solver = SolverConfig { require_positive: true, ..s.solver.clone() };
    let p = solve_price_balance(model.a(), z, &solver)?;
    let subsidies = match model.demand_regime(s.tol) {
        DemandRegime::Mixed { .. } => match subsidy_requirements(model, z, &p) {
            Ok(rows) => Some(rows),
            Err(Error::EmptyJ) => None,
            Err(e) => return Err(e.into()),
        },
        _ => None,
    };
    let eq = TaxedEquilibrium { model, tax, z, p: &p, subsidies: subsidies.as_deref() };
    Ok(TaxReport::build(doc.name.clone(), &eq, s.tol)?)
}

fn validation(doc: &ScenarioDocument, model: &EconomyModel64, s: &Settings) -> Result<ValidationReport, Failure> {
    let profile = analyze_matrix(model.a(), DEFAULT_MATRIX_TOL)?;
    Ok(ValidationReport::build(doc.name.clone(), model, &profile, s.tol))
}

fn run(doc: &ScenarioDocument, s: &Settings) -> Result<Rendered, Failure> {
    if s.command == Command::Clear {
        return clear(doc, s);
    }
    let model: EconomyModel64 = doc.economy()?;
    match s.command {
        Command::Validate => {
            let v = validation(doc, &model, s)?;
            let out = render(v.to_table(), &v)?;
            model.require_balanced(s.tol)?;
            if !v.irreducible {
                return Err(Error::NotIrreducible.into());
            }
            if !v.productive {
                return Err(Error::NotProductive { spectral_radius: v.spectral_radius }.into());
            }
            Ok(out)
        }
        Command::TaxSustainable => {
            let z = need(&s.z, "--z", "tax-sustainable")?;
            let tax = sustainable_tax(&model, z, s.scale_b)?;
            let r = tax_report(doc, &model, s, &tax, z)?;
            render(r.to_table(), &r)
        }
        Command::TaxPerfect => {
            let tax = perfect_tax(&model, s.scale_b)?;
            let r = tax_report(doc, &model, s, &tax, model.x())?;
            render(r.to_table(), &r)
        }
        Command::CheckTax => {
            need(&s.pi, "--pi", "check-tax")?;
            let (tax, z) = taxed(&model, s)?;
            let r = tax_report(doc, &model, s, &tax, &z)?;
            render(r.to_table(), &r)
        }
        Command::Classify => {
            let (tax, z) = taxed(&model, s)?;
            let r = tax_report(doc, &model, s, &tax, &z)?;
            render(r.to_table(), &r)
        }
        Command::Subsidies => {
            let z = s.z.clone().unwrap_or_else(|| model.x().to_vec());
            let p = solve_price_balance(model.a(), &z, &s.solver)?;
            let rows = match subsidy_requirements(&model, &z, &p) {
                Err(Error::EmptyJ) => Vec::new(),
                other => other?,
            };
            let r = SubsidyReport::build(doc.name.clone(), &model, &z, &p, &rows);
            render(r.to_table(), &r)
        }
        Command::Report => {
            let v = validation(doc, &model, s)?;
            model.require_balanced(s.tol)?;
            let tax = perfect_tax(&model, s.scale_b)?;
            let t = tax_report(doc, &model, s, &tax, model.x())?;
            let table = format!("{}\n{}", v.to_table(), t.to_table());
            let json = serde_json::json!({ "validation": v, "taxation": t });
            render(table, &json)
        }
        Command::Clear => unreachable!(),
    }
}

fn clear(doc: &ScenarioDocument, s: &Settings) -> Result<Rendered, Failure> {
    let a = doc.matrix::<f64>()?;
    let b = match (doc.supply::<f64>(), &s.pi, &doc.x) {
        (Some(b), _, _) => b,
        (None, Some(pi), Some(x)) if pi.len() == x.len() => x.iter().zip(pi).map(|(x, p)| (1.0 - p) * x).collect(),
        (None, Some(_), Some(_)) => return Err(anyhow!("--pi and x differ in length").into()),
        _ => return Err(anyhow!("clear needs \"b\" in the scenario, or --pi together with \"x\"").into()),
    };
    let qp = QpConfig::default();
    let cfg = ClearingConfig { equality_tol: s.tol, solver: s.solver.clone() };
    let analysis = min_excess_equilibrium(&a, &b, &qp, &cfg)?;
    let verdict = verify_partial_clearing(&a, &b, &analysis.equilibrium, s.tol)?;
    let r = ClearingReport::build(doc.name.clone(), &b, &analysis, &verdict);
    let out = render(r.to_table(), &r)?;
    if !verdict.holds {
        return Err(Failure::Rejected("assembled prices fail the partial clearing system".into()));
    }
    Ok(out)
}

fn settings(cli: &Cli) -> anyhow::Result<Settings> {
    if cli.tol.is_nan() || cli.tol <= 0.0 {
        bail!("--tol must be positive");
    }
    if !(cli.damping > 0.0 && cli.damping <= 1.0) {
        bail!("--damping must lie in (0, 1]");
    }
    if cli.max_iter == 0 {
        bail!("--max-iter must be positive");
    }
    let base = SolverConfig::<f64>::default();
    Ok(Settings {
        command: cli.command.unwrap_or(Command::Report),
        z: cli.z.as_deref().map(|p| read_vector(p, "z")).transpose()?,
        pi: cli.pi.as_deref().map(|p| read_vector(p, "pi")).transpose()?,
        scale_b: cli.scale_b,
        tol: cli.tol,
        solver: SolverConfig { tol: base.tol.min(cli.tol), max_iter: cli.max_iter, damping: cli.damping, ..base },
    })
}

fn run_file(path: &Path, s: &Settings) -> Result<Rendered, Failure> {
    let doc = read_scenario(path)?;
    run(&doc, s)
}

fn single(cli: &Cli, s: &Settings) -> u8 {
    let Some(path) = &cli.economy else {
        eprintln!("error: --economy or --batch is required");
        return 1;
    };
    match run_file(path, s) {
        Ok(r) => {
            print!("{}", r.table);
            if let Some(out) = &cli.out {
                if let Err(e) = fs::write(out, &r.json) {
                    eprintln!("error: writing {}: {e}", out.display());
                    return 1;
                }
            }
            0
        }
        Err(f) => {
            eprintln!("{}", f.message());
            f.code()
        }
    }
}

fn batch(dir: &Path, cli: &Cli, s: &Settings) -> u8 {
    let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => {
            eprintln!("error: reading {}: {e}", dir.display());
            return 1;
        }
    };
    files.sort();
    if let Some(out) = &cli.out {
        if let Err(e) = fs::create_dir_all(out) {
            eprintln!("error: creating {}: {e}", out.display());
            return 1;
        }
    }
    let results: Vec<Result<Rendered, Failure>> = std::thread::scope(|scope| {
        let workers: Vec<_> = files.iter().map(|f| scope.spawn(move || run_file(f, s))).collect();
        workers
            .into_iter()
            .map(|w| w.join().unwrap_or_else(|_| Err(Failure::Input(anyhow!("worker panicked")))))
            .collect()
    });
    let mut code = 0;
    for (file, result) in files.iter().zip(results) {
        println!("== {}", file.file_name().map_or_else(|| file.display().to_string(), |n| n.to_string_lossy().into_owned()));
        match result {
            Ok(r) => {
                print!("{}", r.table);
                if let (Some(out), Some(stem)) = (&cli.out, file.file_stem()) {
                    let target = out.join(stem).with_extension("json");
                    if let Err(e) = fs::write(&target, &r.json) {
                        eprintln!("error: writing {}: {e}", target.display());
                        code = code.max(1);
                    }
                }
            }
            Err(f) => {
                println!("{}", f.message());
                code = match (code, f.code()) {
                    (1, _) | (_, 1) => 1,
                    _ => 2,
                };
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let s = match settings(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let code = match &cli.batch {
        Some(dir) => batch(dir, &cli, &s),
        None => single(&cli, &s),
    };
    ExitCode::from(code)
}
