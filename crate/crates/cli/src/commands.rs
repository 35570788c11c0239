use std::fs;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use itoexp::error_analysis::{
    convergence_rate_probe, moment_bound, moment_constant, mse_upper_bound, select_truncation_with_table,
};
use itoexp::expansion::evaluate_expansion;
use itoexp::path_oracle::empirical_mse;
use itoexp::rational::exact_table_rational;
use itoexp::sampling::{draw_zeta, time_component_warning};
use itoexp::sde_demo::run_strong_convergence;
use itoexp::{
    BasisKind, CoefficientTable, ComponentIndex, ErrorReport, IntegrationInterval, OrthonormalBasis, SeedSpec,
    TableDocument, TruncationRule, WeightFunction,
};

use crate::output::{num, render, Artifact, Header};
use crate::{Cli, Command, ProblemArgs, DEFAULT_SEED, SEED_ENV};

/// Largest table for which exact rationals are attached to `coeffs` output.
const RATIONAL_ENTRY_LIMIT: usize = 4096;

/// Failure that maps to exit code 2.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "validation failed: {}", self.0)
    }
}

impl std::error::Error for ValidationFailed {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ValidationFailed>().is_some() {
            return 2;
        }
        if let Some(itoexp::Error::Capacity { .. }) = cause.downcast_ref::<itoexp::Error>() {
            return 2;
        }
    }
    1
}

fn resolve_seed(flag: Option<u64>) -> Result<(u64, &'static str)> {
    if let Some(s) = flag {
        return Ok((s, "flag"));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            let s = v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not a 64-bit integer"))?;
            Ok((s, "env"))
        }
        Err(_) => Ok((DEFAULT_SEED, "default")),
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let (seed, seed_source) = resolve_seed(cli.seed)?;
    if cli.threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building the worker pool")?;
    let threads = pool.current_num_threads();
    let (name, result) = pool.install(|| dispatch(&cli.command, seed));
    let (artifact, outcome) = result?;
    let header = Header {
        tool: "itoexp",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config: artifact.config.clone(),
        seed,
        seed_source,
        threads,
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    let text = render(&header, &artifact, cli.format);
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout")?,
    }
    match outcome {
        Some(failure) => Err(ValidationFailed(failure).into()),
        None => Ok(0),
    }
}

type Outcome = Result<(Artifact, Option<String>)>;

fn dispatch(command: &Command, seed: u64) -> (&'static str, Outcome) {
    match command {
        Command::Coeffs(p) => ("coeffs", coeffs(p).map(|a| (a, None))),
        Command::Residual(p) => ("residual", residual(p).map(|a| (a, None))),
        Command::Sample { problem, samples } => ("sample", sample(problem, *samples, seed).map(|a| (a, None))),
        Command::Mse(p) => ("mse", mse(p).map(|a| (a, None))),
        Command::Validate { problem, trials, n } => ("validate", validate(problem, *trials, *n, seed)),
        Command::Rate { problem, p_values } => ("rate", rate(problem, p_values).map(|a| (a, None))),
        Command::SdeDemo { steps, q, trials } => ("sde-demo", sde_demo(steps, *q, *trials, seed).map(|a| (a, None))),
    }
}

fn parse_weight(text: &str) -> Result<WeightFunction> {
    let text = text.trim();
    if text == "1" || text.eq_ignore_ascii_case("one") {
        return Ok(WeightFunction::ConstantOne);
    }
    let coefficients = text
        .split(',')
        .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad weight coefficient {c:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightFunction::polynomial(coefficients)?)
}

/// Fully resolved problem: basis, weights, components and the table.
struct Problem {
    basis: OrthonormalBasis,
    icomp: ComponentIndex,
    table: Option<CoefficientTable>,
    selected_p: Option<usize>,
    warnings: Vec<String>,
}

impl Problem {
    fn table(&self) -> &CoefficientTable {
        self.table.as_ref().expect("table requested")
    }

    fn config(&self, args: &ProblemArgs) -> Value {
        let weights = match &self.table {
            Some(t) => serde_json::to_value(t.weights()).expect("weights serialize"),
            None => Value::Null,
        };
        json!({
            "basis": self.basis.kind.to_string(),
            "t": self.basis.interval.start(),
            "T": self.basis.interval.end(),
            "k": self.icomp.k(),
            "p": self.table.as_ref().map(|t| t.p()),
            "tol": args.tol,
            "components": self.icomp.indices(),
            "weights": weights,
            "table_file": args.table.as_ref().map(|p| p.display().to_string()),
        })
    }
}

fn resolve_weights(args: &ProblemArgs, k: usize) -> Result<Vec<WeightFunction>> {
    match args.weights.len() {
        0 => Ok(vec![WeightFunction::ConstantOne; k]),
        n if n == k => args.weights.iter().map(|w| parse_weight(w)).collect(),
        n => bail!("{n} --weight values given for k = {k}; give none or exactly k"),
    }
}

fn resolve(args: &ProblemArgs, need_table: bool) -> Result<Problem> {
    let loaded = match &args.table {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut value: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if let Some(data) = value.get_mut("data") {
                value = data.take();
            }
            let doc: TableDocument =
                serde_json::from_value(value).with_context(|| format!("reading the table in {}", path.display()))?;
            Some(doc.into_table()?)
        }
        None => None,
    };
    let k = match (&args.components, args.k, &loaded) {
        (_, _, Some(t)) => t.k(),
        (Some(c), Some(k), None) if c.len() != k => bail!("--k {k} disagrees with {} components", c.len()),
        (Some(c), _, None) => c.len(),
        (None, Some(k), None) => k,
        (None, None, None) => bail!("give --k or --components"),
    };
    if k == 0 {
        bail!("multiplicity must be at least 1");
    }
    let indices = args.components.clone().unwrap_or_else(|| (1..=k).collect());
    if indices.len() != k {
        bail!("{} components given for a table with k = {k}", indices.len());
    }
    let icomp = ComponentIndex::from_indices(indices)?;
    if let Some(table) = loaded {
        if args.p.is_some() || args.tol.is_some() || !args.weights.is_empty() {
            bail!("--table cannot be combined with --p, --tol or --weight");
        }
        let warnings = time_component_warning(&table.basis().interval, icomp.indices()).into_iter().collect();
        return Ok(Problem { basis: *table.basis(), icomp, table: Some(table), selected_p: None, warnings });
    }
    let basis = OrthonormalBasis::new(args.basis, IntegrationInterval::new(args.t, args.big_t)?);
    let weights = resolve_weights(args, k)?;
    let warnings = time_component_warning(&basis.interval, icomp.indices()).into_iter().collect();
    let (table, selected_p) = match (args.p, args.tol) {
        (Some(p), None) => (Some(CoefficientTable::compute(basis, weights, p)?), None),
        (None, Some(tol)) => {
            let (p, table) = select_truncation_with_table(&icomp, &basis, &weights, tol)?;
            (Some(table), Some(p))
        }
        (None, None) if need_table => bail!("give --p or --tol"),
        _ => (None, None),
    };
    Ok(Problem { basis, icomp, table, selected_p, warnings })
}

fn coeffs(args: &ProblemArgs) -> Result<Artifact> {
    let problem = resolve(args, true)?;
    let table = problem.table();
    let rationals = if table.basis().kind == BasisKind::Legendre
        && table.k() <= 3
        && table.values().len() <= RATIONAL_ENTRY_LIMIT
    {
        Some(exact_table_rational(table.basis(), table.weights(), table.p())?)
    } else {
        None
    };
    let doc = TableDocument::from_table(table, rationals.as_deref())?;
    let mut columns: Vec<String> = (1..=table.k()).map(|l| format!("j{l}")).collect();
    columns.extend(["value", "rational", "scale_exp", "radicand"].map(String::from));
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut art = Artifact::new(problem.config(args), serde_json::to_value(&doc)?, &column_refs);
    for e in &doc.entries {
        let mut row: Vec<String> = e.j.iter().map(|j| j.to_string()).collect();
        row.push(num(e.value));
        row.push(e.rational.clone().unwrap_or_default());
        row.push(e.scale_exp.map(num).unwrap_or_default());
        row.push(e.radicand.map(|r| r.to_string()).unwrap_or_default());
        art.row(row);
    }
    Ok(art)
}

fn residual(args: &ProblemArgs) -> Result<Artifact> {
    let problem = resolve(args, true)?;
    let table = problem.table();
    let (res, bound) = (table.residual(), mse_upper_bound(table));
    let data = json!({
        "k": table.k(),
        "p": table.p(),
        "selected_p": problem.selected_p,
        "parseval_norm": table.parseval_norm(),
        "residual": res,
        "mse_bound": bound,
        "warnings": problem.warnings,
    });
    let mut art = Artifact::new(problem.config(args), data, &["k", "p", "parseval_norm", "residual", "mse_bound"]);
    art.row(vec![table.k().to_string(), table.p().to_string(), num(table.parseval_norm()), num(res), num(bound)]);
    Ok(art)
}

fn sample(args: &ProblemArgs, samples: usize, seed: u64) -> Result<Artifact> {
    if samples == 0 {
        bail!("--samples must be at least 1");
    }
    let problem = resolve(args, true)?;
    let table = problem.table();
    let m = problem.icomp.m();
    let base = SeedSpec::new(seed, 0);
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let zeta = draw_zeta(base.with_stream(s), &problem.basis, m, table.p())?;
            evaluate_expansion(table, &problem.icomp, &zeta)
        })
        .collect::<itoexp::Result<_>>()?;
    let mean = values.iter().sum::<f64>() / samples as f64;
    let variance = if samples > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64
    } else {
        f64::NAN
    };
    let data = json!({
        "k": table.k(),
        "p": table.p(),
        "components": problem.icomp.indices(),
        "samples": samples,
        "mean": mean,
        "variance": variance,
        "values": values,
        "warnings": problem.warnings,
    });
    let mut config = problem.config(args);
    config["samples"] = json!(samples);
    let mut art = Artifact::new(config, data, &["index", "value"]);
    for (i, v) in values.iter().enumerate() {
        art.row(vec![i.to_string(), num(*v)]);
    }
    Ok(art)
}

fn mse(args: &ProblemArgs) -> Result<Artifact> {
    let problem = resolve(args, true)?;
    let mut report = ErrorReport::build(problem.table(), &problem.icomp, &[1, 2])?;
    report.selected_p = problem.selected_p;
    let data = serde_json::to_value(&report)?;
    let mut art = Artifact::new(
        problem.config(args),
        data,
        &["k", "p", "residual", "mse_bound", "exact_mse", "moment_bound_1", "moment_bound_2"],
    );
    art.row(vec![
        report.k.to_string(),
        report.p.to_string(),
        num(report.residual),
        num(report.mse_bound),
        report.exact_mse.map(num).unwrap_or_default(),
        num(report.moment_bounds[&1]),
        num(report.moment_bounds[&2]),
    ]);
    Ok(art)
}

fn validate(args: &ProblemArgs, trials: usize, n: usize, seed: u64) -> Outcome {
    let problem = resolve(args, true)?;
    let table = problem.table();
    let report = ErrorReport::build(table, &problem.icomp, &[2])?;
    let estimate = empirical_mse(table, &problem.icomp, trials, n, SeedSpec::new(seed, 0))?;
    let len = problem.basis.interval.length();
    let allowance = 10.0 * len.powi(table.k() as i32) / n as f64;
    let (kind, predicted, mse_pass) = match report.exact_mse {
        Some(exact) => ("exact", exact, (estimate.estimate - exact).abs() <= 3.0 * estimate.std_error + allowance),
        None => {
            let bound = report.mse_bound;
            ("bound", bound, estimate.estimate <= bound + 3.0 * estimate.std_error + allowance)
        }
    };
    let fourth_bound = moment_bound(table, 2)?;
    let fourth_pass = estimate.fourth_moment <= fourth_bound + 3.0 * estimate.fourth_std_error;
    let pass = mse_pass && fourth_pass;
    let data = json!({
        "k": table.k(),
        "p": table.p(),
        "components": problem.icomp.indices(),
        "predicted": predicted,
        "prediction_kind": kind,
        "estimate": estimate.estimate,
        "std_error": estimate.std_error,
        "allowance": allowance,
        "fourth_moment": estimate.fourth_moment,
        "fourth_std_error": estimate.fourth_std_error,
        "fourth_moment_bound": fourth_bound,
        "moment_constant": moment_constant(2, table.k()),
        "trials": trials,
        "N": n,
        "pass": pass,
        "warnings": problem.warnings,
    });
    let mut config = problem.config(args);
    config["trials"] = json!(trials);
    config["N"] = json!(n);
    let mut art = Artifact::new(
        config,
        data,
        &[
            "predicted",
            "prediction_kind",
            "estimate",
            "std_error",
            "allowance",
            "fourth_moment",
            "fourth_std_error",
            "fourth_moment_bound",
            "pass",
        ],
    );
    art.row(vec![
        num(predicted),
        kind.to_string(),
        num(estimate.estimate),
        num(estimate.std_error),
        num(allowance),
        num(estimate.fourth_moment),
        num(estimate.fourth_std_error),
        num(fourth_bound),
        pass.to_string(),
    ]);
    let failure = (!pass).then(|| {
        format!(
            "estimate {} vs {kind} {predicted} (3 SE = {}, allowance {allowance})",
            estimate.estimate,
            3.0 * estimate.std_error
        )
    });
    Ok((art, failure))
}

fn rate(args: &ProblemArgs, p_values: &[usize]) -> Result<Artifact> {
    if args.p.is_some() || args.tol.is_some() || args.table.is_some() {
        bail!("rate takes --p-values, not --p, --tol or --table");
    }
    let problem = resolve(args, false)?;
    let k = problem.icomp.k();
    let weights = resolve_weights(args, k)?;
    let probe = convergence_rate_probe(k, &problem.basis, &weights, p_values)?;
    let mut config = problem.config(args);
    config["p_values"] = json!(p_values);
    config["weights"] = serde_json::to_value(&weights)?;
    let data = serde_json::to_value(&probe)?;
    let mut art = Artifact::new(config, data, &["p", "residual", "p_times_residual", "fitted_slope"]);
    let slope = probe.slope.map(num).unwrap_or_else(|| "exact".into());
    for (&p, &r) in probe.p_values.iter().zip(&probe.residuals) {
        art.row(vec![p.to_string(), num(r), num(p as f64 * r), slope.clone()]);
    }
    Ok(art)
}

fn sde_demo(steps: &[usize], q: Option<usize>, trials: usize, seed: u64) -> Result<Artifact> {
    let rule = match q {
        Some(q) => TruncationRule::Fixed(q),
        None => TruncationRule::Selected,
    };
    let run = run_strong_convergence(SeedSpec::new(seed, 0), steps, rule, trials)
        .map_err(|e| anyhow!(e))
        .context("running the strong convergence experiment")?;
    let config = json!({
        "steps": steps,
        "q": q.map(|q| json!(q)).unwrap_or(json!("selected")),
        "trials": trials,
    });
    let mut art =
        Artifact::new(config, serde_json::to_value(&run)?, &["delta", "q", "mean_error", "std_error", "fitted_order"]);
    for (d, q, e, s) in run.rows() {
        art.row(vec![num(d), q.to_string(), num(e), num(s), num(run.fitted_order)]);
    }
    Ok(art)
}
