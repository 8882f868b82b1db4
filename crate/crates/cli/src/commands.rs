use std::path::Path;

use log::info;
use serde::Serialize;
use setpar::diagnostics::{acf, acf_counts, mse, one_step_forecasts, pearson_residuals, AcfReport};
use setpar::estimation::{fit_model, FitConfig, ModelKind};
use setpar::mc_study::{run_mc, McDesign};
use setpar::model::simulate;
use setpar::CountSeries;

use crate::args::{DataArgs, DiagnoseArgs, FitArgs, ForecastArgs, McArgs, SimulateArgs};
use crate::config::{load, FitFile, McConfig, SimulateConfig};
use crate::data::read_counts;
use crate::error::{invalid, CliError, CliResult};
use crate::manifest::{self, ManifestBuilder};
use crate::output::{fmt_opt, write_table, FitDocument, FittedSeries, NA};

fn load_data(args: &DataArgs, mb: &mut ManifestBuilder) -> CliResult<CountSeries> {
    mb.input(&args.data)?;
    let series = read_counts(&args.data, args.column.as_deref())?;
    match args.head {
        Some(0) => Err(CliError::input("--head must be at least 1")),
        Some(k) if k > series.len() => {
            Err(CliError::input(format!("--head {k} exceeds the {} observations in the data", series.len())))
        }
        Some(k) => series.head(k).map_err(invalid("--head")),
        None => Ok(series),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn simulate_cmd(args: &SimulateArgs) -> CliResult<()> {
    let mut mb = ManifestBuilder::start("simulate");
    mb.input(&args.config)?;
    let mut cfg: SimulateConfig = load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let params = cfg.validate()?;
    let (y, lambda) = simulate(&params, cfg.n, cfg.seed, cfg.burn_in, cfg.lambda_init).map_err(invalid("simulate"))?;
    let rows: Vec<Vec<String>> = y
        .values()
        .iter()
        .zip(lambda.values())
        .enumerate()
        .map(|(t, (y, l))| vec![(t + 1).to_string(), y.to_string(), l.to_string()])
        .collect();
    write_table(&args.output, &["t", "y", "lambda"], &rows)?;
    manifest::write(&manifest::sidecar(&args.output), &mb.finish(&cfg, Some(cfg.seed))?)?;
    info!("wrote {} observations to {}", cfg.n, args.output.display());
    Ok(())
}

#[derive(Serialize)]
struct FitRun<'a> {
    model: ModelKind,
    column: Option<&'a str>,
    head: Option<usize>,
    fit: &'a FitConfig,
}

pub fn fit_cmd(args: &FitArgs) -> CliResult<()> {
    let mut mb = ManifestBuilder::start("fit");
    let file: FitFile = match &args.config {
        Some(path) => {
            mb.input(path)?;
            load(path)?
        }
        None => FitFile::default(),
    };
    let model = args.model.map(ModelKind::from).or(file.model).unwrap_or(ModelKind::Setpar);
    let cfg = file.options().overlay(&args.options()).resolve()?;
    let series = load_data(&args.data, &mut mb)?;

    let result = fit_model(&series, model, &cfg).map_err(CliError::Estimation)?;
    let report = pearson_residuals(&series, &result.params().map_err(CliError::Estimation)?, result.lambda_init)
        .map_err(CliError::Estimation)?;
    let run = FitRun { model, column: args.data.column.as_deref(), head: args.data.head, fit: &cfg };
    let doc = FitDocument {
        parameters: FitDocument::parameter_rows(&result),
        residual_moments: report.moments,
        series: FittedSeries { lambda_hat: report.fitted, residuals: report.residuals },
        manifest: mb.finish(&run, None)?,
        result,
    };
    doc.write(&args.output)?;
    let r = &doc.result;
    match r.threshold {
        Some(t) => info!("threshold {t}, log-likelihood {:.4}, AIC {:.4}, BIC {:.4}", r.loglik, r.aic, r.bic),
        None => info!("log-likelihood {:.4}, AIC {:.4}, BIC {:.4}", r.loglik, r.aic, r.bic),
    }
    if !r.converged {
        log::warn!("the optimizer did not reach its tolerance at the selected threshold");
    }
    Ok(())
}

fn acf_rows(a: &AcfReport) -> Vec<Vec<String>> {
    a.values.iter().enumerate().map(|(lag, v)| vec![lag.to_string(), v.to_string(), a.band.to_string()]).collect()
}

#[derive(Serialize)]
struct DiagnoseRun<'a> {
    column: Option<&'a str>,
    head: Option<usize>,
    max_lag: usize,
}

pub fn diagnose_cmd(args: &DiagnoseArgs) -> CliResult<()> {
    let mut mb = ManifestBuilder::start("diagnose");
    mb.input(&args.fit)?;
    let doc = FitDocument::read(&args.fit)?;
    let series = load_data(&args.data, &mut mb)?;
    let r = &doc.result;
    if series.len() != r.n {
        return Err(CliError::input(format!("data has {} observations, the fit used {}", series.len(), r.n)));
    }
    let params = r.params().map_err(invalid("fit result"))?;
    let report = pearson_residuals(&series, &params, r.lambda_init).map_err(invalid("fit result"))?;
    let max_lag = args.max_lag.min(series.len() - 1);
    let residual_acf = acf(&report.residuals, max_lag).map_err(invalid("residuals"))?;
    let data_acf = acf_counts(&series, max_lag).map_err(invalid("data"))?;

    create_dir(&args.output_dir)?;
    let m = report.moments;
    let summary = [
        ("n", series.len() as f64),
        ("mean", m.mean),
        ("std_dev", m.std_dev),
        ("skewness", m.skewness),
        ("excess_kurtosis", m.excess_kurtosis),
        ("skewness_biased", m.skewness_biased),
        ("excess_kurtosis_biased", m.excess_kurtosis_biased),
        ("acf_band", residual_acf.band),
        ("acf_exceedances", residual_acf.exceedances() as f64),
    ];
    let rows: Vec<Vec<String>> = summary.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]).collect();
    write_table(&args.output_dir.join("residual_summary.csv"), &["statistic", "value"], &rows)?;
    write_table(&args.output_dir.join("residual_acf.csv"), &["lag", "acf", "band"], &acf_rows(&residual_acf))?;
    write_table(&args.output_dir.join("data_acf.csv"), &["lag", "acf", "band"], &acf_rows(&data_acf))?;
    let fitted: Vec<Vec<String>> = (0..series.len())
        .map(|t| {
            vec![
                (t + 1).to_string(),
                series.values()[t].to_string(),
                report.fitted[t].to_string(),
                report.residuals[t].to_string(),
            ]
        })
        .collect();
    write_table(&args.output_dir.join("fitted.csv"), &["t", "observed", "fitted", "residual"], &fitted)?;
    let run = DiagnoseRun { column: args.data.column.as_deref(), head: args.data.head, max_lag };
    manifest::write(&args.output_dir.join("manifest.toml"), &mb.finish(&run, None)?)?;
    info!("residual mean {:.4}, sd {:.4}, skewness {:.4}, excess kurtosis {:.4}", m.mean, m.std_dev, m.skewness, m.excess_kurtosis);
    Ok(())
}

#[derive(Serialize)]
struct ForecastRun<'a> {
    column: Option<&'a str>,
}

pub fn forecast_cmd(args: &ForecastArgs) -> CliResult<()> {
    let mut mb = ManifestBuilder::start("forecast");
    mb.input(&args.fit)?;
    let doc = FitDocument::read(&args.fit)?;
    let column = args.column.as_deref();
    let history = load_data(&DataArgs { data: args.history.clone(), column: args.column.clone(), head: None }, &mut mb)?;
    let future = load_data(&DataArgs { data: args.future.clone(), column: args.column.clone(), head: None }, &mut mb)?;
    let params = doc.result.params().map_err(invalid("fit result"))?;
    let forecasts =
        one_step_forecasts(&history, &params, doc.result.lambda_init, future.values()).map_err(invalid("forecast"))?;
    let err = mse(future.values(), &forecasts).map_err(invalid("forecast"))?;

    create_dir(&args.output_dir)?;
    let rows: Vec<Vec<String>> = future
        .values()
        .iter()
        .zip(&forecasts)
        .enumerate()
        .map(|(k, (&y, &f))| vec![(k + 1).to_string(), y.to_string(), f.to_string(), (y as f64 - f).to_string()])
        .collect();
    write_table(&args.output_dir.join("forecasts.csv"), &["step", "observed", "forecast", "error"], &rows)?;
    let summary = vec![
        vec!["horizon".to_string(), future.len().to_string()],
        vec!["mse".to_string(), err.to_string()],
    ];
    write_table(&args.output_dir.join("forecast_summary.csv"), &["statistic", "value"], &summary)?;
    manifest::write(&args.output_dir.join("manifest.toml"), &mb.finish(&ForecastRun { column }, None)?)?;
    info!("{} one-step forecasts, mean squared error {:.4}", future.len(), err);
    Ok(())
}

#[derive(Serialize)]
struct McRun<'a> {
    design: &'a McDesign,
    workers: usize,
}

const MC_HEADER: [&str; 9] = ["n", "statistic", "r", "d1", "a1", "b1", "d2", "a2", "b2"];

/// One row per sample size and statistic: estimate means, `n·cov`
/// diagonals and mean `Ĝ⁻¹` diagonals (the threshold column `r` has no
/// information-based variance), followed by bookkeeping rows that use the
/// `r` column only.
fn mc_rows(summary: &setpar::mc_study::McSummary) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let stat = |n: usize, name: &str, values: Vec<String>| {
        let mut row = vec![n.to_string(), name.to_string()];
        row.extend(values);
        row
    };
    let seven = |v: &Option<Vec<f64>>| match v {
        Some(v) => v.iter().map(f64::to_string).collect(),
        None => vec![NA.to_string(); 7],
    };
    let only_r = |v: String| {
        let mut row = vec![v];
        row.extend(std::iter::repeat_n(NA.to_string(), 6));
        row
    };
    for c in &summary.cells {
        rows.push(stat(c.n, "mean", seven(&c.mean_estimate)));
        rows.push(stat(c.n, "n_cov", seven(&c.n_cov_diag)));
        let mut g_row = vec![NA.to_string()];
        match &c.mean_g_inv_diag {
            Some(g) => g_row.extend(g.iter().map(f64::to_string)),
            None => g_row.extend(std::iter::repeat_n(NA.to_string(), 6)),
        }
        rows.push(stat(c.n, "mean_g_inv", g_row));
        rows.push(stat(c.n, "replications", only_r(c.replications.to_string())));
        rows.push(stat(c.n, "failures", only_r(c.failures.to_string())));
        rows.push(stat(c.n, "threshold_hit_rate", only_r(fmt_opt(c.threshold_hit_rate))));
        rows.push(stat(c.n, "modal_threshold", only_r(c.modal_threshold.map_or(NA.to_string(), |t| t.to_string()))));
    }
    rows
}

fn record_rows(summary: &setpar::mc_study::McSummary) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for c in &summary.cells {
        for r in &c.records {
            let mut row = vec![c.n.to_string(), r.index.to_string(), r.converged.to_string()];
            row.push(r.threshold.map_or(NA.to_string(), |t| t.to_string()));
            match &r.theta {
                Some(t) => row.extend(t.iter().map(f64::to_string)),
                None => row.extend(std::iter::repeat_n(NA.to_string(), 6)),
            }
            row.push(r.error.clone().unwrap_or_default());
            rows.push(row);
        }
    }
    rows
}

pub fn mc_cmd(args: &McArgs) -> CliResult<()> {
    let mut mb = ManifestBuilder::start("mc");
    mb.input(&args.config)?;
    let mut cfg: McConfig = load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let design = cfg.design()?;
    let workers = match args.workers {
        Some(0) => return Err(CliError::input("--workers must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let summary = run_mc(&design, workers).map_err(CliError::Estimation)?;
    write_table(&args.output, &MC_HEADER, &mc_rows(&summary))?;
    if let Some(path) = &args.records {
        let header = ["n", "index", "converged", "r", "d1", "a1", "b1", "d2", "a2", "b2", "error"];
        write_table(path, &header, &record_rows(&summary))?;
    }
    let run = McRun { design: &design, workers };
    manifest::write(&manifest::sidecar(&args.output), &mb.finish(&run, Some(design.seed))?)?;
    for c in &summary.cells {
        info!("n = {}: {} of {} replications failed", c.n, c.failures, c.replications);
    }
    Ok(())
}
