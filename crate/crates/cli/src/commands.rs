//! Subcommand implementations. The pipeline order for real data mirrors the
//! analysis flow: preprocess --impute, mean-fit, preprocess --taper, fit,
//! diagnose.

use std::path::{Path, PathBuf};

use axisym::{
    default_init, empirical_dir_variogram, empirical_profile, fit_mean_with, fit_mle,
    fitted_dir_variogram, fitted_profile, impute_missing, loglik_fft, simulate_grid,
    taper_field, Direction, FitOptions, GridSpec, LonOffset, MeanFitOptions, ModelSpec,
    ParamVector, ProfileKind, TaperSpec,
};

use crate::io::{
    self, format_value, read_field, read_params, write_field, write_fit_report, write_params,
    write_tsv,
};
use crate::{
    CliError, DiagnoseArgs, FitArgs, LoglikArgs, MeanFitArgs, ModelInfoArgs, PreprocessArgs,
    SimulateArgs,
};

fn parse_model(s: &str) -> Result<ModelSpec, CliError> {
    s.parse().map_err(|e: axisym::CovError| CliError::Usage(e.to_string()))
}

/// Parses `MxN:<lat_min>:<lat_max>[:center|:edge]`.
fn parse_grid(s: &str) -> Result<GridSpec, CliError> {
    let bad = |what: &str| CliError::Usage(format!("grid '{s}': {what}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(bad("expected MxN:<lat_min>:<lat_max>[:center|:edge]"));
    }
    let (m_str, n_str) = parts[0]
        .split_once(['x', 'X'])
        .ok_or_else(|| bad("size must look like 20x48"))?;
    let m: usize = m_str.parse().map_err(|_| bad("bad latitude count"))?;
    let n: usize = n_str.parse().map_err(|_| bad("bad longitude count"))?;
    let lat_min: f64 = parts[1].parse().map_err(|_| bad("bad lat_min"))?;
    let lat_max: f64 = parts[2].parse().map_err(|_| bad("bad lat_max"))?;
    let offset = match parts.get(3) {
        None | Some(&"center") => LonOffset::CellCenter,
        Some(&"edge") => LonOffset::CellEdge,
        Some(other) => return Err(bad(&format!("bad offset '{other}'"))),
    };
    GridSpec::with_offset(m, n, lat_min, lat_max, offset)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn rep_path(out: &Path, rep: usize, reps: usize) -> PathBuf {
    if reps == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    let name = match out.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}.r{}.{ext}", rep + 1),
        None => format!("{stem}.r{}", rep + 1),
    };
    out.with_file_name(name)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = parse_model(&args.model)?;
    let file = read_params(&args.params, &spec)?;
    if let Some(file_model) = file.model {
        if file_model != spec {
            return Err(CliError::Constraint(format!(
                "parameter file is for model {file_model}, asked for {spec}"
            )));
        }
    }
    let grid = parse_grid(&args.grid)?;
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let fields = simulate_grid(&spec, &file.params, &grid, args.seed, args.reps)?;
    for (rep, field) in fields.iter().enumerate() {
        write_field(&rep_path(&args.out, rep, args.reps), field)?;
    }
    Ok(())
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let spec = parse_model(&args.model)?;
    let field = read_field(&args.data)?;
    if !field.is_complete() {
        return Err(CliError::Constraint(
            "field has missing values; run preprocess --impute first".into(),
        ));
    }
    let mut init: ParamVector = if args.init == "auto" {
        default_init(&spec, &field)
    } else {
        let file = read_params(Path::new(&args.init), &spec)?;
        file.params
    };
    if let Some(fixed) = &args.fixed {
        for name in fixed.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let id = name
                .parse()
                .map_err(|e: axisym::CovError| CliError::Usage(e.to_string()))?;
            init.fixed.insert(id);
        }
    }
    let opts = FitOptions {
        restarts: args.restarts.max(1),
        seed: args.seed,
        ..FitOptions::default()
    };
    let fit = fit_mle(&field, &spec, &init, &opts)?;
    write_fit_report(&args.out, &fit)?;
    println!(
        "model {} loglik {} converged {} iterations {}",
        spec,
        format_value(fit.loglik),
        fit.converged,
        fit.iterations
    );
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "iteration cap reached; best-so-far written to {}",
            args.out.display()
        )));
    }
    Ok(())
}

pub fn loglik(args: LoglikArgs) -> Result<(), CliError> {
    let field = read_field(&args.data)?;
    // the model can come from the flag or from the file header
    let spec = match &args.model {
        Some(s) => parse_model(s)?,
        None => {
            let text = std::fs::read_to_string(&args.params)
                .map_err(|e| CliError::Malformed(format!("{}: {e}", args.params.display())))?;
            let line = text
                .lines()
                .find_map(|l| l.trim().strip_prefix("model"))
                .and_then(|rest| rest.trim().strip_prefix('='))
                .map(str::trim)
                .ok_or_else(|| {
                    CliError::Usage(
                        "no --model given and the parameter file has no 'model =' line".into(),
                    )
                })?;
            parse_model(line)?
        }
    };
    let file = read_params(&args.params, &spec)?;
    let ll = loglik_fft(&field, &spec, &file.params)?;
    let line = format!("loglik = {}", format_value(ll));
    println!("{line}");
    if let Some(out) = &args.out {
        std::fs::write(out, format!("{line}\n"))
            .map_err(|e| CliError::Malformed(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}

pub fn mean_fit(args: MeanFitArgs) -> Result<(), CliError> {
    if args.out_mean.is_none() && args.out_residual.is_none() && args.out_coeffs.is_none() {
        return Err(CliError::Usage(
            "request at least one of --out-mean, --out-residual, --out-coeffs".into(),
        ));
    }
    let field = read_field(&args.data)?;
    let fit = fit_mean_with(
        &field,
        args.degree,
        MeanFitOptions {
            latitude_weighted: args.weighted,
        },
    )?;
    if let Some(p) = &args.out_mean {
        write_field(p, &fit.fitted)?;
    }
    if let Some(p) = &args.out_residual {
        write_field(p, &fit.residual)?;
    }
    if let Some(p) = &args.out_coeffs {
        let mut out = String::new();
        out.push_str(&format!("degree = {}\n", fit.model.degree));
        out.push_str(&format!("convention = {}\n", fit.model.convention));
        for (i, c) in fit.model.coeffs.iter().enumerate() {
            out.push_str(&format!("coeff{i} = {}\n", format_value(*c)));
        }
        std::fs::write(p, out)
            .map_err(|e| CliError::Malformed(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

pub fn preprocess(args: PreprocessArgs) -> Result<(), CliError> {
    if !args.impute && args.taper.is_none() {
        return Err(CliError::Usage(
            "nothing to do: pass --impute and/or --taper <fraction>".into(),
        ));
    }
    let mut field = read_field(&args.data)?;
    if args.impute {
        field = impute_missing(&field)?;
    }
    if let Some(fraction) = args.taper {
        let taper = TaperSpec::new(fraction)?;
        field = taper_field(&field, &taper)?;
    }
    write_field(&args.out, &field)
}

pub fn diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let field = read_field(&args.data)?;
    // model + parameters are optional; without them only empirical columns
    // are produced
    let fitted_source: Option<(ModelSpec, ParamVector)> = match (&args.fit, &args.model) {
        (Some(fit_path), _) => {
            let text = std::fs::read_to_string(fit_path)
                .map_err(|e| CliError::Malformed(format!("{}: {e}", fit_path.display())))?;
            let model_line = text
                .lines()
                .find_map(|l| l.trim().strip_prefix("model"))
                .and_then(|rest| rest.trim().strip_prefix('='))
                .map(str::trim)
                .ok_or_else(|| {
                    CliError::Malformed(format!(
                        "{}: fit report lacks a 'model =' line",
                        fit_path.display()
                    ))
                })?;
            let spec = parse_model(model_line)?;
            let file = read_params(fit_path, &spec)?;
            Some((spec, file.params))
        }
        (None, Some(model)) => {
            let spec = parse_model(model)?;
            let params_path = args.params.as_ref().ok_or_else(|| {
                CliError::Usage("--model needs --params (or use --fit)".into())
            })?;
            let file = read_params(params_path, &spec)?;
            Some((spec, file.params))
        }
        (None, None) => None,
    };

    if args.which == "dirvario" {
        let lat_index = args
            .lat_index
            .ok_or_else(|| CliError::Usage("dirvario needs --lat-index".into()))?;
        let mut rows = Vec::new();
        for dir in Direction::ALL {
            let emp = empirical_dir_variogram(&field, lat_index, dir)?;
            let mut row = vec![dir.to_string(), format_value(emp)];
            if let Some((spec, params)) = &fitted_source {
                let fit = fitted_dir_variogram(spec, params, field.grid(), lat_index, dir)?;
                row.push(format_value(fit));
            }
            rows.push(row);
        }
        let header: &[&str] = if fitted_source.is_some() {
            &["direction", "empirical", "fitted"]
        } else {
            &["direction", "empirical"]
        };
        return write_tsv(&args.out, header, &rows);
    }

    let kind: ProfileKind = args
        .which
        .parse()
        .map_err(|e: String| CliError::Usage(e))?;
    let curve = empirical_profile(&field, kind)?;
    let fitted = match &fitted_source {
        Some((spec, params)) => fitted_profile(spec, params, field.grid(), kind)?,
        None => None,
    };
    let mut rows = Vec::new();
    for (i, (&axis, &emp)) in curve.axis.iter().zip(&curve.empirical).enumerate() {
        let mut row = vec![format_value(axis), format_value(emp)];
        if let Some(f) = &fitted {
            row.push(format_value(f[i]));
        }
        rows.push(row);
    }
    let header: &[&str] = if fitted.is_some() {
        &["axis", "empirical", "fitted"]
    } else {
        &["axis", "empirical"]
    };
    write_tsv(&args.out, header, &rows)
}

pub fn model_info(args: ModelInfoArgs) -> Result<(), CliError> {
    let spec = parse_model(&args.model)?;
    let name = spec
        .letter()
        .map(|c| c.to_string())
        .unwrap_or_else(|| spec.to_string());
    println!("model = {name}");
    println!("rescale_order = {}", spec.rescale_order);
    match spec.op {
        Some(op) => {
            println!("a_order = {}", op.a_order);
            match op.b_order {
                Some(b) => println!("b_order = {b}"),
                None => println!("b_order = -"),
            }
            match op.c_order {
                Some(c) => println!("c_order = {c}"),
                None => println!("c_order = -"),
            }
        }
        None => {
            println!("a_order = -");
            println!("b_order = -");
            println!("c_order = -");
        }
    }
    println!("param_count = {}", spec.param_count());
    if let Some(note) = spec.catalog_note() {
        println!("note = {note}");
    }
    Ok(())
}
