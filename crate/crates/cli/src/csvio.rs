//! Curve, truth and eigenfunction CSV files.
//!
//! Curves are wide: a `curve_id,t_1,...,t_N` header whose grid columns are
//! the points `j / N` written with 12 significant digits, then one row per
//! curve.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use passfpca::estimators::EigenSystem;
use passfpca::simgen::GroundTruth;
use passfpca::{FunctionalSample, Grid};

use crate::error::CliError;

/// Largest accepted gap between a header value and `j / N`.
const GRID_TOL: f64 = 1e-9;

/// `x` with 12 significant digits, trailing zeros removed.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exponent) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!(),
        },
        _ => {
            let line = e.position().map(|p| p.line());
            CliError::parse(path, line, e.to_string())
        }
    }
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_curves(path: &Path, sample: &FunctionalSample) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut header = vec!["curve_id".to_string()];
    header.extend(sample.grid().points().iter().map(|&t| format_sig12(t)));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..sample.n_curves() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(sample.values().row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_curves(path: &Path) -> Result<FunctionalSample, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 3 || header.get(0).map(str::trim) != Some("curve_id") {
        return Err(CliError::parse(
            path,
            Some(1),
            "header must be `curve_id,t_1,...,t_N` with at least two grid points",
        ));
    }
    let n_points = header.len() - 1;
    let grid = Grid::new(n_points)?;
    for (j, (field, &want)) in header.iter().skip(1).zip(grid.points()).enumerate() {
        let got: f64 = field.trim().parse().map_err(|_| {
            CliError::parse(
                path,
                Some(1),
                format!("grid column {} `{field}` is not a number", j + 1),
            )
        })?;
        if (got - want).abs() > GRID_TOL {
            return Err(CliError::parse(
                path,
                Some(1),
                format!(
                    "grid column {} is {got}, expected {}",
                    j + 1,
                    format_sig12(want)
                ),
            ));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line());
        let mut row = Vec::with_capacity(n_points);
        for (j, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::parse(
                    path,
                    line,
                    format!("column {} `{field}` is not a number", j + 2),
                )
            })?;
            if !v.is_finite() {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("column {} is not finite", j + 2),
                ));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::parse(path, Some(2), "no curves"));
    }
    Ok(FunctionalSample::from_rows(grid, &rows)?)
}

/// Long-format truth: `quantity,index,t,value` rows for the mean,
/// eigenfunctions, eigenvalues and outlier mask.
pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut put = |q: &str, i: String, t: String, v: String| {
        w.write_record([q, i.as_str(), t.as_str(), v.as_str()])
            .map_err(|e| csv_err(path, e))
    };
    put("quantity", "index".into(), "t".into(), "value".into())?;
    let points = truth.grid.points();
    for (t, v) in points.iter().zip(&truth.mean) {
        put("mean", String::new(), format_sig12(*t), v.to_string())?;
    }
    for j in 0..truth.eigenfunctions.ncols() {
        for (a, t) in points.iter().enumerate() {
            let v = truth.eigenfunctions[(a, j)];
            put(
                "eigenfunction",
                (j + 1).to_string(),
                format_sig12(*t),
                v.to_string(),
            )?;
        }
    }
    for (j, v) in truth.eigenvalues.iter().enumerate() {
        put(
            "eigenvalue",
            (j + 1).to_string(),
            String::new(),
            v.to_string(),
        )?;
    }
    for (i, m) in truth.outlier_mask.iter().enumerate() {
        put(
            "outlier",
            (i + 1).to_string(),
            String::new(),
            u8::from(*m).to_string(),
        )?;
    }
    finish(path, w)
}

/// `t,phi_1,...,phi_q`, one row per grid point.
pub fn write_eigenfunctions(path: &Path, eig: &EigenSystem) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=eig.q()).map(|j| format!("phi_{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (a, t) in eig.grid.points().iter().enumerate() {
        let mut row = vec![format_sig12(*t)];
        row.extend((0..eig.q()).map(|j| eig.eigenfunctions[(a, j)].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_json<T: serde::Serialize>(path: Option<&Path>, doc: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(doc).expect("serializable document");
    match path {
        None => writeln!(std::io::stdout(), "{text}").map_err(|e| CliError::io("<stdout>", e)),
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            let mut f = File::create(p).map_err(|e| CliError::io(p, e))?;
            writeln!(f, "{text}").map_err(|e| CliError::io(p, e))
        }
    }
}
