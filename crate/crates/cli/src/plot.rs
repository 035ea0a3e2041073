//! Gnuplot scripts and data files for result CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use emgm::em::rho_se;
use emgm::harness::{extract_contour, PointResult, ResultTable};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no result files given")]
    NoInputs,
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{path} is empty")]
    Empty { path: String },
    #[error("{path}: unrecognised header {header:?}")]
    UnknownHeader { path: String, header: String },
    #[error("{path} line {line}: {message}")]
    BadRow { path: String, line: usize, message: String },
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultKind {
    /// Success rate over a (M/N, K/M) grid.
    PhaseTransition,
    /// NMSE against M/N at a single K/M per M/N.
    Sweep,
    /// `(M/N, K/M)` pairs.
    Contour,
    /// Runtime against n.
    Scaling,
}

#[derive(Debug, Clone)]
struct Parsed {
    path: PathBuf,
    kind: ResultKind,
    rows: Vec<Vec<f64>>,
}

fn classify(header: &str) -> Option<ResultKind> {
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    match cols.as_slice() {
        ["m_over_n", "k_over_m"] => Some(ResultKind::Contour),
        ["m_over_n", "k_over_m", "success_rate", "median_nmse_db", ..] => Some(ResultKind::Sweep),
        ["n", "m", "k", "median_runtime_s", ..] => Some(ResultKind::Scaling),
        _ => None,
    }
}

fn parse(path: &Path) -> Result<Parsed, PlotError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| PlotError::Read {
        path: name.clone(),
        message: e.to_string(),
    })?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| PlotError::Empty { path: name.clone() })?;
    let mut kind = classify(header).ok_or_else(|| PlotError::UnknownHeader {
        path: name.clone(),
        header: header.to_string(),
    })?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| PlotError::BadRow {
                path: name.clone(),
                line: i + 2,
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(PlotError::Empty { path: name });
    }
    if kind == ResultKind::Sweep {
        // several K/M values in one M/N column make it a phase-transition grid
        let mut seen: Vec<f64> = Vec::new();
        for r in &rows {
            if seen.contains(&r[0]) {
                kind = ResultKind::PhaseTransition;
                break;
            }
            seen.push(r[0]);
        }
    }
    Ok(Parsed {
        path: path.to_path_buf(),
        kind,
        rows,
    })
}

fn dat(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

fn contour_of(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut columns: Vec<f64> = Vec::new();
    let points = rows
        .iter()
        .map(|r| {
            let col = match columns.iter().position(|&c| c == r[0]) {
                Some(i) => i,
                None => {
                    columns.push(r[0]);
                    columns.len() - 1
                }
            };
            PointResult {
                m: col,
                k: 0,
                m_over_n: r[0],
                k_over_m: r[1],
                success_rate: r[2],
                mean_nmse_db: r[3],
                median_nmse_db: r[3],
                mean_runtime_s: r.get(4).copied().unwrap_or(0.0),
                runs: Vec::new(),
            }
        })
        .collect();
    extract_contour(&ResultTable { n: 0, points }, 0.5)
        .into_iter()
        .map(|c| vec![c.m_over_n, c.k_over_m])
        .collect()
}

fn stem(p: &Path, i: usize) -> String {
    let s = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    format!("{i:02}_{s}")
}

/// Writes `plots.gp` and one `.dat` file per series into `out_dir`. Every input
/// is read and checked before anything is written.
pub fn emit_plots(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    if inputs.is_empty() {
        return Err(PlotError::NoInputs);
    }
    let parsed = inputs.iter().map(|p| parse(p)).collect::<Result<Vec<_>, _>>()?;

    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let mut script = String::from("set datafile separator whitespace\nset grid\n");
    let mut sweeps: Vec<(String, String)> = Vec::new();
    let mut scaling: Vec<(String, String)> = Vec::new();
    let mut contours: Vec<(String, String)> = Vec::new();

    for (i, p) in parsed.iter().enumerate() {
        let s = stem(&p.path, i);
        let label = p
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match p.kind {
            ResultKind::PhaseTransition => {
                let grid = format!("{s}_grid.dat");
                let contour = format!("{s}_contour.dat");
                files.push((out_dir.join(&grid), dat(&p.rows)));
                files.push((out_dir.join(&contour), dat(&contour_of(&p.rows))));
                let _ = writeln!(
                    script,
                    "\nset terminal pngcairo size 800,600\nset output '{s}_success.png'\nset xlabel 'M/N'\nset ylabel 'K/M'\nset xrange [0:1]\nset yrange [0:1]\nplot '{grid}' using 1:2:3 with points pt 5 ps 2 palette title 'success rate', \\\n     '{contour}' using 1:2 with linespoints lw 2 title '{label} S=0.5', \\\n     'lasso.dat' using 1:2 with lines dt 2 title 'LASSO'"
                );
                contours.push((contour, label));
            }
            ResultKind::Contour => {
                let f = format!("{s}.dat");
                files.push((out_dir.join(&f), dat(&p.rows)));
                contours.push((f, label));
            }
            ResultKind::Sweep => {
                let f = format!("{s}.dat");
                files.push((out_dir.join(&f), dat(&p.rows)));
                sweeps.push((f, label));
            }
            ResultKind::Scaling => {
                let f = format!("{s}.dat");
                files.push((out_dir.join(&f), dat(&p.rows)));
                scaling.push((f, label));
            }
        }
    }

    if !contours.is_empty() {
        let lasso: Vec<Vec<f64>> = (1..100).map(|i| i as f64 / 100.0).map(|d| vec![d, rho_se(d)]).collect();
        files.push((out_dir.join("lasso.dat"), dat(&lasso)));
        let series: Vec<String> = contours
            .iter()
            .map(|(f, l)| format!("'{f}' using 1:2 with linespoints title '{l}'"))
            .chain(std::iter::once(
                "'lasso.dat' using 1:2 with lines dt 2 title 'LASSO'".to_string(),
            ))
            .collect();
        let _ = writeln!(
            script,
            "\nset terminal pngcairo size 800,600\nset output 'contours.png'\nset xlabel 'M/N'\nset ylabel 'K/M'\nset xrange [0:1]\nset yrange [0:1]\nplot {}",
            series.join(", \\\n     ")
        );
    }
    if !sweeps.is_empty() {
        let series: Vec<String> = sweeps
            .iter()
            .map(|(f, l)| format!("'{f}' using 1:4 with linespoints title '{l}'"))
            .collect();
        let _ = writeln!(
            script,
            "\nset terminal pngcairo size 800,600\nset output 'nmse.png'\nset xlabel 'M/N'\nset ylabel 'median NMSE [dB]'\nset autoscale\nplot {}",
            series.join(", \\\n     ")
        );
    }
    if !scaling.is_empty() {
        let series: Vec<String> = scaling
            .iter()
            .map(|(f, l)| format!("'{f}' using 1:4 with linespoints title '{l}'"))
            .collect();
        let _ = writeln!(
            script,
            "\nset terminal pngcairo size 800,600\nset output 'runtime.png'\nset logscale xy\nset xlabel 'N'\nset ylabel 'median runtime [s]'\nplot {}\nunset logscale",
            series.join(", \\\n     ")
        );
    }
    files.push((out_dir.join("plots.gp"), script));

    std::fs::create_dir_all(out_dir).map_err(|e| PlotError::Write {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    for (path, body) in &files {
        std::fs::write(path, body).map_err(|e| PlotError::Write {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
