use std::io::Write;
use std::path::{Path, PathBuf};

use curvo::difficulty::histogram;
use curvo::metrics::{auc, success_curve};

use super::create_dir;
use super::difficulty::THRESHOLDS_FILE;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::svg::{render, Bar, Panel, Series, PALETTE};
use crate::table::Table;
use crate::{PlotArgs, PlotKind};

const CURVE_POINTS: usize = 101;

pub fn required_columns(kind: PlotKind, error_column: &str) -> Vec<String> {
    let names: &[&str] = match kind {
        PlotKind::TrainingCurves => &["step", "loss_flow", "loss_trans", "loss_rot", "loss_total", "val_ate", "val_auc"],
        PlotKind::WeightTrace => &["step", "w_f", "w_p", "w_r"],
        PlotKind::DifficultyHist => &["score"],
        PlotKind::AucCurve => &[error_column],
    };
    names.iter().map(|s| s.to_string()).collect()
}

fn series(t: &Table, x: &str, y: &str, name: &str, k: usize, markers: bool) -> CliResult<Series> {
    Ok(Series {
        name: name.into(),
        points: t.pairs(x, y)?,
        color: PALETTE[k % PALETTE.len()],
        markers,
    })
}

fn training_curves(t: &Table) -> CliResult<Vec<Panel>> {
    let steps: Vec<f64> = t.column("step")?.into_iter().flatten().collect();
    let x_range = Some((0.0, steps.iter().fold(1.0f64, |m, s| m.max(*s))));
    let losses = [
        ("loss_total", "total"),
        ("loss_flow", "flow"),
        ("loss_trans", "translation"),
        ("loss_rot", "rotation"),
    ];
    let loss = Panel {
        title: "Training loss".into(),
        x_range,
        x_label: "training step".into(),
        y_label: "loss (unitless)".into(),
        series: losses
            .iter()
            .enumerate()
            .map(|(k, (c, n))| series(t, "step", c, n, k, false))
            .collect::<CliResult<_>>()?,
        ..Default::default()
    };
    let ate = Panel {
        title: "Validation ATE".into(),
        x_range,
        x_label: "training step".into(),
        y_label: "ATE [m]".into(),
        series: vec![series(t, "step", "val_ate", "val ATE", 0, true)?],
        ..Default::default()
    };
    let auc = Panel {
        title: "Validation AUC".into(),
        x_range,
        x_label: "training step".into(),
        y_label: "AUC (fraction)".into(),
        series: vec![series(t, "step", "val_auc", "val AUC", 2, true)?],
        y_range: Some((0.0, 1.0)),
        ..Default::default()
    };
    Ok(vec![loss, ate, auc])
}

fn weight_trace(t: &Table) -> CliResult<Vec<Panel>> {
    let s = [("w_f", "flow"), ("w_p", "pose"), ("w_r", "rotation")];
    Ok(vec![Panel {
        title: "Curriculum weights".into(),
        x_label: "training step".into(),
        y_label: "weight (unitless)".into(),
        series: s
            .iter()
            .enumerate()
            .map(|(k, (c, n))| series(t, "step", c, n, k, false))
            .collect::<CliResult<_>>()?,
        ..Default::default()
    }])
}

fn sibling_thresholds(csv: &Path) -> CliResult<Vec<f64>> {
    let path = csv.parent().map_or_else(|| PathBuf::from(THRESHOLDS_FILE), |d| d.join(THRESHOLDS_FILE));
    if !path.exists() {
        return Ok(Vec::new());
    }
    let t = Table::read(&path)?;
    Ok(t.column("threshold")?.into_iter().flatten().collect())
}

fn difficulty_hist(t: &Table, bins: usize, thresholds: &[f64]) -> CliResult<Vec<Panel>> {
    let scores: Vec<f64> = t.column("score")?.into_iter().flatten().collect();
    Ok(vec![Panel {
        title: format!("Difficulty scores ({} sequences)", scores.len()),
        x_label: "difficulty score (normalized, 0-1)".into(),
        y_label: "sequences (count)".into(),
        bars: histogram(&scores, bins)
            .into_iter()
            .map(|b| Bar {
                lo: b.lo,
                hi: b.hi,
                value: b.count as f64,
            })
            .collect(),
        rules: thresholds.iter().map(|&x| (x, format!("{x:.2}"))).collect(),
        x_range: Some((0.0, 1.0)),
        ..Default::default()
    }])
}

fn auc_curve(t: &Table, column: &str, t_max: f64) -> CliResult<Vec<Panel>> {
    let errors: Vec<f64> = t.column(column)?.into_iter().flatten().collect();
    let area = auc(&errors, t_max)?;
    Ok(vec![Panel {
        title: format!("Success rate over {} sequences, AUC {area:.4}", errors.len()),
        x_label: "error threshold [m]".into(),
        y_label: "success rate (fraction)".into(),
        series: vec![Series {
            name: column.into(),
            points: success_curve(&errors, t_max, CURVE_POINTS),
            color: PALETTE[0],
            markers: false,
        }],
        x_range: Some((0.0, t_max)),
        y_range: Some((0.0, 1.0)),
        ..Default::default()
    }])
}

/// SVG document for `kind`, or the reason it cannot be drawn.
pub fn render_plot(cfg: &RunConfig, args: &PlotArgs) -> CliResult<String> {
    let t = Table::read(&args.csv)?;
    let required = required_columns(args.kind, &args.column);
    let required: Vec<&str> = required.iter().map(String::as_str).collect();
    t.require(&required)?;
    if t.rows.is_empty() {
        return Err(curvo::Error::EmptyInput(format!("{} has no rows", args.csv.display())).into());
    }
    let panels = match args.kind {
        PlotKind::TrainingCurves => training_curves(&t)?,
        PlotKind::WeightTrace => weight_trace(&t)?,
        PlotKind::DifficultyHist => {
            let th = match &args.thresholds {
                Some(th) => th.clone(),
                None => sibling_thresholds(&args.csv)?,
            };
            difficulty_hist(&t, cfg.difficulty.bins, &th)?
        }
        PlotKind::AucCurve => auc_curve(&t, &args.column, cfg.evaluate.auc_max_error)?,
    };
    Ok(render(&panels))
}

pub fn run(cfg: RunConfig, args: &PlotArgs, stdout: &mut dyn Write) -> CliResult<()> {
    cfg.validate()?;
    let doc = render_plot(&cfg, args)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| cfg.out.join(format!("{}.svg", args.kind.name())));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    std::fs::write(&path, doc).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    writeln!(stdout, "wrote {}", path.display())?;
    Ok(())
}
