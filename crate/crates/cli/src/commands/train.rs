use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use curvo::ddpg::agents_checkpoint;
use curvo::difficulty::write_manifest_csv;
use curvo::io::{write_trajectory, TrajectoryFormat};
use curvo::metrics::ate;
use curvo::surrogate::train::MetricsWriter;
use curvo::surrogate::run_training_with;
use curvo::Execution;

use super::evaluate::{write_error_list, ErrorRow};
use super::{create_dir, dump_config, write_file};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::TrainArgs;

pub const METRICS_FILE: &str = "metrics.csv";
pub const MODEL_FILE: &str = "model.ckpt";
pub const AGENTS_FILE: &str = "agents.ckpt";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const VALIDATION_DIR: &str = "validation";

/// Resolved config for a train invocation; flags win over the file.
pub fn resolve(mut cfg: RunConfig, args: &TrainArgs) -> RunConfig {
    if let Some(m) = args.mode {
        cfg.train.scheduler.mode = m.into();
    }
    if let Some(s) = args.steps {
        cfg.train.steps = s;
    }
    cfg
}

pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join(cfg.run_name())
}

pub fn run(cfg: RunConfig, args: &TrainArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(cfg, args);
    cfg.validate()?;
    let dir = run_dir(&cfg);
    let pred_dir = dir.join(VALIDATION_DIR).join("pred");
    let gt_dir = dir.join(VALIDATION_DIR).join("gt");
    create_dir(&pred_dir)?;
    create_dir(&gt_dir)?;
    dump_config(&dir, &cfg)?;

    let metrics_path = dir.join(METRICS_FILE);
    let file = File::create(&metrics_path).map_err(|e| CliError::Data(format!("{}: {e}", metrics_path.display())))?;
    let mut writer = MetricsWriter::new(BufWriter::new(file))?;
    let result = run_training_with(&cfg.train, Execution::default(), &mut |r| writer.write(r));
    writer.finish()?.flush()?;
    let outcome = result?;

    outcome.model.to_checkpoint().save(&dir.join(MODEL_FILE))?;
    if let Some(agents) = &outcome.agents {
        agents_checkpoint(agents).save(&dir.join(AGENTS_FILE))?;
    }
    let mut manifest = Vec::new();
    write_manifest_csv(&outcome.dataset.manifest.entries, &mut manifest)?;
    write_file(&dir.join(MANIFEST_FILE), manifest)?;

    let v = &outcome.final_validation;
    let mut rows = Vec::with_capacity(v.predictions.len());
    for ((pred, gt), aligned) in v.predictions.iter().zip(&v.ground_truth).zip(&v.errors) {
        let id = gt.sequence_id();
        let name = format!("{id}.tum");
        write_trajectory(&pred_dir.join(&name), pred, TrajectoryFormat::Tum)?;
        write_trajectory(&gt_dir.join(&name), gt, TrajectoryFormat::Tum)?;
        rows.push(ErrorRow {
            sequence_id: id.to_string(),
            ate_aligned: *aligned,
            ate_unaligned: ate(pred, gt, false)?,
            runs: 1,
        });
    }
    rows.sort_by(|a, b| a.sequence_id.cmp(&b.sequence_id));
    write_error_list(&dir.join(ERRORS_FILE), &rows)?;

    let last = outcome.records.last().map_or(0, |r| r.step);
    writeln!(stdout, "run_dir {}", dir.display())?;
    writeln!(stdout, "mode {}", cfg.train.scheduler.mode)?;
    writeln!(stdout, "steps {}", outcome.records.len())?;
    writeln!(stdout, "last_step {last}")?;
    match outcome.stopped_early {
        Some(s) => writeln!(stdout, "stopped_early {s}")?,
        None => writeln!(stdout, "stopped_early none")?,
    }
    writeln!(stdout, "val_ate {}", v.point.ate)?;
    writeln!(stdout, "val_auc {}", v.point.auc)?;
    Ok(())
}
