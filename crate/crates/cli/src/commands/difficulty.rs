use std::io::Write;
use std::path::{Path, PathBuf};

use curvo::difficulty::{analyze_dataset, histogram, write_histogram_csv, write_manifest_csv, DifficultyConfig};
use curvo::io::read_trajectory;
use curvo::Execution;

use super::{create_dir, dump_config, write_file};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::DifficultyArgs;

pub const MANIFEST_FILE: &str = "difficulty_manifest.csv";
pub const HISTOGRAM_FILE: &str = "difficulty_histogram.csv";
pub const THRESHOLDS_FILE: &str = "difficulty_thresholds.csv";

/// Regular, non-hidden files in name order.
pub fn list_inputs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let hidden = path.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'));
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn thresholds_csv(thresholds: &[f64]) -> String {
    let mut s = String::from("boundary,threshold\n");
    for (k, t) in thresholds.iter().enumerate() {
        s.push_str(&format!("{},{t}\n", k + 1));
    }
    s
}

pub fn run(mut cfg: RunConfig, args: &DifficultyArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let d = &mut cfg.difficulty;
    if let Some(t) = &args.thresholds {
        d.thresholds = Some(t.clone());
        d.n_levels = t.len() + 1;
    }
    if let Some(w) = &args.weights {
        if w.len() != d.weights.len() {
            return Err(CliError::Usage(format!("--weights needs {} values, got {}", d.weights.len(), w.len())));
        }
        d.weights.copy_from_slice(w);
    }
    if let Some(n) = args.levels {
        d.n_levels = n;
    }
    if let Some(b) = args.bins {
        d.bins = b;
    }
    cfg.validate()?;

    let files = list_inputs(&args.input_dir)?;
    let parsed = Execution::default().map(&files, |p| read_trajectory(p, cfg.format));
    let mut trajs = Vec::with_capacity(parsed.len());
    let mut failures = Vec::new();
    for (path, r) in files.iter().zip(parsed) {
        match r {
            Ok(t) => trajs.push(t),
            Err(e) => failures.push(format!("  {}: {e}", path.display())),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Data(format!(
            "{} of {} trajectory files failed to parse:\n{}",
            failures.len(),
            files.len(),
            failures.join("\n")
        )));
    }

    let d = &cfg.difficulty;
    let dc = DifficultyConfig {
        weights: d.weights,
        n_levels: d.n_levels,
        fixed_thresholds: d.thresholds.clone(),
        reference_stats: None,
    };
    let manifest = analyze_dataset(&trajs, &dc, Execution::default())?;
    let scores: Vec<f64> = manifest.entries.iter().map(|e| e.normalized).collect();
    let bins = histogram(&scores, d.bins);

    let mut manifest_csv = Vec::new();
    write_manifest_csv(&manifest.entries, &mut manifest_csv)?;
    let mut hist_csv = Vec::new();
    write_histogram_csv(&bins, &mut hist_csv)?;

    create_dir(&cfg.out)?;
    write_file(&cfg.out.join(MANIFEST_FILE), manifest_csv)?;
    write_file(&cfg.out.join(HISTOGRAM_FILE), hist_csv)?;
    write_file(&cfg.out.join(THRESHOLDS_FILE), thresholds_csv(&manifest.thresholds))?;
    dump_config(&cfg.out, &cfg)?;

    writeln!(stdout, "sequences {}", manifest.entries.len())?;
    let t: Vec<String> = manifest.thresholds.iter().map(f64::to_string).collect();
    writeln!(stdout, "thresholds {}", t.join(","))?;
    for (k, n) in manifest.level_sizes(d.n_levels).iter().enumerate() {
        writeln!(stdout, "level {} {n}", k + 1)?;
    }
    writeln!(stdout, "manifest {}", cfg.out.join(MANIFEST_FILE).display())?;
    Ok(())
}
