use std::io::Write;
use std::path::Path;

use curvo::io::read_trajectory;
use curvo::metrics::{ate, auc};

use super::{create_dir, dump_config};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::table::Table;
use crate::EvaluateArgs;

pub const ERRORS_FILE: &str = "errors.csv";
pub const ERRORS_HEADER: [&str; 4] = ["sequence_id", "ate_aligned", "ate_unaligned", "runs"];

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub sequence_id: String,
    pub ate_aligned: f64,
    pub ate_unaligned: f64,
    pub runs: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn read_error_list(path: &Path) -> CliResult<Vec<ErrorRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let t = Table::read(path)?;
    t.require(&ERRORS_HEADER)?;
    let id = t.index("sequence_id")?;
    let aligned = t.column("ate_aligned")?;
    let unaligned = t.column("ate_unaligned")?;
    let runs = t.column("runs")?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (k, row) in t.rows.iter().enumerate() {
        let missing = || curvo::Error::MalformedLine {
            line: k + 2,
            reason: "empty cell".into(),
        };
        out.push(ErrorRow {
            sequence_id: row[id].clone(),
            ate_aligned: aligned[k].ok_or_else(missing)?,
            ate_unaligned: unaligned[k].ok_or_else(missing)?,
            runs: runs[k].ok_or_else(missing)? as usize,
        });
    }
    Ok(out)
}

pub fn write_error_list(path: &Path, rows: &[ErrorRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ERRORS_HEADER)?;
    for r in rows {
        w.write_record([
            r.sequence_id.clone(),
            r.ate_aligned.to_string(),
            r.ate_unaligned.to_string(),
            r.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Replaces the row with the same id or inserts it; rows stay sorted by id.
pub fn upsert(rows: &mut Vec<ErrorRow>, row: ErrorRow) {
    match rows.binary_search_by(|r| r.sequence_id.cmp(&row.sequence_id)) {
        Ok(i) => rows[i] = row,
        Err(i) => rows.insert(i, row),
    }
}

pub fn run(cfg: RunConfig, args: &EvaluateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    cfg.validate()?;
    let gt = read_trajectory(&args.ground_truth, cfg.format)?;
    let mut aligned = Vec::new();
    let mut unaligned = Vec::new();
    for path in std::iter::once(&args.estimate).chain(&args.runs) {
        let est = read_trajectory(path, cfg.format)?;
        aligned.push(ate(&est, &gt, true)?);
        unaligned.push(ate(&est, &gt, false)?);
    }
    let row = ErrorRow {
        sequence_id: args.sequence_id.clone().unwrap_or_else(|| gt.sequence_id().to_string()),
        ate_aligned: median(&aligned),
        ate_unaligned: median(&unaligned),
        runs: aligned.len(),
    };

    create_dir(&cfg.out)?;
    let list_path = cfg.out.join(ERRORS_FILE);
    let mut rows = read_error_list(&list_path)?;
    rows.sort_by(|a, b| a.sequence_id.cmp(&b.sequence_id));
    upsert(&mut rows, row.clone());
    write_error_list(&list_path, &rows)?;
    dump_config(&cfg.out, &cfg)?;

    let pick = |r: &ErrorRow| if args.align { r.ate_aligned } else { r.ate_unaligned };
    let errors: Vec<f64> = rows.iter().map(pick).collect();
    let area = auc(&errors, cfg.evaluate.auc_max_error)?;

    writeln!(stdout, "sequence_id {}", row.sequence_id)?;
    writeln!(stdout, "runs {}", row.runs)?;
    writeln!(stdout, "ate_aligned {}", row.ate_aligned)?;
    writeln!(stdout, "ate_unaligned {}", row.ate_unaligned)?;
    writeln!(stdout, "ate {}", pick(&row))?;
    writeln!(stdout, "sequences {}", rows.len())?;
    writeln!(stdout, "auc {area}")?;
    Ok(())
}
