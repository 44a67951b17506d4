use std::io::Write;

use curvo::checkpoint::Checkpoint;
use curvo::curriculum::WeightBounds;
use curvo::ddpg::{actor_forward, adaptive_weight, load_actors, AgentState, AGENT_NAMES};

use super::{create_dir, dump_config};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::AgentInspectArgs;

pub const TRACE_FILE: &str = "policy_trace.csv";
pub const TRACE_HEADER: [&str; 8] = ["loss", "progress", "a_flow", "a_pose", "a_rotation", "w_f", "w_p", "w_r"];

pub fn run(cfg: RunConfig, args: &AgentInspectArgs, stdout: &mut dyn Write) -> CliResult<()> {
    cfg.validate()?;
    if args.points < 2 {
        return Err(CliError::Usage(format!("--points must be at least 2, got {}", args.points)));
    }
    if args.losses.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(CliError::Usage(format!("--losses must be finite and non-negative, got {:?}", args.losses)));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let actors = load_actors(&ck)?;
    let s = &cfg.train.scheduler;
    let bounds = WeightBounds::new(s.w0, s.w_final)?;

    create_dir(&cfg.out)?;
    let path = cfg.out.join(TRACE_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(TRACE_HEADER)?;
    for &loss in &args.losses {
        for k in 0..args.points {
            let state = AgentState {
                progress: k as f64 / (args.points - 1) as f64,
                loss,
            };
            let a = actors.each_ref().map(|net| actor_forward(net, &state));
            let mut row = vec![loss.to_string(), state.progress.to_string()];
            row.extend(a.iter().map(f64::to_string));
            row.extend(a.iter().map(|&x| adaptive_weight(x, &bounds).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    dump_config(&cfg.out, &cfg)?;

    for name in AGENT_NAMES {
        let updates = ck.meta(&format!("{name}.updates")).unwrap_or("0");
        writeln!(stdout, "agent {name} updates {updates}")?;
    }
    writeln!(stdout, "trace {}", path.display())?;
    Ok(())
}
