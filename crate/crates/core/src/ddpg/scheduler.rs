use serde::{Deserialize, Serialize};

use super::{adaptive_weight, build_state, AgentHyperparams, AgentState, DdpgAgent};
use crate::curriculum::{CurriculumWeights, LossBreakdown, Scheduler, SchedulerMode, WeightBounds};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::parallel::Execution;

/// Which loss the pose agent observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseAgentInput {
    /// `translation + w_r * rotation`.
    #[default]
    Subtotal,
    TranslationOnly,
}

pub const AGENT_NAMES: [&str; 3] = ["flow", "pose", "rotation"];

/// Update counts from the most recent cadence window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateReport {
    pub iterations: [usize; 3],
    pub underfull: [bool; 3],
    pub nonfinite: [usize; 3],
}

/// Three independent agents driving flow, pose and rotation weights.
#[derive(Debug, Clone)]
pub struct DdpgScheduler {
    agents: [DdpgAgent; 3],
    bounds: WeightBounds,
    budget: u64,
    pose_input: PoseAgentInput,
    current: CurriculumWeights,
    last_report: Option<UpdateReport>,
    execution: Execution,
}

impl DdpgScheduler {
    /// `budget` is the step count that maps to progress 1.
    pub fn new(hyper: AgentHyperparams, bounds: WeightBounds, budget: u64, pose_input: PoseAgentInput, seed: u64) -> Result<Self> {
        let problems = hyper.problems();
        if !problems.is_empty() {
            return Err(Error::InvalidInput(problems.join("; ")));
        }
        if budget == 0 {
            return Err(Error::InvalidInput("ddpg progress budget must be positive".into()));
        }
        let agents = [0u64, 1, 2].map(|k| DdpgAgent::new(hyper.clone(), seed.wrapping_mul(3).wrapping_add(k)));
        Ok(Self::from_agents(agents, bounds, budget, pose_input))
    }

    pub fn from_agents(agents: [DdpgAgent; 3], bounds: WeightBounds, budget: u64, pose_input: PoseAgentInput) -> Self {
        let s0 = build_state(0, budget, 0.0);
        let w = agents.each_ref().map(|a| adaptive_weight(a.policy(&s0), &bounds));
        Self {
            agents,
            bounds,
            budget,
            pose_input,
            current: CurriculumWeights {
                flow: w[0],
                pose: w[1],
                rotation: w[2],
            },
            last_report: None,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn agents(&self) -> &[DdpgAgent; 3] {
        &self.agents
    }

    pub fn into_agents(self) -> [DdpgAgent; 3] {
        self.agents
    }

    /// `None` until the first cadence window.
    pub fn last_report(&self) -> Option<UpdateReport> {
        self.last_report
    }

    fn component_losses(&self, loss: &LossBreakdown) -> [f64; 3] {
        let pose = match self.pose_input {
            PoseAgentInput::Subtotal => loss.translation + self.current.rotation * loss.rotation,
            PoseAgentInput::TranslationOnly => loss.translation,
        };
        [loss.flow, pose, loss.rotation]
    }
}

impl Scheduler for DdpgScheduler {
    fn mode(&self) -> SchedulerMode {
        SchedulerMode::Ddpg
    }

    fn weights(&self) -> CurriculumWeights {
        self.current
    }

    fn observe_step(&mut self, step: u64, loss: &LossBreakdown) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        let ls = self.component_losses(loss);
        let mut w = [0.0; 3];
        for (k, agent) in self.agents.iter_mut().enumerate() {
            let a = agent.step(build_state(step, self.budget, ls[k]));
            w[k] = adaptive_weight(a, &self.bounds);
        }
        self.current = CurriculumWeights {
            flow: w[0],
            pose: w[1],
            rotation: w[2],
        };

        let every = self.agents[0].hyper().update_every;
        if step > 0 && step.is_multiple_of(every) {
            let mut slots: Vec<(DdpgAgent, usize, bool, usize)> =
                self.agents.iter().map(|a| (a.clone(), 0, false, 0)).collect();
            self.execution.for_each_mut(&mut slots, |(agent, done, underfull, nonfinite)| {
                for _ in 0..agent.hyper().iterations {
                    match agent.update() {
                        Ok(_) => *done += 1,
                        Err(Error::Underfull { .. }) => {
                            *underfull = true;
                            break;
                        }
                        Err(_) => *nonfinite += 1,
                    }
                }
            });
            let mut report = UpdateReport::default();
            for (k, (agent, done, underfull, nonfinite)) in slots.into_iter().enumerate() {
                self.agents[k] = agent;
                report.iterations[k] = done;
                report.underfull[k] = underfull;
                report.nonfinite[k] = nonfinite;
            }
            self.last_report = Some(report);
        }
        Ok(())
    }
}

pub const AGENTS_CHECKPOINT_KIND: &str = "ddpg-agents";

/// Online and target networks of all three agents; replay buffers are not saved.
pub fn agents_checkpoint(agents: &[DdpgAgent; 3]) -> Checkpoint {
    let mut ck = Checkpoint::new(AGENTS_CHECKPOINT_KIND);
    for (name, a) in AGENT_NAMES.iter().zip(agents) {
        ck.set_meta(&format!("{name}.updates"), a.updates());
        ck.push_mlp(&format!("{name}.actor"), &a.actor);
        ck.push_mlp(&format!("{name}.critic"), &a.critic);
        ck.push_mlp(&format!("{name}.target_actor"), &a.target_actor);
        ck.push_mlp(&format!("{name}.target_critic"), &a.target_critic);
    }
    ck
}

/// The three actor networks, in flow, pose, rotation order.
pub fn load_actors(ck: &Checkpoint) -> Result<[Mlp; 3]> {
    if ck.kind != AGENTS_CHECKPOINT_KIND {
        return Err(Error::Checkpoint(format!("expected a {AGENTS_CHECKPOINT_KIND} checkpoint, found '{}'", ck.kind)));
    }
    let [f, p, r] = AGENT_NAMES.map(|n| ck.mlp(&format!("{n}.actor")));
    Ok([f?, p?, r?])
}

/// Expected action of each agent's current policy at `s`.
pub fn policy_actions(agents: &[DdpgAgent; 3], s: &AgentState) -> [f64; 3] {
    agents.each_ref().map(|a| a.policy(s))
}
