use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::loss::{self_paced_progress, self_paced_weights, CurriculumWeights, LossBreakdown, WeightBounds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    Baseline,
    Staged,
    SelfPaced,
    Ddpg,
}

impl SchedulerMode {
    pub const ALL: [SchedulerMode; 4] = [
        SchedulerMode::Baseline,
        SchedulerMode::Staged,
        SchedulerMode::SelfPaced,
        SchedulerMode::Ddpg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerMode::Baseline => "baseline",
            SchedulerMode::Staged => "staged",
            SchedulerMode::SelfPaced => "self_paced",
            SchedulerMode::Ddpg => "ddpg",
        }
    }
}

impl fmt::Display for SchedulerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheduler mode '{s}'")))
    }
}

/// Cumulative set of active difficulty levels `{1, ..., top}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LevelSet {
    top: u8,
}

impl LevelSet {
    pub fn up_to(top: u8) -> Self {
        assert!(top >= 1, "level set must contain level 1");
        Self { top }
    }

    pub fn top(&self) -> u8 {
        self.top
    }

    pub fn contains(&self, level: u8) -> bool {
        (1..=self.top).contains(&level)
    }

    pub fn levels(&self) -> impl Iterator<Item = u8> {
        1..=self.top
    }
}

/// Rendered as `1|2|3`.
impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.levels().map(|l| l.to_string()).collect();
        f.write_str(&parts.join("|"))
    }
}

impl FromStr for LevelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let levels: Vec<u8> = s
            .split('|')
            .map(|p| p.trim().parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("bad level set '{s}'")))?;
        let prefix = levels.iter().enumerate().all(|(i, l)| *l as usize == i + 1);
        if levels.is_empty() || !prefix {
            return Err(Error::InvalidInput(format!("level set '{s}' is not a prefix of 1|2|3")));
        }
        Ok(Self::up_to(levels.len() as u8))
    }
}

/// Drives the curriculum weights of a training loop.
///
/// The loop reads [`Scheduler::weights`] before computing a step's loss and
/// reports the resulting breakdown through [`Scheduler::observe_step`].
pub trait Scheduler: Send {
    fn mode(&self) -> SchedulerMode;

    /// Weights for the next training step.
    fn weights(&self) -> CurriculumWeights;

    fn observe_step(&mut self, step: u64, loss: &LossBreakdown) -> Result<()>;

    fn observe_validation(&mut self, _step: u64, _ate: f64, _auc: f64) {}

    /// Active levels in staged mode; `None` means every level.
    fn active_levels(&self) -> Option<LevelSet> {
        None
    }
}

/// Unit weights at every step.
#[derive(Debug, Clone, Default)]
pub struct BaselineScheduler;

impl Scheduler for BaselineScheduler {
    fn mode(&self) -> SchedulerMode {
        SchedulerMode::Baseline
    }

    fn weights(&self) -> CurriculumWeights {
        CurriculumWeights::UNIT
    }

    fn observe_step(&mut self, _step: u64, _loss: &LossBreakdown) -> Result<()> {
        Ok(())
    }
}

/// Weights follow `w0 + (w_final - w0) exp(-lambda L)` with `L` the previous step's total.
#[derive(Debug, Clone)]
pub struct SelfPacedScheduler {
    lambda: f64,
    bounds: WeightBounds,
    current: CurriculumWeights,
}

impl SelfPacedScheduler {
    /// Starts at `w0`: with no loss seen yet, assume it is high.
    pub fn new(lambda: f64, bounds: WeightBounds) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self {
            lambda,
            bounds,
            current: CurriculumWeights::uniform(bounds.w0),
        })
    }
}

impl Scheduler for SelfPacedScheduler {
    fn mode(&self) -> SchedulerMode {
        SchedulerMode::SelfPaced
    }

    fn weights(&self) -> CurriculumWeights {
        self.current
    }

    fn observe_step(&mut self, _step: u64, loss: &LossBreakdown) -> Result<()> {
        let phi = self_paced_progress(loss.total, self.lambda)?;
        self.current = self_paced_weights(phi, &self.bounds);
        Ok(())
    }
}

/// When the staged scheduler moves to the next level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotionRule {
    /// Number of consecutive validations inspected.
    pub patience: usize,
    /// Relative ATE improvement below which the stage counts as stable.
    pub min_relative_improvement: f64,
    /// Step budget per non-final stage; a stage ends when it runs out.
    pub stage_budgets: Vec<u64>,
}

impl Default for PromotionRule {
    fn default() -> Self {
        Self {
            patience: 3,
            min_relative_improvement: 0.01,
            stage_budgets: vec![1000, 1000],
        }
    }
}

/// State of the three-tier staged curriculum.
#[derive(Debug, Clone)]
pub struct StagedState {
    active: LevelSet,
    n_levels: u8,
    stage_start: u64,
    stage_ates: Vec<f64>,
    promotions: Vec<u64>,
}

impl StagedState {
    pub fn new(n_levels: u8) -> Self {
        Self {
            active: LevelSet::up_to(1),
            n_levels: n_levels.max(1),
            stage_start: 0,
            stage_ates: Vec::new(),
            promotions: Vec::new(),
        }
    }

    pub fn active(&self) -> LevelSet {
        self.active
    }

    /// Steps at which promotions happened.
    pub fn promotions(&self) -> &[u64] {
        &self.promotions
    }

    fn promote(&mut self, step: u64) {
        if self.active.top() < self.n_levels {
            self.active = LevelSet::up_to(self.active.top() + 1);
            self.stage_start = step;
            self.stage_ates.clear();
            self.promotions.push(step);
        }
    }

    /// True if the rule says the current stage has plateaued or exhausted its budget.
    pub fn should_promote(&self, step: u64, rule: &PromotionRule) -> bool {
        if self.active.top() >= self.n_levels {
            return false;
        }
        let stage = (self.active.top() - 1) as usize;
        if let Some(budget) = rule.stage_budgets.get(stage) {
            if step.saturating_sub(self.stage_start) >= *budget {
                return true;
            }
        }
        let h = &self.stage_ates;
        if rule.patience == 0 || h.len() <= rule.patience {
            return false;
        }
        let reference = h[h.len() - 1 - rule.patience];
        let best = h[h.len() - rule.patience..].iter().copied().fold(f64::INFINITY, f64::min);
        reference > 0.0 && (reference - best) / reference < rule.min_relative_improvement
    }
}

/// Level set after accounting for the current step; never shrinks.
pub fn staged_active_levels(state: &mut StagedState, step: u64, rule: &PromotionRule) -> LevelSet {
    if state.should_promote(step, rule) {
        state.promote(step);
    }
    state.active
}

/// Ids whose level is active, in input order.
pub fn staged_sample_filter(manifest: &[(String, u8)], active: LevelSet, n_levels: u8) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    for (id, level) in manifest {
        if *level == 0 || *level > n_levels {
            return Err(Error::UnknownLevel {
                id: id.clone(),
                level: *level,
            });
        }
        if active.contains(*level) {
            out.push(id.as_str());
        }
    }
    Ok(out)
}

/// Trains level 1 first and adds harder levels as validation ATE plateaus.
/// Loss weights stay at one throughout.
#[derive(Debug, Clone)]
pub struct StagedScheduler {
    state: StagedState,
    rule: PromotionRule,
}

impl StagedScheduler {
    pub fn new(rule: PromotionRule, n_levels: u8) -> Self {
        Self {
            state: StagedState::new(n_levels),
            rule,
        }
    }

    pub fn state(&self) -> &StagedState {
        &self.state
    }
}

impl Scheduler for StagedScheduler {
    fn mode(&self) -> SchedulerMode {
        SchedulerMode::Staged
    }

    fn weights(&self) -> CurriculumWeights {
        CurriculumWeights::UNIT
    }

    fn observe_step(&mut self, step: u64, _loss: &LossBreakdown) -> Result<()> {
        staged_active_levels(&mut self.state, step, &self.rule);
        Ok(())
    }

    fn observe_validation(&mut self, step: u64, ate: f64, _auc: f64) {
        self.state.stage_ates.push(ate);
        staged_active_levels(&mut self.state, step, &self.rule);
    }

    fn active_levels(&self) -> Option<LevelSet> {
        Some(self.state.active)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Stops once neither AUC rose nor ATE fell below its best-so-far for
/// `patience` consecutive validations. Each metric is tracked on its own.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_auc: f64,
    best_ate: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience: patience.max(1),
            best_auc: f64::NEG_INFINITY,
            best_ate: f64::INFINITY,
            stale: 0,
        }
    }

    pub fn update(&mut self, auc: f64, ate: f64) -> StopDecision {
        let mut improved = false;
        if auc > self.best_auc {
            self.best_auc = auc;
            improved = true;
        }
        if ate < self.best_ate {
            self.best_ate = ate;
            improved = true;
        }
        if improved {
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Replays a history of `(auc, ate)` validation records.
pub fn early_stopping_check(history: &[(f64, f64)], patience: usize) -> StopDecision {
    let mut es = EarlyStopping::new(patience);
    let mut decision = StopDecision::Continue;
    for (auc, ate) in history {
        decision = es.update(*auc, *ate);
    }
    decision
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(total: f64) -> LossBreakdown {
        LossBreakdown {
            total,
            ..Default::default()
        }
    }

    #[test]
    fn level_set_display_and_parse() {
        assert_eq!(LevelSet::up_to(3).to_string(), "1|2|3");
        assert_eq!("1|2".parse::<LevelSet>().unwrap(), LevelSet::up_to(2));
        assert!("2|3".parse::<LevelSet>().is_err());
        assert!("".parse::<LevelSet>().is_err());
    }

    #[test]
    fn staged_progression() {
        let rule = PromotionRule {
            patience: 2,
            min_relative_improvement: 0.01,
            stage_budgets: vec![100, 100],
        };
        let mut s = StagedState::new(3);
        assert_eq!(staged_active_levels(&mut s, 0, &rule), LevelSet::up_to(1));
        assert_eq!(staged_active_levels(&mut s, 100, &rule), LevelSet::up_to(2));
        // plateau in stage two triggers before its budget
        for ate in [0.5, 0.499, 0.498] {
            s.stage_ates.push(ate);
        }
        assert_eq!(staged_active_levels(&mut s, 130, &rule), LevelSet::up_to(3));
        for step in 131..1000 {
            assert_eq!(staged_active_levels(&mut s, step, &rule), LevelSet::up_to(3));
        }
        assert_eq!(s.promotions(), &[100, 130]);
    }

    #[test]
    fn improving_stage_is_not_promoted_early() {
        let rule = PromotionRule {
            patience: 2,
            min_relative_improvement: 0.01,
            stage_budgets: vec![1000, 1000],
        };
        let mut sched = StagedScheduler::new(rule, 3);
        for (k, ate) in [1.0, 0.9, 0.8, 0.7, 0.6].iter().enumerate() {
            sched.observe_validation(k as u64 * 10, *ate, 0.0);
        }
        assert_eq!(sched.active_levels(), Some(LevelSet::up_to(1)));
    }

    #[test]
    fn sample_filter() {
        let manifest: Vec<(String, u8)> = vec![("a".into(), 1), ("b".into(), 3), ("c".into(), 2), ("d".into(), 1)];
        assert_eq!(staged_sample_filter(&manifest, LevelSet::up_to(1), 3).unwrap(), vec!["a", "d"]);
        assert_eq!(staged_sample_filter(&manifest, LevelSet::up_to(3), 3).unwrap().len(), 4);
        let want: Vec<&str> = manifest.iter().filter(|(_, l)| [1, 2].contains(l)).map(|(i, _)| i.as_str()).collect();
        assert_eq!(staged_sample_filter(&manifest, LevelSet::up_to(2), 3).unwrap(), want);
        let bad = vec![("x".to_string(), 4u8)];
        assert!(matches!(staged_sample_filter(&bad, LevelSet::up_to(3), 3), Err(Error::UnknownLevel { .. })));
    }

    #[test]
    fn early_stopping_examples() {
        let improving: Vec<_> = (0..50).map(|i| (i as f64 / 100.0, 1.0)).collect();
        assert_eq!(early_stopping_check(&improving, 3), StopDecision::Continue);
        let flat = vec![(0.5, 0.3); 4];
        assert_eq!(early_stopping_check(&flat, 3), StopDecision::Stop);
        assert_eq!(early_stopping_check(&flat[..3], 3), StopDecision::Continue);
        let ate_improving: Vec<_> = (0..20).map(|i| (0.5, 1.0 - i as f64 * 0.01)).collect();
        assert_eq!(early_stopping_check(&ate_improving, 3), StopDecision::Continue);
    }

    #[test]
    fn self_paced_trace() {
        let bounds = WeightBounds::default();
        let mut s = SelfPacedScheduler::new(0.1, bounds).unwrap();
        assert_eq!(s.weights(), CurriculumWeights::uniform(0.1));
        s.observe_step(0, &loss(10.0)).unwrap();
        let expect = 0.1 + 0.9 * (-1.0f64).exp();
        assert_eq!(s.weights().flow, expect);
        s.observe_step(1, &loss(0.0)).unwrap();
        assert_eq!(s.weights(), CurriculumWeights::UNIT);
        assert!(s.observe_step(2, &loss(-1.0)).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in SchedulerMode::ALL {
            assert_eq!(m.name().parse::<SchedulerMode>().unwrap(), m);
        }
    }
}
