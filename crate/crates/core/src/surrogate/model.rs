use rand::Rng;

use super::data::{integrate_steps, Camera, DatasetSpec, SyntheticSequence, WINDOW_LEN, WINDOW_STRIDE};
use super::dual::{norm, Dual, Pose, Real};
use crate::checkpoint::Checkpoint;
use crate::curriculum::{
    flow_supervision_loss, hierarchical_total_loss, pose_supervision_loss, BaseScales, CurriculumWeights, FlowSet,
    LossBreakdown, LossParts,
};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};
use crate::trajectory::Trajectory;

pub const MODEL_CHECKPOINT_KIND: &str = "surrogate-model";

/// Number of network inputs and outputs: six motion components per window step.
pub const WINDOW_DIM: usize = 6 * WINDOW_STRIDE;

/// Window regressor from the observation features of one window to its frame motions `(omega, t)`.
///
/// Outputs pass through `tanh` and are scaled to `OUTPUT_BOUND` times the
/// dataset's per-axis motion range, which keeps every window rotation below pi.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub net: Mlp,
    scales: [f64; 6],
}

impl SurrogateModel {
    pub const OUTPUT_BOUND: f64 = 1.5;

    pub fn new<R: Rng>(hidden: &[usize], spec: &DatasetSpec, rng: &mut R) -> Self {
        let mut sizes = vec![WINDOW_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(WINDOW_DIM);
        let net = Mlp::random(&sizes, Activation::Tanh, Activation::Tanh, 0.1, rng);
        Self::from_net(net, spec)
    }

    pub fn from_net(net: Mlp, spec: &DatasetSpec) -> Self {
        let (r, t) = (spec.max_rotation, spec.max_translation);
        let b = Self::OUTPUT_BOUND;
        Self {
            net,
            scales: [b * r, b * r, b * r, b * t, b * t, b * t],
        }
    }

    /// Output scale of each motion component.
    pub fn scales(&self) -> &[f64; 6] {
        &self.scales
    }

    fn scale_output(&self, y: &[f64]) -> Vec<[f64; 6]> {
        y.chunks(6).map(|c| std::array::from_fn(|k| c[k] * self.scales[k])).collect()
    }

    /// Motions of the `WINDOW_STRIDE` steps of one window.
    pub fn predict_window(&self, features: &[[f64; 6]]) -> Vec<[f64; 6]> {
        self.scale_output(&self.net.forward(features.as_flattened()))
    }

    /// Whole-sequence estimate integrated from the identity, on the ground-truth timestamps.
    pub fn predict_trajectory(&self, seq: &SyntheticSequence) -> Result<Trajectory> {
        let steps: Vec<[f64; 6]> = (0..seq.n_windows())
            .flat_map(|w| self.predict_window(seq.window_features(w)))
            .collect();
        let traj = integrate_steps(seq.id(), &steps)?;
        let poses = traj
            .poses()
            .iter()
            .zip(seq.trajectory.poses())
            .map(|(p, g)| p.with_timestamp(g.timestamp()))
            .collect();
        Trajectory::new(seq.id(), poses)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(MODEL_CHECKPOINT_KIND);
        ck.push_mlp("model", &self.net);
        ck.push("model.scales", 1, 6, self.scales.to_vec());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != MODEL_CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!("expected a {MODEL_CHECKPOINT_KIND} checkpoint, found '{}'", ck.kind)));
        }
        let net = ck.mlp("model")?;
        let s = ck.tensor("model.scales")?;
        if net.input_size() != WINDOW_DIM || net.output_size() != WINDOW_DIM || s.data.len() != 6 {
            return Err(Error::Checkpoint(format!(
                "surrogate model must map {WINDOW_DIM} features to {WINDOW_DIM} outputs"
            )));
        }
        Ok(Self {
            net,
            scales: std::array::from_fn(|k| s.data[k]),
        })
    }
}

/// One training window: ground-truth poses, their flows and the observations.
#[derive(Debug, Clone)]
pub struct Window {
    pub poses: Vec<Pose<f64>>,
    pub flows: FlowSet,
    pub features: Vec<[f64; 6]>,
}

impl Window {
    pub fn from_sequence(seq: &SyntheticSequence, w: usize, camera: &Camera) -> Self {
        let poses = seq.window_poses(w);
        let flows = camera.window_flows(&poses, true);
        Self {
            poses,
            flows,
            features: seq.window_features(w).to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelLoss {
    pub breakdown: LossBreakdown,
    /// Gradient of `breakdown.total` w.r.t. the network parameters.
    pub grad: Vec<f64>,
}

fn to_traj(poses: &[Pose<f64>]) -> Trajectory {
    Trajectory::new("window", poses.iter().map(Pose::to_rigid).collect()).expect("non-empty window")
}

fn prefix_poses(steps: &[[f64; 6]]) -> Vec<Pose<f64>> {
    let mut out = vec![Pose::identity()];
    for s in steps {
        let next = out.last().unwrap().compose(&Pose::from_step(&[s[0], s[1], s[2]], &[s[3], s[4], s[5]]));
        out.push(next);
    }
    out
}

/// Unweighted loss parts of a predicted window, via the curriculum loss functions.
pub fn window_loss_parts(pred_steps: &[[f64; 6]], window: &Window, camera: &Camera) -> Result<LossParts> {
    let pred = prefix_poses(pred_steps);
    let pose = pose_supervision_loss(&to_traj(&pred), &to_traj(&window.poses), false)?;
    let flow = flow_supervision_loss(&camera.window_flows(&pred, false), &window.flows)?;
    Ok(LossParts {
        flow,
        translation: pose.translation,
        rotation: pose.rotation,
    })
}

/// Hierarchical loss of one window and its exact parameter gradient.
///
/// Values come from the curriculum loss functions; the gradient w.r.t. each
/// predicted frame motion is taken with six-wide dual numbers and then
/// backpropagated through the network.
pub fn model_loss(
    model: &SurrogateModel,
    window: &Window,
    weights: &CurriculumWeights,
    scales: &BaseScales,
    camera: &Camera,
) -> Result<ModelLoss> {
    assert_eq!(window.poses.len(), WINDOW_LEN, "window length");
    let cache = model.net.forward_cached(window.features.as_flattened());
    let steps = model.scale_output(cache.output());
    let parts = window_loss_parts(&steps, window, camera)?;
    let breakdown = hierarchical_total_loss(&parts, weights, scales);
    if !breakdown.is_finite() {
        return Err(Error::NonFiniteLoss { step: 0 });
    }

    let c_flow = weights.flow * scales.flow;
    let c_trans = weights.pose * scales.pose;
    let c_rot = weights.pose * scales.pose * weights.rotation;

    // d flow / d psi per field: sign of each residual through the interaction matrix.
    let pred = prefix_poses(&steps);
    let pred_flows = camera.window_flows(&pred, false);
    let a_rows = camera.interaction();
    let count: usize = window.flows.values().map(|f| f.valid.iter().filter(|v| **v).count()).sum();
    let mut flow_grads = Vec::with_capacity(window.flows.len());
    for (key, g) in &window.flows {
        let p = &pred_flows[key];
        let mut gpsi = [0.0; 6];
        if count > 0 {
            for (k, rows) in a_rows.iter().enumerate() {
                if !g.valid[k] {
                    continue;
                }
                for d in 0..2 {
                    let s = (p.vectors[k][d] - g.vectors[k][d]).signum() * ((p.vectors[k][d] != g.vectors[k][d]) as u8 as f64);
                    for c in 0..6 {
                        gpsi[c] += c_flow * s * rows[d][c] / count as f64;
                    }
                }
            }
        }
        let b = (key.frame as i64 + key.offset as i64) as usize;
        flow_grads.push((key.frame, b, gpsi));
    }

    let gt_inv: Vec<Vec<Pose<Dual<6>>>> = (0..WINDOW_LEN)
        .map(|i| {
            (0..WINDOW_LEN)
                .map(|j| window.poses[i].between(&window.poses[j]).inverse().lift::<6>())
                .collect()
        })
        .collect();

    let mut grad_steps = vec![[0.0; 6]; WINDOW_STRIDE];
    for k in 0..WINDOW_STRIDE {
        let s = &steps[k];
        let x: [Dual<6>; 6] = std::array::from_fn(|c| Dual::variable(s[c], c));
        let seeded = Pose::from_step(&[x[0], x[1], x[2]], &[x[3], x[4], x[5]]);
        let mut prefix: Vec<Pose<Dual<6>>> = pred[..=k].iter().map(|p| p.lift::<6>()).collect();
        prefix.push(prefix[k].compose(&seeded));
        for s in &steps[k + 1..] {
            let step = Pose::from_step(&[s[0], s[1], s[2]], &[s[3], s[4], s[5]]).lift::<6>();
            let next = prefix.last().unwrap().compose(&step);
            prefix.push(next);
        }
        let inv: Vec<Pose<Dual<6>>> = prefix.iter().map(|p| p.inverse()).collect();
        let spans = |i: usize, j: usize| i.min(j) <= k && k < i.max(j);
        let mut acc = Dual::<6>::constant(0.0);
        for i in 0..WINDOW_LEN {
            for j in 0..WINDOW_LEN {
                if i == j || !spans(i, j) {
                    continue;
                }
                let err = gt_inv[i][j].compose(&inv[i].compose(&prefix[j]));
                let (w, v) = err.log();
                acc = acc + norm(&v).scale(c_trans) + norm(&w).scale(c_rot);
            }
        }
        for (a, b, gpsi) in &flow_grads {
            if !spans(*a, *b) {
                continue;
            }
            let (w, v) = inv[*a].compose(&prefix[*b]).log();
            let psi = [w[0], w[1], w[2], v[0], v[1], v[2]];
            for c in 0..6 {
                acc = acc + psi[c].scale(gpsi[c]);
            }
        }
        grad_steps[k] = acc.du;
    }

    let mut grad = vec![0.0; model.net.num_params()];
    let gy: Vec<f64> = grad_steps
        .iter()
        .flat_map(|gs| (0..6).map(|c| gs[c] * model.scales[c]))
        .collect();
    model.net.backward(&cache, &gy, &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient("surrogate model".into()));
    }
    Ok(ModelLoss { breakdown, grad })
}
