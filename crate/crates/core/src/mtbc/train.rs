use std::io::Write;

use rand::seq::SliceRandom;

use super::optim::OptimState;
use super::{ModelConfig, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::mdp::DemoSet;
use crate::policy::{log_softmax_loss, softmax, HeadParams, PolicyParams, ReprParams, TensorFile};
use crate::rng::{stream_rng, Stream};

/// Shared representation and one head per source task.
#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskModel {
    pub repr: ReprParams,
    pub heads: Vec<HeadParams>,
}

impl MultitaskModel {
    pub fn policy(&self, task: usize) -> PolicyParams {
        PolicyParams {
            repr: self.repr.clone(),
            head: self.heads[task].clone(),
        }
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let mut file = TensorFile::default();
        self.repr.write_tensors("repr", &mut file);
        for (t, h) in self.heads.iter().enumerate() {
            h.write_tensors(&format!("head{t}"), &mut file);
        }
        file
    }

    pub fn from_tensor_file(file: &TensorFile) -> Result<Self> {
        let repr = ReprParams::read_tensors("repr", file)?;
        let mut heads = Vec::new();
        while file.get(&format!("head{}.weight", heads.len())).is_some() {
            let h = HeadParams::read_tensors(&format!("head{}", heads.len()), file)?;
            check_dim("head input", repr.out_dim(), h.in_dim)?;
            heads.push(h);
        }
        if heads.is_empty() {
            return Err(Error::invalid("multitask model without heads"));
        }
        Ok(Self { repr, heads })
    }
}

/// Mean training loss of one task over one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub task_id: String,
    pub loss: f64,
}

/// Writes a loss trace as `epoch,task_id,loss` CSV.
pub fn write_loss_trace<W: Write>(trace: &[EpochLoss], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "task_id", "loss"])?;
    for e in trace {
        w.write_record([e.epoch.to_string(), e.task_id.clone(), format!("{:?}", e.loss)])?;
    }
    w.flush().map_err(|e| Error::io("<loss trace>", e))?;
    Ok(())
}

/// Final-epoch loss per task (in task order of the trace).
pub fn final_losses(trace: &[EpochLoss]) -> Vec<f64> {
    let last = trace.iter().map(|e| e.epoch).max().unwrap_or(0);
    trace.iter().filter(|e| e.epoch == last).map(|e| e.loss).collect()
}

#[derive(Clone, Copy)]
struct Sample {
    task: usize,
    state: usize,
    action: usize,
}

fn collect_samples(
    demos: &[&DemoSet],
    num_states: usize,
    num_actions: usize,
) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (task, d) in demos.iter().enumerate() {
        if d.is_empty() {
            return Err(Error::invalid(format!("demo set {:?} is empty", d.task_id)));
        }
        d.check_ranges(num_states, num_actions)?;
        out.extend(d.pairs.iter().map(|&(state, action)| Sample { task, state, action }));
    }
    Ok(out)
}

/// Where per-state features come from during training.
enum Features<'a> {
    /// Trainable representation applied to raw observations.
    Learn(&'a mut ReprParams, OptimState),
    /// Frozen representation; features precomputed per state.
    Frozen(Vec<Vec<f64>>),
}

/// Mini-batch descent of the mean log-loss over all samples, each routed to
/// its task's head. A batch's forward/backward pass through the
/// representation is computed once per distinct state in the batch.
fn descend(
    mut features: Features<'_>,
    heads: &mut [HeadParams],
    samples: &[Sample],
    observations: &[Vec<f64>],
    task_ids: &[String],
    cfg: &TrainConfig,
    phase: u64,
) -> Vec<EpochLoss> {
    let mut rng = stream_rng(cfg.seed, Stream::Shuffle, &[phase]);
    let head_sizes: Vec<usize> = heads.iter().map(|h| h.weight.len()).collect();
    let mut head_opt = OptimState::new(cfg.optimizer, &head_sizes);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let num_states = observations.len();
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_states];
    let mut touched: Vec<usize> = Vec::new();
    let mut trace = Vec::with_capacity(cfg.epochs * heads.len());

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = vec![0.0; heads.len()];
        let mut loss_count = vec![0usize; heads.len()];
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = samples[i];
                if groups[s.state].is_empty() {
                    touched.push(s.state);
                }
                groups[s.state].push((s.task, s.action));
            }
            touched.sort_unstable();
            let mut head_grads: Vec<Vec<f64>> = head_sizes.iter().map(|&n| vec![0.0; n]).collect();
            let mut repr_grads = match &features {
                Features::Learn(repr, _) => Some(repr.zero_grads()),
                Features::Frozen(_) => None,
            };
            for &state in &touched {
                let trace_and_phi = match &features {
                    Features::Learn(repr, _) => {
                        let tr = repr.forward_trace(&observations[state]);
                        let phi = tr.phi.clone();
                        (Some(tr), phi)
                    }
                    Features::Frozen(table) => (None, table[state].clone()),
                };
                let (state_trace, phi) = trace_and_phi;
                let mut dphi = vec![0.0; phi.len()];
                for &(task, action) in &groups[state] {
                    let logits = heads[task].logits(&phi);
                    loss_sum[task] += log_softmax_loss(&logits, action);
                    loss_count[task] += 1;
                    let mut g = softmax(&logits);
                    g[action] -= 1.0;
                    g.iter_mut().for_each(|x| *x *= scale);
                    let d = heads[task].backward(&phi, &g, &mut head_grads[task]);
                    for (acc, x) in dphi.iter_mut().zip(d) {
                        *acc += x;
                    }
                }
                if let (Features::Learn(repr, _), Some(tr), Some(grads)) =
                    (&features, state_trace.as_ref(), repr_grads.as_mut())
                {
                    repr.backward(tr, &dphi, grads);
                }
                groups[state].clear();
            }
            touched.clear();

            if let (Features::Learn(repr, opt), Some(grads)) = (&mut features, repr_grads.as_ref()) {
                let g: Vec<&[f64]> = grads
                    .iter()
                    .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
                    .collect();
                opt.step(repr.param_slices_mut(), g, cfg.lr_repr);
            }
            head_opt.step(
                heads.iter_mut().map(|h| h.weight.as_mut_slice()).collect(),
                head_grads.iter().map(Vec::as_slice).collect(),
                cfg.lr_head,
            );
            heads.iter_mut().for_each(HeadParams::project);
        }
        for (t, id) in task_ids.iter().enumerate() {
            trace.push(EpochLoss {
                epoch,
                task_id: id.clone(),
                loss: loss_sum[t] / loss_count[t].max(1) as f64,
            });
        }
    }
    trace
}

fn check_inputs(
    demos: &[&DemoSet],
    observations: &[Vec<f64>],
    num_actions: usize,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<Vec<Sample>> {
    model.validate()?;
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::invalid("at least one task is required"));
    }
    if observations.is_empty() || num_actions == 0 {
        return Err(Error::invalid("empty state or action space"));
    }
    let dim = observations[0].len();
    for o in observations {
        check_dim("observation dimension", dim, o.len())?;
    }
    collect_samples(demos, observations.len(), num_actions)
}

/// Joint training of a shared representation and one head per task on the
/// concatenated demonstrations (training phase). All tasks must share the
/// observation map and action count passed here.
pub fn train_multitask(
    demos: &[DemoSet],
    observations: &[Vec<f64>],
    num_actions: usize,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(MultitaskModel, Vec<EpochLoss>)> {
    let refs: Vec<&DemoSet> = demos.iter().collect();
    let samples = check_inputs(&refs, observations, num_actions, model, cfg)?;
    let arch = model.arch(observations[0].len());
    let mut repr = ReprParams::init(&arch, &mut stream_rng(cfg.seed, Stream::Init, &[0]))?;
    let mut heads = (0..demos.len())
        .map(|t| {
            HeadParams::init(
                num_actions,
                model.repr_dim,
                model.c_f,
                &mut stream_rng(cfg.seed, Stream::Init, &[1, t as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let opt = OptimState::new(
        cfg.optimizer,
        &repr.param_slices().iter().map(|s| s.len()).collect::<Vec<_>>(),
    );
    let task_ids: Vec<String> = demos.iter().map(|d| d.task_id.clone()).collect();
    let trace = descend(
        Features::Learn(&mut repr, opt),
        &mut heads,
        &samples,
        observations,
        &task_ids,
        cfg,
        0,
    );
    Ok((MultitaskModel { repr, heads }, trace))
}

/// Fits a fresh head on a frozen representation (transfer phase).
pub fn transfer(
    repr: &ReprParams,
    target_demos: &DemoSet,
    observations: &[Vec<f64>],
    num_actions: usize,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(HeadParams, Vec<EpochLoss>)> {
    let samples = check_inputs(&[target_demos], observations, num_actions, model, cfg)?;
    check_dim("representation input", repr.obs_dim(), observations[0].len())?;
    check_dim("representation output", model.repr_dim, repr.out_dim())?;
    let table: Vec<Vec<f64>> = observations.iter().map(|o| repr.forward(o)).collect();
    let mut heads = vec![HeadParams::init(
        num_actions,
        repr.out_dim(),
        model.c_f,
        &mut stream_rng(cfg.seed, Stream::Init, &[2]),
    )?];
    let trace = descend(
        Features::Frozen(table),
        &mut heads,
        &samples,
        observations,
        std::slice::from_ref(&target_demos.task_id),
        cfg,
        1,
    );
    Ok((heads.pop().expect("one head"), trace))
}

/// Behavioral cloning from scratch on target data only.
pub fn train_bc(
    target_demos: &DemoSet,
    observations: &[Vec<f64>],
    num_actions: usize,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(PolicyParams, Vec<EpochLoss>)> {
    let (mut m, trace) = train_multitask(
        std::slice::from_ref(target_demos),
        observations,
        num_actions,
        model,
        cfg,
    )?;
    let head = m.heads.pop().expect("one head");
    Ok((PolicyParams { repr: m.repr, head }, trace))
}
