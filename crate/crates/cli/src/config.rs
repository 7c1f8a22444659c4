//! Plain-text run configuration.
//!
//! The format is line-oriented: blank lines and `#` comments are skipped,
//! every other line is `section.key = value`. Values are scalars, words, or
//! whitespace-separated lists. Unknown keys are rejected with the nearest
//! valid key named; type mismatches are rejected with the line number.
//! Every key has a documented default, so an empty file is a valid config;
//! the only conditionally required keys are `kernel.epsilon` (when the
//! bandwidth schedule is turned off) and `manifold.mesh_path` (for mesh
//! manifolds).
//!
//! The parser is hand-rolled on purpose: the format stays trivially
//! diffable, and reports can embed the full config as their manifest
//! without pulling in a markup dependency.

use std::path::Path;
use std::sync::Arc;

use manigap_core::error::{Error, Result};
use manigap_core::graph::{EpsilonRule, KernelKind};
use manigap_core::harness::{GraphTask, GraphTaskItem, NodeTask, WeightMode};
use manigap_core::manifold::{BandlimitedSignal, Density, ManifoldSpec};
use manigap_core::mesh::load_off_mesh;
use manigap_core::neural::{Activation, Architecture, LossKind, TrainConfig};

/// The experiment a run executes; selected by the CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BuildGraph,
    EigCheck,
    NodeGap,
    GraphGap,
    RegSweep,
}

/// Which manifold family the run samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKindCfg {
    Circle,
    Torus,
    Mesh,
}

/// Sampling density on the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityCfg {
    Uniform,
    VonMises,
}

/// Bandlimited input shapes for the graph-level task's classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputShape {
    /// The constant eigenfunction, coefficients `[1]`.
    Constant,
    /// The first harmonic, coefficients `[0, 1]`.
    Harmonic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldCfg {
    pub kind: ManifoldKindCfg,
    /// Circle radius.
    pub radius: f64,
    /// Torus radii.
    pub r1: f64,
    pub r2: f64,
    /// OFF file backing a mesh manifold; required when `kind = mesh`.
    pub mesh_path: Option<String>,
    pub density: DensityCfg,
    pub vm_location: f64,
    pub vm_concentration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCfg {
    pub kind: KernelKind,
    /// Whether the bandwidth follows the built-in schedule; turning it off
    /// makes `epsilon` required.
    pub schedule: bool,
    pub c: f64,
    pub delta: f64,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchCfg {
    pub features: Vec<usize>,
    pub taps: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCfg {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub reg_weight: f64,
    pub loss: LossKind,
}

/// Node-task signals as eigenbasis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCfg {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// The graph-level task: one circle class per entry, aligned lists.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCfg {
    pub radii: Vec<f64>,
    pub inputs: Vec<InputShape>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCfg {
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub mu_values: Vec<f64>,
    pub eval_n: usize,
    pub i_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunCfg {
    /// Graph size for `build-graph`.
    pub n: usize,
    pub out: String,
    pub seed: u64,
    pub weight_mode: WeightMode,
}

/// A fully validated run configuration: the command plus every section,
/// defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub manifold: ManifoldCfg,
    pub kernel: KernelCfg,
    pub architecture: ArchCfg,
    pub training: TrainingCfg,
    pub signal: SignalCfg,
    pub task: TaskCfg,
    pub sweep: SweepCfg,
    pub run: RunCfg,
}

impl RunConfig {
    /// The documented defaults for every key.
    pub fn defaults(command: Command) -> RunConfig {
        RunConfig {
            command,
            manifold: ManifoldCfg {
                kind: ManifoldKindCfg::Circle,
                radius: 1.0,
                r1: 1.0,
                r2: 1.0,
                mesh_path: None,
                density: DensityCfg::Uniform,
                vm_location: 0.0,
                vm_concentration: 1.0,
            },
            kernel: KernelCfg {
                kind: KernelKind::Gaussian,
                schedule: true,
                c: 1.0,
                delta: 0.1,
                epsilon: None,
            },
            architecture: ArchCfg {
                features: vec![1, 4, 1],
                taps: 4,
                activation: Activation::Tanh,
            },
            training: TrainingCfg {
                lr: 0.005,
                beta1: 0.9,
                beta2: 0.999,
                epochs: 40,
                batch_size: 10,
                reg_weight: 0.0,
                loss: LossKind::AbsError,
            },
            signal: SignalCfg {
                input: vec![1.0, 0.5, 0.25],
                target: vec![0.0, 1.0],
            },
            task: TaskCfg {
                radii: vec![1.0, 1.5],
                inputs: vec![InputShape::Constant, InputShape::Harmonic],
                labels: vec![0.0, 1.0],
            },
            sweep: SweepCfg {
                n_values: vec![128, 256, 512, 1024],
                trials: 10,
                mu_values: vec![0.0, 0.001, 0.01],
                eval_n: 4096,
                i_max: 6,
            },
            run: RunCfg {
                n: 256,
                out: "reports".to_string(),
                seed: 0,
                weight_mode: WeightMode::Trained,
            },
        }
    }

    /// Builds the manifold, loading the mesh file for mesh manifolds.
    pub fn manifold_spec(&self) -> Result<ManifoldSpec> {
        let m = &self.manifold;
        let spec = match m.kind {
            ManifoldKindCfg::Circle => ManifoldSpec::circle(m.radius)?,
            ManifoldKindCfg::Torus => ManifoldSpec::flat_torus(m.r1, m.r2)?,
            ManifoldKindCfg::Mesh => {
                let path = m.mesh_path.as_deref().ok_or_else(|| {
                    Error::invalid_argument(
                        "manifold.mesh_path is required when manifold.kind = mesh".to_string(),
                    )
                })?;
                let mesh = load_off_mesh(Path::new(path))?;
                ManifoldSpec::mesh_cloud(Arc::new(mesh))
            }
        };
        match m.density {
            DensityCfg::Uniform => Ok(spec),
            DensityCfg::VonMises => spec.with_density(Density::VonMises {
                location: m.vm_location,
                concentration: m.vm_concentration,
            }),
        }
    }

    pub fn kernel_kind(&self) -> KernelKind {
        self.kernel.kind
    }

    /// The bandwidth rule: the built-in schedule, or the fixed `epsilon`.
    pub fn epsilon_rule(&self) -> Result<EpsilonRule> {
        if self.kernel.schedule {
            return Ok(EpsilonRule::Schedule {
                c: self.kernel.c,
                delta: self.kernel.delta,
            });
        }
        match self.kernel.epsilon {
            Some(eps) => Ok(EpsilonRule::Fixed(eps)),
            None => Err(Error::invalid_argument(
                "kernel.epsilon is required when kernel.schedule = off".to_string(),
            )),
        }
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(
            self.architecture.features.clone(),
            self.architecture.taps,
            self.architecture.activation,
        )
    }

    /// The training config; its seed is the run's master seed.
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            epochs: t.epochs,
            batch_size: t.batch_size,
            reg_weight: t.reg_weight,
            loss: t.loss,
            seed: self.run.seed,
        }
    }

    /// The node-level task from the `signal` section.
    pub fn node_task(&self) -> Result<NodeTask> {
        let spec = self.manifold_spec()?;
        let input = BandlimitedSignal::new(self.signal.input.clone(), spec.clone())?;
        let target = BandlimitedSignal::new(self.signal.target.clone(), spec)?;
        NodeTask::new(input, target)
    }

    /// The graph-level task from the `task` section: one circle per class.
    pub fn graph_task(&self) -> Result<GraphTask> {
        let t = &self.task;
        let items = t
            .radii
            .iter()
            .zip(t.inputs.iter())
            .zip(t.labels.iter())
            .map(|((&radius, &shape), &label)| {
                let spec = ManifoldSpec::circle(radius)?;
                let coeffs = match shape {
                    InputShape::Constant => vec![1.0],
                    InputShape::Harmonic => vec![0.0, 1.0],
                };
                Ok(GraphTaskItem {
                    input: BandlimitedSignal::new(coeffs, spec.clone())?,
                    spec,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GraphTask::new(items)
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.run.weight_mode
    }

    /// Cross-field checks that only depend on the config itself; everything
    /// else is validated by the operations the run delegates to.
    fn validate(&self) -> Result<()> {
        if !self.kernel.schedule && self.kernel.epsilon.is_none() {
            return Err(Error::invalid_argument(
                "kernel.epsilon is required when kernel.schedule = off".to_string(),
            ));
        }
        if self.manifold.kind == ManifoldKindCfg::Mesh && self.manifold.mesh_path.is_none() {
            return Err(Error::invalid_argument(
                "manifold.mesh_path is required when manifold.kind = mesh".to_string(),
            ));
        }
        let needs_analytic = matches!(
            self.command,
            Command::EigCheck | Command::NodeGap | Command::RegSweep
        );
        if needs_analytic && self.manifold.kind == ManifoldKindCfg::Mesh {
            return Err(Error::invalid_argument(format!(
                "{} requires an analytic manifold (manifold.kind = circle or torus)",
                command_name(self.command)
            )));
        }
        if self.command == Command::GraphGap {
            let t = &self.task;
            if t.radii.len() != t.inputs.len() || t.radii.len() != t.labels.len() {
                return Err(Error::invalid_argument(format!(
                    "task lists must align: {} radii, {} inputs, {} labels",
                    t.radii.len(),
                    t.inputs.len(),
                    t.labels.len()
                )));
            }
        }
        Ok(())
    }
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::BuildGraph => "build-graph",
        Command::EigCheck => "eig-check",
        Command::NodeGap => "node-gap",
        Command::GraphGap => "graph-gap",
        Command::RegSweep => "reg-sweep",
    }
}

/// Every valid key, in the canonical (serialization) order.
const KEYS: &[&str] = &[
    "manifold.kind",
    "manifold.radius",
    "manifold.r1",
    "manifold.r2",
    "manifold.mesh_path",
    "manifold.density",
    "manifold.vm_location",
    "manifold.vm_concentration",
    "kernel.kind",
    "kernel.schedule",
    "kernel.c",
    "kernel.delta",
    "kernel.epsilon",
    "architecture.features",
    "architecture.taps",
    "architecture.activation",
    "training.lr",
    "training.beta1",
    "training.beta2",
    "training.epochs",
    "training.batch_size",
    "training.reg_weight",
    "training.loss",
    "signal.input",
    "signal.target",
    "task.radii",
    "task.inputs",
    "task.labels",
    "sweep.n_values",
    "sweep.trials",
    "sweep.mu_values",
    "sweep.eval_n",
    "sweep.i_max",
    "run.n",
    "run.out",
    "run.seed",
    "run.weight_mode",
];

fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn nearest_key(key: &str) -> &'static str {
    KEYS.iter()
        .min_by_key(|k| edit_distance(key, k))
        .expect("KEYS is nonempty")
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number for {key}, got \"{v}\"")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("{key} must be finite, got \"{v}\"")));
    }
    Ok(x)
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| parse_err(line, format!("expected a nonnegative integer for {key}, got \"{v}\"")))
}

fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| parse_err(line, format!("expected a nonnegative integer for {key}, got \"{v}\"")))
}

fn parse_f64_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace()
        .map(|tok| parse_f64(line, key, tok))
        .collect()
}

fn parse_usize_list(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    v.split_whitespace()
        .map(|tok| parse_usize(line, key, tok))
        .collect()
}

fn parse_switch(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(parse_err(
            line,
            format!("expected on|off for {key}, got \"{v}\""),
        )),
    }
}

/// Parses config text for the given command, filling defaults and
/// validating the result. Later lines override earlier ones.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults(command);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            parse_err(line, format!("expected \"section.key = value\", got \"{content}\""))
        })?;
        let key = key.trim();
        let v = value.trim();
        match key {
            "manifold.kind" => {
                cfg.manifold.kind = match v {
                    "circle" => ManifoldKindCfg::Circle,
                    "torus" => ManifoldKindCfg::Torus,
                    "mesh" => ManifoldKindCfg::Mesh,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected circle|torus|mesh for {key}, got \"{v}\""),
                        ))
                    }
                }
            }
            "manifold.radius" => cfg.manifold.radius = parse_f64(line, key, v)?,
            "manifold.r1" => cfg.manifold.r1 = parse_f64(line, key, v)?,
            "manifold.r2" => cfg.manifold.r2 = parse_f64(line, key, v)?,
            "manifold.mesh_path" => cfg.manifold.mesh_path = Some(v.to_string()),
            "manifold.density" => {
                cfg.manifold.density = match v {
                    "uniform" => DensityCfg::Uniform,
                    "vonmises" => DensityCfg::VonMises,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected uniform|vonmises for {key}, got \"{v}\""),
                        ))
                    }
                }
            }
            "manifold.vm_location" => cfg.manifold.vm_location = parse_f64(line, key, v)?,
            "manifold.vm_concentration" => {
                cfg.manifold.vm_concentration = parse_f64(line, key, v)?
            }
            "kernel.kind" => {
                cfg.kernel.kind = match v {
                    "gaussian" => KernelKind::Gaussian,
                    "epsilon" => KernelKind::Epsilon,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected gaussian|epsilon for {key}, got \"{v}\""),
                        ))
                    }
                }
            }
            "kernel.schedule" => cfg.kernel.schedule = parse_switch(line, key, v)?,
            "kernel.c" => cfg.kernel.c = parse_f64(line, key, v)?,
            "kernel.delta" => cfg.kernel.delta = parse_f64(line, key, v)?,
            "kernel.epsilon" => cfg.kernel.epsilon = Some(parse_f64(line, key, v)?),
            "architecture.features" => {
                cfg.architecture.features = parse_usize_list(line, key, v)?
            }
            "architecture.taps" => cfg.architecture.taps = parse_usize(line, key, v)?,
            "architecture.activation" => {
                cfg.architecture.activation = match v {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::ReLU,
                    "identity" => Activation::Identity,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected tanh|relu|identity for {key}, got \"{v}\""),
                        ))
                    }
                }
            }
            "training.lr" => cfg.training.lr = parse_f64(line, key, v)?,
            "training.beta1" => cfg.training.beta1 = parse_f64(line, key, v)?,
            "training.beta2" => cfg.training.beta2 = parse_f64(line, key, v)?,
            "training.epochs" => cfg.training.epochs = parse_usize(line, key, v)?,
            "training.batch_size" => cfg.training.batch_size = parse_usize(line, key, v)?,
            "training.reg_weight" => cfg.training.reg_weight = parse_f64(line, key, v)?,
            "training.loss" => {
                cfg.training.loss = match v {
                    "abs" => LossKind::AbsError,
                    "cross_entropy" => LossKind::CrossEntropy,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected abs|cross_entropy for {key}, got \"{v}\""),
                        ))
                    }
                }
            }
            "signal.input" => cfg.signal.input = parse_f64_list(line, key, v)?,
            "signal.target" => cfg.signal.target = parse_f64_list(line, key, v)?,
            "task.radii" => cfg.task.radii = parse_f64_list(line, key, v)?,
            "task.inputs" => {
                cfg.task.inputs = v
                    .split_whitespace()
                    .map(|tok| match tok {
                        "constant" => Ok(InputShape::Constant),
                        "harmonic" => Ok(InputShape::Harmonic),
                        _ => Err(parse_err(
                            line,
                            format!("expected constant|harmonic entries for {key}, got \"{tok}\""),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            "task.labels" => cfg.task.labels = parse_f64_list(line, key, v)?,
            "sweep.n_values" => cfg.sweep.n_values = parse_usize_list(line, key, v)?,
            "sweep.trials" => cfg.sweep.trials = parse_usize(line, key, v)?,
            "sweep.mu_values" => cfg.sweep.mu_values = parse_f64_list(line, key, v)?,
            "sweep.eval_n" => cfg.sweep.eval_n = parse_usize(line, key, v)?,
            "sweep.i_max" => cfg.sweep.i_max = parse_usize(line, key, v)?,
            "run.n" => cfg.run.n = parse_usize(line, key, v)?,
            "run.out" => cfg.run.out = v.to_string(),
            "run.seed" => cfg.run.seed = parse_u64(line, key, v)?,
            "run.weight_mode" => {
                cfg.run.weight_mode = match v {
                    "trained" => WeightMode::Trained,
                    "fixed" => WeightMode::FixedRandom,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected trained|fixed for {key}, got \"{v}\""),
                        ))
                    }
                }
            }
            _ => {
                return Err(parse_err(
                    line,
                    format!("unknown key \"{key}\"; nearest valid key is \"{}\"", nearest_key(key)),
                ))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serializes a config in canonical key order; `parse_config` of the output
/// reproduces the config exactly. Optional keys appear only when set.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    let m = &cfg.manifold;
    put(
        "manifold.kind",
        match m.kind {
            ManifoldKindCfg::Circle => "circle",
            ManifoldKindCfg::Torus => "torus",
            ManifoldKindCfg::Mesh => "mesh",
        }
        .to_string(),
    );
    put("manifold.radius", m.radius.to_string());
    put("manifold.r1", m.r1.to_string());
    put("manifold.r2", m.r2.to_string());
    if let Some(p) = &m.mesh_path {
        put("manifold.mesh_path", p.clone());
    }
    put(
        "manifold.density",
        match m.density {
            DensityCfg::Uniform => "uniform",
            DensityCfg::VonMises => "vonmises",
        }
        .to_string(),
    );
    put("manifold.vm_location", m.vm_location.to_string());
    put("manifold.vm_concentration", m.vm_concentration.to_string());
    let k = &cfg.kernel;
    put(
        "kernel.kind",
        match k.kind {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Epsilon => "epsilon",
        }
        .to_string(),
    );
    put(
        "kernel.schedule",
        if k.schedule { "on" } else { "off" }.to_string(),
    );
    put("kernel.c", k.c.to_string());
    put("kernel.delta", k.delta.to_string());
    if let Some(eps) = k.epsilon {
        put("kernel.epsilon", eps.to_string());
    }
    let a = &cfg.architecture;
    put("architecture.features", join(&a.features));
    put("architecture.taps", a.taps.to_string());
    put(
        "architecture.activation",
        match a.activation {
            Activation::Tanh => "tanh",
            Activation::ReLU => "relu",
            Activation::Identity => "identity",
        }
        .to_string(),
    );
    let t = &cfg.training;
    put("training.lr", t.lr.to_string());
    put("training.beta1", t.beta1.to_string());
    put("training.beta2", t.beta2.to_string());
    put("training.epochs", t.epochs.to_string());
    put("training.batch_size", t.batch_size.to_string());
    put("training.reg_weight", t.reg_weight.to_string());
    put(
        "training.loss",
        match t.loss {
            LossKind::AbsError => "abs",
            LossKind::CrossEntropy => "cross_entropy",
        }
        .to_string(),
    );
    put("signal.input", join(&cfg.signal.input));
    put("signal.target", join(&cfg.signal.target));
    put("task.radii", join(&cfg.task.radii));
    put(
        "task.inputs",
        cfg.task
            .inputs
            .iter()
            .map(|s| match s {
                InputShape::Constant => "constant",
                InputShape::Harmonic => "harmonic",
            })
            .collect::<Vec<_>>()
            .join(" "),
    );
    put("task.labels", join(&cfg.task.labels));
    let s = &cfg.sweep;
    put("sweep.n_values", join(&s.n_values));
    put("sweep.trials", s.trials.to_string());
    put("sweep.mu_values", join(&s.mu_values));
    put("sweep.eval_n", s.eval_n.to_string());
    put("sweep.i_max", s.i_max.to_string());
    let r = &cfg.run;
    put("run.n", r.n.to_string());
    put("run.out", r.out.clone());
    put("run.seed", r.seed.to_string());
    put(
        "run.weight_mode",
        match r.weight_mode {
            WeightMode::Trained => "trained",
            WeightMode::FixedRandom => "fixed",
        }
        .to_string(),
    );
    out
}
