use serde::{Deserialize, Serialize};

use super::layers::{softmax, Alloc, Conv2d, Dense, Lstm, LstmCache, LstmState};
use super::tensor::Tensor;
use super::NnError;
use crate::env::{CompoundId, DiscreteAction, SpatialConfig, SpatialObservation, VECTOR_FEATURES};
use crate::rng::SimRng;

const INIT_SALT: u64 = 0x6e6e_696e;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NetMode {
    /// Per-unit feature vector in, one discrete action head out.
    Vector { features: usize, actions: usize },
    /// Minimap and screen layer stacks plus a non-spatial vector in;
    /// action-id, x-bin and y-bin heads out.
    Spatial { n: usize, minimap: usize, screen: usize, nonspatial: usize, ids: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub mode: NetMode,
    pub dense: usize,
    pub lstm: usize,
    pub conv1: usize,
    pub kernel1: usize,
    pub conv2: usize,
    pub kernel2: usize,
}

impl NetConfig {
    pub fn vector() -> Self {
        Self::with_mode(NetMode::Vector { features: VECTOR_FEATURES, actions: DiscreteAction::COUNT })
    }

    pub fn spatial(cfg: &SpatialConfig) -> Self {
        Self::with_mode(NetMode::Spatial {
            n: cfg.n,
            minimap: cfg.minimap_layers,
            screen: cfg.screen_layers,
            nonspatial: cfg.nonspatial,
            ids: CompoundId::COUNT,
        })
    }

    pub fn with_mode(mode: NetMode) -> Self {
        Self { mode, dense: 64, lstm: 128, conv1: 16, kernel1: 5, conv2: 32, kernel2: 3 }
    }

    pub fn with_lstm(mut self, width: usize) -> Self {
        self.lstm = width;
        self
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        match self.mode {
            NetMode::Vector { actions, .. } => vec![actions],
            NetMode::Spatial { n, ids, .. } => vec![ids, n, n],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum NetInput<'a> {
    Vector(&'a [f64]),
    Spatial { minimap: &'a [f64], screen: &'a [f64], nonspatial: &'a [f64] },
}

impl<'a> From<&'a SpatialObservation> for NetInput<'a> {
    fn from(o: &'a SpatialObservation) -> Self {
        NetInput::Spatial { minimap: &o.minimap, screen: &o.screen, nonspatial: &o.nonspatial }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetOutput {
    /// Head distributions in `NetConfig::head_sizes` order.
    pub heads: Vec<Vec<f64>>,
    pub value: f64,
    pub state: LstmState,
}

/// Loss gradient for one recorded step: one logit gradient per head plus
/// the value gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct StepGrad {
    pub logits: Vec<Vec<f64>>,
    pub value: f64,
}

impl StepGrad {
    pub fn zeros(head_sizes: &[usize]) -> Self {
        Self { logits: head_sizes.iter().map(|&n| vec![0.0; n]).collect(), value: 0.0 }
    }
}

#[derive(Clone, Debug)]
struct TrunkCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

#[derive(Clone, Debug)]
struct StepCache {
    trunks: Vec<TrunkCache>,
    dense_in: Vec<f64>,
    dense_out: Vec<f64>,
    lstm: LstmCache,
    h: Vec<f64>,
}

/// Recorded forward steps of one sequence, consumed by `backward`.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    steps: Vec<StepCache>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Layout {
    /// Minimap then screen, each `[conv1, conv2]`.
    trunks: Vec<[Conv2d; 2]>,
    dense: Dense,
    lstm: Lstm,
    heads: Vec<Dense>,
    value: Dense,
    total: usize,
}

impl Layout {
    fn new(cfg: &NetConfig) -> Self {
        let mut alloc = Alloc::default();
        let mut trunks = Vec::new();
        let (dense_in, conv_out) = match cfg.mode {
            NetMode::Vector { features, .. } => (features, 0),
            NetMode::Spatial { n, minimap, screen, nonspatial, .. } => {
                for cin in [minimap, screen] {
                    let c1 = Conv2d::new(cin, cfg.conv1, cfg.kernel1, n, n, &mut alloc);
                    let c2 = Conv2d::new(cfg.conv1, cfg.conv2, cfg.kernel2, n, n, &mut alloc);
                    trunks.push([c1, c2]);
                }
                (nonspatial, 2 * cfg.conv2 * n * n)
            }
        };
        let dense = Dense::new(dense_in, cfg.dense, &mut alloc);
        let lstm = Lstm::new(conv_out + cfg.dense, cfg.lstm, &mut alloc);
        let heads = cfg.head_sizes().into_iter().map(|k| Dense::new(cfg.lstm, k, &mut alloc)).collect();
        let value = Dense::new(cfg.lstm, 1, &mut alloc);
        Self { trunks, dense, lstm, heads, value, total: alloc.total() }
    }

    fn named(&self) -> Vec<(String, usize, Vec<usize>)> {
        let mut out = Vec::new();
        for (t, name) in self.trunks.iter().zip(["minimap", "screen"]) {
            for (k, c) in t.iter().enumerate() {
                out.push((format!("{name}.conv{}.w", k + 1), c.w, vec![c.cout, c.cin, c.kernel, c.kernel]));
                out.push((format!("{name}.conv{}.b", k + 1), c.b, vec![c.cout]));
            }
        }
        let d = &self.dense;
        out.push(("dense.w".into(), d.w, vec![d.outputs, d.inputs]));
        out.push(("dense.b".into(), d.b, vec![d.outputs]));
        let l = &self.lstm;
        out.push(("lstm.wx".into(), l.wx, vec![4 * l.hidden, l.inputs]));
        out.push(("lstm.wh".into(), l.wh, vec![4 * l.hidden, l.hidden]));
        out.push(("lstm.b".into(), l.b, vec![4 * l.hidden]));
        for (k, h) in self.heads.iter().chain(std::iter::once(&self.value)).enumerate() {
            let name = if k == self.heads.len() { "value".to_string() } else { format!("head{k}") };
            out.push((format!("{name}.w"), h.w, vec![h.outputs, h.inputs]));
            out.push((format!("{name}.b"), h.b, vec![h.outputs]));
        }
        out
    }
}

/// Policy and value network: optional convolutional trunks, a dense
/// non-spatial trunk, an LSTM core and linear softmax/value heads.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    config: NetConfig,
    layout: Layout,
    params: Vec<f64>,
}

fn check(stage: &'static str, expected: usize, got: usize) -> Result<(), NnError> {
    if expected == got {
        Ok(())
    } else {
        Err(NnError::Shape { stage, expected, got })
    }
}

fn relu_inplace(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

impl PolicyNet {
    pub fn new(config: NetConfig, seed: u64) -> Self {
        let mut net = Self::zeros(config);
        let mut rng = SimRng::derived(seed, INIT_SALT);
        let l = &net.layout;
        let p = &mut net.params;
        for t in &l.trunks {
            t[0].init(p, &mut rng);
            t[1].init(p, &mut rng);
        }
        l.dense.init(p, &mut rng);
        l.lstm.init(p, &mut rng);
        for h in &l.heads {
            h.init(p, &mut rng);
        }
        l.value.init(p, &mut rng);
        net
    }

    /// Every parameter zero.
    pub fn zeros(config: NetConfig) -> Self {
        let layout = Layout::new(&config);
        let params = vec![0.0; layout.total];
        Self { config, layout, params }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        self.config.head_sizes()
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.config.lstm)
    }

    /// Parameters split into named tensors.
    pub fn tensors(&self) -> Vec<(String, Tensor)> {
        self.layout
            .named()
            .into_iter()
            .map(|(name, at, shape)| {
                let len = shape.iter().product::<usize>();
                let t = Tensor::new(shape, self.params[at..at + len].to_vec()).expect("layout shapes");
                (name, t)
            })
            .collect()
    }

    /// Rebuild from named tensors as produced by `tensors`.
    pub fn from_tensors(config: NetConfig, tensors: &[(String, Tensor)]) -> Result<Self, NnError> {
        let mut net = Self::zeros(config);
        let named = net.layout.named();
        check("tensor count", named.len(), tensors.len())?;
        for ((name, at, shape), (got_name, t)) in named.iter().zip(tensors) {
            if name != got_name || shape != &t.shape {
                return Err(NnError::Checkpoint(format!(
                    "tensor {got_name} {:?} does not match {name} {shape:?}",
                    t.shape
                )));
            }
            net.params[*at..*at + t.data.len()].copy_from_slice(&t.data);
        }
        Ok(net)
    }

    pub fn forward(&self, input: NetInput, state: &LstmState) -> Result<NetOutput, NnError> {
        self.run(input, state, None)
    }

    /// Forward pass that records what `backward` needs.
    pub fn forward_recorded(&self, input: NetInput, state: &LstmState, tape: &mut Tape) -> Result<NetOutput, NnError> {
        self.run(input, state, Some(tape))
    }

    fn run(&self, input: NetInput, state: &LstmState, tape: Option<&mut Tape>) -> Result<NetOutput, NnError> {
        let p = &self.params;
        let l = &self.layout;
        check("lstm hidden state", self.config.lstm, state.h.len())?;
        check("lstm cell state", self.config.lstm, state.c.len())?;
        let mut trunks = Vec::new();
        let dense_in: &[f64] = match (input, &self.config.mode) {
            (NetInput::Vector(x), NetMode::Vector { features, .. }) => {
                check("vector input", *features, x.len())?;
                x
            }
            (NetInput::Spatial { minimap, screen, nonspatial }, NetMode::Spatial { nonspatial: ns, .. }) => {
                for ((x, stage), t) in [(minimap, "minimap input"), (screen, "screen input")].into_iter().zip(&l.trunks)
                {
                    check(stage, t[0].input_len(), x.len())?;
                    let mut a1 = vec![0.0; t[0].output_len()];
                    t[0].forward(p, x, &mut a1);
                    relu_inplace(&mut a1);
                    let mut a2 = vec![0.0; t[1].output_len()];
                    t[1].forward(p, &a1, &mut a2);
                    relu_inplace(&mut a2);
                    trunks.push(TrunkCache { x: x.to_vec(), a1, a2 });
                }
                check("nonspatial input", *ns, nonspatial.len())?;
                nonspatial
            }
            (NetInput::Vector(_), _) => return Err(NnError::Mode("vector input to a spatial net")),
            (NetInput::Spatial { .. }, _) => return Err(NnError::Mode("spatial input to a vector net")),
        };
        let mut dense_out = vec![0.0; l.dense.outputs];
        l.dense.forward(p, dense_in, &mut dense_out);
        for v in &mut dense_out {
            *v = v.tanh();
        }
        let mut x = Vec::with_capacity(l.lstm.inputs);
        for t in &trunks {
            x.extend_from_slice(&t.a2);
        }
        x.extend_from_slice(&dense_out);
        let (next, lstm_cache) = l.lstm.step(p, &x, state);
        let heads = l
            .heads
            .iter()
            .map(|h| {
                let mut z = vec![0.0; h.outputs];
                h.forward(p, &next.h, &mut z);
                softmax(&z)
            })
            .collect::<Vec<_>>();
        let mut v = [0.0];
        l.value.forward(p, &next.h, &mut v);
        if !v[0].is_finite() || heads.iter().flatten().any(|x| !x.is_finite()) {
            return Err(NnError::NonFinite("forward pass output".into()));
        }
        if let Some(tape) = tape {
            tape.steps.push(StepCache {
                trunks,
                dense_in: dense_in.to_vec(),
                dense_out,
                lstm: lstm_cache,
                h: next.h.clone(),
            });
        }
        Ok(NetOutput { heads, value: v[0], state: next })
    }

    /// Backpropagation through time over a recorded sequence. `grads[t]`
    /// is the loss gradient w.r.t. step `t`'s head logits and value;
    /// parameter gradients accumulate into `out`.
    pub fn backward(&self, tape: &Tape, grads: &[StepGrad], out: &mut [f64]) -> Result<(), NnError> {
        if tape.is_empty() {
            return Err(NnError::NoForward);
        }
        check("step gradients", tape.len(), grads.len())?;
        check("gradient buffer", self.params.len(), out.len())?;
        let sizes = self.head_sizes();
        for sg in grads {
            check("head count", sizes.len(), sg.logits.len())?;
            for (k, d) in sg.logits.iter().enumerate() {
                check("head gradient", sizes[k], d.len())?;
            }
        }
        let p = &self.params;
        let l = &self.layout;
        let hd = self.config.lstm;
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut tmp = vec![0.0; hd];
        for (cache, sg) in tape.steps.iter().zip(grads).rev() {
            let mut dh = dh_next;
            for (head, d) in l.heads.iter().zip(&sg.logits) {
                head.backward(p, &cache.h, d, out, Some(&mut tmp));
                super::layers::axpy(1.0, &tmp, &mut dh);
            }
            l.value.backward(p, &cache.h, &[sg.value], out, Some(&mut tmp));
            super::layers::axpy(1.0, &tmp, &mut dh);
            let (dx, dh_prev, dc_prev) = l.lstm.backward_step(p, &cache.lstm, &dh, &dc_next, out);
            dh_next = dh_prev;
            dc_next = dc_prev;

            let mut offset = 0;
            for (t, tc) in l.trunks.iter().zip(&cache.trunks) {
                let n2 = t[1].output_len();
                let mut d2: Vec<f64> = dx[offset..offset + n2].to_vec();
                offset += n2;
                for (d, a) in d2.iter_mut().zip(&tc.a2) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                let mut d1 = vec![0.0; t[0].output_len()];
                t[1].backward(p, &tc.a1, &d2, out, Some(&mut d1));
                for (d, a) in d1.iter_mut().zip(&tc.a1) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                t[0].backward(p, &tc.x, &d1, out, None);
            }
            let dd: Vec<f64> = dx[offset..].iter().zip(&cache.dense_out).map(|(d, a)| d * (1.0 - a * a)).collect();
            l.dense.backward(p, &cache.dense_in, &dd, out, None);
        }
        Ok(())
    }
}
