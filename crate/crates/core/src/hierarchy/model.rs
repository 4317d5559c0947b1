use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConditioningSet, HierConfig, HierError, BODY_DIM, FACE_DIM, HAND_DIM};
use crate::autodiff::{
    read_checkpoint, write_checkpoint, AutodiffError, Conv1d, ConvSpec, Dense, Graph, GruCell, ParamStore, Var,
};
use crate::Matrix;

/// Three dense layers with `tanh` between them.
#[derive(Clone, Debug)]
struct Mlp3([Dense; 3]);

impl Mlp3 {
    fn new(name: &str, n_in: usize, hidden: usize, n_out: usize) -> Self {
        Self([
            Dense::new(&format!("{name}.0"), n_in, hidden, true),
            Dense::new(&format!("{name}.1"), hidden, hidden, true),
            Dense::new(&format!("{name}.2"), hidden, n_out, true),
        ])
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, AutodiffError> {
        let h = self.0[0].forward(g, store, x)?;
        let h = g.tanh(h)?;
        let h = self.0[1].forward(g, store, h)?;
        let h = g.tanh(h)?;
        self.0[2].forward(g, store, h)
    }
}

enum LayerRef<'a> {
    Dense(&'a Dense),
    Conv(&'a Conv1d),
    Gru(&'a GruCell),
}

impl LayerRef<'_> {
    fn init<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<(), AutodiffError> {
        match self {
            LayerRef::Dense(l) => l.init(store, rng),
            LayerRef::Conv(l) => l.init(store, rng),
            LayerRef::Gru(l) => l.init(store, rng),
        }
    }

    fn check(&self, store: &ParamStore) -> Result<(), AutodiffError> {
        match self {
            LayerRef::Dense(l) => l.check(store),
            LayerRef::Conv(l) => l.check(store),
            LayerRef::Gru(l) => l.check(store),
        }
    }
}

/// Stack of causal convolutions with dilation doubling per layer and `tanh`
/// after each.
fn causal_stack(name: &str, c_in: usize, hidden: usize, layers: usize, width: usize) -> Vec<Conv1d> {
    (0..layers)
        .map(|i| {
            let dilation = 1 << i;
            let c = if i == 0 { c_in } else { hidden };
            Conv1d::new(&format!("{name}.{i}"), c, hidden, width, ConvSpec::causal(width, dilation), true)
        })
        .collect()
}

fn run_stack(g: &mut Graph, store: &ParamStore, convs: &[Conv1d], mut x: Var) -> Result<Var, AutodiffError> {
    for c in convs {
        x = c.forward(g, store, x)?;
        x = g.tanh(x)?;
    }
    Ok(x)
}

/// Predicted periodic parameters, each `T × N` (one row per frame).
#[derive(Clone, Copy, Debug)]
pub struct PredictedParams {
    pub amplitude: Var,
    pub frequency: Var,
    pub offset: Var,
    /// Phase shift in cycles.
    pub phase: Var,
}

/// Graph nodes of the mixture-of-experts enhancer.
#[derive(Clone, Debug)]
pub struct MoeForward {
    pub params: PredictedParams,
    /// `T × experts` gating weights; each row sums to one.
    pub weights: Var,
    pub expert_tracks: Vec<Var>,
    /// `T × N` blended periodic element track.
    pub element: Var,
    pub body_delta: Var,
    pub hand_delta: Var,
}

/// Graph nodes of one full pass.
#[derive(Clone, Debug)]
pub struct GeneratorForward {
    pub face: Var,
    pub fused: Var,
    /// Cascade outputs before the periodic element is added.
    pub body_base: Var,
    pub hand_base: Var,
    pub moe: Option<MoeForward>,
    pub body: Var,
    pub hand: Var,
}

/// Plain-value results of [`GeneratorModel::generate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub face: Matrix,
    pub body: Matrix,
    pub hand: Matrix,
    pub body_base: Matrix,
    pub hand_base: Matrix,
    /// `(A, F, B, S)` tracks, each `T × N`, when the enhancer is enabled.
    pub params: Option<[Matrix; 4]>,
    pub gate_weights: Option<Matrix>,
    pub element: Option<Matrix>,
}

/// Blends `T × N` expert tracks with `T × E` per-frame weights.
pub fn blend_experts(g: &mut Graph, weights: Var, experts: &[Var]) -> Result<Var, AutodiffError> {
    let e = g.value(weights).cols();
    if experts.len() != e || e == 0 {
        return Err(AutodiffError::Shape(format!("{} expert tracks for {e} weights", experts.len())));
    }
    let mut acc: Option<Var> = None;
    for (i, &track) in experts.iter().enumerate() {
        let w = g.slice_cols(weights, i, 1)?;
        let part = g.mul_col(track, w)?;
        acc = Some(match acc {
            Some(a) => g.add(a, part)?,
            None => part,
        });
    }
    Ok(acc.expect("at least one expert"))
}

struct Inputs {
    audio: Var,
    face: Option<Var>,
    text: Option<Var>,
    emotion: Var,
    identity: Var,
}

/// Face decoder, fusion net, body and hand decoders, and the periodic
/// enhancer, sharing one parameter store.
#[derive(Clone, Debug)]
pub struct GeneratorModel {
    config: HierConfig,
    store: ParamStore,
    face_in: Dense,
    face_mid: Dense,
    face_fwd: GruCell,
    face_bwd: Option<GruCell>,
    face_convs: Vec<Conv1d>,
    face_out: Dense,
    fuse_cell: GruCell,
    fuse_a: Dense,
    fuse_b: Dense,
    body_convs: Vec<Conv1d>,
    body_out: Dense,
    hand_convs: Vec<Conv1d>,
    hand_out: Dense,
    period_cell: GruCell,
    period_afb: Dense,
    period_sx: Dense,
    period_sy: Dense,
    gate: Mlp3,
    experts: Vec<Mlp3>,
    proj_body: Dense,
    proj_hand: Dense,
}

impl GeneratorModel {
    fn assemble(config: HierConfig, store: ParamStore) -> Self {
        let c = &config;
        let face_ctx = c.audio_dim + c.text_dim + c.emotion_dim + c.identity_dim;
        let fuse_in = face_ctx + FACE_DIM;
        let rec_out = if c.face_bidirectional { 2 } else { 1 } * c.face_recurrent;
        let n = c.latent_channels;
        Self {
            face_in: Dense::new("face.fc0", face_ctx, c.face_hidden, true),
            face_mid: Dense::new("face.fc1", c.face_hidden, c.face_hidden, true),
            face_fwd: GruCell::new("face.rnn_fwd", c.face_hidden, c.face_recurrent),
            face_bwd: c
                .face_bidirectional
                .then(|| GruCell::new("face.rnn_bwd", c.face_hidden, c.face_recurrent)),
            face_convs: causal_stack("face.tcn", rec_out, c.face_conv, 3, c.kernel_width),
            face_out: Dense::new("face.out", c.face_conv, FACE_DIM, true),
            fuse_cell: GruCell::new("fuse.rnn", fuse_in, c.fusion_recurrent),
            fuse_a: Dense::new("fuse.fc0", c.fusion_recurrent, c.fused_dim, true),
            fuse_b: Dense::new("fuse.fc1", c.fused_dim, c.fused_dim, true),
            body_convs: causal_stack("body.tcn", c.fused_dim, c.body_hidden, 2, c.kernel_width),
            body_out: Dense::new("body.out", c.body_hidden, BODY_DIM, true),
            hand_convs: causal_stack("hand.tcn", c.fused_dim + BODY_DIM, c.hand_hidden, 4, c.kernel_width),
            hand_out: Dense::new("hand.out", c.hand_hidden, HAND_DIM, true),
            period_cell: GruCell::new("period.rnn", c.fused_dim, c.period_recurrent),
            period_afb: Dense::new("period.afb", c.period_recurrent, 3 * n, true),
            period_sx: Dense::new("period.sx", c.period_recurrent, n, true),
            period_sy: Dense::new("period.sy", c.period_recurrent, n, true),
            gate: Mlp3::new("gate", 4 * n, c.gate_hidden, c.experts),
            experts: (0..c.experts)
                .map(|e| Mlp3::new(&format!("expert{e}"), c.fused_dim, c.expert_hidden, n))
                .collect(),
            proj_body: Dense::new("element.body", n, BODY_DIM, false),
            proj_hand: Dense::new("element.hand", n, HAND_DIM, false),
            config,
            store,
        }
    }

    fn layer_refs(&self) -> Vec<LayerRef<'_>> {
        let mut v = vec![
            LayerRef::Dense(&self.face_in),
            LayerRef::Dense(&self.face_mid),
            LayerRef::Gru(&self.face_fwd),
        ];
        if let Some(b) = &self.face_bwd {
            v.push(LayerRef::Gru(b));
        }
        v.extend(self.face_convs.iter().map(LayerRef::Conv));
        v.push(LayerRef::Dense(&self.face_out));
        v.push(LayerRef::Gru(&self.fuse_cell));
        v.push(LayerRef::Dense(&self.fuse_a));
        v.push(LayerRef::Dense(&self.fuse_b));
        v.extend(self.body_convs.iter().map(LayerRef::Conv));
        v.push(LayerRef::Dense(&self.body_out));
        v.extend(self.hand_convs.iter().map(LayerRef::Conv));
        v.push(LayerRef::Dense(&self.hand_out));
        v.push(LayerRef::Gru(&self.period_cell));
        v.push(LayerRef::Dense(&self.period_afb));
        v.push(LayerRef::Dense(&self.period_sx));
        v.push(LayerRef::Dense(&self.period_sy));
        v.extend(self.gate.0.iter().map(LayerRef::Dense));
        for e in &self.experts {
            v.extend(e.0.iter().map(LayerRef::Dense));
        }
        v.push(LayerRef::Dense(&self.proj_body));
        v.push(LayerRef::Dense(&self.proj_hand));
        v
    }

    /// Fresh model with seeded weights and zero biases.
    pub fn new(config: HierConfig) -> Result<Self, HierError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = Self::assemble(config, ParamStore::new());
        let mut store = ParamStore::new();
        for layer in model.layer_refs() {
            layer.init(&mut store, &mut rng)?;
        }
        model.store = store;
        Ok(model)
    }

    pub fn config(&self) -> &HierConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn inputs(&self, g: &mut Graph, cond: &ConditioningSet) -> Result<Inputs, HierError> {
        cond.validate(&self.config)?;
        let text = if self.config.text_dim == 0 {
            None
        } else {
            Some(g.constant((&cond.text_or_zeros(self.config.text_dim)).into()))
        };
        Ok(Inputs {
            audio: g.constant((&cond.audio).into()),
            face: cond.face.as_ref().map(|f| g.constant(f.into())),
            text,
            emotion: g.constant((&cond.emotion).into()),
            identity: g.constant((&cond.identity).into()),
        })
    }

    fn context(&self, g: &mut Graph, x: &Inputs, face: Option<Var>) -> Result<Var, AutodiffError> {
        let mut parts = vec![x.audio];
        parts.extend(face);
        parts.extend(x.text);
        parts.push(x.emotion);
        parts.push(x.identity);
        g.concat_cols(&parts)
    }

    fn face_graph(&self, g: &mut Graph, x: &Inputs) -> Result<Var, AutodiffError> {
        let s = &self.store;
        let ctx = self.context(g, x, None)?;
        let h = self.face_in.forward(g, s, ctx)?;
        let h = g.tanh(h)?;
        let h = self.face_mid.forward(g, s, h)?;
        let h = g.tanh(h)?;
        let fwd = self.face_fwd.sequence(g, s, h, None, false)?;
        let rec = match &self.face_bwd {
            Some(cell) => {
                let bwd = cell.sequence(g, s, h, None, true)?;
                g.concat_cols(&[fwd, bwd])?
            }
            None => fwd,
        };
        let h = run_stack(g, s, &self.face_convs, rec)?;
        self.face_out.forward(g, s, h)
    }

    fn fused_from_state(&self, g: &mut Graph, state: Var) -> Result<Var, AutodiffError> {
        let h = self.fuse_a.forward(g, &self.store, state)?;
        let h = g.tanh(h)?;
        self.fuse_b.forward(g, &self.store, h)
    }

    fn fuse_graph(&self, g: &mut Graph, x: &Inputs, face: Var) -> Result<Var, AutodiffError> {
        let ctx = self.context(g, x, Some(face))?;
        let states = self.fuse_cell.sequence(g, &self.store, ctx, None, false)?;
        self.fused_from_state(g, states)
    }

    /// `T × 27` body track from the fused features.
    pub fn body_graph(&self, g: &mut Graph, fused: Var) -> Result<Var, HierError> {
        self.check_fused(g, fused)?;
        let h = run_stack(g, &self.store, &self.body_convs, fused)?;
        Ok(self.body_out.forward(g, &self.store, h)?)
    }

    /// `T × 114` hand track from the fused features and the body track.
    pub fn hand_graph(&self, g: &mut Graph, fused: Var, body: Option<Var>) -> Result<Var, HierError> {
        let body = body.ok_or(HierError::MissingBody)?;
        self.check_fused(g, fused)?;
        if g.value(body).shape() != [g.value(fused).rows(), BODY_DIM] {
            return Err(HierError::Shape(format!("body track {:?}", g.value(body).shape())));
        }
        let x = g.concat_cols(&[fused, body])?;
        let h = run_stack(g, &self.store, &self.hand_convs, x)?;
        Ok(self.hand_out.forward(g, &self.store, h)?)
    }

    /// Periodic parameters, gating and blended element track, or `None` when
    /// the enhancer is disabled.
    pub fn moe_graph(&self, g: &mut Graph, fused: Var) -> Result<Option<MoeForward>, HierError> {
        if !self.config.moe_enabled {
            return Ok(None);
        }
        self.check_fused(g, fused)?;
        let s = &self.store;
        let n = self.config.latent_channels;
        let h = self.period_cell.sequence(g, s, fused, None, false)?;
        let afb = self.period_afb.forward(g, s, h)?;
        let amplitude = g.slice_cols(afb, 0, n)?;
        let frequency = g.slice_cols(afb, n, n)?;
        let offset = g.slice_cols(afb, 2 * n, n)?;
        let sx = self.period_sx.forward(g, s, h)?;
        let sy = self.period_sy.forward(g, s, h)?;
        let phase = g.phase_cycles(sx, sy)?;
        let gate_in = g.concat_cols(&[amplitude, frequency, offset, phase])?;
        let logits = self.gate.forward(g, s, gate_in)?;
        let logits = g.scale(logits, 1.0 / self.config.gate_temperature)?;
        let weights = g.softmax_rows(logits)?;
        let expert_tracks = self
            .experts
            .iter()
            .map(|e| e.forward(g, s, fused))
            .collect::<Result<Vec<_>, _>>()?;
        let element = blend_experts(g, weights, &expert_tracks)?;
        let body_delta = self.proj_body.forward(g, s, element)?;
        let hand_delta = self.proj_hand.forward(g, s, element)?;
        Ok(Some(MoeForward {
            params: PredictedParams {
                amplitude,
                frequency,
                offset,
                phase,
            },
            weights,
            expert_tracks,
            element,
            body_delta,
            hand_delta,
        }))
    }

    fn check_fused(&self, g: &Graph, fused: Var) -> Result<(), HierError> {
        let v = g.value(fused);
        if !v.is_matrix() || v.cols() != self.config.fused_dim {
            return Err(HierError::Shape(format!(
                "fused track {:?}, expected width {}",
                v.shape(),
                self.config.fused_dim
            )));
        }
        Ok(())
    }

    /// Full cascade. With `teacher_face` and a face track in `cond`, the
    /// fusion net sees the given face instead of the predicted one.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        cond: &ConditioningSet,
        teacher_face: bool,
    ) -> Result<GeneratorForward, HierError> {
        let x = self.inputs(g, cond)?;
        let face = self.face_graph(g, &x)?;
        let face_for_fusion = match (teacher_face, x.face) {
            (true, Some(f)) => f,
            _ => face,
        };
        let fused = self.fuse_graph(g, &x, face_for_fusion)?;
        let body_base = self.body_graph(g, fused)?;
        let hand_base = self.hand_graph(g, fused, Some(body_base))?;
        let moe = self.moe_graph(g, fused)?;
        let (body, hand) = match &moe {
            Some(m) => (g.add(body_base, m.body_delta)?, g.add(hand_base, m.hand_delta)?),
            None => (body_base, hand_base),
        };
        Ok(GeneratorForward {
            face,
            fused,
            body_base,
            hand_base,
            moe,
            body,
            hand,
        })
    }

    /// `T × 52` blendshape track.
    pub fn face_decode(&self, cond: &ConditioningSet) -> Result<Matrix, HierError> {
        let mut g = Graph::new();
        let x = self.inputs(&mut g, cond)?;
        let f = self.face_graph(&mut g, &x)?;
        Ok(g.value(f).to_matrix())
    }

    /// `T × fused_dim` fused track, using `face` as the face modality.
    pub fn fuse(&self, cond: &ConditioningSet, face: &Matrix) -> Result<Matrix, HierError> {
        let mut g = Graph::new();
        let x = self.inputs(&mut g, cond)?;
        check_face(face, cond.frames())?;
        let f = g.constant(face.into());
        let fused = self.fuse_graph(&mut g, &x, f)?;
        Ok(g.value(fused).to_matrix())
    }

    /// One fusion step at frame `t` from the previous recurrent state (zero
    /// when `None`). Returns the fused features and the new state.
    pub fn fuse_step(
        &self,
        cond: &ConditioningSet,
        face: &Matrix,
        t: usize,
        state: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>), HierError> {
        if t >= cond.frames() {
            return Err(HierError::Shape(format!("frame {t} of {}", cond.frames())));
        }
        check_face(face, cond.frames())?;
        let dim = self.config.fusion_recurrent;
        let mut g = Graph::new();
        let x = self.inputs(&mut g, cond)?;
        let f = g.constant(face.into());
        let ctx = self.context(&mut g, &x, Some(f))?;
        let row = g.slice_rows(ctx, t, 1)?;
        let h = match state {
            Some(s) if s.len() == dim => g.constant(crate::autodiff::Tensor::matrix(1, dim, s.to_vec())?),
            Some(s) => return Err(HierError::Shape(format!("state of {} values, expected {dim}", s.len()))),
            None => g.constant(crate::autodiff::Tensor::zeros(&[1, dim])),
        };
        let h = self.fuse_cell.step(&mut g, &self.store, row, h)?;
        let out = self.fused_from_state(&mut g, h)?;
        Ok((g.value(out).data().to_vec(), g.value(h).data().to_vec()))
    }

    pub fn body_decode(&self, fused: &Matrix) -> Result<Matrix, HierError> {
        let mut g = Graph::new();
        let f = g.constant(fused.into());
        let b = self.body_graph(&mut g, f)?;
        Ok(g.value(b).to_matrix())
    }

    pub fn hand_decode(&self, fused: &Matrix, body: Option<&Matrix>) -> Result<Matrix, HierError> {
        let mut g = Graph::new();
        let f = g.constant(fused.into());
        let b = body.map(|b| g.constant(b.into()));
        let h = self.hand_graph(&mut g, f, b)?;
        Ok(g.value(h).to_matrix())
    }

    /// `(A, F, B, S)` tracks, gating weights and element track.
    pub fn moe_enhance(&self, fused: &Matrix) -> Result<Option<([Matrix; 4], Matrix, Matrix)>, HierError> {
        let mut g = Graph::new();
        let f = g.constant(fused.into());
        Ok(self.moe_graph(&mut g, f)?.map(|m| {
            let p = m.params;
            (
                [p.amplitude, p.frequency, p.offset, p.phase].map(|v| g.value(v).to_matrix()),
                g.value(m.weights).to_matrix(),
                g.value(m.element).to_matrix(),
            )
        }))
    }

    /// Inference cascade: face, fusion on the predicted face, body, hand,
    /// enhancer, then the additive combination. Any face track in `cond`
    /// is ignored.
    pub fn generate(&self, cond: &ConditioningSet) -> Result<Generated, HierError> {
        let mut g = Graph::new();
        let f = self.forward_graph(&mut g, &cond.without_face(), false)?;
        let m = |v: Var| g.value(v).to_matrix();
        Ok(Generated {
            face: m(f.face),
            body: m(f.body),
            hand: m(f.hand),
            body_base: m(f.body_base),
            hand_base: m(f.hand_base),
            params: f.moe.as_ref().map(|x| {
                let p = x.params;
                [p.amplitude, p.frequency, p.offset, p.phase].map(m)
            }),
            gate_weights: f.moe.as_ref().map(|x| m(x.weights)),
            element: f.moe.as_ref().map(|x| m(x.element)),
        })
    }

    pub fn save(&self) -> Vec<u8> {
        let mut meta: BTreeMap<String, String> = self.config.to_pairs();
        meta.insert("model".into(), "generator".into());
        write_checkpoint(&self.store, &meta)
    }

    pub fn load(bytes: &[u8]) -> Result<Self, HierError> {
        let (store, meta) = read_checkpoint(bytes)?;
        if meta.get("model").map(String::as_str) != Some("generator") {
            return Err(HierError::Config("checkpoint does not hold a gesture generator".into()));
        }
        let config = HierConfig::from_pairs(&meta)?;
        let model = Self::assemble(config, store);
        for layer in model.layer_refs() {
            layer.check(&model.store)?;
        }
        Ok(model)
    }
}

fn check_face(face: &Matrix, frames: usize) -> Result<(), HierError> {
    if face.rows() != frames || face.cols() != FACE_DIM {
        return Err(HierError::Shape(format!(
            "face track is {}×{}, expected {frames}×{FACE_DIM}",
            face.rows(),
            face.cols()
        )));
    }
    Ok(())
}
