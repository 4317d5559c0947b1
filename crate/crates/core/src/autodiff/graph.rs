use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::{AutodiffError, ParamStore, Tensor};
use crate::spectrum::{circular_distance, dft_real, is_degenerate_power, power_spectrum, wrap_unit};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Stride, padding and dilation of a 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub dilation: usize,
}

impl ConvSpec {
    pub fn valid() -> Self {
        Self {
            stride: 1,
            pad_left: 0,
            pad_right: 0,
            dilation: 1,
        }
    }

    /// Symmetric padding of `padding` frames on each side.
    pub fn padded(padding: usize) -> Self {
        Self {
            pad_left: padding,
            pad_right: padding,
            ..Self::valid()
        }
    }

    /// Output length equals input length (odd widths).
    pub fn same(width: usize, dilation: usize) -> Self {
        let half = dilation * (width - 1) / 2;
        Self {
            stride: 1,
            pad_left: half,
            pad_right: dilation * (width - 1) - half,
            dilation,
        }
    }

    /// Output frame `t` only sees input frames `<= t`.
    pub fn causal(width: usize, dilation: usize) -> Self {
        Self {
            stride: 1,
            pad_left: dilation * (width - 1),
            pad_right: 0,
            dilation,
        }
    }

    pub fn output_len(&self, input_len: usize, width: usize) -> Option<usize> {
        if width == 0 || self.stride == 0 || self.dilation == 0 {
            return None;
        }
        let span = self.dilation * (width - 1) + 1;
        let padded = input_len + self.pad_left + self.pad_right;
        (span <= padded).then(|| (padded - span) / self.stride + 1)
    }
}

#[derive(Clone, Copy, Debug)]
struct ChannelSpectrum {
    total: f64,
    amplitude: f64,
    frequency: f64,
    degenerate: bool,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddBias(Var, Var),
    Dense {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Tanh(Var),
    Sigmoid(Var),
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
        // Kernel reordered to width × out × in.
        wt: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatRows(Vec<Var>),
    SliceRows {
        x: Var,
        start: usize,
    },
    Transpose(Var),
    RowSums(Var),
    MulCol(Var, Var),
    InstanceNorm {
        x: Var,
        inv_std: Vec<f64>,
    },
    SoftmaxRows(Var),
    FftParams {
        y: Var,
        coeffs: Vec<Complex64>,
        stats: Vec<ChannelSpectrum>,
    },
    PhaseCycles(Var, Var),
    PeriodicRecon {
        params: Var,
        phase: Var,
    },
    CircularDiff(Var, Var),
    L1(Var, Var),
    Mse(Var, Var),
    VelocityL1 {
        a: Var,
        b: Var,
        dt: f64,
    },
    SumAll(Var),
    MeanAll(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only tape of tensor operations.
///
/// Nodes are stored in creation order, which is a topological order, so
/// [`Graph::backward`] walks the tape once in reverse.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
    params: HashMap<usize, Var>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn shape_err(msg: String) -> AutodiffError {
    AutodiffError::Shape(msg)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`Graph::backward`] target with respect to `v`.
    /// `None` when `v` does not require gradients or was not reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads
            .get(v.0)
            .filter(|g| !g.is_empty())
            .map(Vec::as_slice)
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var], name: &str) -> Result<Var, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite(format!("output of {name}")));
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that receives a gradient.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Input that is treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Leaf holding the current value of a stored parameter. Repeated calls
    /// with the same name return the same node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var, AutodiffError> {
        let idx = store
            .index_of(name)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))?;
        if let Some(&v) = self.params.get(&idx) {
            return Ok(v);
        }
        let v = self.leaf(store.value_at(idx).clone(), true);
        self.params.insert(idx, v);
        Ok(v)
    }

    /// Parameter slots loaded into this graph with their nodes.
    pub fn param_nodes(&self) -> impl Iterator<Item = (usize, Var)> + '_ {
        self.params.iter().map(|(&i, &v)| (i, v))
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err(format!("{op}: shapes {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    fn matrix_dims(&self, v: Var, op: &str) -> Result<(usize, usize), AutodiffError> {
        let t = self.value(v);
        if !t.is_matrix() {
            return Err(shape_err(format!("{op}: expected a 2-D tensor, got {:?}", t.shape())));
        }
        Ok((t.rows(), t.cols()))
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect()).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "add")?;
        let v = self.zip_map(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b), &[a, b], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "sub")?;
        let v = self.zip_map(a, b, |x, y| x - y);
        self.push(v, Op::Sub(a, b), &[a, b], "sub")
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "mul")?;
        let v = self.zip_map(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b), &[a, b], "mul")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, AutodiffError> {
        let v = self.map(a, |x| x * s);
        self.push(v, Op::Scale(a, s), &[a], "scale")
    }

    /// Adds a per-column bias to every row.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, AutodiffError> {
        let (_, cols) = self.matrix_dims(x, "add_bias")?;
        let b = self.value(bias);
        if b.len() != cols {
            return Err(shape_err(format!("add_bias: {} biases for {cols} columns", b.len())));
        }
        let bd = b.data().to_vec();
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(cols) {
            axpy(row, 1.0, &bd);
        }
        self.push(out, Op::AddBias(x, bias), &[x, bias], "add_bias")
    }

    /// `x Wᵀ + b` row by row, with `W` of shape `out × in`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, AutodiffError> {
        let (rows, n_in) = self.matrix_dims(x, "dense")?;
        let (n_out, w_in) = self.matrix_dims(w, "dense weights")?;
        if w_in != n_in {
            return Err(shape_err(format!("dense: weights {n_out}×{w_in} for input width {n_in}")));
        }
        if let Some(b) = b {
            if self.value(b).len() != n_out {
                return Err(shape_err(format!(
                    "dense: {} biases for {n_out} outputs",
                    self.value(b).len()
                )));
            }
        }
        let (xv, wv) = (self.value(x), self.value(w));
        let mut out = vec![0.0; rows * n_out];
        for r in 0..rows {
            let xr = xv.row(r);
            for o in 0..n_out {
                out[r * n_out + o] = dot(xr, wv.row(o));
            }
        }
        if let Some(b) = b {
            let bd = self.value(b).data();
            for row in out.chunks_mut(n_out) {
                axpy(row, 1.0, bd);
            }
        }
        let value = Tensor::matrix(rows, n_out, out)?;
        let parents: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        self.push(value, Op::Dense { x, w, b }, &parents, "dense")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a), &[a], "tanh")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.map(a, |x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a), &[a], "sigmoid")
    }

    /// Cross-correlation of a `T × Cin` sequence with `Cout × Cin × W`
    /// kernels, giving `T' × Cout`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var, AutodiffError> {
        let (t_in, c_in) = self.matrix_dims(x, "conv1d")?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 3 || ws[1] != c_in {
            return Err(shape_err(format!(
                "conv1d: kernels {ws:?} do not match {c_in} input channels"
            )));
        }
        let (c_out, width) = (ws[0], ws[2]);
        if let Some(b) = b {
            if self.value(b).len() != c_out {
                return Err(shape_err(format!("conv1d: {} biases for {c_out} outputs", self.value(b).len())));
            }
        }
        let t_out = spec.output_len(t_in, width).ok_or_else(|| {
            shape_err(format!("conv1d: kernel width {width} exceeds padded length of {t_in} frames"))
        })?;
        let wd = self.value(w).data();
        let mut wt = vec![0.0; wd.len()];
        for co in 0..c_out {
            for ci in 0..c_in {
                for k in 0..width {
                    wt[(k * c_out + co) * c_in + ci] = wd[(co * c_in + ci) * width + k];
                }
            }
        }
        let xv = self.value(x);
        let mut out = vec![0.0; t_out * c_out];
        for t in 0..t_out {
            let orow = &mut out[t * c_out..(t + 1) * c_out];
            for k in 0..width {
                let r = (t * spec.stride + k * spec.dilation) as isize - spec.pad_left as isize;
                if r < 0 || r as usize >= t_in {
                    continue;
                }
                let xr = xv.row(r as usize);
                let wk = &wt[k * c_out * c_in..(k + 1) * c_out * c_in];
                for (co, o) in orow.iter_mut().enumerate() {
                    *o += dot(&wk[co * c_in..(co + 1) * c_in], xr);
                }
            }
        }
        if let Some(b) = b {
            let bd = self.value(b).data();
            for row in out.chunks_mut(c_out) {
                axpy(row, 1.0, bd);
            }
        }
        let value = Tensor::matrix(t_out, c_out, out)?;
        let parents: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        self.push(value, Op::Conv1d { x, w, b, spec, wt }, &parents, "conv1d")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = *parts.first().ok_or_else(|| shape_err("concat_cols: no inputs".into()))?;
        let (rows, _) = self.matrix_dims(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.matrix_dims(p, "concat_cols")?;
            if r != rows {
                return Err(shape_err(format!("concat_cols: {r} rows, expected {rows}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::matrix(rows, total, out)?;
        self.push(value, Op::ConcatCols(parts.to_vec()), parts, "concat_cols")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let (rows, cols) = self.matrix_dims(x, "slice_cols")?;
        if start + len > cols {
            return Err(shape_err(format!("slice_cols: {start}+{len} exceeds {cols} columns")));
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        let value = Tensor::matrix(rows, len, out)?;
        self.push(value, Op::SliceCols { x, start }, &[x], "slice_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = *parts.first().ok_or_else(|| shape_err("concat_rows: no inputs".into()))?;
        let (_, cols) = self.matrix_dims(first, "concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.matrix_dims(p, "concat_rows")?;
            if c != cols {
                return Err(shape_err(format!("concat_rows: {c} columns, expected {cols}")));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let value = Tensor::matrix(rows, cols, out)?;
        self.push(value, Op::ConcatRows(parts.to_vec()), parts, "concat_rows")
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let (rows, cols) = self.matrix_dims(x, "slice_rows")?;
        if start + len > rows {
            return Err(shape_err(format!("slice_rows: {start}+{len} exceeds {rows} rows")));
        }
        let data = self.value(x).data()[start * cols..(start + len) * cols].to_vec();
        let value = Tensor::matrix(len, cols, data)?;
        self.push(value, Op::SliceRows { x, start }, &[x], "slice_rows")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let (rows, cols) = self.matrix_dims(x, "transpose")?;
        let xv = self.value(x);
        let value = Tensor::from_fn(cols, rows, |r, c| xv.get(c, r));
        self.push(value, Op::Transpose(x), &[x], "transpose")
    }

    /// Sum over columns, giving `rows × 1`.
    pub fn row_sums(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let (rows, _) = self.matrix_dims(x, "row_sums")?;
        let xv = self.value(x);
        let data = (0..rows).map(|r| xv.row(r).iter().sum()).collect();
        let value = Tensor::matrix(rows, 1, data)?;
        self.push(value, Op::RowSums(x), &[x], "row_sums")
    }

    /// Scales row `r` of `x` by `w[r]`, where `w` is `rows × 1`.
    pub fn mul_col(&mut self, x: Var, w: Var) -> Result<Var, AutodiffError> {
        let (rows, cols) = self.matrix_dims(x, "mul_col")?;
        let ws = self.value(w).shape();
        if ws != [rows, 1] {
            return Err(shape_err(format!("mul_col: weights {ws:?} for {rows} rows")));
        }
        let (xv, wv) = (self.value(x), self.value(w));
        let value = Tensor::from_fn(rows, cols, |r, c| xv.get(r, c) * wv.data()[r]);
        self.push(value, Op::MulCol(x, w), &[x, w], "mul_col")
    }

    /// Normalizes each column to zero mean and unit variance over the rows.
    pub fn instance_norm(&mut self, x: Var, eps: f64) -> Result<Var, AutodiffError> {
        let (rows, cols) = self.matrix_dims(x, "instance_norm")?;
        let xv = self.value(x);
        let n = rows as f64;
        let mut out = xv.clone();
        let mut inv_std = vec![0.0; cols];
        for c in 0..cols {
            let mean = (0..rows).map(|r| xv.get(r, c)).sum::<f64>() / n;
            let var = (0..rows).map(|r| (xv.get(r, c) - mean).powi(2)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[c] = is;
            for r in 0..rows {
                out.data_mut()[r * cols + c] = (xv.get(r, c) - mean) * is;
            }
        }
        self.push(out, Op::InstanceNorm { x, inv_std }, &[x], "instance_norm")
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let (_, cols) = self.matrix_dims(x, "softmax_rows")?;
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(cols) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        self.push(out, Op::SoftmaxRows(x), &[x], "softmax_rows")
    }

    /// Per-channel amplitude, frequency and offset of a `T × N` latent,
    /// returned as `N × 3` rows `(A, F, B)`.
    ///
    /// `A = sqrt(2/T Σ P_j)`, `F = Σ (j/T) P_j / Σ P_j` and `B = Q_0 / T` with
    /// `P_j = 2/T |Q_j|²` over bins `1..=T/2`. A channel without oscillating
    /// power gets `F = 0` and no frequency gradient.
    pub fn fft_params(&mut self, y: Var) -> Result<Var, AutodiffError> {
        let (t, n) = self.matrix_dims(y, "fft_params")?;
        if t < 2 || t % 2 != 0 {
            return Err(shape_err(format!("fft_params: window length {t} must be even")));
        }
        let yv = self.value(y);
        let k = t / 2;
        let tf = t as f64;
        let mut coeffs = Vec::with_capacity(n * (k + 1));
        let mut stats = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n * 3);
        for i in 0..n {
            let col: Vec<f64> = (0..t).map(|r| yv.get(r, i)).collect();
            let frame = dft_real(&col).map_err(|e| shape_err(e.to_string()))?;
            let power = power_spectrum(&frame);
            let total = power.total();
            let energy: f64 = col.iter().map(|v| v * v).sum();
            let amplitude = (2.0 / tf * total).sqrt();
            let degenerate = is_degenerate_power(total, energy);
            let frequency = if degenerate {
                0.0
            } else {
                power
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (j + 1) as f64 / tf * p)
                    .sum::<f64>()
                    / total
            };
            out.extend_from_slice(&[amplitude, frequency, power.dc]);
            coeffs.extend_from_slice(frame.coeffs());
            stats.push(ChannelSpectrum {
                total,
                amplitude,
                frequency,
                degenerate,
            });
        }
        let value = Tensor::matrix(n, 3, out)?;
        self.push(value, Op::FftParams { y, coeffs, stats }, &[y], "fft_params")
    }

    /// Phase in cycles, `atan2(sy, sx) / 2π` wrapped into `[0, 1)`.
    pub fn phase_cycles(&mut self, sx: Var, sy: Var) -> Result<Var, AutodiffError> {
        self.same_shape(sx, sy, "phase_cycles")?;
        let v = self.zip_map(sx, sy, |x, y| wrap_unit(y.atan2(x) / (2.0 * PI)));
        self.push(v, Op::PhaseCycles(sx, sy), &[sx, sy], "phase_cycles")
    }

    /// `len × N` sinusoids `A sin(2π (F t - S)) + B` from `N × 3` rows
    /// `(A, F, B)` and an `N × 1` phase column `S`.
    pub fn periodic_recon(&mut self, params: Var, phase: Var, len: usize) -> Result<Var, AutodiffError> {
        let (n, three) = self.matrix_dims(params, "periodic_recon")?;
        if three != 3 || self.value(phase).shape() != [n, 1] {
            return Err(shape_err(format!(
                "periodic_recon: params {:?} and phase {:?}",
                self.value(params).shape(),
                self.value(phase).shape()
            )));
        }
        let (pv, sv) = (self.value(params), self.value(phase));
        let value = Tensor::from_fn(len, n, |t, i| {
            let (a, f, b) = (pv.get(i, 0), pv.get(i, 1), pv.get(i, 2));
            a * (2.0 * PI * (f * t as f64 - sv.data()[i])).sin() + b
        });
        self.push(value, Op::PeriodicRecon { params, phase }, &[params, phase], "periodic_recon")
    }

    /// Signed wrapped difference `a - b` in cycles, in `[-0.5, 0.5]`.
    pub fn circular_diff(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "circular_diff")?;
        let v = self.zip_map(a, b, circular_distance);
        self.push(v, Op::CircularDiff(a, b), &[a, b], "circular_diff")
    }

    /// Mean absolute difference.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "l1")?;
        let (ta, tb) = (self.value(a), self.value(b));
        let s: f64 = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y).abs()).sum();
        let v = Tensor::scalar(s / ta.len() as f64);
        self.push(v, Op::L1(a, b), &[a, b], "l1")
    }

    /// Mean squared difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "mse")?;
        let (ta, tb) = (self.value(a), self.value(b));
        let s: f64 = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y).powi(2)).sum();
        let v = Tensor::scalar(s / ta.len() as f64);
        self.push(v, Op::Mse(a, b), &[a, b], "mse")
    }

    /// Mean absolute frame-to-frame change of `a - b`, divided by `dt`.
    pub fn velocity_l1(&mut self, a: Var, b: Var, dt: f64) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "velocity_l1")?;
        let (rows, cols) = self.matrix_dims(a, "velocity_l1")?;
        if rows < 2 {
            return Err(shape_err(format!("velocity_l1: need at least 2 frames, got {rows}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(shape_err(format!("velocity_l1: invalid time step {dt}")));
        }
        let (ta, tb) = (self.value(a), self.value(b));
        let mut s = 0.0;
        for t in 0..rows - 1 {
            for c in 0..cols {
                let d1 = ta.get(t + 1, c) - tb.get(t + 1, c);
                let d0 = ta.get(t, c) - tb.get(t, c);
                s += ((d1 - d0) / dt).abs();
            }
        }
        let v = Tensor::scalar(s / ((rows - 1) * cols) as f64);
        self.push(v, Op::VelocityL1 { a, b, dt }, &[a, b], "velocity_l1")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::SumAll(a), &[a], "sum_all")
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let v = Tensor::scalar(t.data().iter().sum::<f64>() / t.len().max(1) as f64);
        self.push(v, Op::MeanAll(a), &[a], "mean_all")
    }

    /// Reverse pass from a scalar node. Gradients replace those of any
    /// earlier call.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NotScalar(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        grads[loss.0] = vec![1.0];
        for i in (0..=loss.0).rev() {
            if grads[i].is_empty() || !self.nodes[i].requires_grad {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            self.backprop(i, &g, &mut grads);
            grads[i] = g;
        }
        for (i, g) in grads.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(AutodiffError::NonFinite(format!("gradient of node {i}")));
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn slot<'a>(&self, grads: &'a mut [Vec<f64>], v: Var) -> Option<&'a mut [f64]> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        let g = &mut grads[v.0];
        if g.is_empty() {
            g.resize(node.value.len(), 0.0);
        }
        Some(g.as_mut_slice())
    }

    fn backprop(&self, i: usize, g: &[f64], grads: &mut [Vec<f64>]) {
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::Add(a, b) => {
                if let Some(ga) = self.slot(grads, a) {
                    axpy(ga, 1.0, g);
                }
                if let Some(gb) = self.slot(grads, b) {
                    axpy(gb, 1.0, g);
                }
            }
            &Op::Sub(a, b) => {
                if let Some(ga) = self.slot(grads, a) {
                    axpy(ga, 1.0, g);
                }
                if let Some(gb) = self.slot(grads, b) {
                    axpy(gb, -1.0, g);
                }
            }
            &Op::Mul(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                if let Some(ga) = self.slot(grads, a) {
                    for ((o, gi), y) in ga.iter_mut().zip(g).zip(vb) {
                        *o += gi * y;
                    }
                }
                if let Some(gb) = self.slot(grads, b) {
                    for ((o, gi), x) in gb.iter_mut().zip(g).zip(va) {
                        *o += gi * x;
                    }
                }
            }
            &Op::Scale(a, s) => {
                if let Some(ga) = self.slot(grads, a) {
                    axpy(ga, s, g);
                }
            }
            &Op::AddBias(x, b) => {
                let cols = out.cols();
                if let Some(gx) = self.slot(grads, x) {
                    axpy(gx, 1.0, g);
                }
                if let Some(gb) = self.slot(grads, b) {
                    for row in g.chunks(cols) {
                        axpy(gb, 1.0, row);
                    }
                }
            }
            &Op::Dense { x, w, b } => {
                let (xv, wv) = (self.value(x), self.value(w));
                let (rows, n_in, n_out) = (xv.rows(), xv.cols(), wv.rows());
                if let Some(gx) = self.slot(grads, x) {
                    for r in 0..rows {
                        let gxr = &mut gx[r * n_in..(r + 1) * n_in];
                        for o in 0..n_out {
                            let go = g[r * n_out + o];
                            if go != 0.0 {
                                axpy(gxr, go, wv.row(o));
                            }
                        }
                    }
                }
                if let Some(gw) = self.slot(grads, w) {
                    for r in 0..rows {
                        let xr = xv.row(r);
                        for o in 0..n_out {
                            let go = g[r * n_out + o];
                            if go != 0.0 {
                                axpy(&mut gw[o * n_in..(o + 1) * n_in], go, xr);
                            }
                        }
                    }
                }
                if let Some(b) = b {
                    if let Some(gb) = self.slot(grads, b) {
                        for row in g.chunks(n_out) {
                            axpy(gb, 1.0, row);
                        }
                    }
                }
            }
            &Op::Tanh(a) => {
                if let Some(ga) = self.slot(grads, a) {
                    for ((o, gi), y) in ga.iter_mut().zip(g).zip(out.data()) {
                        *o += gi * (1.0 - y * y);
                    }
                }
            }
            &Op::Sigmoid(a) => {
                if let Some(ga) = self.slot(grads, a) {
                    for ((o, gi), y) in ga.iter_mut().zip(g).zip(out.data()) {
                        *o += gi * y * (1.0 - y);
                    }
                }
            }
            Op::Conv1d { x, w, b, spec, wt } => self.conv1d_backward(*x, *w, *b, spec, wt, out, g, grads),
            Op::ConcatCols(parts) => {
                let (rows, total) = (out.rows(), out.cols());
                let mut off = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    if let Some(gp) = self.slot(grads, p) {
                        for r in 0..rows {
                            axpy(&mut gp[r * c..(r + 1) * c], 1.0, &g[r * total + off..r * total + off + c]);
                        }
                    }
                    off += c;
                }
            }
            &Op::SliceCols { x, start } => {
                let (rows, len) = (out.rows(), out.cols());
                let cols = self.value(x).cols();
                if let Some(gx) = self.slot(grads, x) {
                    for r in 0..rows {
                        axpy(&mut gx[r * cols + start..r * cols + start + len], 1.0, &g[r * len..(r + 1) * len]);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if let Some(gp) = self.slot(grads, p) {
                        axpy(gp, 1.0, &g[off..off + n]);
                    }
                    off += n;
                }
            }
            &Op::SliceRows { x, start } => {
                let cols = out.cols();
                if let Some(gx) = self.slot(grads, x) {
                    axpy(&mut gx[start * cols..start * cols + g.len()], 1.0, g);
                }
            }
            &Op::Transpose(x) => {
                let (rows, cols) = (out.rows(), out.cols());
                if let Some(gx) = self.slot(grads, x) {
                    for r in 0..rows {
                        for c in 0..cols {
                            gx[c * rows + r] += g[r * cols + c];
                        }
                    }
                }
            }
            &Op::RowSums(x) => {
                let cols = self.value(x).cols();
                if let Some(gx) = self.slot(grads, x) {
                    for (row, gi) in gx.chunks_mut(cols).zip(g) {
                        for v in row {
                            *v += gi;
                        }
                    }
                }
            }
            &Op::MulCol(x, w) => {
                let (xv, wv) = (self.value(x), self.value(w));
                let cols = xv.cols();
                if let Some(gx) = self.slot(grads, x) {
                    for (r, row) in gx.chunks_mut(cols).enumerate() {
                        axpy(row, wv.data()[r], &g[r * cols..(r + 1) * cols]);
                    }
                }
                if let Some(gw) = self.slot(grads, w) {
                    for (r, o) in gw.iter_mut().enumerate() {
                        *o += dot(&g[r * cols..(r + 1) * cols], xv.row(r));
                    }
                }
            }
            Op::InstanceNorm { x, inv_std } => {
                let (rows, cols) = (out.rows(), out.cols());
                let n = rows as f64;
                if let Some(gx) = self.slot(grads, *x) {
                    for c in 0..cols {
                        let mut mg = 0.0;
                        let mut mgx = 0.0;
                        for r in 0..rows {
                            mg += g[r * cols + c];
                            mgx += g[r * cols + c] * out.get(r, c);
                        }
                        mg /= n;
                        mgx /= n;
                        for r in 0..rows {
                            gx[r * cols + c] += inv_std[c] * (g[r * cols + c] - mg - out.get(r, c) * mgx);
                        }
                    }
                }
            }
            &Op::SoftmaxRows(x) => {
                let cols = out.cols();
                if let Some(gx) = self.slot(grads, x) {
                    for (r, row) in gx.chunks_mut(cols).enumerate() {
                        let y = out.row(r);
                        let gr = &g[r * cols..(r + 1) * cols];
                        let s = dot(gr, y);
                        for c in 0..cols {
                            row[c] += y[c] * (gr[c] - s);
                        }
                    }
                }
            }
            Op::FftParams { y, coeffs, stats } => self.fft_params_backward(*y, coeffs, stats, g, grads),
            &Op::PhaseCycles(sx, sy) => {
                let (xv, yv) = (self.value(sx).data(), self.value(sy).data());
                let tau = 2.0 * PI;
                let partial = |i: usize| {
                    let r2 = xv[i] * xv[i] + yv[i] * yv[i];
                    if r2 == 0.0 {
                        (0.0, 0.0)
                    } else {
                        (-yv[i] / r2 / tau, xv[i] / r2 / tau)
                    }
                };
                if let Some(gx) = self.slot(grads, sx) {
                    for (i, o) in gx.iter_mut().enumerate() {
                        *o += g[i] * partial(i).0;
                    }
                }
                if let Some(gy) = self.slot(grads, sy) {
                    for (i, o) in gy.iter_mut().enumerate() {
                        *o += g[i] * partial(i).1;
                    }
                }
            }
            &Op::PeriodicRecon { params, phase } => {
                let (pv, sv) = (self.value(params), self.value(phase));
                let (len, n) = (out.rows(), out.cols());
                let mut gp = vec![0.0; n * 3];
                let mut gs = vec![0.0; n];
                for t in 0..len {
                    for i in 0..n {
                        let gi = g[t * n + i];
                        let (a, f) = (pv.get(i, 0), pv.get(i, 1));
                        let theta = 2.0 * PI * (f * t as f64 - sv.data()[i]);
                        let (s, c) = theta.sin_cos();
                        gp[i * 3] += gi * s;
                        gp[i * 3 + 1] += gi * a * c * 2.0 * PI * t as f64;
                        gp[i * 3 + 2] += gi;
                        gs[i] -= gi * a * c * 2.0 * PI;
                    }
                }
                if let Some(o) = self.slot(grads, params) {
                    axpy(o, 1.0, &gp);
                }
                if let Some(o) = self.slot(grads, phase) {
                    axpy(o, 1.0, &gs);
                }
            }
            &Op::CircularDiff(a, b) => {
                if let Some(ga) = self.slot(grads, a) {
                    axpy(ga, 1.0, g);
                }
                if let Some(gb) = self.slot(grads, b) {
                    axpy(gb, -1.0, g);
                }
            }
            &Op::L1(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                let k = g[0] / va.len() as f64;
                let d: Vec<f64> = va.iter().zip(vb).map(|(x, y)| k * sign(x - y)).collect();
                if let Some(ga) = self.slot(grads, a) {
                    axpy(ga, 1.0, &d);
                }
                if let Some(gb) = self.slot(grads, b) {
                    axpy(gb, -1.0, &d);
                }
            }
            &Op::Mse(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                let k = 2.0 * g[0] / va.len() as f64;
                let d: Vec<f64> = va.iter().zip(vb).map(|(x, y)| k * (x - y)).collect();
                if let Some(ga) = self.slot(grads, a) {
                    axpy(ga, 1.0, &d);
                }
                if let Some(gb) = self.slot(grads, b) {
                    axpy(gb, -1.0, &d);
                }
            }
            &Op::VelocityL1 { a, b, dt } => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (rows, cols) = (ta.rows(), ta.cols());
                let k = g[0] / (dt * ((rows - 1) * cols) as f64);
                let mut d = vec![0.0; rows * cols];
                for t in 0..rows - 1 {
                    for c in 0..cols {
                        let e1 = ta.get(t + 1, c) - tb.get(t + 1, c);
                        let e0 = ta.get(t, c) - tb.get(t, c);
                        let s = k * sign(e1 - e0);
                        d[(t + 1) * cols + c] += s;
                        d[t * cols + c] -= s;
                    }
                }
                if let Some(ga) = self.slot(grads, a) {
                    axpy(ga, 1.0, &d);
                }
                if let Some(gb) = self.slot(grads, b) {
                    axpy(gb, -1.0, &d);
                }
            }
            &Op::SumAll(a) => {
                if let Some(ga) = self.slot(grads, a) {
                    for o in ga {
                        *o += g[0];
                    }
                }
            }
            &Op::MeanAll(a) => {
                let n = self.value(a).len() as f64;
                if let Some(ga) = self.slot(grads, a) {
                    for o in ga {
                        *o += g[0] / n;
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn conv1d_backward(
        &self,
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: &ConvSpec,
        wt: &[f64],
        out: &Tensor,
        g: &[f64],
        grads: &mut [Vec<f64>],
    ) {
        let xv = self.value(x);
        let (t_in, c_in) = (xv.rows(), xv.cols());
        let ws = self.value(w).shape();
        let (c_out, width) = (ws[0], ws[2]);
        let t_out = out.rows();
        let src = |t: usize, k: usize| {
            let r = (t * spec.stride + k * spec.dilation) as isize - spec.pad_left as isize;
            (r >= 0 && (r as usize) < t_in).then_some(r as usize)
        };
        if let Some(gx) = self.slot(grads, x) {
            for t in 0..t_out {
                for k in 0..width {
                    let Some(r) = src(t, k) else { continue };
                    let gxr = &mut gx[r * c_in..(r + 1) * c_in];
                    for co in 0..c_out {
                        let go = g[t * c_out + co];
                        if go != 0.0 {
                            let base = (k * c_out + co) * c_in;
                            axpy(gxr, go, &wt[base..base + c_in]);
                        }
                    }
                }
            }
        }
        if self.nodes[w.0].requires_grad {
            let mut gwt = vec![0.0; wt.len()];
            for t in 0..t_out {
                for k in 0..width {
                    let Some(r) = src(t, k) else { continue };
                    let xr = xv.row(r);
                    for co in 0..c_out {
                        let go = g[t * c_out + co];
                        if go != 0.0 {
                            let base = (k * c_out + co) * c_in;
                            axpy(&mut gwt[base..base + c_in], go, xr);
                        }
                    }
                }
            }
            let gw = self.slot(grads, w).expect("requires grad");
            for co in 0..c_out {
                for ci in 0..c_in {
                    for k in 0..width {
                        gw[(co * c_in + ci) * width + k] += gwt[(k * c_out + co) * c_in + ci];
                    }
                }
            }
        }
        if let Some(b) = b {
            if let Some(gb) = self.slot(grads, b) {
                for row in g.chunks(c_out) {
                    axpy(gb, 1.0, row);
                }
            }
        }
    }

    fn fft_params_backward(
        &self,
        y: Var,
        coeffs: &[Complex64],
        stats: &[ChannelSpectrum],
        g: &[f64],
        grads: &mut [Vec<f64>],
    ) {
        let yv = self.value(y);
        let (t, n) = (yv.rows(), yv.cols());
        let k = t / 2;
        let tf = t as f64;
        let Some(gy) = self.slot(grads, y) else { return };
        for i in 0..n {
            let st = stats[i];
            let (ga, gf, gb) = (g[i * 3], g[i * 3 + 1], g[i * 3 + 2]);
            // dL/dP_j for j = 1..=K.
            let gp: Vec<f64> = (1..=k)
                .map(|j| {
                    let mut v = 0.0;
                    if st.amplitude > 0.0 {
                        v += ga / (tf * st.amplitude);
                    }
                    if !st.degenerate {
                        v += gf * (j as f64 / tf - st.frequency) / st.total;
                    }
                    v
                })
                .collect();
            let q = &coeffs[i * (k + 1)..(i + 1) * (k + 1)];
            for s in 0..t {
                let mut acc = gb / tf;
                for j in 1..=k {
                    if gp[j - 1] == 0.0 {
                        continue;
                    }
                    let theta = 2.0 * PI * ((j * s) % t) as f64 / tf;
                    let (sn, cs) = theta.sin_cos();
                    acc += gp[j - 1] * 4.0 / tf * (q[j].re * cs - q[j].im * sn);
                }
                gy[s * n + i] += acc;
            }
        }
    }
}
