use super::linalg::{matmul_into, matmul_nt_into, matmul_tn_into};
use super::tensor::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Index of a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

const LN_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    /// Non-learnable input (token-derived constants, masks, dropout masks).
    Const,
    /// Learnable leaf; gradients land in [`Grads`] under this id.
    Param(ParamId),
    /// c[m×n] = a[m×k] · b[k×n]
    Matmul(NodeId, NodeId),
    /// c[m×k] = a[m×n] · b[k×n]ᵀ
    MatmulNt(NodeId, NodeId),
    /// Elementwise sum, identical shapes.
    Add(NodeId, NodeId),
    /// a[m×n] + bias[n] broadcast over rows.
    AddBias(NodeId, NodeId),
    /// Row-gated sum: out[i] = a[i] + b[i] where mask[i], else a[i] copied.
    MaskedAddRows(NodeId, NodeId, Vec<bool>),
    /// Elementwise product, identical shapes.
    Mul(NodeId, NodeId),
    /// Multiplication by a compile-time scalar.
    Scale(NodeId, f64),
    /// Concatenation along the last axis.
    ConcatLast(Vec<NodeId>),
    /// Column slice [start, start+len) of the last axis.
    SliceLast(NodeId, usize, usize),
    /// Row-wise softmax with max subtraction.
    Softmax(NodeId),
    /// Row-wise layer normalization with learnable gain and bias.
    LayerNorm(NodeId, NodeId, NodeId),
    Relu(NodeId),
    /// Row gather: out[t] = table[ids[t]].
    Embedding(NodeId, Vec<u32>),
    /// Mean of -ln p(target) over non-pad positions; scalar.
    CrossEntropy(NodeId, Vec<u32>, u32),
    /// Fixed-weight contraction to a scalar (used by check suites).
    WeightedSum(NodeId, Vec<f64>),
}

struct Node {
    op: Op,
    value: Value,
}

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

/// Per-parameter gradient accumulators, aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Grads {
    slots: Vec<Tensor>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        let slots = store
            .iter()
            .map(|(_, _, t)| Tensor::zeros(t.shape().to_vec()))
            .collect();
        Grads { slots }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.slots[id.0]
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.slots.iter_mut()
    }

    pub fn scale(&mut self, c: f64) {
        for t in &mut self.slots {
            for v in t.data_mut() {
                *v *= c;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        let ss: f64 = self
            .slots
            .iter()
            .flat_map(|t| t.data().iter())
            .map(|v| v * v)
            .sum();
        ss.sqrt()
    }

    /// Rescale so the global norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
    }
}

/// Computation record. Ops append nodes in execution order; `backward`
/// replays them once in reverse, summing gradients where a node feeds
/// several consumers.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape { store, nodes: Vec::with_capacity(256) }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match &self.nodes[id.0].value {
            Value::Owned(t) => t,
            Value::Param(p) => self.store.get(*p),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, opname: &'static str) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: opname });
        }
        self.nodes.push(Node { op, value: Value::Owned(value) });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Const, value, "constant")
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node { op: Op::Param(id), value: Value::Param(id) });
        NodeId(self.nodes.len() - 1)
    }

    fn dims2_of(&self, id: NodeId, op: &'static str) -> Result<(usize, usize)> {
        self.value(id).dims2().map_err(|_| Error::ShapeMismatch {
            op,
            detail: format!("expected rank-2 operand, got {:?}", self.value(id).shape()),
        })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = self.dims2_of(a, "matmul")?;
        let (kb, n) = self.dims2_of(b, "matmul")?;
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                detail: format!("inner extents differ: {}x{} vs {}x{}", m, ka, kb, n),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a).data(), self.value(b).data(), &mut out, m, ka, n);
        self.push(Op::Matmul(a, b), Tensor::new(vec![m, n], out)?, "matmul")
    }

    /// a · bᵀ without materializing the transpose.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, na) = self.dims2_of(a, "matmul_nt")?;
        let (k, nb) = self.dims2_of(b, "matmul_nt")?;
        if na != nb {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                detail: format!("inner extents differ: {}x{} vs {}x{}", m, na, k, nb),
            });
        }
        let mut out = vec![0.0; m * k];
        matmul_nt_into(self.value(a).data(), self.value(b).data(), &mut out, m, na, k);
        self.push(Op::MatmulNt(a, b), Tensor::new(vec![m, k], out)?, "matmul_nt")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Op::Add(a, b), Tensor::new(shape, data)?, "add")
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims2_of(a, "add_bias")?;
        if self.value(bias).shape() != [n] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                detail: format!("bias {:?} vs row width {}", self.value(bias).shape(), n),
            });
        }
        let mut data = self.value(a).data().to_vec();
        let bv = self.value(bias).data();
        for row in data.chunks_exact_mut(n) {
            for (x, b) in row.iter_mut().zip(bv) {
                *x += b;
            }
        }
        self.push(Op::AddBias(a, bias), Tensor::new(vec![m, n], data)?, "add_bias")
    }

    /// out[i] = a[i] + b[i] on rows where `mask`, a[i] copied elsewhere.
    pub fn masked_add_rows(&mut self, a: NodeId, b: NodeId, mask: &[bool]) -> Result<NodeId> {
        let (m, n) = self.dims2_of(a, "masked_add_rows")?;
        if self.value(b).shape() != [m, n] || mask.len() != m {
            return Err(Error::ShapeMismatch {
                op: "masked_add_rows",
                detail: format!(
                    "a {:?}, b {:?}, mask len {}",
                    self.value(a).shape(),
                    self.value(b).shape(),
                    mask.len()
                ),
            });
        }
        let mut data = self.value(a).data().to_vec();
        let bd = self.value(b).data();
        for (i, keep) in mask.iter().enumerate() {
            if *keep {
                for j in 0..n {
                    data[i * n + j] += bd[i * n + j];
                }
            }
        }
        self.push(
            Op::MaskedAddRows(a, b, mask.to_vec()),
            Tensor::new(vec![m, n], data)?,
            "masked_add_rows",
        )
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::ShapeMismatch {
                op: "mul",
                detail: format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Op::Mul(a, b), Tensor::new(shape, data)?, "mul")
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let data: Vec<f64> = self.value(a).data().iter().map(|x| x * c).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Op::Scale(a, c), Tensor::new(shape, data)?, "scale")
    }

    pub fn concat_last(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::ShapeMismatch { op: "concat_last", detail: "no inputs".into() });
        }
        let (m, _) = self.dims2_of(parts[0], "concat_last")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (mp, np) = self.dims2_of(p, "concat_last")?;
            if mp != m {
                return Err(Error::ShapeMismatch {
                    op: "concat_last",
                    detail: format!("row mismatch: {} vs {}", mp, m),
                });
            }
            widths.push(np);
        }
        let total: usize = widths.iter().sum();
        let mut data = vec![0.0; m * total];
        for i in 0..m {
            let mut off = 0;
            for (&p, &w) in parts.iter().zip(&widths) {
                let src = self.value(p).row(i);
                data[i * total + off..i * total + off + w].copy_from_slice(src);
                off += w;
            }
        }
        self.push(Op::ConcatLast(parts.to_vec()), Tensor::new(vec![m, total], data)?, "concat_last")
    }

    pub fn slice_last(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (m, n) = self.dims2_of(a, "slice_last")?;
        if start + len > n {
            return Err(Error::ShapeMismatch {
                op: "slice_last",
                detail: format!("slice {}..{} of width {}", start, start + len, n),
            });
        }
        let mut data = vec![0.0; m * len];
        for i in 0..m {
            let src = &self.value(a).row(i)[start..start + len];
            data[i * len..(i + 1) * len].copy_from_slice(src);
        }
        self.push(Op::SliceLast(a, start, len), Tensor::new(vec![m, len], data)?, "slice_last")
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims2_of(a, "softmax")?;
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_exact_mut(n) {
            softmax_row(row);
        }
        self.push(Op::Softmax(a), Tensor::new(vec![m, n], data)?, "softmax")
    }

    pub fn layernorm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims2_of(x, "layernorm")?;
        if self.value(gain).shape() != [n] || self.value(bias).shape() != [n] {
            return Err(Error::ShapeMismatch {
                op: "layernorm",
                detail: format!(
                    "gain {:?} / bias {:?} vs width {}",
                    self.value(gain).shape(),
                    self.value(bias).shape(),
                    n
                ),
            });
        }
        let mut data = self.value(x).data().to_vec();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        for row in data.chunks_exact_mut(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let rstd = 1.0 / (var + LN_EPS).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * rstd * g[j] + b[j];
            }
        }
        self.push(Op::LayerNorm(x, gain, bias), Tensor::new(vec![m, n], data)?, "layernorm")
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let data: Vec<f64> = self.value(a).data().iter().map(|v| v.max(0.0)).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Op::Relu(a), Tensor::new(shape, data)?, "relu")
    }

    /// Gather rows of a parameter table: out[t] = table[ids[t]].
    pub fn embedding(&mut self, table: NodeId, ids: &[u32]) -> Result<NodeId> {
        let (v, e) = self.dims2_of(table, "embedding")?;
        let mut data = vec![0.0; ids.len() * e];
        for (t, &id) in ids.iter().enumerate() {
            if id as usize >= v {
                return Err(Error::ShapeMismatch {
                    op: "embedding",
                    detail: format!("id {} out of range for table of {} rows", id, v),
                });
            }
            data[t * e..(t + 1) * e].copy_from_slice(self.value(table).row(id as usize));
        }
        self.push(
            Op::Embedding(table, ids.to_vec()),
            Tensor::new(vec![ids.len(), e], data)?,
            "embedding",
        )
    }

    /// Mean of −ln p(target) over positions whose target is not `pad_id`.
    pub fn cross_entropy(&mut self, probs: NodeId, targets: &[u32], pad_id: u32) -> Result<NodeId> {
        let (t, v) = self.dims2_of(probs, "cross_entropy")?;
        if targets.len() != t {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                detail: format!("{} rows vs {} targets", t, targets.len()),
            });
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, &y) in targets.iter().enumerate() {
            if y == pad_id {
                continue;
            }
            if y as usize >= v {
                return Err(Error::ShapeMismatch {
                    op: "cross_entropy",
                    detail: format!("target {} out of range for {} classes", y, v),
                });
            }
            total -= self.value(probs).row(i)[y as usize].ln();
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyLossSet);
        }
        let loss = total / count as f64;
        self.push(
            Op::CrossEntropy(probs, targets.to_vec(), pad_id),
            Tensor::scalar(loss),
            "cross_entropy",
        )
    }

    /// Σ a ⊙ w with fixed weights; reduces any tensor to a scalar.
    pub fn weighted_sum(&mut self, a: NodeId, weights: &[f64]) -> Result<NodeId> {
        if self.value(a).numel() != weights.len() {
            return Err(Error::ShapeMismatch {
                op: "weighted_sum",
                detail: format!("{} values vs {} weights", self.value(a).numel(), weights.len()),
            });
        }
        let s: f64 = self.value(a).data().iter().zip(weights).map(|(x, w)| x * w).sum();
        self.push(Op::WeightedSum(a, weights.to_vec()), Tensor::scalar(s), "weighted_sum")
    }

    /// Reverse sweep from a scalar loss, accumulating parameter gradients
    /// into `grads`. Each record is visited exactly once; fan-out sums.
    pub fn backward(&self, loss: NodeId, grads: &mut Grads) -> Result<()> {
        let loss_val = self.value(loss);
        if !loss_val.is_scalar() {
            return Err(Error::ShapeMismatch {
                op: "backward",
                detail: format!("loss must be scalar, got {:?}", loss_val.shape()),
            });
        }
        let mut node_grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        node_grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(dy) = node_grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Const => {}
                Op::Param(pid) => {
                    accumulate_tensor(grads.get_mut(*pid), dy.data());
                }
                Op::Matmul(a, b) => {
                    let (m, k) = self.value(*a).dims2().unwrap();
                    let n = self.value(*b).shape()[1];
                    let mut da = self.grad_slot(&mut node_grads, *a);
                    matmul_nt_into(dy.data(), self.value(*b).data(), da.data_mut(), m, n, k);
                    node_grads[a.0] = Some(da);
                    let mut db = self.grad_slot(&mut node_grads, *b);
                    matmul_tn_into(self.value(*a).data(), dy.data(), db.data_mut(), m, k, n);
                    node_grads[b.0] = Some(db);
                }
                Op::MatmulNt(a, b) => {
                    let (m, n) = self.value(*a).dims2().unwrap();
                    let k = self.value(*b).shape()[0];
                    let mut da = self.grad_slot(&mut node_grads, *a);
                    matmul_into(dy.data(), self.value(*b).data(), da.data_mut(), m, k, n);
                    node_grads[a.0] = Some(da);
                    let mut db = self.grad_slot(&mut node_grads, *b);
                    matmul_tn_into(dy.data(), self.value(*a).data(), db.data_mut(), m, k, n);
                    node_grads[b.0] = Some(db);
                }
                Op::Add(a, b) => {
                    self.accumulate_into(&mut node_grads, *a, dy.data());
                    self.accumulate_into(&mut node_grads, *b, dy.data());
                }
                Op::AddBias(a, bias) => {
                    self.accumulate_into(&mut node_grads, *a, dy.data());
                    let n = self.value(*bias).numel();
                    let mut db = vec![0.0; n];
                    for row in dy.data().chunks_exact(n) {
                        for (d, r) in db.iter_mut().zip(row) {
                            *d += r;
                        }
                    }
                    self.accumulate_into(&mut node_grads, *bias, &db);
                }
                Op::MaskedAddRows(a, b, mask) => {
                    self.accumulate_into(&mut node_grads, *a, dy.data());
                    let n = self.value(*b).shape()[1];
                    let mut db = vec![0.0; dy.numel()];
                    for (i, keep) in mask.iter().enumerate() {
                        if *keep {
                            db[i * n..(i + 1) * n].copy_from_slice(&dy.data()[i * n..(i + 1) * n]);
                        }
                    }
                    self.accumulate_into(&mut node_grads, *b, &db);
                }
                Op::Mul(a, b) => {
                    let da: Vec<f64> =
                        dy.data().iter().zip(self.value(*b).data()).map(|(d, y)| d * y).collect();
                    self.accumulate_into(&mut node_grads, *a, &da);
                    let db: Vec<f64> =
                        dy.data().iter().zip(self.value(*a).data()).map(|(d, x)| d * x).collect();
                    self.accumulate_into(&mut node_grads, *b, &db);
                }
                Op::Scale(a, c) => {
                    let da: Vec<f64> = dy.data().iter().map(|d| d * c).collect();
                    self.accumulate_into(&mut node_grads, *a, &da);
                }
                Op::ConcatLast(parts) => {
                    let m = dy.shape()[0];
                    let total = dy.shape()[1];
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).shape()[1];
                        let mut dp = vec![0.0; m * w];
                        for i in 0..m {
                            dp[i * w..(i + 1) * w]
                                .copy_from_slice(&dy.data()[i * total + off..i * total + off + w]);
                        }
                        self.accumulate_into(&mut node_grads, p, &dp);
                        off += w;
                    }
                }
                Op::SliceLast(a, start, len) => {
                    let (m, n) = self.value(*a).dims2().unwrap();
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        da[i * n + start..i * n + start + len]
                            .copy_from_slice(&dy.data()[i * len..(i + 1) * len]);
                    }
                    self.accumulate_into(&mut node_grads, *a, &da);
                }
                Op::Softmax(a) => {
                    let out = self.value(NodeId(idx));
                    let (m, n) = out.dims2().unwrap();
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        let p = out.row(i);
                        let d = &dy.data()[i * n..(i + 1) * n];
                        let dot: f64 = p.iter().zip(d).map(|(pv, dv)| pv * dv).sum();
                        for j in 0..n {
                            da[i * n + j] = p[j] * (d[j] - dot);
                        }
                    }
                    self.accumulate_into(&mut node_grads, *a, &da);
                }
                Op::LayerNorm(x, gain, bias) => {
                    let (m, n) = self.value(*x).dims2().unwrap();
                    let xv = self.value(*x).data();
                    let g = self.value(*gain).data();
                    let nf = n as f64;
                    let mut dx = vec![0.0; m * n];
                    let mut dg = vec![0.0; n];
                    let mut db = vec![0.0; n];
                    for i in 0..m {
                        let row = &xv[i * n..(i + 1) * n];
                        let d = &dy.data()[i * n..(i + 1) * n];
                        let mean = row.iter().sum::<f64>() / nf;
                        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
                        let rstd = 1.0 / (var + LN_EPS).sqrt();
                        // xhat = (x - mean) * rstd; dxhat = d ⊙ g
                        let mut sum_dxhat = 0.0;
                        let mut sum_dxhat_xhat = 0.0;
                        for j in 0..n {
                            let xhat = (row[j] - mean) * rstd;
                            let dxhat = d[j] * g[j];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                            dg[j] += d[j] * xhat;
                            db[j] += d[j];
                        }
                        for j in 0..n {
                            let xhat = (row[j] - mean) * rstd;
                            let dxhat = d[j] * g[j];
                            dx[i * n + j] =
                                rstd * (dxhat - sum_dxhat / nf - xhat * sum_dxhat_xhat / nf);
                        }
                    }
                    self.accumulate_into(&mut node_grads, *x, &dx);
                    self.accumulate_into(&mut node_grads, *gain, &dg);
                    self.accumulate_into(&mut node_grads, *bias, &db);
                }
                Op::Relu(a) => {
                    let da: Vec<f64> = dy
                        .data()
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(d, x)| if *x > 0.0 { *d } else { 0.0 })
                        .collect();
                    self.accumulate_into(&mut node_grads, *a, &da);
                }
                Op::Embedding(table, ids) => {
                    let (v, e) = self.value(*table).dims2().unwrap();
                    let mut dt = vec![0.0; v * e];
                    for (t, &id) in ids.iter().enumerate() {
                        let dst = &mut dt[id as usize * e..(id as usize + 1) * e];
                        for (dd, s) in dst.iter_mut().zip(&dy.data()[t * e..(t + 1) * e]) {
                            *dd += s;
                        }
                    }
                    self.accumulate_into(&mut node_grads, *table, &dt);
                }
                Op::CrossEntropy(probs, targets, pad_id) => {
                    let (t, v) = self.value(*probs).dims2().unwrap();
                    let count = targets.iter().filter(|&&y| y != *pad_id).count() as f64;
                    let gscale = dy.scalar_value() / count;
                    let pv = self.value(*probs).data();
                    let mut dp = vec![0.0; t * v];
                    for (i, &y) in targets.iter().enumerate() {
                        if y == *pad_id {
                            continue;
                        }
                        let j = y as usize;
                        dp[i * v + j] = -gscale / pv[i * v + j];
                    }
                    self.accumulate_into(&mut node_grads, *probs, &dp);
                }
                Op::WeightedSum(a, w) => {
                    let g = dy.scalar_value();
                    let da: Vec<f64> = w.iter().map(|wv| wv * g).collect();
                    self.accumulate_into(&mut node_grads, *a, &da);
                }
            }
        }

        Ok(())
    }

    fn grad_slot(&self, node_grads: &mut [Option<Tensor>], id: NodeId) -> Tensor {
        node_grads[id.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(self.value(id).shape().to_vec()))
    }

    fn accumulate_into(&self, node_grads: &mut [Option<Tensor>], id: NodeId, delta: &[f64]) {
        match &mut node_grads[id.0] {
            Some(t) => accumulate_tensor(t, delta),
            slot @ None => {
                let mut t = Tensor::zeros(self.value(id).shape().to_vec());
                accumulate_tensor(&mut t, delta);
                *slot = Some(t);
            }
        }
    }
}

fn accumulate_tensor(t: &mut Tensor, delta: &[f64]) {
    debug_assert_eq!(t.numel(), delta.len());
    for (a, d) in t.data_mut().iter_mut().zip(delta) {
        *a += d;
    }
}

/// In-place stable softmax of one row.
pub(crate) fn softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
