//! Reverse-mode gradient propagation on an eagerly evaluated tape.
//!
//! Values are computed when a node is recorded; `backward` walks the tape
//! in reverse and accumulates gradients for every node. Loss terms are
//! fused ops (cross-entropy, cosine) so their backward rules stay in
//! closed form and numerically stable.

use super::tensor::{log_softmax, softmax, Tensor};
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Norm floor inside the cosine op; matches common framework practice.
const COSINE_NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// [m,k] x [k,n] -> [m,n]
    MatMul(NodeId, NodeId),
    /// [m,k] x [k] -> [m]
    MatVec(NodeId, NodeId),
    /// elementwise, identical shapes
    Add(NodeId, NodeId),
    /// [m,n] + [n], bias broadcast over rows
    AddRowBias(NodeId, NodeId),
    /// [m] + [1], scalar broadcast
    AddScalarBias(NodeId, NodeId),
    Relu(NodeId),
    /// row-wise stable softmax on [m,n]
    SoftmaxRows(NodeId),
    Scale(NodeId, f64),
    Transpose(NodeId),
    /// concatenate [m,n_i] along columns
    ConcatCols(Vec<NodeId>),
    /// concatenate vectors
    ConcatVec(Vec<NodeId>),
    /// same data, new shape
    Reshape(NodeId),
    SumAll(NodeId),
    /// sum of scalar nodes
    AddN(Vec<NodeId>),
    /// -log softmax(logits)[index]
    CeIndex(NodeId, usize),
    /// -sum_j target_j log softmax(logits)_j, target constant
    CeSoft(NodeId, Tensor),
    /// -(x . f) / (|x| |f|), f constant
    NegCosConst(NodeId, Tensor),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded computation. One tape per batch; parameters enter once as
/// leaves and per-sample subgraphs share them.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if !va.is_matrix() || !vb.is_matrix() || va.cols() != vb.rows() {
            return Err(Error::Dimension(format!(
                "matmul {:?} x {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let out = matmul_values(va, vb);
        Ok(self.push(Op::MatMul(a, b), out))
    }

    pub fn matvec(&mut self, a: NodeId, x: NodeId) -> Result<NodeId> {
        let (va, vx) = (self.value(a), self.value(x));
        if !va.is_matrix() || !vx.is_vector() || va.cols() != vx.len() {
            return Err(Error::Dimension(format!(
                "matvec {:?} x {:?}",
                va.shape(),
                vx.shape()
            )));
        }
        let (m, k) = (va.rows(), va.cols());
        let mut out = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0;
            for l in 0..k {
                acc += va.at(i, l) * vx.data()[l];
            }
            out[i] = acc;
        }
        Ok(self.push(Op::MatVec(a, x), Tensor::vector(out)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Dimension(format!(
                "add {:?} + {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Add(a, b), Tensor::new(shape, data)?))
    }

    pub fn add_row_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(bias));
        if !va.is_matrix() || !vb.is_vector() || va.cols() != vb.len() {
            return Err(Error::Dimension(format!(
                "row bias {:?} + {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let (m, n) = (va.rows(), va.cols());
        let mut out = Tensor::zeros(vec![m, n]);
        for i in 0..m {
            for j in 0..n {
                out.set(i, j, va.at(i, j) + vb.data()[j]);
            }
        }
        Ok(self.push(Op::AddRowBias(a, bias), out))
    }

    pub fn add_scalar_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(bias));
        if !va.is_vector() || vb.len() != 1 {
            return Err(Error::Dimension(format!(
                "scalar bias {:?} + {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let b = vb.item();
        let data: Vec<f64> = va.data().iter().map(|x| x + b).collect();
        Ok(self.push(Op::AddScalarBias(a, bias), Tensor::vector(data)))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let shape = self.value(a).shape().to_vec();
        let data: Vec<f64> = self.value(a).data().iter().map(|x| x.max(0.0)).collect();
        self.push(Op::Relu(a), Tensor::new(shape, data).expect("same shape"))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if !va.is_matrix() {
            return Err(Error::Dimension(format!("softmax_rows {:?}", va.shape())));
        }
        let (m, n) = (va.rows(), va.cols());
        let mut out = Tensor::zeros(vec![m, n]);
        for i in 0..m {
            let row: Vec<f64> = (0..n).map(|j| va.at(i, j)).collect();
            let p = softmax(&row)?;
            for j in 0..n {
                out.set(i, j, p[j]);
            }
        }
        Ok(self.push(Op::SoftmaxRows(a), out))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let shape = self.value(a).shape().to_vec();
        let data: Vec<f64> = self.value(a).data().iter().map(|x| x * c).collect();
        self.push(Op::Scale(a, c), Tensor::new(shape, data).expect("same shape"))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if !va.is_matrix() {
            return Err(Error::Dimension(format!("transpose {:?}", va.shape())));
        }
        let (m, n) = (va.rows(), va.cols());
        let mut out = Tensor::zeros(vec![n, m]);
        for i in 0..m {
            for j in 0..n {
                out.set(j, i, va.at(i, j));
            }
        }
        Ok(self.push(Op::Transpose(a), out))
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat_cols"));
        }
        let m = self.value(parts[0]).rows();
        for &p in &parts {
            let v = self.value(p);
            if !v.is_matrix() || v.rows() != m {
                return Err(Error::Dimension(format!(
                    "concat_cols row mismatch {:?}",
                    v.shape()
                )));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(vec![m, total]);
        let mut col0 = 0;
        for &p in &parts {
            let v = self.value(p);
            for i in 0..m {
                for j in 0..v.cols() {
                    out.set(i, col0 + j, v.at(i, j));
                }
            }
            col0 += v.cols();
        }
        Ok(self.push(Op::ConcatCols(parts), out))
    }

    pub fn concat_vec(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat_vec"));
        }
        let mut data = Vec::new();
        for &p in &parts {
            let v = self.value(p);
            if !v.is_vector() {
                return Err(Error::Dimension(format!("concat_vec {:?}", v.shape())));
            }
            data.extend_from_slice(v.data());
        }
        Ok(self.push(Op::ConcatVec(parts), Tensor::vector(data)))
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let value = self.value(a).reshaped(shape)?;
        Ok(self.push(Op::Reshape(a), value))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push(Op::SumAll(a), Tensor::scalar(s))
    }

    pub fn add_n(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("add_n"));
        }
        let mut s = 0.0;
        for &p in &parts {
            let v = self.value(p);
            if v.len() != 1 {
                return Err(Error::Dimension(format!("add_n wants scalars, got {:?}", v.shape())));
            }
            s += v.item();
        }
        Ok(self.push(Op::AddN(parts), Tensor::scalar(s)))
    }

    /// Cross-entropy of logits against a hard class index.
    pub fn ce_index(&mut self, logits: NodeId, index: usize) -> Result<NodeId> {
        let v = self.value(logits);
        if !v.is_vector() {
            return Err(Error::Dimension(format!("ce_index logits {:?}", v.shape())));
        }
        if index >= v.len() {
            return Err(Error::Index {
                what: "class logits",
                index,
                size: v.len(),
            });
        }
        let ls = log_softmax(v.data())?;
        Ok(self.push(Op::CeIndex(logits, index), Tensor::scalar(-ls[index])))
    }

    /// Cross-entropy of logits against a constant target distribution.
    pub fn ce_soft(&mut self, logits: NodeId, target: Tensor) -> Result<NodeId> {
        let v = self.value(logits);
        if !v.is_vector() || !target.is_vector() || v.len() != target.len() {
            return Err(Error::Dimension(format!(
                "ce_soft logits {:?} target {:?}",
                v.shape(),
                target.shape()
            )));
        }
        let ls = log_softmax(v.data())?;
        let loss: f64 = -target
            .data()
            .iter()
            .zip(ls.iter())
            .map(|(t, l)| t * l)
            .sum::<f64>();
        Ok(self.push(Op::CeSoft(logits, target), Tensor::scalar(loss)))
    }

    /// Negative cosine similarity to a constant vector. The input norm
    /// is clamped at `COSINE_NORM_EPS` so a transiently dead branch
    /// (all-zero output) yields loss 0 instead of aborting training;
    /// the target must be nonzero.
    pub fn neg_cosine_const(&mut self, x: NodeId, target: Tensor) -> Result<NodeId> {
        let v = self.value(x);
        if !v.is_vector() || !target.is_vector() || v.len() != target.len() {
            return Err(Error::Dimension(format!(
                "neg_cosine x {:?} target {:?}",
                v.shape(),
                target.shape()
            )));
        }
        let nf = target.l2_norm();
        if nf == 0.0 {
            return Err(Error::DegenerateInput(
                "cosine similarity against a zero target vector".into(),
            ));
        }
        let nx = v.l2_norm().max(COSINE_NORM_EPS);
        let dot: f64 = v.data().iter().zip(target.data()).map(|(a, b)| a * b).sum();
        let loss = -dot / (nx * nf);
        Ok(self.push(Op::NegCosConst(x, target), Tensor::scalar(loss)))
    }

    /// Gradients of the scalar `root` with respect to every node.
    pub fn backward(&self, root: NodeId) -> Result<Vec<Tensor>> {
        if self.value(root).len() != 1 {
            return Err(Error::Dimension(format!(
                "backward root must be scalar, got {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape().to_vec()))
            .collect();
        grads[root].data_mut()[0] = 1.0;

        for id in (0..=root).rev() {
            let g = grads[id].clone();
            if g.data().iter().all(|&x| x == 0.0) {
                continue;
            }
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    // dA = G B^T ; dB = A^T G
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    for i in 0..m {
                        for l in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g.at(i, j) * vb.at(l, j);
                            }
                            let cur = grads[*a].at(i, l) + acc;
                            grads[*a].set(i, l, cur);
                        }
                    }
                    for l in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += va.at(i, l) * g.at(i, j);
                            }
                            let cur = grads[*b].at(l, j) + acc;
                            grads[*b].set(l, j, cur);
                        }
                    }
                }
                Op::MatVec(a, x) => {
                    // dA = g ⊗ x ; dx = A^T g
                    let (va, vx) = (&self.nodes[*a].value, &self.nodes[*x].value);
                    let (m, k) = (va.rows(), va.cols());
                    for i in 0..m {
                        for l in 0..k {
                            let cur = grads[*a].at(i, l) + g.data()[i] * vx.data()[l];
                            grads[*a].set(i, l, cur);
                        }
                    }
                    for l in 0..k {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += va.at(i, l) * g.data()[i];
                        }
                        grads[*x].data_mut()[l] += acc;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[*a], g.data());
                    accumulate(&mut grads[*b], g.data());
                }
                Op::AddRowBias(a, bias) => {
                    accumulate(&mut grads[*a], g.data());
                    let n = g.cols();
                    for i in 0..g.rows() {
                        for j in 0..n {
                            grads[*bias].data_mut()[j] += g.at(i, j);
                        }
                    }
                }
                Op::AddScalarBias(a, bias) => {
                    accumulate(&mut grads[*a], g.data());
                    grads[*bias].data_mut()[0] += g.data().iter().sum::<f64>();
                }
                Op::Relu(a) => {
                    let va = self.nodes[*a].value.data();
                    for (i, &gi) in g.data().iter().enumerate() {
                        if va[i] > 0.0 {
                            grads[*a].data_mut()[i] += gi;
                        }
                    }
                }
                Op::SoftmaxRows(a) => {
                    // dz_j = y_j (g_j - sum_k g_k y_k), per row
                    let y = &self.nodes[id].value;
                    let (m, n) = (y.rows(), y.cols());
                    for i in 0..m {
                        let mut dot = 0.0;
                        for k in 0..n {
                            dot += g.at(i, k) * y.at(i, k);
                        }
                        for j in 0..n {
                            let cur = grads[*a].at(i, j) + y.at(i, j) * (g.at(i, j) - dot);
                            grads[*a].set(i, j, cur);
                        }
                    }
                }
                Op::Scale(a, c) => {
                    let scaled: Vec<f64> = g.data().iter().map(|x| x * c).collect();
                    accumulate(&mut grads[*a], &scaled);
                }
                Op::Transpose(a) => {
                    let (m, n) = (g.rows(), g.cols());
                    for i in 0..m {
                        for j in 0..n {
                            let cur = grads[*a].at(j, i) + g.at(i, j);
                            grads[*a].set(j, i, cur);
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut col0 = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.cols();
                        for i in 0..g.rows() {
                            for j in 0..w {
                                let cur = grads[p].at(i, j) + g.at(i, col0 + j);
                                grads[p].set(i, j, cur);
                            }
                        }
                        col0 += w;
                    }
                }
                Op::ConcatVec(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.len();
                        for j in 0..len {
                            grads[p].data_mut()[j] += g.data()[off + j];
                        }
                        off += len;
                    }
                }
                Op::Reshape(a) => {
                    accumulate(&mut grads[*a], g.data());
                }
                Op::SumAll(a) => {
                    let gs = g.item();
                    for x in grads[*a].data_mut() {
                        *x += gs;
                    }
                }
                Op::AddN(parts) => {
                    let gs = g.item();
                    for &p in parts {
                        grads[p].data_mut()[0] += gs;
                    }
                }
                Op::CeIndex(logits, index) => {
                    // d logits = softmax(logits) - onehot(index)
                    let gs = g.item();
                    let p = softmax(self.nodes[*logits].value.data())?;
                    for (j, pj) in p.iter().enumerate() {
                        let onehot = if j == *index { 1.0 } else { 0.0 };
                        grads[*logits].data_mut()[j] += gs * (pj - onehot);
                    }
                }
                Op::CeSoft(logits, target) => {
                    // d logits = (sum target) softmax(logits) - target
                    let gs = g.item();
                    let p = softmax(self.nodes[*logits].value.data())?;
                    let tsum: f64 = target.data().iter().sum();
                    for (j, pj) in p.iter().enumerate() {
                        grads[*logits].data_mut()[j] += gs * (tsum * pj - target.data()[j]);
                    }
                }
                Op::NegCosConst(x, target) => {
                    // d/dx [-(x.f)/(|x||f|)] = -f/(|x||f|) + (x.f) x / (|x|^3 |f|);
                    // below the norm floor the denominator is constant,
                    // leaving only the first term
                    let gs = g.item();
                    let vx = self.nodes[*x].value.data();
                    let f = target.data();
                    let nx = self.nodes[*x].value.l2_norm();
                    let nf = target.l2_norm();
                    let dot: f64 = vx.iter().zip(f).map(|(a, b)| a * b).sum();
                    if nx > COSINE_NORM_EPS {
                        for j in 0..vx.len() {
                            let d = -f[j] / (nx * nf) + dot * vx[j] / (nx * nx * nx * nf);
                            grads[*x].data_mut()[j] += gs * d;
                        }
                    } else {
                        for j in 0..vx.len() {
                            grads[*x].data_mut()[j] += gs * (-f[j] / (COSINE_NORM_EPS * nf));
                        }
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn matmul_values(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Tensor::zeros(vec![m, n]);
    for i in 0..m {
        for l in 0..k {
            let ail = a.at(i, l);
            if ail == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = out.at(i, j) + ail * b.at(l, j);
                out.set(i, j, v);
            }
        }
    }
    out
}

fn accumulate(dst: &mut Tensor, src: &[f64]) {
    for (d, s) in dst.data_mut().iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::gradient_check;

    /// Finite-difference check for a scalar graph built from flat inputs.
    fn check_graph<F>(build: F, x0: &[f64], tol: f64)
    where
        F: Fn(&mut Tape, &[f64]) -> (Vec<NodeId>, NodeId),
    {
        let f = |x: &[f64]| -> crate::error::Result<f64> {
            let mut tape = Tape::new();
            let (_, root) = build(&mut tape, x);
            Ok(tape.value(root).item())
        };
        let grad_f = |x: &[f64]| -> crate::error::Result<Vec<f64>> {
            let mut tape = Tape::new();
            let (leaves, root) = build(&mut tape, x);
            let grads = tape.backward(root)?;
            let mut out = Vec::new();
            for l in leaves {
                out.extend_from_slice(grads[l].data());
            }
            Ok(out)
        };
        let err = gradient_check(f, grad_f, x0, 1e-5).unwrap();
        assert!(err < tol, "gradcheck error {err} >= {tol}");
    }

    #[test]
    fn matmul_matvec_grads_match_finite_differences() {
        // loss = sum(A B) + sum(C x), A 2x3, B 3x2, C 2x2, x 2
        let x0: Vec<f64> = vec![
            0.5, -1.2, 0.3, 0.8, -0.4, 1.1, // A
            0.2, 0.9, -0.7, 0.4, 1.3, -0.6, // B
            0.1, -0.5, 0.7, 0.2, // C
            -0.9, 0.6, // x
        ];
        check_graph(
            |tape, x| {
                let a = tape.leaf(Tensor::new(vec![2, 3], x[0..6].to_vec()).unwrap());
                let b = tape.leaf(Tensor::new(vec![3, 2], x[6..12].to_vec()).unwrap());
                let c = tape.leaf(Tensor::new(vec![2, 2], x[12..16].to_vec()).unwrap());
                let v = tape.leaf(Tensor::vector(x[16..18].to_vec()));
                let ab = tape.matmul(a, b).unwrap();
                let cv = tape.matvec(c, v).unwrap();
                let s1 = tape.sum_all(ab);
                let s2 = tape.sum_all(cv);
                let root = tape.add_n(vec![s1, s2]).unwrap();
                (vec![a, b, c, v], root)
            },
            &x0,
            1e-6,
        );
    }

    #[test]
    fn softmax_rows_grads_match_finite_differences() {
        let x0 = vec![0.3, -1.0, 0.7, 1.2, 0.1, -0.4];
        check_graph(
            |tape, x| {
                let a = tape.leaf(Tensor::new(vec![2, 3], x.to_vec()).unwrap());
                let sm = tape.softmax_rows(a).unwrap();
                // weight the entries so the gradient is not identically zero
                let w = tape.leaf(Tensor::new(vec![3, 1], vec![0.5, -1.5, 2.0]).unwrap());
                let prod = tape.matmul(sm, w).unwrap();
                let root = tape.sum_all(prod);
                (vec![a], root)
            },
            &x0,
            1e-6,
        );
    }

    #[test]
    fn fused_loss_grads_match_finite_differences() {
        let x0 = vec![0.4, -0.8, 1.5, 0.2];
        // hard cross-entropy
        check_graph(
            |tape, x| {
                let l = tape.leaf(Tensor::vector(x.to_vec()));
                let root = tape.ce_index(l, 2).unwrap();
                (vec![l], root)
            },
            &x0,
            1e-6,
        );
        // soft cross-entropy
        check_graph(
            |tape, x| {
                let l = tape.leaf(Tensor::vector(x.to_vec()));
                let t = Tensor::vector(vec![0.1, 0.2, 0.3, 0.4]);
                let root = tape.ce_soft(l, t).unwrap();
                (vec![l], root)
            },
            &x0,
            1e-6,
        );
        // negative cosine
        check_graph(
            |tape, x| {
                let l = tape.leaf(Tensor::vector(x.to_vec()));
                let t = Tensor::vector(vec![0.5, -0.5, 0.25, 1.0]);
                let root = tape.neg_cosine_const(l, t).unwrap();
                (vec![l], root)
            },
            &x0,
            1e-6,
        );
    }

    #[test]
    fn structural_op_grads_match_finite_differences() {
        // relu, bias adds, transpose, concat, reshape, scale in one graph
        let x0 = vec![
            0.9, -0.3, 0.5, // v (3)
            1.1, -0.7, 0.2, 0.6, -1.4, 0.8, // m (3x2)
            0.4, -0.2, // rb (2)
            0.3, // sb (1)
        ];
        check_graph(
            |tape, x| {
                let v = tape.leaf(Tensor::vector(x[0..3].to_vec()));
                let m = tape.leaf(Tensor::new(vec![3, 2], x[3..9].to_vec()).unwrap());
                let rb = tape.leaf(Tensor::vector(x[9..11].to_vec()));
                let sb = tape.leaf(Tensor::vector(vec![x[11]]));
                let col = tape.reshape(v, vec![3, 1]).unwrap();
                let wide = tape.concat_cols(vec![col, m]).unwrap(); // 3x3
                let t = tape.transpose(wide).unwrap();
                let prod = tape.matmul(wide, t).unwrap(); // 3x3, no entry near zero
                let r = tape.relu(prod);
                let half = tape.scale(r, 0.5);
                let bias3 = tape.concat_vec(vec![rb, sb]).unwrap();
                let b2 = tape.add_row_bias(half, bias3).unwrap();
                let flat = tape.reshape(b2, vec![9]).unwrap();
                let shifted = tape.add_scalar_bias(flat, sb).unwrap();
                let root = tape.sum_all(shifted);
                (vec![v, m, rb, sb], root)
            },
            &x0,
            1e-6,
        );
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(tape.backward(a).is_err());
    }

    #[test]
    fn ce_index_out_of_range_is_index_error() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(tape.ce_index(a, 2).is_err());
    }
}
