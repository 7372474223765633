use crate::autodiff::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`]. Only valid for the tape that produced it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    MatVec { m: Var, v: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    /// scale * x + shift, elementwise with scalar constants.
    Affine { x: Var, scale: f64 },
    Tanh { x: Var },
    Sigmoid { x: Var },
    Exp { x: Var },
    Ln { x: Var },
    Concat { parts: Vec<Var> },
    Slice { x: Var, start: usize },
    Sum { x: Var },
    Mean { x: Var },
    /// log N(x | mean, diag(sigma^2)) summed over components.
    GaussianLogDensity { x: Var, mean: Var, sigma: Var },
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Eager evaluation with a recorded tape: every operation computes its value
/// immediately and appends one node, and [`Tape::backward`] replays the tape
/// in reverse to accumulate adjoints. Op outputs are checked to stay finite.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`]. Nodes the
/// root does not depend on have no entry and read back as `None` (zero).
pub struct Gradients {
    adjoints: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.adjoints.get(var.index()).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all nodes but keeps the allocation, ready for the next window.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.index()].value
    }

    pub fn needs_grad(&self, var: Var) -> bool {
        self.nodes[var.index()].needs_grad
    }

    /// Leaf the gradient must flow into (a network parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_node(Op::Leaf, value, true)
    }

    /// Leaf treated as data: inputs, sampled actions, detached values.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_node(Op::Leaf, value, false)
    }

    fn push_node(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        let id = Var(self.nodes.len() as u32);
        self.nodes.push(Node { op, value, needs_grad });
        id
    }

    fn push(
        &mut self,
        name: &'static str,
        op: Op,
        shape: Shape,
        data: Vec<f64>,
        needs_grad: bool,
    ) -> Result<Var> {
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("{name} output"),
            });
        }
        debug_assert_eq!(shape.numel(), data.len());
        Ok(self.push_node(op, Tensor::from_parts(shape, data), needs_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (Shape::Matrix(m, k), Shape::Matrix(k2, n)) = (ta.shape(), tb.shape()) else {
            return Err(shape_mismatch("matmul", ta.shape(), tb.shape()));
        };
        if k != k2 {
            return Err(shape_mismatch("matmul", ta.shape(), tb.shape()));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for (j, aj) in ta.data()[i * k..(i + 1) * k].iter().enumerate() {
                let brow = &tb.data()[j * n..(j + 1) * n];
                for (o, bv) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                    *o += aj * bv;
                }
            }
        }
        let needs = self.needs_grad(a) || self.needs_grad(b);
        self.push("matmul", Op::MatMul { a, b }, Shape::Matrix(m, n), out, needs)
    }

    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var> {
        let (tm, tv) = (self.value(m), self.value(v));
        let (Shape::Matrix(rows, cols), Shape::Vector(n)) = (tm.shape(), tv.shape()) else {
            return Err(shape_mismatch("matvec", tm.shape(), tv.shape()));
        };
        if cols != n {
            return Err(shape_mismatch("matvec", tm.shape(), tv.shape()));
        }
        let x = tv.data();
        let out: Vec<f64> = (0..rows)
            .map(|i| {
                tm.data()[i * cols..(i + 1) * cols]
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * xi)
                    .sum()
            })
            .collect();
        let needs = self.needs_grad(m) || self.needs_grad(v);
        self.push("matvec", Op::MatVec { m, v }, Shape::Vector(rows), out, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, |a, b| Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, |a, b| Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    fn zip(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(Var, Var) -> Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_mismatch(name, ta.shape(), tb.shape()));
        }
        let out: Vec<f64> = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let shape = ta.shape();
        let needs = self.needs_grad(a) || self.needs_grad(b);
        self.push(name, op(a, b), shape, out, needs)
    }

    /// scale * x + shift applied to every component.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let tx = self.value(x);
        let out: Vec<f64> = tx.data().iter().map(|v| scale * v + shift).collect();
        let shape = tx.shape();
        let needs = self.needs_grad(x);
        self.push("affine", Op::Affine { x, scale }, shape, out, needs)
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.affine(x, -1.0, 0.0)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary("tanh", x, f64::tanh, |x| Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, |v| 1.0 / (1.0 + (-v).exp()), |x| Op::Sigmoid { x })
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary("exp", x, f64::exp, |x| Op::Exp { x })
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        self.unary("ln", x, f64::ln, |x| Op::Ln { x })
    }

    fn unary(
        &mut self,
        name: &'static str,
        x: Var,
        f: impl Fn(f64) -> f64,
        op: impl Fn(Var) -> Op,
    ) -> Result<Var> {
        let tx = self.value(x);
        let out: Vec<f64> = tx.data().iter().map(|v| f(*v)).collect();
        let shape = tx.shape();
        let needs = self.needs_grad(x);
        self.push(name, op(x), shape, out, needs)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::BadOperand {
                op: "concat",
                message: "no inputs".into(),
            });
        }
        let mut out = Vec::new();
        let mut needs = false;
        for &p in parts {
            let t = self.value(p);
            let Shape::Vector(_) = t.shape() else {
                return Err(Error::BadOperand {
                    op: "concat",
                    message: format!("expected 1-D input, got {}", t.shape()),
                });
            };
            out.extend_from_slice(t.data());
            needs |= self.needs_grad(p);
        }
        let shape = Shape::Vector(out.len());
        self.push("concat", Op::Concat { parts: parts.to_vec() }, shape, out, needs)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let tx = self.value(x);
        let Shape::Vector(n) = tx.shape() else {
            return Err(Error::BadOperand {
                op: "slice",
                message: format!("expected 1-D input, got {}", tx.shape()),
            });
        };
        if len == 0 || start + len > n {
            return Err(Error::BadOperand {
                op: "slice",
                message: format!("range {start}..{} out of bounds for length {n}", start + len),
            });
        }
        let out = tx.data()[start..start + len].to_vec();
        let needs = self.needs_grad(x);
        self.push("slice", Op::Slice { x, start }, Shape::Vector(len), out, needs)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total: f64 = self.value(x).data().iter().sum();
        let needs = self.needs_grad(x);
        self.push("sum", Op::Sum { x }, Shape::Vector(1), vec![total], needs)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let avg = t.data().iter().sum::<f64>() / t.len() as f64;
        let needs = self.needs_grad(x);
        self.push("mean", Op::Mean { x }, Shape::Vector(1), vec![avg], needs)
    }

    /// Sum over components i of log N(x_i | mean_i, sigma_i^2):
    /// -0.5 ln(2 pi) - ln sigma_i - (x_i - mean_i)^2 / (2 sigma_i^2).
    pub fn gaussian_logp(&mut self, x: Var, mean: Var, sigma: Var) -> Result<Var> {
        let (tx, tm, ts) = (self.value(x), self.value(mean), self.value(sigma));
        if tx.shape() != tm.shape() {
            return Err(shape_mismatch("gaussian_logp", tx.shape(), tm.shape()));
        }
        if tx.shape() != ts.shape() {
            return Err(shape_mismatch("gaussian_logp", tx.shape(), ts.shape()));
        }
        const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;
        let mut total = 0.0;
        for ((xi, mi), si) in tx.data().iter().zip(tm.data()).zip(ts.data()) {
            if *si <= 0.0 {
                return Err(Error::SigmaNotPositive { value: *si });
            }
            let z = (xi - mi) / si;
            total += -HALF_LN_TWO_PI - si.ln() - 0.5 * z * z;
        }
        let needs = self.needs_grad(x) || self.needs_grad(mean) || self.needs_grad(sigma);
        self.push(
            "gaussian_logp",
            Op::GaussianLogDensity { x, mean, sigma },
            Shape::Vector(1),
            vec![total],
            needs,
        )
    }

    /// Reverse pass from a scalar root. Returns one adjoint per node the root
    /// depends on; nodes with no path to the root read back as `None` (zero).
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::NonScalarRoot {
                shape: root_value.shape().to_string(),
            });
        }
        let mut adj: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.needs_grad(root) {
            adj[root.index()] = Some(Tensor::scalar(1.0).expect("finite seed"));
            for idx in (0..=root.index()).rev() {
                let Some(g) = adj[idx].take() else { continue };
                self.propagate(idx, &g, &mut adj);
                adj[idx] = Some(g);
            }
        }
        Ok(Gradients { adjoints: adj })
    }

    fn propagate(&self, idx: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
        match self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (Shape::Matrix(m, k), Shape::Matrix(_, n)) =
                    (self.value(a).shape(), self.value(b).shape())
                else {
                    unreachable!("matmul operands validated at record time")
                };
                if self.needs_grad(a) {
                    let bd = self.value(b).data();
                    let da = self.accum(adj, a);
                    for i in 0..m {
                        for j in 0..k {
                            let mut s = 0.0;
                            for c in 0..n {
                                s += g.data()[i * n + c] * bd[j * n + c];
                            }
                            da[i * k + j] += s;
                        }
                    }
                }
                if self.needs_grad(b) {
                    let ad = self.value(a).data();
                    let db = self.accum(adj, b);
                    for j in 0..k {
                        for c in 0..n {
                            let mut s = 0.0;
                            for i in 0..m {
                                s += ad[i * k + j] * g.data()[i * n + c];
                            }
                            db[j * n + c] += s;
                        }
                    }
                }
            }
            Op::MatVec { m, v } => {
                let Shape::Matrix(rows, cols) = self.value(m).shape() else {
                    unreachable!("matvec operand validated at record time")
                };
                if self.needs_grad(m) {
                    let x = self.value(v).data();
                    let dm = self.accum(adj, m);
                    for i in 0..rows {
                        let gi = g.data()[i];
                        for (d, xj) in dm[i * cols..(i + 1) * cols].iter_mut().zip(x) {
                            *d += gi * xj;
                        }
                    }
                }
                if self.needs_grad(v) {
                    let w = self.value(m).data();
                    let dv = self.accum(adj, v);
                    for i in 0..rows {
                        let gi = g.data()[i];
                        for (d, wj) in dv.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
                            *d += gi * wj;
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                self.accum_scaled(adj, a, g.data(), 1.0);
                self.accum_scaled(adj, b, g.data(), 1.0);
            }
            Op::Sub { a, b } => {
                self.accum_scaled(adj, a, g.data(), 1.0);
                self.accum_scaled(adj, b, g.data(), -1.0);
            }
            Op::Mul { a, b } => {
                if self.needs_grad(a) {
                    let other = self.value(b).data();
                    let da = self.accum(adj, a);
                    for ((d, gi), o) in da.iter_mut().zip(g.data()).zip(other) {
                        *d += gi * o;
                    }
                }
                if self.needs_grad(b) {
                    let other = self.value(a).data();
                    let db = self.accum(adj, b);
                    for ((d, gi), o) in db.iter_mut().zip(g.data()).zip(other) {
                        *d += gi * o;
                    }
                }
            }
            Op::Affine { x, scale } => {
                self.accum_scaled(adj, x, g.data(), scale);
            }
            Op::Tanh { x } => {
                if self.needs_grad(x) {
                    let y = self.nodes[idx].value.data();
                    let dx = self.accum(adj, x);
                    for ((d, gi), yi) in dx.iter_mut().zip(g.data()).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
            }
            Op::Sigmoid { x } => {
                if self.needs_grad(x) {
                    let y = self.nodes[idx].value.data();
                    let dx = self.accum(adj, x);
                    for ((d, gi), yi) in dx.iter_mut().zip(g.data()).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
            }
            Op::Exp { x } => {
                if self.needs_grad(x) {
                    let y = self.nodes[idx].value.data();
                    let dx = self.accum(adj, x);
                    for ((d, gi), yi) in dx.iter_mut().zip(g.data()).zip(y) {
                        *d += gi * yi;
                    }
                }
            }
            Op::Ln { x } => {
                if self.needs_grad(x) {
                    let xv = self.value(x).data();
                    let dx = self.accum(adj, x);
                    for ((d, gi), xi) in dx.iter_mut().zip(g.data()).zip(xv) {
                        *d += gi / xi;
                    }
                }
            }
            Op::Concat { ref parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    self.accum_scaled(adj, p, &g.data()[offset..offset + len], 1.0);
                    offset += len;
                }
            }
            Op::Slice { x, start } => {
                if self.needs_grad(x) {
                    let dx = self.accum(adj, x);
                    for (d, gi) in dx[start..start + g.len()].iter_mut().zip(g.data()) {
                        *d += gi;
                    }
                }
            }
            Op::Sum { x } => {
                if self.needs_grad(x) {
                    let gi = g.item();
                    for d in self.accum(adj, x).iter_mut() {
                        *d += gi;
                    }
                }
            }
            Op::Mean { x } => {
                if self.needs_grad(x) {
                    let gi = g.item() / self.value(x).len() as f64;
                    for d in self.accum(adj, x).iter_mut() {
                        *d += gi;
                    }
                }
            }
            Op::GaussianLogDensity { x, mean, sigma } => {
                let gi = g.item();
                let xv = self.value(x).data();
                let mv = self.value(mean).data();
                let sv = self.value(sigma).data();
                if self.needs_grad(x) {
                    let dx = self.accum(adj, x);
                    for (i, d) in dx.iter_mut().enumerate() {
                        *d -= gi * (xv[i] - mv[i]) / (sv[i] * sv[i]);
                    }
                }
                if self.needs_grad(mean) {
                    let dm = self.accum(adj, mean);
                    for (i, d) in dm.iter_mut().enumerate() {
                        *d += gi * (xv[i] - mv[i]) / (sv[i] * sv[i]);
                    }
                }
                if self.needs_grad(sigma) {
                    let ds = self.accum(adj, sigma);
                    for (i, d) in ds.iter_mut().enumerate() {
                        let z = (xv[i] - mv[i]) / sv[i];
                        *d += gi * (z * z - 1.0) / sv[i];
                    }
                }
            }
        }
    }

    /// Adjoint buffer for `var`, created zeroed on first touch.
    fn accum<'a>(&self, adj: &'a mut [Option<Tensor>], var: Var) -> &'a mut [f64] {
        let slot = &mut adj[var.index()];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.value(var).shape()));
        }
        slot.as_mut().expect("just filled").data_mut()
    }

    fn accum_scaled(&self, adj: &mut [Option<Tensor>], var: Var, g: &[f64], scale: f64) {
        if !self.needs_grad(var) {
            return;
        }
        let dst = self.accum(adj, var);
        for (d, gi) in dst.iter_mut().zip(g) {
            *d += scale * gi;
        }
    }
}

fn shape_mismatch(op: &'static str, lhs: Shape, rhs: Shape) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    }
}
