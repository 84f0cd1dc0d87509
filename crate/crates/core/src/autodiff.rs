//! A small reverse-mode automatic differentiation tape over `f64` matrices.
//!
//! Every value is a 2-D array. Nodes are evaluated eagerly when they are
//! pushed; [`Tape::backward`] walks the tape in reverse and returns the
//! gradient of a scalar (1x1) node with respect to every node.

use ndarray::{s, Array1, Array2, Axis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a (r x c) + b (1 x c)` broadcast over rows.
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Transpose(Var),
    Gelu(Var),
    Tanh(Var),
    Sigmoid(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
    },
    Rows(Var, usize),
    StackRows(Vec<Var>),
    RowDiff(Var),
    MeanRowNorm(Var),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Exact GELU, `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    x * std_normal_cdf(x)
}

fn gelu_grad(x: f64) -> f64 {
    std_normal_cdf(x) + x * std_normal_pdf(x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "add_row expects a 1 x c row");
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(v, Op::AddScalar(a))
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Normalizes every row over its columns, then applies `gamma` and `beta`
    /// (both `1 x c`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let c = xv.ncols() as f64;
        let mean = xv.sum_axis(Axis(1)) / c;
        let centered = xv - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / c;
        let inv_std = var.mapv(|v| 1.0 / (v + LAYER_NORM_EPS).sqrt());
        let xhat = centered * inv_std.view().insert_axis(Axis(1));
        let out = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Rows `start..end`.
    pub fn rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::Rows(a, start))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("stack_rows: column mismatch");
        self.push(v, Op::StackRows(parts.to_vec()))
    }

    /// Frame-to-frame differences, `out[t] = a[t+1] - a[t]`.
    pub fn row_diff(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.nrows();
        let v = &x.slice(s![1.., ..]) - &x.slice(s![..m - 1, ..]);
        self.push(v, Op::RowDiff(a))
    }

    /// Mean over rows of each row's Euclidean norm, as a 1x1 node.
    pub fn mean_row_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let total: f64 = x
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .sum::<f64>();
        let v = Array2::from_elem((1, 1), total / x.nrows() as f64);
        self.push(v, Op::MeanRowNorm(a))
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let x = self.value(v);
        assert_eq!(x.dim(), (1, 1), "not a scalar node");
        x[[0, 0]]
    }

    /// Gradients of the scalar node `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.shape(root), (1, 1), "backward from a non-scalar node");
        let mut grads: Vec<Option<Array2<f64>>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, -&g);
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, &g * self.value(*b));
                    acc(&mut grads, *b, &g * self.value(*a));
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *a, g.clone());
                }
                Op::Scale(a, k) => acc(&mut grads, *a, &g * *k),
                Op::AddScalar(a) => acc(&mut grads, *a, g.clone()),
                Op::Transpose(a) => acc(&mut grads, *a, g.t().to_owned()),
                Op::Gelu(a) => {
                    let d = self.value(*a).mapv(gelu_grad);
                    acc(&mut grads, *a, &g * &d);
                }
                Op::Tanh(a) => {
                    let d = node.value.mapv(|y| 1.0 - y * y);
                    acc(&mut grads, *a, &g * &d);
                }
                Op::Sigmoid(a) => {
                    let d = node.value.mapv(|y| y * (1.0 - y));
                    acc(&mut grads, *a, &g * &d);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let c = xhat.ncols() as f64;
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(
                        &mut grads,
                        *gamma,
                        (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)),
                    );
                    let dxhat = &g * self.value(*gamma);
                    let sum_d = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let sum_dx = (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let gx = (&dxhat * c - &sum_d - xhat * &sum_dx)
                        * &(inv_std / c).insert_axis(Axis(1));
                    acc(&mut grads, *x, gx);
                }
                Op::Rows(a, start) => {
                    let mut full = Array2::zeros(self.shape(*a));
                    full.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut grads, *a, full);
                }
                Op::StackRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let rows = self.shape(*p).0;
                        acc(&mut grads, *p, g.slice(s![offset..offset + rows, ..]).to_owned());
                        offset += rows;
                    }
                }
                Op::RowDiff(a) => {
                    let (m, c) = self.shape(*a);
                    let mut full = Array2::zeros((m, c));
                    full.slice_mut(s![1.., ..]).assign(&g);
                    let mut lower = full.slice_mut(s![..m - 1, ..]);
                    lower -= &g;
                    acc(&mut grads, *a, full);
                }
                Op::MeanRowNorm(a) => {
                    let x = self.value(*a);
                    let scale = g[[0, 0]] / x.nrows() as f64;
                    let mut gx = x.clone();
                    for mut row in gx.rows_mut() {
                        let norm = row.dot(&row).sqrt();
                        if norm > 0.0 {
                            row *= scale / norm;
                        } else {
                            row.fill(0.0);
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
            }
            grads[i] = Some(g);
        }
        Gradients { grads }
    }
}

#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient for `v`; `None` if `v` does not influence the root.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}
