use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{Gradients, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
}

/// Ordered, named parameter arrays of one bundle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        let name = name.into();
        debug_assert!(self.params.iter().all(|p| p.name != name), "duplicate parameter {name}");
        self.params.push(Param { name, value });
        ParamId(self.params.len() - 1)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: (usize, usize),
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let value = Array2::from_shape_fn(shape, |_| rng.gen_range(-bound..bound));
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: (usize, usize)) -> ParamId {
        self.add(name, Array2::zeros(shape))
    }

    pub fn add_ones(&mut self, name: impl Into<String>, shape: (usize, usize)) -> ParamId {
        self.add(name, Array2::ones(shape))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Locates flat scalar index `i` as `(param, element)`.
    pub fn locate(&self, mut i: usize) -> (usize, usize) {
        for (p, param) in self.params.iter().enumerate() {
            if i < param.value.len() {
                return (p, i);
            }
            i -= param.value.len();
        }
        panic!("scalar index out of range");
    }

    pub fn scalar(&self, i: usize) -> f64 {
        let (p, e) = self.locate(i);
        self.params[p].value.as_slice().expect("standard layout")[e]
    }

    pub fn set_scalar(&mut self, i: usize, v: f64) {
        let (p, e) = self.locate(i);
        self.params[p].value.as_slice_mut().expect("standard layout")[e] = v;
    }

    /// Pushes every parameter onto `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.params.iter().map(|p| tape.leaf(p.value.clone())).collect())
    }

    /// Collects gradients for every parameter, zeros where unused.
    pub fn collect_grads(&self, bound: &Bound, grads: &Gradients) -> Vec<Array2<f64>> {
        self.params
            .iter()
            .zip(&bound.0)
            .map(|(p, &v)| grads.get(v).cloned().unwrap_or_else(|| Array2::zeros(p.value.dim())))
            .collect()
    }
}

/// Tape variables for the parameters of one forward pass.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}
