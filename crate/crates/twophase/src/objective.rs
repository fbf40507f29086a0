//! The loss/gradient evaluation contract shared by all optimizers, plus
//! closed-form benchmark objectives and the adapters that turn models
//! into objectives.

use crate::diagnostics::{CostMeter, EvalKind};
use crate::models::{Dataset, MlpModel, ToyTanhTask, TwoLayerTask};
use crate::numerics::Vector;

/// Full-batch objective: loss and gradient at a parameter point.
///
/// `loss` must be a forward-only evaluation (line searches rely on it
/// being cheaper than `loss_grad`) and must agree exactly with the loss
/// returned by `loss_grad` at the same point.
pub trait Objective: Sync {
    /// Parameter dimension.
    fn dim(&self) -> usize;

    /// Number of training examples behind one full-batch evaluation.
    /// Closed-form objectives count as a single example.
    fn num_examples(&self) -> usize {
        1
    }

    /// Full-batch loss.
    fn loss(&self, params: &Vector) -> f64;

    /// Full-batch loss and gradient.
    fn loss_grad(&self, params: &Vector) -> (f64, Vector);
}

/// Objective that can also evaluate on a mini-batch of example indices.
pub trait BatchObjective: Objective {
    fn batch_loss_grad(&self, params: &Vector, idx: &[usize]) -> (f64, Vector);
}

/// Quadratic `f(x) = 0.5 x'Ax - b'x` with symmetric `A`; the standard
/// conjugate-gradient exactness benchmark.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    /// Row-major n x n symmetric matrix.
    pub a: Vec<f64>,
    pub b: Vector,
}

impl QuadraticObjective {
    pub fn new(a: Vec<f64>, b: Vector) -> Self {
        assert_eq!(a.len(), b.len() * b.len(), "QuadraticObjective: A must be n x n");
        QuadraticObjective { a, b }
    }

    /// `0.5 ||x||^2 - 0'x` in `n` dimensions (identity Hessian).
    pub fn identity(n: usize) -> Self {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        QuadraticObjective::new(a, Vector::zeros(n))
    }

    /// `A x` (used by tests for conjugacy checks as well).
    pub fn apply(&self, x: &Vector) -> Vector {
        let n = self.b.len();
        let mut out = Vector::zeros(n);
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
        out
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn loss(&self, params: &Vector) -> f64 {
        let ax = self.apply(params);
        0.5 * crate::numerics::dot(params, &ax) - crate::numerics::dot(&self.b, params)
    }

    fn loss_grad(&self, params: &Vector) -> (f64, Vector) {
        let ax = self.apply(params);
        let loss =
            0.5 * crate::numerics::dot(params, &ax) - crate::numerics::dot(&self.b, params);
        let grad = crate::numerics::axpy(-1.0, &self.b, &ax);
        (loss, grad)
    }
}

impl BatchObjective for QuadraticObjective {
    fn batch_loss_grad(&self, params: &Vector, _idx: &[usize]) -> (f64, Vector) {
        self.loss_grad(params)
    }
}

/// The classic banana-valley benchmark,
/// `f(x, y) = (1-x)^2 + 100 (y - x^2)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RosenbrockObjective;

impl Objective for RosenbrockObjective {
    fn dim(&self) -> usize {
        2
    }

    fn loss(&self, p: &Vector) -> f64 {
        let (x, y) = (p[0], p[1]);
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    }

    fn loss_grad(&self, p: &Vector) -> (f64, Vector) {
        let (x, y) = (p[0], p[1]);
        let loss = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
        let g = Vector::new(vec![
            -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
            200.0 * (y - x * x),
        ]);
        (loss, g)
    }
}

/// 1-D objective over the scaling parameter of a [`ToyTanhTask`].
#[derive(Debug, Clone, Copy)]
pub struct ToyObjective(pub ToyTanhTask);

impl Objective for ToyObjective {
    fn dim(&self) -> usize {
        1
    }

    fn loss(&self, p: &Vector) -> f64 {
        crate::models::toy_loss_grad(p[0], &self.0).0
    }

    fn loss_grad(&self, p: &Vector) -> (f64, Vector) {
        let (loss, g) = crate::models::toy_loss_grad(p[0], &self.0);
        (loss, Vector::new(vec![g]))
    }
}

impl BatchObjective for ToyObjective {
    fn batch_loss_grad(&self, params: &Vector, _idx: &[usize]) -> (f64, Vector) {
        self.loss_grad(params)
    }
}

/// 1-D objective over the scaling parameter of a [`TwoLayerTask`].
#[derive(Debug, Clone, Copy)]
pub struct TwoLayerObjective(pub TwoLayerTask);

impl Objective for TwoLayerObjective {
    fn dim(&self) -> usize {
        1
    }

    fn loss(&self, p: &Vector) -> f64 {
        crate::models::twolayer_loss_grad(p[0], &self.0).0
    }

    fn loss_grad(&self, p: &Vector) -> (f64, Vector) {
        let (loss, g) = crate::models::twolayer_loss_grad(p[0], &self.0);
        (loss, Vector::new(vec![g]))
    }
}

impl BatchObjective for TwoLayerObjective {
    fn batch_loss_grad(&self, params: &Vector, _idx: &[usize]) -> (f64, Vector) {
        self.loss_grad(params)
    }
}

/// MLP + dataset as an optimizable objective. The model's own stored
/// weights are only a template; evaluation uses the parameter vector
/// supplied by the optimizer.
pub struct MlpObjective<'a> {
    pub model: &'a MlpModel,
    pub data: &'a Dataset,
}

impl<'a> MlpObjective<'a> {
    pub fn new(model: &'a MlpModel, data: &'a Dataset) -> Self {
        assert!(!data.is_empty(), "MlpObjective: dataset must be nonempty");
        MlpObjective { model, data }
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.model.weights.len()
    }

    fn num_examples(&self) -> usize {
        self.data.len()
    }

    fn loss(&self, params: &Vector) -> f64 {
        self.model.loss_with(params, self.data, None)
    }

    fn loss_grad(&self, params: &Vector) -> (f64, Vector) {
        self.model.loss_grad_with(params, self.data, None)
    }
}

impl BatchObjective for MlpObjective<'_> {
    fn batch_loss_grad(&self, params: &Vector, idx: &[usize]) -> (f64, Vector) {
        self.model.loss_grad_with(params, self.data, Some(idx))
    }
}

/// Wrapper that charges a [`CostMeter`] for every evaluation, so cost
/// accounting happens at the objective boundary instead of inside each
/// optimizer.
pub struct Metered<'a, O: ?Sized> {
    inner: &'a O,
    meter: &'a CostMeter,
}

impl<'a, O: Objective + ?Sized> Metered<'a, O> {
    pub fn new(inner: &'a O, meter: &'a CostMeter) -> Self {
        Metered { inner, meter }
    }
}

impl<O: Objective + ?Sized> Objective for Metered<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn num_examples(&self) -> usize {
        self.inner.num_examples()
    }

    fn loss(&self, params: &Vector) -> f64 {
        self.meter
            .charge(EvalKind::Forward, self.inner.num_examples());
        self.inner.loss(params)
    }

    fn loss_grad(&self, params: &Vector) -> (f64, Vector) {
        self.meter
            .charge(EvalKind::Gradient, self.inner.num_examples());
        self.inner.loss_grad(params)
    }
}

impl<O: BatchObjective + ?Sized> BatchObjective for Metered<'_, O> {
    fn batch_loss_grad(&self, params: &Vector, idx: &[usize]) -> (f64, Vector) {
        self.meter.charge(EvalKind::Gradient, idx.len());
        self.inner.batch_loss_grad(params, idx)
    }
}
