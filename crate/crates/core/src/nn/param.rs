use serde::{Deserialize, Serialize};

use super::Scalar;

/// A learnable tensor together with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, shape: &[usize], value: Vec<T>) -> Self {
        let n = value.len();
        assert_eq!(n, shape.iter().product::<usize>(), "parameter shape mismatch");
        Param {
            name: name.into(),
            shape: shape.to_vec(),
            value,
            grad: vec![T::zero(); n],
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], fill: T) -> Self {
        let n = shape.iter().product();
        Param::new(name, shape, vec![fill; n])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn add_grad(&mut self, g: &[T]) {
        for (a, b) in self.grad.iter_mut().zip(g) {
            *a = *a + *b;
        }
    }
}

/// Anything that owns [`Param`]s, visited in a fixed order.
pub trait Parameterized<T: Scalar> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>));

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.len());
        n
    }

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |p| p.zero_grad());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed update count.
    pub step: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
        }
    }

    /// One bias-corrected update of every parameter from its stored gradient.
    pub fn step<T: Scalar, N: Parameterized<T> + ?Sized>(&mut self, net: &mut N) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::from_f64_lossy(self.beta1), T::from_f64_lossy(self.beta2));
        let (ob1, ob2) = (T::one() - b1, T::one() - b2);
        let (lr, eps) = (self.lr, self.eps);
        net.visit_params_mut(&mut |p| {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.m[i] = b1 * p.m[i] + ob1 * g;
                p.v[i] = b2 * p.v[i] + ob2 * g * g;
                let m_hat = p.m[i].as_f64() / c1;
                let v_hat = p.v[i].as_f64() / c2;
                let delta = lr * m_hat / (v_hat.sqrt() + eps);
                p.value[i] = p.value[i] - T::from_f64_lossy(delta);
            }
        });
    }
}
