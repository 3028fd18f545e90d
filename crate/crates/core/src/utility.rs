use alloc::vec;
use alloc::vec::Vec;

use crate::model::{Alphabet, TabularWorld};
use crate::Error;

/// Non-negative utility `g(u, x, a)`, stored densely as `[u][x][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    nu: usize,
    nx: usize,
    na: usize,
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn new(nu: usize, nx: usize, na: usize, values: Vec<f64>) -> Result<Self, Error> {
        let expected = nu * nx * na;
        if values.len() != expected {
            return Err(Error::ShapeMismatch { what: "utility", expected, found: values.len() });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeUtility {
                    u: i / (nx * na),
                    x: (i / na) % nx,
                    a: i % na,
                    value: v,
                });
            }
        }
        Ok(Self { nu, nx, na, values })
    }

    pub fn from_fn<F>(nu: usize, nx: usize, na: usize, mut f: F) -> Result<Self, Error>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        let mut values = Vec::with_capacity(nu * nx * na);
        for u in 0..nu {
            for x in 0..nx {
                for a in 0..na {
                    values.push(f(u, x, a));
                }
            }
        }
        Self::new(nu, nx, na, values)
    }

    pub fn constant(nu: usize, nx: usize, na: usize, c: f64) -> Self {
        Self { nu, nx, na, values: vec![c; nu * nx * na] }
    }

    /// `g(u) = u`, reading each decision label as a number.
    pub fn u_value(u: &Alphabet, nx: usize, na: usize) -> Result<Self, Error> {
        let mut numeric = Vec::with_capacity(u.len());
        for label in u.labels() {
            let v: f64 = label
                .trim()
                .parse()
                .map_err(|_| Error::NonNumericLabel { label: label.clone() })?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NonNumericLabel { label: label.clone() });
            }
            numeric.push(v);
        }
        Self::from_fn(u.len(), nx, na, |ui, _, _| numeric[ui])
    }

    /// `g(u, x, a) = 1{u = a}` by label: the burden of being the chosen one.
    pub fn indicator_u_equals_a(u: &Alphabet, x: &Alphabet, a: &Alphabet) -> Self {
        let mut values = Vec::with_capacity(u.len() * x.len() * a.len());
        for ul in u.labels() {
            for _ in 0..x.len() {
                for al in a.labels() {
                    values.push(if ul == al { 1.0 } else { 0.0 });
                }
            }
        }
        Self { nu: u.len(), nx: x.len(), na: a.len(), values }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nu, self.nx, self.na)
    }

    #[inline]
    pub fn get(&self, u: usize, x: usize, a: usize) -> f64 {
        self.values[(u * self.nx + x) * self.na + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Result<Self, Error> {
        Self::new(self.nu, self.nx, self.na, self.values.iter().map(|v| v * c).collect())
    }

    pub fn depends_on_a(&self) -> bool {
        (0..self.nu).any(|u| {
            (0..self.nx).any(|x| (1..self.na).any(|a| self.get(u, x, a) != self.get(u, x, 0)))
        })
    }

    pub fn depends_on_x(&self) -> bool {
        (0..self.nu).any(|u| {
            (0..self.na).any(|a| (1..self.nx).any(|x| self.get(u, x, a) != self.get(u, 0, a)))
        })
    }

    pub fn is_function_of_u(&self) -> bool {
        !self.depends_on_a() && !self.depends_on_x()
    }

    pub(crate) fn check_shape(&self, world: &TabularWorld) -> Result<(), Error> {
        let expected = (world.u().len(), world.x().len(), world.a().len());
        if self.shape() != expected {
            return Err(Error::ShapeMismatch {
                what: "utility shape vs world",
                expected: expected.0 * expected.1 * expected.2,
                found: self.values.len(),
            });
        }
        Ok(())
    }
}
