//! Fields sampled on uniform grids over `[0,1)^n` and their binary format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"AQCF";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Domain {
    /// Periodic `[0,1)^n`.
    #[default]
    Torus,
    /// The box `[0,1]^n`; values outside are treated as zero.
    ZeroExtendedBox,
    /// The closed box `[0,1]^n` sampled at the vertices `i / (S - 1)`.
    ClosedBox,
}

/// Vector-valued samples on a uniform grid. Values are component-major and
/// row-major within each component (the last axis varies fastest). Sample
/// `i` along an axis of size `S` sits at `i / S`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T: Real> {
    shape: Vec<usize>,
    components: usize,
    values: Vec<T>,
    pub domain: Domain,
    pub mean_zero: bool,
}

impl<T: Real> GridField<T> {
    pub fn new(shape: Vec<usize>, components: usize, values: Vec<T>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        for &s in &shape {
            if s < 2 || !s.is_power_of_two() {
                return Err(Error::InvalidArgument(format!(
                    "grid sizes must be powers of two >= 2, got {s}"
                )));
            }
        }
        if components == 0 {
            return Err(Error::InvalidArgument("field needs at least one component".into()));
        }
        let points: usize = shape.iter().product();
        if values.len() != points * components {
            return Err(Error::DimensionMismatch {
                context: "field values",
                expected: points * components,
                found: values.len(),
            });
        }
        Ok(Self {
            shape,
            components,
            values,
            domain: Domain::Torus,
            mean_zero: false,
        })
    }

    pub fn zeros(shape: Vec<usize>, components: usize) -> Result<Self> {
        let len = shape.iter().product::<usize>() * components;
        Self::new(shape, components, vec![T::zero(); len])
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(shape: Vec<usize>, components: usize, f: impl Fn(&[f64], &mut [T])) -> Result<Self> {
        let mut field = Self::zeros(shape, components)?;
        let points = field.points();
        let mut x = vec![0.0; field.n()];
        let mut out = vec![T::zero(); components];
        for p in 0..points {
            field.coordinate_into(p, &mut x);
            f(&x, &mut out);
            for (c, v) in out.iter().enumerate() {
                field.values[c * points + p] = *v;
            }
        }
        Ok(field)
    }

    pub fn n(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[T] {
        let p = self.points();
        &self.values[c * p..(c + 1) * p]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [T] {
        let p = self.points();
        &mut self.values[c * p..(c + 1) * p]
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.shape.iter().map(|&s| 1.0 / s as f64).product()
    }

    /// Multi-index of the flat point index `p`.
    pub fn unravel(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n()];
        for a in (0..self.n()).rev() {
            idx[a] = p % self.shape[a];
            p /= self.shape[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn coordinate_into(&self, p: usize, x: &mut [f64]) {
        let mut q = p;
        for a in (0..self.n()).rev() {
            x[a] = (q % self.shape[a]) as f64 / self.shape[a] as f64;
            q /= self.shape[a];
        }
    }

    pub fn coordinate(&self, p: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        self.coordinate_into(p, &mut x);
        x
    }

    /// The vector value at point `p`.
    pub fn at(&self, p: usize) -> Vec<T> {
        let pts = self.points();
        (0..self.components).map(|c| self.values[c * pts + p]).collect()
    }

    /// Euclidean norm of the vector value at each point.
    pub fn pointwise_norms(&self) -> Vec<T> {
        let pts = self.points();
        (0..pts)
            .map(|p| {
                (0..self.components)
                    .fold(T::zero(), |acc, c| {
                        let v = self.values[c * pts + p];
                        acc + v * v
                    })
                    .sqrt()
            })
            .collect()
    }

    /// Grid quadrature of `g(|u(x)|)`.
    pub fn integrate_norm(&self, g: impl Fn(T) -> T) -> T {
        let vol = T::lit(self.cell_volume());
        self.pointwise_norms().into_iter().fold(T::zero(), |acc, r| acc + g(r)) * vol
    }

    pub fn l2_norm(&self) -> T {
        self.integrate_norm(|r| r * r).sqrt()
    }

    pub fn means(&self) -> Vec<T> {
        let inv = T::lit(1.0 / self.points() as f64);
        (0..self.components)
            .map(|c| self.component(c).iter().fold(T::zero(), |a, &b| a + b) * inv)
            .collect()
    }

    pub fn subtract_mean(&mut self) {
        for (c, m) in self.means().into_iter().enumerate() {
            for v in self.component_mut(c) {
                *v -= m;
            }
        }
        self.mean_zero = true;
    }

    pub fn is_mean_zero(&self, tol: f64) -> bool {
        self.means().iter().all(|m| m.as_f64().abs() <= tol)
    }

    /// `self + s * other`.
    pub fn axpy(&mut self, s: T, other: &GridField<T>) -> Result<()> {
        self.check_same_layout(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * *b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn check_same_layout(&self, other: &GridField<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::InvalidArgument(format!(
                "grid shapes differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        if self.components != other.components {
            return Err(Error::DimensionMismatch {
                context: "field components",
                expected: self.components,
                found: other.components,
            });
        }
        Ok(())
    }

    /// Relative L2 distance `|self - other| / |other|`.
    pub fn relative_l2_error(&self, reference: &GridField<T>) -> Result<T> {
        self.check_same_layout(reference)?;
        let mut num = T::zero();
        let mut den = T::zero();
        for (a, b) in self.values.iter().zip(&reference.values) {
            num += (*a - *b) * (*a - *b);
            den += *b * *b;
        }
        if den == T::zero() {
            return Ok(num.sqrt());
        }
        Ok((num / den).sqrt())
    }

    /// Pointwise multiplication by a scalar field (one component).
    pub fn multiply_by(&mut self, weight: &GridField<T>) -> Result<()> {
        if weight.shape != self.shape || weight.components != 1 {
            return Err(Error::InvalidArgument("weight must be a scalar field on the same grid".into()));
        }
        let pts = self.points();
        for c in 0..self.components {
            for p in 0..pts {
                self.values[c * pts + p] *= weight.values[p];
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> GridField<U> {
        GridField {
            shape: self.shape.clone(),
            components: self.components,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            domain: self.domain,
            mean_zero: self.mean_zero,
        }
    }

    /// Writes the binary `AQCF` format.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        if self.n() > u8::MAX as usize || self.components > u8::MAX as usize {
            return Err(Error::Format("too many axes or components for AQCF".into()));
        }
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.n() as u8, self.components as u8])?;
        for &s in &self.shape {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("missing AQCF magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported AQCF version {version}")));
        }
        let mut head = [0u8; 2];
        r.read_exact(&mut head)?;
        let (n, components) = (head[0] as usize, head[1] as usize);
        let mut shape = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut word)?;
            shape.push(u32::from_le_bytes(word) as usize);
        }
        let len = shape.iter().product::<usize>() * components;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        let mut field = Self::new(shape, components, values).map_err(|e| Error::Format(e.to_string()))?;
        field.mean_zero = field.is_mean_zero(1e-12);
        Ok(field)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
