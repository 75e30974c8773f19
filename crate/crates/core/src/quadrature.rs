//! Gauss-type quadrature on the reference edge `[0, 1]` and the reference
//! triangle with vertices `(0,0)`, `(1,0)`, `(0,1)`.
//!
//! Triangle rules are collapsed (Duffy) products of Gauss-Legendre rules, so
//! every weight is positive and any degree can be produced from the same code.

use crate::scalar::Real;

/// Highest polynomial degree a rule can be requested for.
pub const MAX_DEGREE: usize = 30;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("quadrature degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    DegreeTooHigh(usize),
}

/// Quadrature rule on the reference triangle (weights sum to 1/2).
#[derive(Debug, Clone)]
pub struct QuadRule<T> {
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
    pub degree: usize,
}

/// Quadrature rule on `[0, 1]` (weights sum to 1).
#[derive(Debug, Clone)]
pub struct EdgeRule<T> {
    pub points: Vec<T>,
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Real> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(T, T) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w * f(p[0], p[1]))
            .sum()
    }
}

impl<T: Real> EdgeRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` with `n` points.
fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let two = T::lit(2.0);
    for i in 0..n.div_ceil(2) {
        let guess = (T::PI() * (T::of(i) + T::lit(0.75)) / (T::of(n) + T::lit(0.5))).cos();
        let mut z = guess;
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= T::epsilon() * T::lit(4.0) {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let weight = two / ((T::one() - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = T::zero();
    }
    (x, w)
}

/// Value and derivative of the Legendre polynomial of degree `n` at `z`.
fn legendre_with_derivative<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    if n == 0 {
        return (T::one(), T::zero());
    }
    for k in 2..=n {
        let kf = T::of(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = T::of(n) * (z * p1 - p0) / (z * z - T::one());
    (p1, d)
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `<= degree`.
pub fn edge_rule<T: Real>(degree: usize) -> Result<EdgeRule<T>, QuadratureError> {
    if degree > MAX_DEGREE {
        return Err(QuadratureError::DegreeTooHigh(degree));
    }
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre::<T>(n);
    let half = T::lit(0.5);
    Ok(EdgeRule {
        points: x.iter().map(|&z| half * (z + T::one())).collect(),
        weights: w.iter().map(|&wi| half * wi).collect(),
        degree,
    })
}

/// Rule on the reference triangle exact for bivariate polynomials of total
/// degree `<= degree`.
pub fn triangle_rule<T: Real>(degree: usize) -> Result<QuadRule<T>, QuadratureError> {
    if degree > MAX_DEGREE {
        return Err(QuadratureError::DegreeTooHigh(degree));
    }
    // The collapse x = u, y = (1-u) v adds one degree in u through the Jacobian.
    let outer = edge_rule::<T>(degree + 1)?;
    let inner = edge_rule::<T>(degree)?;
    let mut points = Vec::with_capacity(outer.len() * inner.len());
    let mut weights = Vec::with_capacity(outer.len() * inner.len());
    for (&u, &wu) in outer.points.iter().zip(&outer.weights) {
        for (&v, &wv) in inner.points.iter().zip(&inner.weights) {
            points.push([u, (T::one() - u) * v]);
            weights.push(wu * wv * (T::one() - u));
        }
    }
    Ok(QuadRule {
        points,
        weights,
        degree,
    })
}
