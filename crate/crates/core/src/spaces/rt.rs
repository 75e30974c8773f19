//! Raviart–Thomas reference element.
//!
//! Index `k` is the degree of the normal trace on each edge, so `RT_0` is the
//! lowest-order space with one flux per edge. The local space is
//! `P_k^2 + x P_k` of dimension `(k+1)(k+3)`.
//!
//! Degrees of freedom: for each reference edge `i` (from vertex `i` to vertex
//! `i+1`) the moments `int v.n P_j(t) ds`, `j = 0..=k`, with `n` the outward
//! unit normal and `P_j` the shifted Legendre polynomial in the edge
//! parameter `t`; then the interior moments of both components against
//! `P_{k-1}`.

use crate::quadrature::{edge_rule, triangle_rule};
use crate::scalar::Real;

use super::dense::invert;

/// Legendre polynomial `P_n(s)` and its derivative on `[-1, 1]`.
pub fn legendre<T: Real>(n: usize, s: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let (mut p0, mut p1) = (T::one(), s);
    let (mut d0, mut d1) = (T::zero(), T::one());
    for m in 1..n {
        let mf = T::of(m);
        let two_m1 = T::of(2 * m + 1);
        let p2 = (two_m1 * s * p1 - mf * p0) / (mf + T::one());
        let d2 = d0 + two_m1 * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Shifted Legendre polynomial on `[0, 1]`.
pub fn shifted_legendre<T: Real>(n: usize, t: T) -> T {
    legendre(n, T::lit(2.0) * t - T::one()).0
}

/// Scaled tangents of the reference edges; `(t_y, -t_x)` is the outward
/// normal times the edge length.
const EDGE_START: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
const EDGE_TANGENT: [[f64; 2]; 3] = [[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]];

#[derive(Debug, Clone)]
pub struct RtReference<T> {
    index: usize,
    /// Reciprocal L2 norms of the orthogonal polynomials spanning `P_k`.
    scale: Vec<T>,
    /// Row `i` holds the coefficients of basis function `i` in the spanning
    /// set `[(q,0) for q in P_k] ++ [(0,q) for q in P_k] ++ [x q]` where the
    /// last block runs over the degree-`k` members only.
    coeffs: Vec<T>,
}

impl<T: Real> RtReference<T> {
    pub fn new(index: usize) -> Self {
        let k = index;
        let np = (k + 1) * (k + 2) / 2;
        let mut scale = vec![T::zero(); np];
        let trule = triangle_rule::<T>(2 * k + 2).expect("triangle rule");
        let mut poly = Vec::new();
        for (x, &w) in trule.points.iter().zip(&trule.weights) {
            dubiner(k, *x, &mut poly);
            for (s, p) in scale.iter_mut().zip(&poly) {
                *s += w * p.0 * p.0;
            }
        }
        for s in scale.iter_mut() {
            *s = T::one() / s.sqrt();
        }
        let mut me = RtReference {
            index,
            scale,
            coeffs: Vec::new(),
        };
        let n = me.len();
        // Vandermonde: dof_i(span_j).
        let mut vander = vec![T::zero(); n * n];
        let mut span_vals = vec![[T::zero(); 2]; n];
        let mut span_divs = vec![T::zero(); n];

        let erule = edge_rule::<T>(2 * k + 1).expect("edge rule");
        for e in 0..3 {
            let start = EDGE_START[e].map(T::lit);
            let tan = EDGE_TANGENT[e].map(T::lit);
            let normal = [tan[1], -tan[0]];
            for (&t, &w) in erule.points.iter().zip(&erule.weights) {
                let x = [start[0] + t * tan[0], start[1] + t * tan[1]];
                me.eval_span(x, &mut span_vals, &mut span_divs);
                for j in 0..=k {
                    let pj = shifted_legendre(j, t);
                    let row = e * (k + 1) + j;
                    for (c, v) in span_vals.iter().enumerate() {
                        vander[row * n + c] += w * pj * (v[0] * normal[0] + v[1] * normal[1]);
                    }
                }
            }
        }
        if k > 0 {
            let first = 3 * (k + 1);
            let ntest = k * (k + 1) / 2;
            for (x, &w) in trule.points.iter().zip(&trule.weights) {
                me.eval_span(*x, &mut span_vals, &mut span_divs);
                dubiner(k - 1, *x, &mut poly);
                for m in 0..ntest {
                    let q = poly[m].0 * me.scale[m];
                    for comp in 0..2 {
                        let row = first + 2 * m + comp;
                        for (c, v) in span_vals.iter().enumerate() {
                            vander[row * n + c] += w * q * v[comp];
                        }
                    }
                }
            }
        }
        let inv = invert(&vander, n).expect("RT dual basis is unisolvent");
        // basis_i = sum_j inv[j][i] span_j
        let mut coeffs = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                coeffs[i * n + j] = inv[j * n + i];
            }
        }
        me.coeffs = coeffs;
        me
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Local dimension `(k+1)(k+3)`.
    pub fn len(&self) -> usize {
        (self.index + 1) * (self.index + 3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_edge_dofs(&self) -> usize {
        self.index + 1
    }

    pub fn num_interior(&self) -> usize {
        self.index * (self.index + 1)
    }

    fn eval_span(&self, x: [T; 2], vals: &mut [[T; 2]], divs: &mut [T]) {
        let k = self.index;
        let np = self.scale.len();
        let mut poly = Vec::with_capacity(np);
        dubiner(k, x, &mut poly);
        for (m, &(q, dq)) in poly.iter().enumerate() {
            let (q, dq) = (q * self.scale[m], [dq[0] * self.scale[m], dq[1] * self.scale[m]]);
            vals[m] = [q, T::zero()];
            divs[m] = dq[0];
            vals[np + m] = [T::zero(), q];
            divs[np + m] = dq[1];
            if m >= np - (k + 1) {
                let idx = 2 * np + m - (np - (k + 1));
                vals[idx] = [x[0] * q, x[1] * q];
                divs[idx] = T::lit(2.0) * q + x[0] * dq[0] + x[1] * dq[1];
            }
        }
    }

    /// Reference basis values and divergences at `x`.
    pub fn eval(&self, x: [T; 2], values: &mut [[T; 2]], divs: &mut [T]) {
        let n = self.len();
        let mut sv = vec![[T::zero(); 2]; n];
        let mut sd = vec![T::zero(); n];
        self.eval_span(x, &mut sv, &mut sd);
        for i in 0..n {
            let row = &self.coeffs[i * n..(i + 1) * n];
            let mut v = [T::zero(); 2];
            let mut d = T::zero();
            for j in 0..n {
                v[0] += row[j] * sv[j][0];
                v[1] += row[j] * sv[j][1];
                d += row[j] * sd[j];
            }
            values[i] = v;
            divs[i] = d;
        }
    }
}

/// Orthogonal (Dubiner) polynomials of total degree `<= k` on the reference
/// triangle with gradients, ordered by degree. Entry `(m, n)` is
/// `(1-y)^m P_m(2x/(1-y) - 1) P_n^{(2m+1,0)}(2y-1)`, written with the scaled
/// Legendre recurrence so it stays polynomial at `y = 1`.
fn dubiner<T: Real>(k: usize, x: [T; 2], out: &mut Vec<(T, [T; 2])>) {
    out.clear();
    let two = T::lit(2.0);
    let t = T::one() - x[1];
    let s = two * x[0] - t;
    // Scaled Legendre L_m(x, t) and its partials in x and t.
    let mut l = vec![(T::one(), T::zero(), T::zero())];
    if k >= 1 {
        l.push((s, two, -T::one()));
    }
    for m in 1..k {
        let (c1, c2) = (T::of(2 * m + 1) / T::of(m + 1), T::of(m) / T::of(m + 1));
        let (lm, lmx, lmt) = l[m];
        let (lp, lpx, lpt) = l[m - 1];
        l.push((
            c1 * s * lm - c2 * t * t * lp,
            c1 * (two * lm + s * lmx) - c2 * t * t * lpx,
            c1 * (-lm + s * lmt) - c2 * (two * t * lp + t * t * lpt),
        ));
    }
    let b = two * x[1] - T::one();
    let mut jac = Vec::with_capacity(k + 1);
    for d in 0..=k {
        for m in 0..=d {
            let n = d - m;
            let alpha = T::of(2 * m + 1);
            jacobi(n, alpha, b, &mut jac);
            let (p, dp) = jac[n];
            let (lv, lx, lt) = l[m];
            out.push((lv * p, [lx * p, -lt * p + lv * two * dp]));
        }
    }
}

/// Jacobi polynomials `P_j^{(alpha,0)}(s)` with derivatives for `j <= n`.
fn jacobi<T: Real>(n: usize, alpha: T, s: T, out: &mut Vec<(T, T)>) {
    out.clear();
    out.push((T::one(), T::zero()));
    if n == 0 {
        return;
    }
    let two = T::lit(2.0);
    out.push((((alpha + two) * s + alpha) / two, (alpha + two) / two));
    for j in 2..=n {
        let jf = T::of(j);
        let c = two * jf + alpha;
        let denom = two * jf * (jf + alpha) * (c - two);
        let a = (c - T::one()) * c * (c - two) / denom;
        let bb = (c - T::one()) * alpha * alpha / denom;
        let cc = two * (jf + alpha - T::one()) * (jf - T::one()) * c / denom;
        let (p1, d1) = out[j - 1];
        let (p2, d2) = out[j - 2];
        out.push(((a * s + bb) * p1 - cc * p2, a * p1 + (a * s + bb) * d1 - cc * d2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_values() {
        let s = 0.3_f64;
        assert!((legendre(2, s).0 - (1.5 * s * s - 0.5)).abs() < 1e-15);
        assert!((legendre(3, s).1 - (7.5 * s * s - 1.5)).abs() < 1e-14);
    }

    #[test]
    fn dimensions() {
        for k in 0..7 {
            let r = RtReference::<f64>::new(k);
            assert_eq!(r.len(), (k + 1) * (k + 3));
            assert_eq!(3 * r.num_edge_dofs() + r.num_interior(), r.len());
        }
    }

    #[test]
    fn duality() {
        for k in 0..9 {
            let r = RtReference::<f64>::new(k);
            let n = r.len();
            let rule = edge_rule::<f64>(2 * k + 2).unwrap();
            let mut v = vec![[0.0; 2]; n];
            let mut d = vec![0.0; n];
            for e in 0..3 {
                for j in 0..=k {
                    let mut moments = vec![0.0; n];
                    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                        let tan = EDGE_TANGENT[e];
                        let x = [EDGE_START[e][0] + t * tan[0], EDGE_START[e][1] + t * tan[1]];
                        r.eval(x, &mut v, &mut d);
                        for i in 0..n {
                            moments[i] += w * shifted_legendre(j, t) * (v[i][0] * tan[1] - v[i][1] * tan[0]);
                        }
                    }
                    let row = e * (k + 1) + j;
                    for (i, m) in moments.iter().enumerate() {
                        let expected = if i == row { 1.0 } else { 0.0 };
                        assert!((m - expected).abs() < 1e-10, "k={k} e={e} j={j} i={i} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let r = RtReference::<f64>::new(2);
        let n = r.len();
        let x = [0.3, 0.2];
        let h = 1e-6;
        let mut v = vec![[0.0; 2]; n];
        let mut d = vec![0.0; n];
        let mut vp = vec![[0.0; 2]; n];
        let mut vm = vec![[0.0; 2]; n];
        r.eval(x, &mut v, &mut d);
        let mut fd = vec![0.0; n];
        r.eval([x[0] + h, x[1]], &mut vp, &mut vec![0.0; n]);
        r.eval([x[0] - h, x[1]], &mut vm, &mut vec![0.0; n]);
        for i in 0..n {
            fd[i] += (vp[i][0] - vm[i][0]) / (2.0 * h);
        }
        r.eval([x[0], x[1] + h], &mut vp, &mut vec![0.0; n]);
        r.eval([x[0], x[1] - h], &mut vm, &mut vec![0.0; n]);
        for i in 0..n {
            fd[i] += (vp[i][1] - vm[i][1]) / (2.0 * h);
            assert!((fd[i] - d[i]).abs() < 1e-5 * (1.0 + d[i].abs()));
        }
    }
}
