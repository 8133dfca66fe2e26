//! Uniform knot grids and B-spline basis evaluation.
//!
//! Knot vectors carry `G` uniform intervals over `[lo, hi]` plus `k` extension
//! knots on each side that continue the same spacing. There are `G + k` basis
//! functions of degree `k`; on `[lo, hi]` they form a partition of unity, and
//! outside the domain the surviving bases are evaluated without error.

use serde::{Deserialize, Serialize};

use crate::error::{KanAftError, Result};

/// Highest supported spline degree.
pub const MAX_DEGREE: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
    intervals: usize,
    lo: f64,
    hi: f64,
}

/// Non-zero basis values at a point: `values[q]` is `B_{first + q, k}(x)`.
///
/// Indices outside `0..basis_count` are already zeroed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    pub first: isize,
    pub values: [f64; MAX_DEGREE + 1],
}

impl Default for LocalBasis {
    fn default() -> Self {
        LocalBasis {
            first: 0,
            values: [0.0; MAX_DEGREE + 1],
        }
    }
}

/// Builds a uniform grid of `intervals` pieces on `[lo, hi]` extended by `degree` knots per side.
pub fn make_grid(lo: f64, hi: f64, intervals: usize, degree: usize) -> Result<KnotVector> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(KanAftError::Domain(format!(
            "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if intervals == 0 {
        return Err(KanAftError::Domain("grid needs at least one interval".into()));
    }
    if degree > MAX_DEGREE {
        return Err(KanAftError::Config(format!(
            "spline degree {degree} exceeds the maximum {MAX_DEGREE}"
        )));
    }
    let h = (hi - lo) / intervals as f64;
    let len = intervals + 2 * degree + 1;
    let mut knots: Vec<f64> = (0..len)
        .map(|i| lo + (i as f64 - degree as f64) * h)
        .collect();
    knots[degree] = lo;
    knots[degree + intervals] = hi;
    Ok(KnotVector {
        knots,
        degree,
        intervals,
        lo,
        hi,
    })
}

impl KnotVector {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Number of basis functions, `G + k`.
    pub fn basis_count(&self) -> usize {
        self.intervals + self.degree
    }

    fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.intervals as f64
    }

    /// Knot `i`, continuing the uniform spacing past either end of the stored array.
    fn knot(&self, i: isize) -> f64 {
        if i >= 0 && (i as usize) < self.knots.len() {
            self.knots[i as usize]
        } else {
            self.lo + (i as f64 - self.degree as f64) * self.spacing()
        }
    }

    /// Checks the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || self.intervals == 0 || self.degree > MAX_DEGREE {
            return Err(KanAftError::Domain("invalid knot vector header".into()));
        }
        if self.knots.len() != self.intervals + 2 * self.degree + 1 {
            return Err(KanAftError::Domain(format!(
                "knot count {} does not match G + 2k + 1 = {}",
                self.knots.len(),
                self.intervals + 2 * self.degree + 1
            )));
        }
        if self.knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(KanAftError::Domain("knots must be non-decreasing".into()));
        }
        Ok(())
    }

    /// Index `m` of the knot span `[t_m, t_{m+1})` holding `x`. `x == hi` maps to the last
    /// interior span so the domain is closed on the right.
    fn span(&self, x: f64) -> isize {
        if x == self.hi {
            return (self.degree + self.intervals - 1) as isize;
        }
        let rel = (x - self.lo) / self.spacing();
        let mut m = rel.floor() as isize + self.degree as isize;
        // floor can land one span off when x sits on a knot up to rounding
        while x < self.knot(m) {
            m -= 1;
        }
        while x >= self.knot(m + 1) {
            m += 1;
        }
        m
    }

    /// Degree-`p` bases that are non-zero on span `m`, computed by the triangular
    /// Cox–de Boor scheme. Returns `B_{m-p+q, p}(x)` for `q = 0..=p`.
    fn local_values(&self, m: isize, x: f64, p: usize) -> [f64; MAX_DEGREE + 1] {
        let mut n = [0.0; MAX_DEGREE + 1];
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knot(m + 1 - j as isize);
            right[j] = self.knot(m + j as isize) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Non-zero bases at `x` in compact form.
    pub fn basis_local(&self, x: f64) -> Result<LocalBasis> {
        if !x.is_finite() {
            return Err(KanAftError::Domain(format!("cannot evaluate basis at {x}")));
        }
        Ok(self.basis_local_unchecked(x))
    }

    pub(crate) fn basis_local_unchecked(&self, x: f64) -> LocalBasis {
        let k = self.degree;
        let m = self.span(x);
        let mut values = self.local_values(m, x, k);
        let first = m - k as isize;
        let count = self.basis_count() as isize;
        for (q, v) in values.iter_mut().enumerate().take(k + 1) {
            let j = first + q as isize;
            if j < 0 || j >= count {
                *v = 0.0;
            }
        }
        LocalBasis { first, values }
    }

    /// All `G + k` basis values at `x`.
    pub fn basis_all(&self, x: f64) -> Result<Vec<f64>> {
        let local = self.basis_local(x)?;
        let mut out = vec![0.0; self.basis_count()];
        for q in 0..=self.degree {
            let j = local.first + q as isize;
            if j >= 0 && (j as usize) < out.len() {
                out[j as usize] = local.values[q];
            }
        }
        Ok(out)
    }

    /// Greville abscissae; using them as coefficients reproduces `f(x) = x`.
    pub fn greville(&self) -> Vec<f64> {
        let k = self.degree;
        (0..self.basis_count())
            .map(|j| {
                if k == 0 {
                    0.5 * (self.knots[j] + self.knots[j + 1])
                } else {
                    self.knots[j + 1..=j + k].iter().sum::<f64>() / k as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFunction {
    pub knots: KnotVector,
    pub coefficients: Vec<f64>,
}

impl SplineFunction {
    pub fn new(knots: KnotVector, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != knots.basis_count() {
            return Err(KanAftError::Shape {
                expected: knots.basis_count(),
                got: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(KanAftError::Domain("spline coefficients must be finite".into()));
        }
        Ok(SplineFunction {
            knots,
            coefficients,
        })
    }

    pub fn zeros(knots: KnotVector) -> Self {
        let n = knots.basis_count();
        SplineFunction {
            knots,
            coefficients: vec![0.0; n],
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let local = self.knots.basis_local(x)?;
        Ok(self.eval_local(&local))
    }

    /// Spline value from a precomputed local basis at the same point.
    pub fn eval_local(&self, local: &LocalBasis) -> f64 {
        let mut acc = 0.0;
        for q in 0..=self.knots.degree {
            let j = local.first + q as isize;
            if j >= 0 && (j as usize) < self.coefficients.len() {
                acc += self.coefficients[j as usize] * local.values[q];
            }
        }
        acc
    }

    /// Analytic first derivative in `x`.
    pub fn deriv_x(&self, x: f64) -> Result<f64> {
        if self.knots.degree == 0 {
            return Err(KanAftError::UnsupportedDegree(0));
        }
        if !x.is_finite() {
            return Err(KanAftError::Domain(format!("cannot differentiate at {x}")));
        }
        Ok(self.deriv_x_unchecked(x))
    }

    /// Derivative via degree `k-1` bases:
    /// `f'(x) = sum_j k (c_j - c_{j-1}) / (t_{j+k} - t_j) B_{j,k-1}(x)` with `c_{-1} = c_N = 0`.
    pub(crate) fn deriv_x_unchecked(&self, x: f64) -> f64 {
        let kv = &self.knots;
        let k = kv.degree;
        if k == 0 {
            return 0.0;
        }
        let m = kv.span(x);
        let lower = kv.local_values(m, x, k - 1);
        let n = self.coefficients.len() as isize;
        let coef = |j: isize| -> f64 {
            if j >= 0 && j < n {
                self.coefficients[j as usize]
            } else {
                0.0
            }
        };
        let mut acc = 0.0;
        for (q, b) in lower.iter().enumerate().take(k) {
            let j = m - (k as isize - 1) + q as isize;
            if j < 0 || j > n {
                continue;
            }
            let width = kv.knot(j + k as isize) - kv.knot(j);
            acc += k as f64 * (coef(j) - coef(j - 1)) / width * b;
        }
        acc
    }
}

pub fn basis_all(kv: &KnotVector, x: f64) -> Result<Vec<f64>> {
    kv.basis_all(x)
}

pub fn spline_eval(f: &SplineFunction, x: f64) -> Result<f64> {
    f.eval(x)
}

pub fn spline_deriv_x(f: &SplineFunction, x: f64) -> Result<f64> {
    f.deriv_x(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn assert_vec_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    /// Textbook recursive Cox–de Boor over the whole knot array, used as an oracle.
    fn cox_de_boor(knots: &[f64], j: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            return if knots[j] <= x && x < knots[j + 1] { 1.0 } else { 0.0 };
        }
        let mut out = 0.0;
        let d1 = knots[j + p] - knots[j];
        if d1 > 0.0 {
            out += (x - knots[j]) / d1 * cox_de_boor(knots, j, p - 1, x);
        }
        let d2 = knots[j + p + 1] - knots[j + 1];
        if d2 > 0.0 {
            out += (knots[j + p + 1] - x) / d2 * cox_de_boor(knots, j + 1, p - 1, x);
        }
        out
    }

    #[test]
    fn grid_examples() {
        assert_vec_close(make_grid(0.0, 1.0, 2, 0).unwrap().knots(), &[0.0, 0.5, 1.0], 0.0);
        assert_vec_close(
            make_grid(0.0, 1.0, 2, 1).unwrap().knots(),
            &[-0.5, 0.0, 0.5, 1.0, 1.5],
            0.0,
        );
        let kv = make_grid(-2.0, 2.0, 4, 3).unwrap();
        assert_eq!(kv.knots().len(), 11);
        let expected: Vec<f64> = (-5..=5).map(f64::from).collect();
        assert_vec_close(kv.knots(), &expected, 1e-15);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(make_grid(1.0, 1.0, 3, 3), Err(KanAftError::Domain(_))));
        assert!(matches!(make_grid(2.0, 1.0, 3, 3), Err(KanAftError::Domain(_))));
        assert!(matches!(make_grid(0.0, 1.0, 0, 3), Err(KanAftError::Domain(_))));
    }

    #[test]
    fn basis_examples() {
        let kv0 = make_grid(0.0, 1.0, 2, 0).unwrap();
        assert_vec_close(&kv0.basis_all(0.25).unwrap(), &[1.0, 0.0], 0.0);
        let kv1 = make_grid(0.0, 1.0, 2, 1).unwrap();
        assert_vec_close(&kv1.basis_all(0.25).unwrap(), &[0.5, 0.5, 0.0], 1e-15);
        let kv3 = make_grid(-1.0, 3.0, 5, 3).unwrap();
        let s: f64 = kv3.basis_all(1.0).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(kv3.basis_all(f64::NAN).is_err());
    }

    #[test]
    fn basis_matches_recursive_oracle_inside_and_outside() {
        let kv = make_grid(-1.3, 2.2, 5, 3).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..500 {
            let x = rng.gen_range(-6.0..7.0);
            let got = kv.basis_all(x).unwrap();
            for (j, g) in got.iter().enumerate() {
                let want = cox_de_boor(kv.knots(), j, 3, x);
                assert!((g - want).abs() < 1e-12, "x={x} j={j}: {g} vs {want}");
            }
        }
    }

    #[test]
    fn right_end_of_domain_is_closed() {
        for k in 0..=4 {
            let kv = make_grid(0.0, 1.0, 3, k).unwrap();
            let s: f64 = kv.basis_all(1.0).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "k={k}: {s}");
        }
    }

    #[test]
    fn spline_examples() {
        let kv = make_grid(0.0, 1.0, 2, 1).unwrap();
        let ones = SplineFunction::new(kv.clone(), vec![1.0; 3]).unwrap();
        assert!((ones.eval(0.3).unwrap() - 1.0).abs() < 1e-15);
        let zeros = SplineFunction::zeros(kv.clone());
        assert_eq!(zeros.eval(0.3).unwrap(), 0.0);
        let hat = SplineFunction::new(kv, vec![0.0, 1.0, 0.0]).unwrap();
        assert!((hat.eval(0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spline_rejects_bad_coefficients() {
        let kv = make_grid(0.0, 1.0, 2, 1).unwrap();
        assert!(matches!(
            SplineFunction::new(kv.clone(), vec![1.0; 2]),
            Err(KanAftError::Shape { .. })
        ));
        assert!(SplineFunction::new(kv, vec![1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn derivative_examples() {
        let kv = make_grid(-2.0, 2.0, 5, 3).unwrap();
        let flat = SplineFunction::new(kv.clone(), vec![0.7; 8]).unwrap();
        for x in [-1.9, -0.3, 0.0, 1.2, 2.0] {
            assert!(flat.deriv_x(x).unwrap().abs() < 1e-12);
        }
        let lin = SplineFunction::new(kv.clone(), kv.greville()).unwrap();
        for x in [-2.0, -1.1, 0.05, 1.7, 2.0] {
            assert!((lin.deriv_x(x).unwrap() - 1.0).abs() < 1e-10);
            assert!((lin.eval(x).unwrap() - x).abs() < 1e-10);
        }
        let k0 = SplineFunction::zeros(make_grid(0.0, 1.0, 2, 0).unwrap());
        assert!(matches!(k0.deriv_x(0.5), Err(KanAftError::UnsupportedDegree(0))));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let lo = rng.gen_range(-3.0..0.0);
            let hi = lo + rng.gen_range(0.5..4.0);
            let g = rng.gen_range(1..8);
            let k = rng.gen_range(1..5);
            let kv = make_grid(lo, hi, g, k).unwrap();
            let coefs = (0..kv.basis_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = SplineFunction::new(kv, coefs).unwrap();
            let x = rng.gen_range(lo..hi);
            let h = 1e-5 * (hi - lo);
            let fd = (f.eval(x + h).unwrap() - f.eval(x - h).unwrap()) / (2.0 * h);
            let an = f.deriv_x(x).unwrap();
            // k = 1 splines have kinks at knots; skip points straddling one
            if k == 1 && f.knots.knots().iter().any(|t| (t - x).abs() < h) {
                continue;
            }
            let err = (fd - an).abs() / an.abs().max(1.0);
            assert!(err < 1e-6, "fd {fd} vs analytic {an}");
        }
    }
}
