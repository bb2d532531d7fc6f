//! Truncated power series and the increasing-tree generating functions.
//!
//! The tree-count EGF solves `tau'(z) = phi(tau(z))` with `tau(0) = 0`. Its
//! coefficients `t_n = tau_n / n!` are produced online, optionally rescaled as
//! `u_n = c^n t_n` so that float tables stay in range when `c` is the
//! singularity `R`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TreeModelSpec;
use crate::scalar::{Accumulator, Rational, Scalar};

/// Largest `n` for exact profile rows.
pub const RATIONAL_ROW_CAP: usize = 200;
/// Largest `n` for float profile rows.
pub const FLOAT_ROW_CAP: usize = 20_000;

/// Coefficients `c_0..=c_N` of a truncated series.
#[derive(Clone, Debug, PartialEq)]
pub struct Series<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> Series<S> {
    /// Builds a series of precision `coeffs.len() - 1`.
    pub fn new(coeffs: Vec<S>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least one coefficient");
        Series { coeffs }
    }

    pub fn zero(precision: usize) -> Self {
        Series::new(vec![S::zero(); precision + 1])
    }

    pub fn one(precision: usize) -> Self {
        let mut s = Self::zero(precision);
        s.coeffs[0] = S::one();
        s
    }

    pub fn from_fn(precision: usize, f: impl FnMut(usize) -> S) -> Self {
        Series::new((0..=precision).map(f).collect())
    }

    /// Index of the last known coefficient.
    pub fn precision(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> &S {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    pub fn truncate(&self, precision: usize) -> Self {
        Series::new(self.coeffs[..=precision.min(self.precision())].to_vec())
    }

    pub fn add(&self, other: &Self) -> Self {
        let p = self.precision().min(other.precision());
        Series::from_fn(p, |i| self.coeffs[i].add_ref(&other.coeffs[i]))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let p = self.precision().min(other.precision());
        Series::from_fn(p, |i| self.coeffs[i].sub_ref(&other.coeffs[i]))
    }

    pub fn scale(&self, factor: &S) -> Self {
        Series::new(self.coeffs.iter().map(|c| c.mul_ref(factor)).collect())
    }

    /// Cauchy product, truncated to the smaller precision.
    pub fn mul(&self, other: &Self) -> Self {
        let p = self.precision().min(other.precision());
        let a_lo = first_nonzero(&self.coeffs[..=p]);
        let b_lo = first_nonzero(&other.coeffs[..=p]);
        let mut out = vec![S::zero(); p + 1];
        if let (Some(a_lo), Some(b_lo)) = (a_lo, b_lo) {
            for (n, slot) in out.iter_mut().enumerate().skip(a_lo + b_lo) {
                let mut acc = S::acc();
                for i in a_lo..=n - b_lo {
                    acc.add_product(&self.coeffs[i], &other.coeffs[n - i]);
                }
                *slot = acc.value();
            }
        }
        Series::new(out)
    }

    /// `[z^n] (self * other)` without forming the product.
    pub fn product_coeff(&self, other: &Self, n: usize) -> S {
        assert!(n <= self.precision() && n <= other.precision());
        let mut acc = S::acc();
        for i in 0..=n {
            acc.add_product(&self.coeffs[i], &other.coeffs[n - i]);
        }
        acc.value()
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn inverse(&self) -> Result<Self> {
        if self.coeffs[0].is_zero() {
            return Err(Error::Series("inverse of a series with zero constant term".into()));
        }
        let p = self.precision();
        let inv0 = S::one().div_ref(&self.coeffs[0]);
        let mut out = vec![S::zero(); p + 1];
        out[0] = inv0.clone();
        for n in 1..=p {
            let mut acc = S::acc();
            for i in 1..=n {
                acc.add_product(&self.coeffs[i], &out[n - i]);
            }
            out[n] = -(acc.value().mul_ref(&inv0));
        }
        Ok(Series::new(out))
    }

    /// Termwise derivative; precision drops by one.
    pub fn derivative(&self) -> Self {
        if self.precision() == 0 {
            return Series::zero(0);
        }
        Series::from_fn(self.precision() - 1, |i| {
            self.coeffs[i + 1].mul_ref(&S::from_u64(i as u64 + 1))
        })
    }

    /// Antiderivative with zero constant; precision grows by one.
    pub fn integrate(&self) -> Self {
        Series::from_fn(self.precision() + 1, |i| {
            if i == 0 {
                S::zero()
            } else {
                self.coeffs[i - 1].div_ref(&S::from_u64(i as u64))
            }
        })
    }

    /// Logarithm of a series with constant term 1.
    pub fn log(&self) -> Result<Self> {
        if self.coeffs[0] != S::one() {
            return Err(Error::Series("log needs constant term 1".into()));
        }
        let p = self.precision();
        if p == 0 {
            return Ok(Series::zero(0));
        }
        // n b_n = n a_n - sum_{k=1}^{n-1} k b_k a_{n-k}
        let mut b = vec![S::zero(); p + 1];
        for n in 1..=p {
            let mut acc = S::acc();
            for k in 1..n {
                acc.add_product(&b[k].mul_ref(&S::from_u64(k as u64)), &self.coeffs[n - k]);
            }
            let nn = S::from_u64(n as u64);
            b[n] = self.coeffs[n].sub_ref(&acc.value().div_ref(&nn));
        }
        Ok(Series::new(b))
    }

    /// Exponential of a series with constant term 0.
    pub fn exp(&self) -> Result<Self> {
        if !self.coeffs[0].is_zero() {
            return Err(Error::Series("exp needs constant term 0".into()));
        }
        let p = self.precision();
        let mut b = vec![S::zero(); p + 1];
        b[0] = S::one();
        for n in 1..=p {
            let mut acc = S::acc();
            for k in 1..=n {
                if !self.coeffs[k].is_zero() {
                    acc.add_product(&self.coeffs[k].mul_ref(&S::from_u64(k as u64)), &b[n - k]);
                }
            }
            b[n] = acc.value().div_ref(&S::from_u64(n as u64));
        }
        Ok(Series::new(b))
    }

    /// `self^alpha = exp(alpha log self)` for a series with constant term 1.
    pub fn pow(&self, alpha: &S) -> Result<Self> {
        self.log()?.scale(alpha).exp()
    }
}

fn first_nonzero<S: Scalar>(c: &[S]) -> Option<usize> {
    c.iter().position(|x| !x.is_zero())
}

/// Degree function `phi` of an increasing-tree variety, with `phi(0) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum DegreeFunction {
    Polynomial(Vec<Rational>),
    /// `e^w`: recursive trees.
    Exponential,
    /// `1/(1-w)`: plane-oriented recursive trees.
    Plane,
    /// `1 - log(1-w)`: mobile trees.
    Mobile,
}

impl DegreeFunction {
    /// Degree function of a model, scaled so that `phi(0) = 1`. Scaling by a
    /// constant leaves the random-tree distribution unchanged.
    pub fn from_model(model: &TreeModelSpec) -> Result<Self> {
        match model {
            TreeModelSpec::Increasing { phi } => {
                let phi0 = phi[0].clone();
                Ok(DegreeFunction::Polynomial(phi.iter().map(|c| c / &phi0).collect()))
            }
            TreeModelSpec::Mobile => Ok(DegreeFunction::Mobile),
            TreeModelSpec::Recursive => Ok(DegreeFunction::Exponential),
            TreeModelSpec::Port => Ok(DegreeFunction::Plane),
            other => Err(Error::unsupported(
                "degree_function",
                other,
                "not an increasing-tree variety",
            )),
        }
    }

    /// `phi_r`.
    pub fn coefficient(&self, r: usize) -> Rational {
        match self {
            DegreeFunction::Polynomial(phi) => phi.get(r).cloned().unwrap_or_else(Rational::zero),
            DegreeFunction::Exponential => Rational::new(BigInt::one(), factorial(r)),
            DegreeFunction::Plane => Rational::one(),
            DegreeFunction::Mobile if r == 0 => Rational::one(),
            DegreeFunction::Mobile => Rational::new(BigInt::one(), BigInt::from(r)),
        }
    }

    /// Polynomial degree, if finite.
    pub fn degree(&self) -> Option<usize> {
        match self {
            DegreeFunction::Polynomial(phi) => Some(phi.len() - 1),
            _ => None,
        }
    }

    /// gcd of the exponents `j >= 1` with `phi_j > 0`; sizes with nonzero
    /// tree counts satisfy `n = 1 (mod period)`.
    pub fn period(&self) -> usize {
        match self {
            DegreeFunction::Polynomial(phi) => phi
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(_, c)| !c.is_zero())
                .fold(0usize, |g, (j, _)| g.gcd(&j)),
            _ => 1,
        }
    }

    /// Singularity `R` of the scaled tree function: `int_0^inf dv/phi(v)` for
    /// entire `phi`, `int_0^1 dv/phi(v)` when `phi` has radius 1.
    pub fn radius(&self) -> Result<f64> {
        match self {
            DegreeFunction::Exponential => Ok(1.0),
            DegreeFunction::Plane => Ok(0.5),
            DegreeFunction::Mobile => {
                // v = 1 - e^{-w}, then w = s/(1-s)
                let f = |s: f64| {
                    if s >= 1.0 {
                        0.0
                    } else {
                        (-s / (1.0 - s)).exp() / (1.0 - s)
                    }
                };
                adaptive_simpson(f, 0.0, 1.0, 1e-13)
            }
            DegreeFunction::Polynomial(phi) => {
                let c: Vec<f64> = phi.iter().map(crate::scalar::ratio_to_f64).collect();
                let d = c.len() - 1;
                let head = |v: f64| 1.0 / horner(&c, v);
                // tail v = 1/s: s^{d-2} / (s^d phi(1/s))
                let reversed: Vec<f64> = c.iter().rev().copied().collect();
                let tail = |s: f64| s.powi(d as i32 - 2) / horner(&reversed, s);
                Ok(adaptive_simpson(head, 0.0, 1.0, 1e-14)? + adaptive_simpson(tail, 0.0, 1.0, 1e-14)?)
            }
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn factorial(r: usize) -> BigInt {
    (1..=r).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Adaptive Simpson quadrature on `[a, b]` with absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if !delta.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        if depth == 0 {
            return Err(Error::Numerical("quadrature did not converge".into()));
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Online `[z^n] phi(T)` given `T` up to index `n`.
struct Composer<S> {
    kind: ComposerKind<S>,
}

enum ComposerKind<S> {
    /// powers[j][n] = [z^n] T^{j+1}
    Polynomial { phi: Vec<S>, powers: Vec<Vec<S>> },
    /// [z^n] e^T
    Exponential { e: Vec<S> },
    /// [z^n] 1/(1-T)
    Plane { f: Vec<S> },
    /// f = 1/(1-T), g = -log(1-T)
    Mobile { f: Vec<S>, g: Vec<S> },
}

impl<S: Scalar> Composer<S> {
    fn new(phi: &DegreeFunction) -> Self {
        let kind = match phi {
            DegreeFunction::Polynomial(c) => ComposerKind::Polynomial {
                phi: c.iter().map(S::from_ratio).collect(),
                powers: vec![Vec::new(); c.len() - 1],
            },
            DegreeFunction::Exponential => ComposerKind::Exponential { e: Vec::new() },
            DegreeFunction::Plane => ComposerKind::Plane { f: Vec::new() },
            DegreeFunction::Mobile => ComposerKind::Mobile {
                f: Vec::new(),
                g: Vec::new(),
            },
        };
        Composer { kind }
    }

    /// Extends the internal tables to index `n = t.len() - 1` and returns `[z^n] phi(T)`.
    fn next(&mut self, t: &[S]) -> S {
        let n = t.len() - 1;
        match &mut self.kind {
            ComposerKind::Polynomial { phi, powers } => {
                for j in 0..powers.len() {
                    let v = if j == 0 {
                        t[n].clone()
                    } else {
                        let prev = &powers[j - 1];
                        let mut acc = S::acc();
                        for k in 1..n {
                            acc.add_product(&t[k], &prev[n - k]);
                        }
                        acc.value()
                    };
                    powers[j].push(v);
                }
                let mut acc = S::acc();
                if n == 0 {
                    acc.add(&phi[0]);
                }
                for (j, p) in powers.iter().enumerate() {
                    acc.add_product(&phi[j + 1], &p[n]);
                }
                acc.value()
            }
            ComposerKind::Exponential { e } => {
                let v = if n == 0 {
                    S::one()
                } else {
                    let mut acc = S::acc();
                    for k in 1..=n {
                        acc.add_product(&t[k].mul_ref(&S::from_u64(k as u64)), &e[n - k]);
                    }
                    acc.value().div_ref(&S::from_u64(n as u64))
                };
                e.push(v.clone());
                v
            }
            ComposerKind::Plane { f } => {
                let v = plane_step(t, f);
                f.push(v.clone());
                v
            }
            ComposerKind::Mobile { f, g } => {
                let fv = plane_step(t, f);
                f.push(fv);
                let gv = if n == 0 {
                    S::zero()
                } else {
                    let mut acc = S::acc();
                    for k in 1..=n {
                        acc.add_product(&t[k].mul_ref(&S::from_u64(k as u64)), &f[n - k]);
                    }
                    acc.value().div_ref(&S::from_u64(n as u64))
                };
                g.push(gv.clone());
                if n == 0 {
                    S::one()
                } else {
                    gv
                }
            }
        }
    }
}

fn plane_step<S: Scalar>(t: &[S], f: &[S]) -> S {
    let n = t.len() - 1;
    if n == 0 {
        return S::one();
    }
    let mut acc = S::acc();
    for k in 1..=n {
        acc.add_product(&t[k], &f[n - k]);
    }
    acc.value()
}

/// Solves `T' = phi(T)`, `T(0) = 0`, for `u_k = c^k [z^k] T` with `k <= n`.
pub fn solve_tree_ode<S: Scalar>(phi: &DegreeFunction, n: usize, scale: &S) -> Result<Series<S>> {
    if n < 1 {
        return Err(Error::arg("n", "truncation order must be at least 1"));
    }
    if phi.coefficient(0) != Rational::one() {
        return Err(Error::Series("phi(0) must equal 1".into()));
    }
    let mut composer = Composer::<S>::new(phi);
    let mut u = vec![S::zero()];
    for k in 0..n {
        let c = composer.next(&u);
        u.push(c.mul_ref(scale).div_ref(&S::from_u64(k as u64 + 1)));
    }
    Ok(Series::new(u))
}

/// Exact tree count `tau_n`.
pub fn tau_exact(phi: &DegreeFunction, n: usize) -> Result<Rational> {
    let t = solve_tree_ode::<Rational>(phi, n.max(1), &Rational::one())?;
    Ok(t.coeff(n) * Rational::from_integer(factorial(n)))
}

/// Expected profile `mu_{n,0..=k_max}` of an increasing-tree variety.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfilePolynomialRow<S> {
    pub n: usize,
    pub coeffs: Vec<S>,
}

/// Expected-profile row from the bivariate generating function
/// `tau'^u * int tau'^{1-u}`, read off at `z^n`.
pub fn profile_row_increasing<S: Scalar>(
    model: &TreeModelSpec,
    n: usize,
    k_max: usize,
) -> Result<ProfilePolynomialRow<S>> {
    if !matches!(model, TreeModelSpec::Increasing { .. } | TreeModelSpec::Mobile) {
        return Err(Error::unsupported(
            "profile_row_increasing",
            model,
            "only increasing varieties and mobile trees",
        ));
    }
    let phi = DegreeFunction::from_model(model)?;
    profile_row_for::<S>(&phi, n, k_max)
}

/// Same as [`profile_row_increasing`] for an explicit degree function.
pub fn profile_row_for<S: Scalar>(phi: &DegreeFunction, n: usize, k_max: usize) -> Result<ProfilePolynomialRow<S>> {
    if n == 0 {
        return Err(Error::size(0, "trees have at least one node"));
    }
    let cap = if S::EXACT { RATIONAL_ROW_CAP } else { FLOAT_ROW_CAP };
    if n > cap {
        return Err(Error::size(n as u64, format!("profile rows are capped at n = {cap}")));
    }
    let scale = if S::EXACT {
        S::one()
    } else {
        S::from_ratio(&float_to_ratio(phi.radius()?))
    };
    let u = solve_tree_ode::<S>(phi, n + 1, &scale)?;
    if u.coeff(n).is_zero() {
        return Err(Error::size(n as u64, "no tree of this size exists in the variety"));
    }
    let d = u.derivative().scale(&S::one().div_ref(&scale));
    let a = d.log()?;
    let kk = k_max.min(n - 1);
    let mut powers = Vec::with_capacity(kk + 1);
    powers.push(Series::one(n));
    for j in 1..=kk {
        let next = powers[j - 1].mul(&a).scale(&S::one().div_ref(&S::from_u64(j as u64)));
        powers.push(next);
    }
    let b: Vec<Series<S>> = powers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let signed = if i % 2 == 0 { p.clone() } else { p.scale(&-S::one()) };
            d.mul(&signed).integrate()
        })
        .collect();
    let norm = scale.div_ref(u.coeff(n));
    let mut coeffs = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > kk {
            coeffs.push(S::zero());
            continue;
        }
        let mut acc = S::acc();
        for i in 0..=k {
            acc.add(&powers[k - i].product_coeff(&b[i], n));
        }
        coeffs.push(acc.value().mul_ref(&norm));
    }
    Ok(ProfilePolynomialRow { n, coeffs })
}

fn float_to_ratio(x: f64) -> Rational {
    Rational::from_float(x).expect("finite radius")
}

/// Expected profiles for all sizes `1..=n_max` from the expected number of
/// root children of each size: `mu_{n,k} = sum_j w_{n,j} mu_{j,k-1}` with
/// `w_{n,j} = t_j [z^{n-1-j}] phi'(T) / (n t_n)`.
pub fn expected_profile_by_children<S: Scalar>(
    phi: &DegreeFunction,
    n_max: usize,
    k_max: usize,
) -> Result<Vec<Vec<S>>> {
    let scale = S::one();
    let t = solve_tree_ode::<S>(phi, n_max.max(1), &scale)?;
    let p = n_max.max(1);
    let dphi = derivative_composition(phi, &t, p)?;
    let mut mu: Vec<Vec<S>> = vec![vec![S::zero(); k_max + 1]; n_max + 1];
    for n in 1..=n_max {
        mu[n][0] = S::one();
        if t.coeff(n).is_zero() {
            continue;
        }
        let denom = t.coeff(n).mul_ref(&S::from_u64(n as u64));
        let weights: Vec<S> = (1..n)
            .map(|j| t.coeff(j).mul_ref(dphi.coeff(n - 1 - j)).div_ref(&denom))
            .collect();
        for k in 1..=k_max {
            let mut acc = S::acc();
            for j in 1..n {
                acc.add_product(&weights[j - 1], &mu[j][k - 1]);
            }
            mu[n][k] = acc.value();
        }
    }
    Ok(mu)
}

/// `phi'(T(z))` to the given precision.
fn derivative_composition<S: Scalar>(phi: &DegreeFunction, t: &Series<S>, p: usize) -> Result<Series<S>> {
    let t = t.truncate(p);
    match phi {
        DegreeFunction::Polynomial(c) => {
            let mut out = Series::zero(p);
            let mut power = Series::one(p);
            for (r, cr) in c.iter().enumerate().skip(1) {
                let coef = S::from_ratio(cr).mul_ref(&S::from_u64(r as u64));
                out = out.add(&power.scale(&coef));
                power = power.mul(&t);
            }
            Ok(out)
        }
        DegreeFunction::Exponential => t.exp(),
        DegreeFunction::Plane => {
            let f = Series::one(p).sub(&t).inverse()?;
            Ok(f.mul(&f))
        }
        DegreeFunction::Mobile => Series::one(p).sub(&t).inverse(),
    }
}

/// Ratio of the exact `tau_n / n!` to its leading asymptotic form
/// `p / Gamma(1/(d-1)) * ((d-1) phi_d R)^{-1/(d-1)} * R^{-n} * n^{-(d-2)/(d-1)}`.
pub fn tau_asymptotic_ratio(model: &TreeModelSpec, n: usize) -> Result<f64> {
    let phi = DegreeFunction::from_model(model)?;
    let d = match (&phi, model) {
        (DegreeFunction::Polynomial(c), TreeModelSpec::Increasing { .. }) => c.len() - 1,
        _ => {
            return Err(Error::unsupported(
                "tau_asymptotic_ratio",
                model,
                "needs a polynomial degree function",
            ))
        }
    };
    let period = phi.period();
    if n % period != 1 % period {
        return Err(Error::size(n as u64, format!("tau_n vanishes unless n = 1 mod {period}")));
    }
    let r = phi.radius()?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Numerical("divergent quadrature for R".into()));
    }
    let u = solve_tree_ode::<f64>(&phi, n, &r)?;
    let phi_d = crate::scalar::ratio_to_f64(&phi.coefficient(d));
    let dm1 = (d - 1) as f64;
    let approx = period as f64 / statrs::function::gamma::gamma(1.0 / dm1)
        * (dm1 * phi_d * r).powf(-1.0 / dm1)
        * (n as f64).powf(-(d as f64 - 2.0) / dm1);
    Ok(u.coeff(n) / approx)
}

/// Converts small integers to `u64` for reporting.
pub fn rational_to_u64(r: &Rational) -> Option<u64> {
    if r.denom().is_one() {
        r.numer().to_u64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rational {
        rational(p, q)
    }

    fn rseries(c: &[(i64, i64)]) -> Series<Rational> {
        Series::new(c.iter().map(|&(p, q)| r(p, q)).collect())
    }

    #[test]
    fn log_of_geometric_series() {
        let geo = Series::from_fn(8, |_| Rational::one());
        let log = geo.log().unwrap();
        for j in 1..=8 {
            assert_eq!(log.coeff(j), &r(1, j as i64));
        }
        assert!(log.coeff(0).is_zero());
    }

    #[test]
    fn square_root_series() {
        // sqrt(1 - 2z) = 1 - z - z^2/2 - z^3/2 - 5z^4/8
        let a = rseries(&[(1, 1), (-2, 1), (0, 1), (0, 1), (0, 1)]);
        let s = a.pow(&r(1, 2)).unwrap();
        assert_eq!(s, rseries(&[(1, 1), (-1, 1), (-1, 2), (-1, 2), (-5, 8)]));
        assert_eq!(s.mul(&s), a);
    }

    #[test]
    fn integrate_is_termwise() {
        let a = rseries(&[(3, 1), (4, 1), (5, 1)]);
        assert_eq!(a.integrate(), rseries(&[(0, 1), (3, 1), (2, 1), (5, 3)]));
        assert_eq!(a.integrate().derivative(), a);
    }

    #[test]
    fn domain_errors() {
        let a = rseries(&[(2, 1), (1, 1)]);
        assert!(a.log().is_err());
        assert!(a.exp().is_err());
        assert!(Series::<Rational>::zero(3).inverse().is_err());
        let bad = DegreeFunction::Polynomial(vec![r(2, 1), r(1, 1), r(1, 1)]);
        assert!(solve_tree_ode::<Rational>(&bad, 4, &Rational::one()).is_err());
    }

    #[test]
    fn tree_counts() {
        assert_eq!(tau_exact(&DegreeFunction::Exponential, 4).unwrap(), r(6, 1));
        assert_eq!(tau_exact(&DegreeFunction::Plane, 3).unwrap(), r(3, 1));
        assert_eq!(tau_exact(&DegreeFunction::Mobile, 3).unwrap(), r(2, 1));
        // (2n-3)!! plane trees
        assert_eq!(tau_exact(&DegreeFunction::Plane, 6).unwrap(), r(945, 1));
        let binary = DegreeFunction::Polynomial(vec![r(1, 1), r(2, 1), r(1, 1)]);
        assert_eq!(tau_exact(&binary, 5).unwrap(), r(120, 1));
    }

    #[test]
    fn recursive_trees_count_factorials() {
        let t = solve_tree_ode::<Rational>(&DegreeFunction::Exponential, 30, &Rational::one()).unwrap();
        for n in 1..=30 {
            assert_eq!(t.coeff(n), &r(1, n as i64));
        }
    }

    #[test]
    fn radii() {
        let binary = DegreeFunction::Polynomial(vec![r(1, 1), r(2, 1), r(1, 1)]);
        assert!((binary.radius().unwrap() - 1.0).abs() < 1e-12);
        let cubic = DegreeFunction::Polynomial(vec![r(1, 1), r(3, 1), r(3, 1), r(1, 1)]);
        assert!((cubic.radius().unwrap() - 0.5).abs() < 1e-12);
        // Gompertz constant
        assert!((DegreeFunction::Mobile.radius().unwrap() - 0.596_347_362_323_194_1).abs() < 1e-12);
        // int_0^inf dv/(1+v^2) = pi/2
        let arctan = DegreeFunction::Polynomial(vec![r(1, 1), r(0, 1), r(1, 1)]);
        assert!((arctan.radius().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn period_from_support() {
        let p = DegreeFunction::Polynomial(vec![r(1, 1), r(0, 1), r(1, 1), r(0, 1), r(1, 1)]);
        assert_eq!(p.period(), 2);
        let t = solve_tree_ode::<Rational>(&p, 12, &Rational::one()).unwrap();
        for n in 1..=12 {
            assert_eq!(!t.coeff(n).is_zero(), n % 2 == 1, "n = {n}");
        }
    }

    #[test]
    fn tau_ratio_examples() {
        let binary = TreeModelSpec::Increasing {
            phi: vec![r(1, 1), r(2, 1), r(1, 1)],
        };
        let ratio = tau_asymptotic_ratio(&binary, 200).unwrap();
        assert!((ratio - 1.0).abs() < 1e-9, "{ratio}");
        let cubic = TreeModelSpec::Increasing {
            phi: vec![r(1, 1), r(3, 1), r(3, 1), r(1, 1)],
        };
        let ratio = tau_asymptotic_ratio(&cubic, 400).unwrap();
        assert!((ratio - 1.0).abs() < 2e-3, "{ratio}");
        let even = TreeModelSpec::Increasing {
            phi: vec![r(1, 1), r(0, 1), r(1, 1), r(0, 1), r(1, 1)],
        };
        assert!(tau_asymptotic_ratio(&even, 200).is_err());
        let ratio = tau_asymptotic_ratio(&even, 401).unwrap();
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn recursive_row_is_stirling() {
        // prod_{1<=j<4} (1 + u/j) = 1 + 11/6 u + u^2 + 1/6 u^3
        let row = profile_row_for::<Rational>(&DegreeFunction::Exponential, 4, 5).unwrap();
        assert_eq!(
            row.coeffs,
            vec![r(1, 1), r(11, 6), r(1, 1), r(1, 6), r(0, 1), r(0, 1)]
        );
    }

    #[test]
    fn mobile_row_small() {
        // n = 3: both mobile trees are a root with children {2,3} or a path
        let row = profile_row_increasing::<Rational>(&TreeModelSpec::Mobile, 3, 2).unwrap();
        assert_eq!(row.coeffs, vec![r(1, 1), r(3, 2), r(1, 2)]);
    }

    #[test]
    fn children_route_matches_generating_function() {
        for phi in [
            DegreeFunction::Mobile,
            DegreeFunction::Plane,
            DegreeFunction::Polynomial(vec![r(1, 1), r(1, 2), r(0, 1), r(3, 1)]),
        ] {
            let table = expected_profile_by_children::<Rational>(&phi, 12, 12).unwrap();
            for n in 1..=12 {
                let row = profile_row_for::<Rational>(&phi, n, 12);
                match row {
                    Ok(row) => assert_eq!(row.coeffs, table[n], "{phi:?} n = {n}"),
                    Err(_) => assert!(table[n][1..].iter().all(|c| c.is_zero())),
                }
            }
        }
    }

    #[test]
    fn float_rows_track_exact_rows() {
        let exact = profile_row_for::<Rational>(&DegreeFunction::Mobile, 40, 10).unwrap();
        let float = profile_row_for::<f64>(&DegreeFunction::Mobile, 40, 10).unwrap();
        for (e, f) in exact.coeffs.iter().zip(&float.coeffs) {
            let e = crate::scalar::ratio_to_f64(e);
            assert!((e - f).abs() <= 1e-10 * e.max(1.0), "{e} vs {f}");
        }
    }

    fn small_series() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-5i64..=5, 1..7)
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(tail in small_series()) {
            let mut c = vec![Rational::one()];
            c.extend(tail.iter().map(|&v| r(v, 1)));
            let a = Series::new(c);
            prop_assert_eq!(a.log().unwrap().exp().unwrap(), a.clone());
            prop_assert_eq!(a.pow(&Rational::one()).unwrap(), a);
        }

        #[test]
        fn product_uses_only_known_terms(a in small_series(), b in small_series(), extra in small_series()) {
            let sa = Series::new(a.iter().map(|&v| r(v, 1)).collect::<Vec<_>>());
            let sb = Series::new(b.iter().map(|&v| r(v, 1)).collect::<Vec<_>>());
            let p = sa.precision().min(sb.precision());
            let mut longer = a.clone();
            longer.extend(extra);
            let sl = Series::new(longer.iter().map(|&v| r(v, 1)).collect::<Vec<_>>());
            prop_assert_eq!(sa.mul(&sb).truncate(p), sl.mul(&sb).truncate(p));
        }
    }
}
