//! Width-regularity constants and the leading-order width, profile and mode
//! predictions.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{log_n, TreeModelSpec};
use crate::scalar::{ratio_to_f64, Rational};

/// Euler's constant to 20 significant digits.
#[allow(clippy::excessive_precision)]
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;
pub const PI: f64 = std::f64::consts::PI;

/// Drift `v = f'(1)` and variance constant `sigma^2 = f'(1) + f''(1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConstants {
    pub v: f64,
    pub sigma2: f64,
    pub width_regular: bool,
    /// Exact values as `"p/q"` strings when the closed forms are rational.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactConstants>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactConstants {
    #[serde(with = "crate::scalar::ratio_string")]
    pub v: Rational,
    #[serde(with = "crate::scalar::ratio_string")]
    pub sigma2: Rational,
}

impl ModelConstants {
    fn from_exact(v: Rational, sigma2: Rational) -> Self {
        ModelConstants {
            v: ratio_to_f64(&v),
            sigma2: ratio_to_f64(&sigma2),
            width_regular: true,
            exact: Some(ExactConstants { v, sigma2 }),
        }
    }

    fn non_regular() -> Self {
        ModelConstants {
            v: f64::NAN,
            sigma2: f64::NAN,
            width_regular: false,
            exact: None,
        }
    }

    fn require_regular(&self, op: &'static str, model: &TreeModelSpec) -> Result<()> {
        if self.width_regular {
            Ok(())
        } else {
            Err(Error::unsupported(op, model, "the family is not width-regular"))
        }
    }
}

fn int(v: u64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// `sum_{j<=m} 1/j^order`.
pub fn harmonic(m: u64, order: u32) -> Rational {
    (1..=m).fold(Rational::zero(), |acc, j| {
        acc + Rational::new(BigInt::one(), BigInt::from(j).pow(order))
    })
}

pub fn model_constants(model: &TreeModelSpec) -> ModelConstants {
    match model {
        TreeModelSpec::Recursive => ModelConstants::from_exact(int(1), int(1)),
        TreeModelSpec::Port => {
            let half = Rational::new(BigInt::one(), BigInt::from(2));
            ModelConstants::from_exact(half.clone(), half)
        }
        TreeModelSpec::Quad { d } => {
            let d = int(*d as u64);
            ModelConstants::from_exact(int(2) / &d, int(2) / (&d * &d))
        }
        TreeModelSpec::Grid { m, d } => {
            let m = *m as u64;
            let d = int(*d as u64);
            let h1 = harmonic(m, 1) - int(1);
            let h2 = harmonic(m, 2) - int(1);
            let v = Rational::one() / (&d * &h1);
            let s2 = h2 / (&d * &d * &h1 * &h1 * &h1);
            ModelConstants::from_exact(v, s2)
        }
        TreeModelSpec::Mary { m, t } => {
            let s1 = (*m as u64) * (*t as u64 + 1);
            let h1 = harmonic(s1, 1) - harmonic(*t as u64 + 1, 1);
            let h2 = harmonic(s1, 2) - harmonic(*t as u64 + 1, 2);
            let v = Rational::one() / &h1;
            let s2 = h2 / (&h1 * &h1 * &h1);
            ModelConstants::from_exact(v, s2)
        }
        TreeModelSpec::Increasing { phi } => {
            let d = int(phi.len() as u64 - 1);
            let c = &d / (&d - int(1));
            ModelConstants::from_exact(c.clone(), c)
        }
        TreeModelSpec::Mobile => ModelConstants::non_regular(),
    }
}

/// Product form `prod_i (f + a_i)^d = K u` defining `f(u)` near `u = 1`.
#[derive(Clone, Debug)]
pub struct ImplicitEquation {
    offsets: Vec<f64>,
    power: f64,
    /// `ln K`, fixed so that `f(1) = 1`.
    log_k: f64,
}

impl ImplicitEquation {
    /// Grid trees: `((f+1)...(f+m-1))^d = m!^d u`.
    pub fn grid(m: u32, d: u32) -> Self {
        Self::with_offsets((1..m).map(f64::from).collect(), f64::from(d))
    }

    /// Generalized m-ary search trees:
    /// `(f+t+1)...(f+m(t+1)-1) = (m(t+1))!/(t+1)! u`.
    pub fn mary(m: u32, t: u32) -> Self {
        let hi = m * (t + 1) - 1;
        Self::with_offsets((t + 1..=hi).map(f64::from).collect(), 1.0)
    }

    pub fn for_model(model: &TreeModelSpec) -> Option<Self> {
        match model {
            TreeModelSpec::Grid { m, d } => Some(Self::grid(*m, *d)),
            TreeModelSpec::Mary { m, t } => Some(Self::mary(*m, *t)),
            _ => None,
        }
    }

    fn with_offsets(offsets: Vec<f64>, power: f64) -> Self {
        let log_k = power * offsets.iter().map(|a| (1.0 + a).ln()).sum::<f64>();
        ImplicitEquation {
            offsets,
            power,
            log_k,
        }
    }

    /// `d sum ln(f + a_i) - ln K - ln u`.
    fn residual(&self, f: f64, u: f64) -> f64 {
        self.power * self.offsets.iter().map(|a| (f + a).ln()).sum::<f64>() - self.log_k - u.ln()
    }

    fn s1(&self, f: f64) -> f64 {
        self.offsets.iter().map(|a| 1.0 / (f + a)).sum()
    }

    fn s2(&self, f: f64) -> f64 {
        self.offsets.iter().map(|a| 1.0 / ((f + a) * (f + a))).sum()
    }

    /// Solves for `f(u)` by damped Newton iteration from `f = 1`.
    pub fn solve(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Err(Error::arg("u", "must be positive"));
        }
        let lower = -self.offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let mut f = 1.0;
        for _ in 0..200 {
            let g = self.residual(f, u);
            let step = g / (self.power * self.s1(f));
            let mut lambda = 1.0;
            let mut next = f - step;
            while next <= lower && lambda > 1e-12 {
                lambda /= 2.0;
                next = f - lambda * step;
            }
            if (next - f).abs() <= 1e-15 * f.abs().max(1.0) {
                return Ok(next);
            }
            f = next;
        }
        let g = self.residual(f, u);
        if g.abs() < 1e-13 {
            Ok(f)
        } else {
            Err(Error::Numerical(format!("Newton iteration stalled at f = {f}, residual {g}")))
        }
    }

    /// `(f'(1), f'(1) + f''(1))` by implicit differentiation at the solved root.
    pub fn constants(&self) -> Result<(f64, f64)> {
        let u = 1.0;
        let f = self.solve(u)?;
        let s1 = self.s1(f);
        let ds1 = -self.s2(f);
        let f1 = 1.0 / (u * self.power * s1);
        let f2 = (-1.0 / (u * u) - self.power * ds1 * f1 * f1) / (self.power * s1);
        Ok((f1, f1 + f2))
    }
}

/// Leading Gaussian approximation
/// `n / sqrt(2 pi sigma^2 L_n) * exp(-Delta^2 / (2 sigma^2 L_n))`.
pub fn gaussian_profile(model: &TreeModelSpec, n: f64, k: f64) -> Result<f64> {
    let c = model_constants(model);
    c.require_regular("gaussian_profile", model)?;
    Ok(gaussian_profile_with(&c, n, k))
}

pub fn gaussian_profile_with(c: &ModelConstants, n: f64, k: f64) -> f64 {
    let l = log_n(n);
    let delta = k - c.v * l;
    n / (2.0 * PI * c.sigma2 * l).sqrt() * (-delta * delta / (2.0 * c.sigma2 * l)).exp()
}

/// `n / sqrt(2 pi sigma^2 L_n)`; mobile trees use `n / sqrt(2 pi log L_n)`.
pub fn expected_width_prediction(model: &TreeModelSpec, n: f64) -> Result<f64> {
    let c = model_constants(model);
    if !c.width_regular {
        return Err(Error::unsupported(
            "expected_width_prediction",
            model,
            "not width-regular; see mobile_width_scale",
        ));
    }
    Ok(n / (2.0 * PI * c.sigma2 * log_n(n)).sqrt())
}

/// Width scale `n / sqrt(2 pi log L_n)` for mobile trees.
pub fn mobile_width_scale(n: f64) -> f64 {
    n / (2.0 * PI * log_n(n).ln().max(f64::MIN_POSITIVE)).sqrt()
}

/// Mode and width-level prediction for recursive trees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModePrediction {
    pub k_hat: i64,
    pub width_level: i64,
    pub frac: f64,
    pub selector: i64,
}

/// Periodic selector polynomial
/// `p_l(x) = -(x - l - 3/2 + gamma)^2 / 2 - gamma/2 + pi^2/12 + 1/24`.
pub fn selector_polynomial(ell: i64, x: f64) -> f64 {
    let y = x - ell as f64 - 1.5 + EULER_GAMMA;
    -0.5 * y * y - EULER_GAMMA / 2.0 + PI * PI / 12.0 + 1.0 / 24.0
}

/// Level offset in `{-1, 0}` maximizing `p_l({L_n})`, ties going to `-1`.
pub fn selector(frac: f64) -> i64 {
    if frac <= 1.0 - EULER_GAMMA {
        -1
    } else {
        0
    }
}

pub fn mode_prediction(n: f64) -> Result<ModePrediction> {
    if n < 2.0 {
        return Err(Error::size(n as u64, "mode prediction needs n >= 2"));
    }
    let l = log_n(n);
    let frac = l - l.floor();
    let sel = selector(frac);
    Ok(ModePrediction {
        k_hat: (l - 1.0 + EULER_GAMMA).floor() as i64,
        width_level: l.floor() as i64 + sel,
        frac,
        selector: sel,
    })
}

/// Machine-checkable bundle of the width-regularity predictions at one size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WidthRegularityReport {
    pub model: TreeModelSpec,
    pub n: f64,
    pub l_n: f64,
    pub width_regular: bool,
    pub v: Option<f64>,
    pub sigma2: Option<f64>,
    pub expected_width: f64,
    /// `v L_n`, the centre of the mode window.
    pub mode_center: Option<f64>,
    /// `n^2 / L_n^3`, the scale bounding `Var(W_n)`.
    pub variance_scale: f64,
    pub mode: Option<ModePrediction>,
}

pub fn width_regularity_report(model: &TreeModelSpec, n: f64) -> WidthRegularityReport {
    let c = model_constants(model);
    let l = log_n(n);
    let regular = c.width_regular;
    WidthRegularityReport {
        model: model.clone(),
        n,
        l_n: l,
        width_regular: regular,
        v: regular.then_some(c.v),
        sigma2: regular.then_some(c.sigma2),
        expected_width: if regular {
            n / (2.0 * PI * c.sigma2 * l).sqrt()
        } else {
            mobile_width_scale(n)
        },
        mode_center: regular.then_some(c.v * l),
        variance_scale: n * n / (l * l * l),
        mode: match model {
            TreeModelSpec::Recursive => mode_prediction(n).ok(),
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model_spec;
    use crate::scalar::rational;

    fn exact(spec: &str) -> (Rational, Rational) {
        let c = model_constants(&parse_model_spec(spec).unwrap());
        let e = c.exact.unwrap();
        (e.v, e.sigma2)
    }

    #[test]
    fn closed_form_constants() {
        assert_eq!(exact("recursive"), (rational(1, 1), rational(1, 1)));
        assert_eq!(exact("port"), (rational(1, 2), rational(1, 2)));
        assert_eq!(exact("quad:d=2"), (rational(1, 1), rational(1, 2)));
        assert_eq!(exact("mary:m=2,t=1"), (rational(12, 7), rational(300, 343)));
        assert_eq!(exact("grid:m=2,d=3"), (rational(2, 3), rational(2, 9)));
        assert_eq!(exact("increasing:phi=1,2,1"), (rational(2, 1), rational(2, 1)));
        assert!(!model_constants(&TreeModelSpec::Mobile).width_regular);
    }

    #[test]
    fn implicit_solutions_match_harmonic_forms() {
        for m in 2..=6 {
            for d in 1..=3 {
                let (v, s2) = ImplicitEquation::grid(m, d).constants().unwrap();
                let c = model_constants(&TreeModelSpec::Grid { m, d });
                assert!((v - c.v).abs() < 1e-12 && (s2 - c.sigma2).abs() < 1e-12);
            }
        }
        let eq = ImplicitEquation::mary(3, 2);
        let f = eq.solve(2.5).unwrap();
        assert!(eq.residual(f, 2.5).abs() < 1e-13);
    }

    #[test]
    fn gaussian_peak_and_symmetry() {
        let model = TreeModelSpec::Recursive;
        let n = 1e5;
        let l = log_n(n);
        let peak = gaussian_profile(&model, n, l).unwrap();
        assert!((peak - n / (2.0 * PI * l).sqrt()).abs() < 1e-9 * peak);
        let a = gaussian_profile(&model, n, l + 1.7).unwrap();
        let b = gaussian_profile(&model, n, l - 1.7).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
        assert!(gaussian_profile(&TreeModelSpec::Mobile, n, 2.0).is_err());
    }

    #[test]
    fn expected_width_values() {
        let e = std::f64::consts::E;
        let w = expected_width_prediction(&TreeModelSpec::Recursive, e).unwrap();
        assert!((w - e / (2.0 * PI).sqrt()).abs() < 1e-12);
        let w = expected_width_prediction(&TreeModelSpec::Recursive, 1e6).unwrap();
        assert!((w - 107_334.0).abs() < 50.0, "{w}");
        let wp = expected_width_prediction(&TreeModelSpec::Port, 1e6).unwrap();
        assert!((wp - 1e6 / (PI * 1e6f64.ln()).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn mode_prediction_regimes() {
        let p = mode_prediction(1e7).unwrap();
        assert_eq!((p.selector, p.width_level, p.k_hat), (-1, 15, 15));
        let p = mode_prediction(404_960.0).unwrap();
        assert_eq!((p.selector, p.width_level), (0, 12));
        let x = 1.0 - EULER_GAMMA;
        assert!((selector_polynomial(-1, x) - selector_polynomial(0, x)).abs() < 1e-15);
    }

    #[test]
    fn selector_is_global_argmax() {
        for i in 0..10_000 {
            let x = i as f64 / 9_999.0;
            let best = (-5..=5)
                .max_by(|&a, &b| {
                    selector_polynomial(a, x)
                        .partial_cmp(&selector_polynomial(b, x))
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .unwrap();
            assert!(best == -1 || best == 0);
            if (x - (1.0 - EULER_GAMMA)).abs() > 1e-12 {
                assert_eq!(best, selector(x), "x = {x}");
            }
        }
    }

    #[test]
    fn mobile_report_substitutes_scale() {
        let r = width_regularity_report(&TreeModelSpec::Mobile, 1e4);
        assert!(!r.width_regular);
        assert!((r.expected_width - mobile_width_scale(1e4)).abs() < 1e-9);
        let g = width_regularity_report(&parse_model_spec("grid:m=2,d=2").unwrap(), 1e5);
        let q = width_regularity_report(&parse_model_spec("quad:d=2").unwrap(), 1e5);
        assert_eq!((g.expected_width, g.mode_center), (q.expected_width, q.mode_center));
    }
}
