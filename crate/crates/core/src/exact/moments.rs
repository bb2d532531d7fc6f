use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::TreeModelSpec;
use crate::scalar::{Accumulator, Rational, Scalar};

use super::profile::expected_profile_dp;
use super::split::{split_distribution, SplitShape};
use super::ExactTable;

pub const MAX_MOMENT_ORDER: usize = 8;
pub const MAX_MOMENT_N: usize = 2000;

/// Where the second part of a two-way split sits.
#[derive(Clone, Copy)]
enum RightPart {
    /// `(n - j, k)`: recursive trees and PORTs.
    SameLevel,
    /// `(n - kappa - j, k - 1)`: binary branching families.
    Sibling { kappa: usize },
}

fn right_part(model: &TreeModelSpec) -> Result<RightPart> {
    match SplitShape::of(model)? {
        SplitShape::TwoPart => Ok(RightPart::SameLevel),
        SplitShape::Branching { h: 2, kappa, .. } => Ok(RightPart::Sibling { kappa }),
        SplitShape::Branching { h, .. } => Err(Error::unsupported(
            "central_moment_dp",
            model,
            format!("{h}-way splits need the joint subtree law; only two-way splits are supported"),
        )),
    }
}

/// Whether the model splits into two parts, as the moment recurrence needs.
pub fn supports_moment_dp(model: &TreeModelSpec) -> bool {
    right_part(model).is_ok()
}

/// `(a, b, c, m!/(a! b! c!))` with `a + b + c = m`, `a, b < m` and `a, b != 1`.
fn index_set(m: usize) -> Vec<(usize, usize, usize, u64)> {
    let fact = |x: usize| (1..=x as u64).product::<u64>();
    let mut out = Vec::new();
    for a in (0..m).filter(|&a| a != 1) {
        for b in (0..m - a + 1).filter(|&b| b != 1 && b < m) {
            let c = m - a - b;
            out.push((a, b, c, fact(m) / (fact(a) * fact(b) * fact(c))));
        }
    }
    out
}

type Tables<S> = Vec<Vec<Vec<S>>>;

/// Expected profile and central moments `P^{(m)}_{n,k}` for `m <= m_max`,
/// together with the inhomogeneous parts `Q^{(m)}_{n,k}`.
pub fn central_moment_dp<S: Scalar>(
    model: &TreeModelSpec,
    n_max: usize,
    k_max: usize,
    m_max: usize,
) -> Result<ExactTable<S>> {
    if m_max > MAX_MOMENT_ORDER {
        return Err(Error::arg("m_max", format!("moment order is capped at {MAX_MOMENT_ORDER}")));
    }
    if n_max > MAX_MOMENT_N {
        return Err(Error::size(n_max as u64, format!("moment tables are capped at n = {MAX_MOMENT_N}")));
    }
    right_part(model)?;
    let mut table = expected_profile_dp::<S>(model, n_max, k_max)?;
    let (p, q) = if S::EXACT {
        let mu = expected_profile_dp::<Rational>(model, n_max, k_max)?.mu;
        let (p, q) = integer_moment_tables(model, &mu, m_max)?;
        let back = |t: Tables<Rational>| -> Tables<S> {
            t.iter()
                .map(|rows| rows.iter().map(|row| row.iter().map(S::from_ratio).collect()).collect())
                .collect()
        };
        (back(p), back(q))
    } else {
        moment_tables(model, &table, m_max)?
    };
    table.pm = Some(p);
    table.q = Some(q);
    Ok(table)
}

/// Moment tables with entry-wise arithmetic in `S`.
fn moment_tables<S: Scalar>(
    model: &TreeModelSpec,
    table: &ExactTable<S>,
    m_max: usize,
) -> Result<(Tables<S>, Tables<S>)> {
    let right = right_part(model)?;
    let shape = SplitShape::of(model)?;
    let (n_max, k_max) = (table.n_max(), table.k_max());
    let zeros = || vec![vec![S::zero(); k_max + 1]; n_max + 1];
    let mut p: Vec<Vec<Vec<S>>> = (0..=m_max).map(|_| zeros()).collect();
    let mut q: Vec<Vec<Vec<S>>> = (0..=m_max).map(|_| zeros()).collect();
    for n in 0..=n_max {
        p[0][n] = vec![S::one(); k_max + 1];
    }
    let index_sets: Vec<Vec<(usize, usize, usize, S)>> = (0..=m_max)
        .map(|m| {
            if m < 2 {
                Vec::new()
            } else {
                index_set(m).into_iter().map(|(a, b, c, w)| (a, b, c, S::from_u64(w))).collect()
            }
        })
        .collect();
    let mu = &table.mu;
    let mut nabla_pow: Vec<S> = vec![S::zero(); m_max + 1];
    for n in 1..=n_max {
        if shape.is_bucket(n) {
            continue;
        }
        let law = split_distribution::<S>(model, n)?;
        let support: Vec<(usize, S)> = law.support().map(|(j, w)| (j, w.clone())).collect();
        for k in 1..=k_max {
            if mu[n][k].is_zero() {
                continue;
            }
            let mut p_acc: Vec<S::Acc> = (0..=m_max).map(|_| S::acc()).collect();
            let mut q_acc: Vec<S::Acc> = (0..=m_max).map(|_| S::acc()).collect();
            for (j, w) in &support {
                let (lj, lk) = (*j, k - 1);
                let (rj, rk) = match right {
                    RightPart::SameLevel => (n - j, k),
                    RightPart::Sibling { kappa } => (n - kappa - j, k - 1),
                };
                let nabla = mu[lj][lk].add_ref(&mu[rj][rk]).sub_ref(&mu[n][k]);
                nabla_pow[0] = S::one();
                for c in 1..=m_max {
                    nabla_pow[c] = nabla_pow[c - 1].mul_ref(&nabla);
                }
                for m in 2..=m_max {
                    let own = p[m][lj][lk].add_ref(&p[m][rj][rk]);
                    p_acc[m].add_product(w, &own);
                    let mut inner = S::acc();
                    for (a, b, c, coef) in &index_sets[m] {
                        let pa = &p[*a][lj][lk];
                        let pb = &p[*b][rj][rk];
                        if pa.is_zero() || pb.is_zero() || nabla_pow[*c].is_zero() {
                            continue;
                        }
                        let lhs = pa.mul_ref(pb);
                        let rhs = nabla_pow[*c].mul_ref(coef);
                        inner.add_product(&lhs, &rhs);
                    }
                    q_acc[m].add_product(w, &inner.value());
                }
            }
            for m in 2..=m_max {
                let qv = q_acc[m].value();
                p[m][n][k] = p_acc[m].value().add_ref(&qv);
                q[m][n][k] = qv;
            }
        }
    }
    Ok((p, q))
}

/// A table row over one denominator: entry `k` is `num[k] / den`.
#[derive(Clone, Debug)]
struct IntRow {
    den: BigInt,
    num: Vec<BigInt>,
    zero: bool,
}

impl IntRow {
    fn constant(len: usize, v: i64) -> Self {
        IntRow {
            den: BigInt::one(),
            num: vec![BigInt::from(v); len],
            zero: v == 0,
        }
    }

    fn from_rationals(row: &[Rational]) -> Self {
        let den = row.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let num: Vec<BigInt> = row.iter().map(|v| v.numer() * (&den / v.denom())).collect();
        let zero = num.iter().all(Zero::is_zero);
        IntRow { den, num, zero }
    }
}

/// One term `coef * w_j * P^{(a)}_left * P^{(b)}_right * nabla^c`, with the
/// factor that lifts it to the group's common denominator folded into `scale`.
struct Term {
    /// Position in the split support.
    i: usize,
    a: usize,
    b: usize,
    c: usize,
    scale: BigInt,
}

/// Builds the terms of one group over their least common denominator.
fn lift_terms(
    shape: &[(usize, usize, usize, u64)],
    support: &[(usize, Rational, BigInt)],
    rows: &[Vec<IntRow>],
    right_row: impl Fn(usize) -> usize,
) -> (BigInt, Vec<Term>) {
    let mut raw = Vec::new();
    for (i, (j, w, g)) in support.iter().enumerate() {
        let rj = right_row(*j);
        for &(a, b, c, coef) in shape {
            if rows[a][*j].zero || rows[b][rj].zero {
                continue;
            }
            let den = w.denom() * &rows[a][*j].den * &rows[b][rj].den * g.pow(c as u32);
            raw.push((i, a, b, c, BigInt::from(coef) * w.numer(), den));
        }
    }
    let common = raw.iter().fold(BigInt::one(), |acc, t| acc.lcm(&t.5));
    let terms = raw
        .into_iter()
        .map(|(i, a, b, c, num, den)| Term {
            i,
            a,
            b,
            c,
            scale: num * (&common / den),
        })
        .collect();
    (common, terms)
}

/// Exact moment tables with each row held over one denominator, so the inner
/// sums run in integers and only finished entries are reduced.
fn integer_moment_tables(
    model: &TreeModelSpec,
    mu: &[Vec<Rational>],
    m_max: usize,
) -> Result<(Tables<Rational>, Tables<Rational>)> {
    let right = right_part(model)?;
    let shape = SplitShape::of(model)?;
    let n_max = mu.len() - 1;
    let k_max = mu[0].len() - 1;
    let zeros = || vec![vec![Rational::zero(); k_max + 1]; n_max + 1];
    let mut p: Tables<Rational> = (0..=m_max).map(|_| zeros()).collect();
    let mut q: Tables<Rational> = (0..=m_max).map(|_| zeros()).collect();
    for row in p[0].iter_mut() {
        *row = vec![Rational::one(); k_max + 1];
    }
    let mu_rows: Vec<IntRow> = mu.iter().map(|r| IntRow::from_rationals(r)).collect();
    let mut rows: Vec<Vec<IntRow>> = (0..=m_max)
        .map(|m| vec![IntRow::constant(k_max + 1, i64::from(m == 0)); n_max + 1])
        .collect();
    let own_sets: Vec<Vec<(usize, usize, usize, u64)>> =
        (0..=m_max).map(|m| vec![(m, 0, 0, 1), (0, m, 0, 1)]).collect();
    let q_sets: Vec<Vec<(usize, usize, usize, u64)>> =
        (0..=m_max).map(|m| if m < 2 { Vec::new() } else { index_set(m) }).collect();
    let right_row = |n: usize, j: usize| match right {
        RightPart::SameLevel => n - j,
        RightPart::Sibling { kappa } => n - kappa - j,
    };
    for n in 1..=n_max {
        if shape.is_bucket(n) {
            continue;
        }
        let law = split_distribution::<Rational>(model, n)?;
        // (j, pi_j, denominator of nabla)
        let support: Vec<(usize, Rational, BigInt)> = law
            .support()
            .map(|(j, w)| {
                let rj = right_row(n, j);
                let g = mu_rows[j].den.lcm(&mu_rows[rj].den).lcm(&mu_rows[n].den);
                (j, w.clone(), g)
            })
            .collect();
        let lifts: Vec<[BigInt; 3]> = support
            .iter()
            .map(|(j, _, g)| {
                let rj = right_row(n, *j);
                [g / &mu_rows[*j].den, g / &mu_rows[rj].den, g / &mu_rows[n].den]
            })
            .collect();
        let groups: Vec<[(BigInt, Vec<Term>); 2]> = (0..=m_max)
            .map(|m| {
                [
                    lift_terms(&own_sets[m], &support, &rows, |j| right_row(n, j)),
                    lift_terms(&q_sets[m], &support, &rows, |j| right_row(n, j)),
                ]
            })
            .collect();
        for k in 1..=k_max {
            if mu[n][k].is_zero() {
                continue;
            }
            let (lk, rk) = match right {
                RightPart::SameLevel => (k - 1, k),
                RightPart::Sibling { .. } => (k - 1, k - 1),
            };
            let powers: Vec<Vec<BigInt>> = support
                .iter()
                .zip(&lifts)
                .map(|((j, ..), [gl, gr, gn])| {
                    let rj = right_row(n, *j);
                    let nabla = &mu_rows[*j].num[lk] * gl + &mu_rows[rj].num[rk] * gr - &mu_rows[n].num[k] * gn;
                    let mut pw = vec![BigInt::one()];
                    for c in 1..=m_max {
                        let next = &pw[c - 1] * &nabla;
                        pw.push(next);
                    }
                    pw
                })
                .collect();
            for m in 2..=m_max {
                let mut sums = [BigInt::zero(), BigInt::zero()];
                for (g, (_, terms)) in groups[m].iter().enumerate() {
                    for t in terms {
                        let j = support[t.i].0;
                        let pa = &rows[t.a][j].num[lk];
                        let pb = &rows[t.b][right_row(n, j)].num[rk];
                        let pc = &powers[t.i][t.c];
                        if pa.is_zero() || pb.is_zero() || pc.is_zero() {
                            continue;
                        }
                        sums[g] += &t.scale * pa * pb * pc;
                    }
                }
                let [own, inner] = sums;
                let qv = Rational::new(inner, groups[m][1].0.clone());
                p[m][n][k] = Rational::new(own, groups[m][0].0.clone()) + &qv;
                q[m][n][k] = qv;
            }
        }
        for m in 2..=m_max {
            rows[m][n] = IntRow::from_rationals(&p[m][n]);
        }
    }
    Ok((p, q))
}

/// `P^{(m)}_{n,k}` for recursive trees from the closed form
/// `Q_{n,k} + sum_{j<n} sum_{l<=k} Q_{j,k-l}/j [u^l] (u+1) prod_{j<h<n} (1 + u/h)`.
pub fn closed_form_recursive_moments(n: usize, k: usize, m: usize, table: &ExactTable<Rational>) -> Result<Rational> {
    let row = closed_form_recursive_row(n, m, table)?;
    Ok(row.get(k).cloned().unwrap_or_else(Rational::zero))
}

/// The closed form for every level of row `n` at once.
///
/// With `prod_{j<h<n} (1 + u/h) = prod_{j<h<n} (h + u) * j! / (n-1)!`, each
/// term is an integer polynomial product scaled by `(j-1)!/(n-1)!`, so the
/// inner work is done in integers.
pub fn closed_form_recursive_row(n: usize, m: usize, table: &ExactTable<Rational>) -> Result<Vec<Rational>> {
    if table.model != TreeModelSpec::Recursive {
        return Err(Error::unsupported(
            "closed_form_recursive_moments",
            &table.model,
            "the closed form holds for recursive trees",
        ));
    }
    let q = table
        .q
        .as_ref()
        .ok_or_else(|| Error::arg("table", "moment table without Q parts"))?;
    if m >= q.len() {
        return Err(Error::arg("m", "order exceeds the table"));
    }
    if n == 0 || n > table.n_max() {
        return Err(Error::size(n as u64, "row outside the table"));
    }
    let k_max = table.k_max();
    let q = &q[m];
    // Q rows over a common denominator
    let scaled: Vec<(BigInt, Vec<BigInt>)> = (0..n)
        .map(|j| {
            let den = q[j].iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            let nums = q[j].iter().map(|v| v.numer() * (&den / v.denom())).collect();
            (den, nums)
        })
        .collect();
    let mut sum_den = BigInt::one();
    let mut parts: Vec<(BigInt, Vec<BigInt>)> = Vec::new();
    // C_j(u) = (u+1) prod_{j<h<n} (h+u), built for j = n-1 down to 1
    let mut c_poly: Vec<BigInt> = vec![BigInt::one(), BigInt::one()];
    let mut fact = vec![BigInt::one(); n];
    for j in 1..n {
        fact[j] = &fact[j - 1] * BigInt::from(j);
    }
    for j in (1..n).rev() {
        if j < n - 1 {
            c_poly = mul_linear(&c_poly, j as u64 + 1);
        }
        let (den_j, nums) = &scaled[j];
        if nums.iter().all(Zero::is_zero) {
            continue;
        }
        // coefficient (j-1)!/den_j
        let g = fact[j - 1].gcd(den_j);
        let num = &fact[j - 1] / &g;
        let den = den_j / &g;
        let mut prod = vec![BigInt::zero(); k_max + 1];
        for (a, qa) in nums.iter().enumerate() {
            if qa.is_zero() {
                continue;
            }
            for (b, cb) in c_poly.iter().enumerate() {
                if a + b > k_max {
                    break;
                }
                prod[a + b] += qa * cb;
            }
        }
        for v in prod.iter_mut() {
            *v *= &num;
        }
        sum_den = sum_den.lcm(&den);
        parts.push((den, prod));
    }
    let mut total = vec![BigInt::zero(); k_max + 1];
    for (den, prod) in parts {
        let factor = &sum_den / den;
        for (t, v) in total.iter_mut().zip(prod) {
            *t += v * &factor;
        }
    }
    let scale = &sum_den * &fact[n - 1];
    Ok((0..=k_max)
        .map(|k| q[n][k].clone() + Rational::new(total[k].clone(), scale.clone()))
        .collect())
}

/// Multiplies an integer polynomial by `(h + u)`.
fn mul_linear(p: &[BigInt], h: u64) -> Vec<BigInt> {
    let h = BigInt::from(h);
    let mut out = vec![BigInt::zero(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i] += c * &h;
        out[i + 1] += c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model_spec;
    use crate::scalar::rational;

    #[test]
    fn index_sets_skip_linear_terms() {
        let m2: Vec<_> = index_set(2).into_iter().map(|(a, b, c, _)| (a, b, c)).collect();
        assert_eq!(m2, vec![(0, 0, 2)]);
        let m4 = index_set(4);
        assert_eq!(m4.len(), 6);
        assert!(m4.contains(&(2, 2, 0, 6)));
        assert!(m4.contains(&(3, 0, 1, 4)));
    }

    #[test]
    fn recursive_variance_three_one() {
        let t = central_moment_dp::<Rational>(&TreeModelSpec::Recursive, 5, 4, 4).unwrap();
        assert_eq!(t.moment(2, 3, 1), rational(1, 4));
        for n in 0..=5 {
            for k in 0..=4 {
                assert!(t.moment(1, n, k).is_zero());
                assert_eq!(t.moment(0, n, k), rational(1, 1));
            }
        }
        assert_eq!(closed_form_recursive_moments(3, 1, 2, &t).unwrap(), rational(1, 4));
        assert!(closed_form_recursive_moments(3, 1, 1, &t).unwrap().is_zero());
    }

    #[test]
    fn closed_form_matches_dp_small() {
        let t = central_moment_dp::<Rational>(&TreeModelSpec::Recursive, 30, 29, 4).unwrap();
        for m in 2..=4 {
            for n in 1..=30 {
                let row = closed_form_recursive_row(n, m, &t).unwrap();
                for k in 0..=29 {
                    assert_eq!(row[k], t.moment(m, n, k), "m = {m}, n = {n}, k = {k}");
                }
            }
        }
    }

    #[test]
    fn integer_rows_match_entrywise_rationals() {
        for spec in ["recursive", "port", "quad:d=1", "mary:m=2,t=1", "mary:m=2,t=2"] {
            let model = parse_model_spec(spec).unwrap();
            let fast = central_moment_dp::<Rational>(&model, 22, 21, 5).unwrap();
            let mu = expected_profile_dp::<Rational>(&model, 22, 21).unwrap();
            let (p, q) = moment_tables(&model, &mu, 5).unwrap();
            assert_eq!(fast.pm.as_ref().unwrap(), &p, "{spec}");
            assert_eq!(fast.q.as_ref().unwrap(), &q, "{spec}");
        }
    }

    #[test]
    fn wide_splits_rejected() {
        let err = central_moment_dp::<f64>(&parse_model_spec("quad:d=2").unwrap(), 10, 5, 2).unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel { .. }));
        assert!(central_moment_dp::<f64>(&TreeModelSpec::Recursive, 10, 5, 9).is_err());
    }

    #[test]
    fn variances_positive_where_random() {
        for spec in ["recursive", "port", "quad:d=1", "mary:m=2,t=1"] {
            let model = parse_model_spec(spec).unwrap();
            let t = central_moment_dp::<Rational>(&model, 20, 19, 2).unwrap();
            let e = super::super::enumerate::enumerate_exact(&model, 6).ok();
            for n in 1..=20 {
                for k in 0..=19 {
                    let var = t.moment(2, n, k);
                    assert!(!var.is_negative(), "{spec}");
                    if let (Some(e), 6) = (&e, n) {
                        let random = e.distinct_values(k) > 1;
                        assert_eq!(var > Rational::zero(), random, "{spec} n = 6, k = {k}");
                    }
                }
            }
        }
    }
}
