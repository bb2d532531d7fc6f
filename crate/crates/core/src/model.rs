//! Tree families, profiles and level-indexing conventions.
//!
//! Levels are indexed from the root at level 0. A model is written as a short
//! ASCII string:
//!
//! ```text
//! recursive | port | mobile
//! mary:m=<int>,t=<int> | quad:d=<int> | grid:m=<int>,d=<int>
//! increasing:phi=<c0>,<c1>,...,<cd>
//! ```
//!
//! Binary search trees are not a separate family: `quad:d=1`, `mary:m=2,t=0`
//! and `increasing:phi=1,2,1` all describe the same profile distribution.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TreeModelSpec {
    /// Uniform random recursive trees.
    Recursive,
    /// Plane-oriented recursive trees (attachment proportional to outdegree + 1).
    Port,
    /// Generalized m-ary search trees; `t = 0` gives plain m-ary search trees.
    Mary { m: u32, t: u32 },
    /// Point quad trees in the unit `d`-cube.
    Quad { d: u32 },
    /// Grid trees: the first `m - 1` points of a region cut each axis into `m` pieces.
    Grid { m: u32, d: u32 },
    /// Polynomial variety of increasing trees with degree function
    /// `phi(w) = sum_j phi[j] w^j`.
    Increasing { phi: Vec<Rational> },
    /// Mobile trees, `phi(w) = 1 - log(1 - w)`.
    Mobile,
}

impl TreeModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TreeModelSpec::Mary { m, .. } if *m < 2 => Err(range("m", "m-ary trees need m >= 2")),
            TreeModelSpec::Quad { d } if *d < 1 => Err(range("d", "dimension must be >= 1")),
            TreeModelSpec::Grid { m, .. } if *m < 2 => Err(range("m", "grid trees need m >= 2")),
            TreeModelSpec::Grid { d, .. } if *d < 1 => Err(range("d", "dimension must be >= 1")),
            TreeModelSpec::Increasing { phi } => {
                if phi.len() < 3 {
                    return Err(range("phi", "polynomial varieties need degree d >= 2"));
                }
                if phi.iter().any(|c| c.is_negative()) {
                    return Err(range("phi", "coefficients must be nonnegative"));
                }
                if phi[0].is_zero() {
                    return Err(range("phi", "phi_0 must be positive"));
                }
                if phi.last().is_some_and(|c| c.is_zero()) {
                    return Err(range("phi", "leading coefficient phi_d must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short family name used in reports.
    pub fn family_name(&self) -> &'static str {
        match self {
            TreeModelSpec::Recursive => "recursive",
            TreeModelSpec::Port => "port",
            TreeModelSpec::Mary { .. } => "mary",
            TreeModelSpec::Quad { .. } => "quad",
            TreeModelSpec::Grid { .. } => "grid",
            TreeModelSpec::Increasing { .. } => "increasing",
            TreeModelSpec::Mobile => "mobile",
        }
    }

    /// Families whose trees can be grown one item at a time.
    pub fn is_incremental(&self) -> bool {
        !matches!(self, TreeModelSpec::Increasing { .. } | TreeModelSpec::Mobile)
    }

    /// Families where every inserted item creates at most one node, so the
    /// width moves by at most one per insertion.
    pub fn single_node_insertion(&self) -> bool {
        match self {
            TreeModelSpec::Recursive | TreeModelSpec::Port | TreeModelSpec::Quad { .. } => true,
            TreeModelSpec::Grid { .. } => true,
            TreeModelSpec::Mary { t, .. } => *t == 0,
            _ => false,
        }
    }

    /// Whether nodes can hold several keys, in which case profiles count nodes
    /// and sum to at most `n`.
    pub fn multi_key_nodes(&self) -> bool {
        match self {
            TreeModelSpec::Mary { m, t } => *m > 2 || *t > 0,
            TreeModelSpec::Grid { m, .. } => *m > 2,
            _ => false,
        }
    }

    /// Polynomial degree of `phi` for increasing varieties.
    pub fn phi_degree(&self) -> Option<usize> {
        match self {
            TreeModelSpec::Increasing { phi } => Some(phi.len() - 1),
            _ => None,
        }
    }
}

fn range(field: &'static str, reason: &str) -> Error {
    Error::ParameterOutOfRange {
        field,
        reason: reason.to_string(),
    }
}

/// Parses a model string; see the module docs for the grammar.
pub fn parse_model_spec(text: &str) -> Result<TreeModelSpec> {
    let malformed = |reason: &str| Error::MalformedModel {
        input: text.to_string(),
        reason: reason.to_string(),
    };
    let trimmed = text.trim();
    let (head, params) = match trimmed.split_once(':') {
        Some((h, p)) => (h, Some(p)),
        None => (trimmed, None),
    };
    let spec = match (head, params) {
        ("recursive", None) => TreeModelSpec::Recursive,
        ("port", None) => TreeModelSpec::Port,
        ("mobile", None) => TreeModelSpec::Mobile,
        ("recursive" | "port" | "mobile", Some(_)) => {
            return Err(malformed("this family takes no parameters"))
        }
        ("mary", Some(p)) => {
            let kv = parse_pairs(p, &["m", "t"]).map_err(|r| malformed(&r))?;
            TreeModelSpec::Mary { m: kv[0], t: kv[1] }
        }
        ("quad", Some(p)) => {
            let kv = parse_pairs(p, &["d"]).map_err(|r| malformed(&r))?;
            TreeModelSpec::Quad { d: kv[0] }
        }
        ("grid", Some(p)) => {
            let kv = parse_pairs(p, &["m", "d"]).map_err(|r| malformed(&r))?;
            TreeModelSpec::Grid { m: kv[0], d: kv[1] }
        }
        ("increasing", Some(p)) => {
            let list = p
                .strip_prefix("phi=")
                .ok_or_else(|| malformed("expected `phi=<c0>,<c1>,...`"))?;
            let phi = list
                .split(',')
                .map(|c| parse_decimal(c.trim()).ok_or(c))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|bad| malformed(&format!("coefficient `{bad}` is not a nonnegative decimal")))?;
            TreeModelSpec::Increasing { phi }
        }
        ("mary" | "quad" | "grid" | "increasing", None) => {
            return Err(malformed("missing parameters"))
        }
        _ => return Err(malformed("unknown family")),
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses `k1=v1,k2=v2` with exactly the given keys, in any order.
fn parse_pairs(params: &str, keys: &[&str]) -> std::result::Result<Vec<u32>, String> {
    let mut out: Vec<Option<u32>> = vec![None; keys.len()];
    for part in params.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        let idx = keys
            .iter()
            .position(|key| *key == k.trim())
            .ok_or_else(|| format!("unknown parameter `{}`", k.trim()))?;
        if out[idx].is_some() {
            return Err(format!("duplicate parameter `{}`", keys[idx]));
        }
        let value = v
            .trim()
            .parse::<u32>()
            .map_err(|_| format!("parameter `{}` must be a nonnegative integer", keys[idx]))?;
        out[idx] = Some(value);
    }
    out.iter()
        .zip(keys)
        .map(|(v, k)| v.ok_or_else(|| format!("missing parameter `{k}`")))
        .collect()
}

/// Parses a nonnegative decimal (`3`, `0.25`, `.5`) into an exact rational.
pub(crate) fn parse_decimal(s: &str) -> Option<Rational> {
    if s.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(Rational::new(numer, denom))
}

/// Formats a terminating rational as its shortest decimal expansion.
pub(crate) fn format_decimal(r: &Rational) -> String {
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    let mut scale = 0usize;
    let mut scaled = r.clone();
    let ten = Rational::from_integer(BigInt::from(10));
    while !scaled.denom().is_one() {
        scaled *= &ten;
        scale += 1;
        assert!(scale < 10_000, "non-terminating decimal");
    }
    let digits = scaled.numer().to_string();
    let padded = if digits.len() <= scale {
        format!("{}{}", "0".repeat(scale + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (i, f) = padded.split_at(padded.len() - scale);
    format!("{i}.{f}")
}

impl fmt::Display for TreeModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeModelSpec::Recursive => write!(f, "recursive"),
            TreeModelSpec::Port => write!(f, "port"),
            TreeModelSpec::Mobile => write!(f, "mobile"),
            TreeModelSpec::Mary { m, t } => write!(f, "mary:m={m},t={t}"),
            TreeModelSpec::Quad { d } => write!(f, "quad:d={d}"),
            TreeModelSpec::Grid { m, d } => write!(f, "grid:m={m},d={d}"),
            TreeModelSpec::Increasing { phi } => {
                let coeffs: Vec<String> = phi.iter().map(format_decimal).collect();
                write!(f, "increasing:phi={}", coeffs.join(","))
            }
        }
    }
}

impl FromStr for TreeModelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_model_spec(s)
    }
}

impl Serialize for TreeModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TreeModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_model_spec(&s).map_err(serde::de::Error::custom)
    }
}

/// Node counts per level for one tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub counts: Vec<u64>,
    /// Number of items the tree was built from.
    pub n: u64,
}

impl Profile {
    pub fn new(counts: Vec<u64>, n: u64) -> Self {
        Profile { counts, n }
    }

    pub fn level(&self, k: usize) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn total_nodes(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn height(&self) -> Option<usize> {
        self.counts.iter().rposition(|&c| c > 0)
    }

    /// Drops trailing empty levels.
    pub fn trimmed(mut self) -> Self {
        while self.counts.last() == Some(&0) {
            self.counts.pop();
        }
        self
    }
}

/// Width `W_n = max_k Y_{n,k}` with the smallest level attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthSummary {
    pub width: u64,
    pub mode_level: usize,
    pub tie_count: usize,
}

pub fn width_and_mode(profile: &Profile) -> Result<WidthSummary> {
    width_of_counts(&profile.counts)
}

pub(crate) fn width_of_counts(counts: &[u64]) -> Result<WidthSummary> {
    let width = counts.iter().copied().max().unwrap_or(0);
    if width == 0 {
        return Err(Error::EmptyProfile);
    }
    let mode_level = counts.iter().position(|&c| c == width).expect("max exists");
    let tie_count = counts.iter().filter(|&&c| c == width).count();
    Ok(WidthSummary {
        width,
        mode_level,
        tie_count,
    })
}

/// `L_n = max(ln n, 1)`.
pub fn log_n(n: f64) -> f64 {
    n.ln().max(1.0)
}

/// Log scale `L_n` for one tree size, with level offsets relative to a drift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogScale {
    pub l_n: f64,
}

impl LogScale {
    pub fn new(n: f64) -> Self {
        LogScale { l_n: log_n(n) }
    }

    /// `k - v * L_n`.
    pub fn delta(&self, k: f64, drift: f64) -> f64 {
        k - drift * self.l_n
    }

    /// Fractional part of `L_n`.
    pub fn frac(&self) -> f64 {
        self.l_n - self.l_n.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_families() {
        assert_eq!(parse_model_spec("recursive").unwrap(), TreeModelSpec::Recursive);
        assert_eq!(parse_model_spec("port").unwrap(), TreeModelSpec::Port);
        assert_eq!(parse_model_spec("mobile").unwrap(), TreeModelSpec::Mobile);
    }

    #[test]
    fn parses_parameterized_families() {
        assert_eq!(
            parse_model_spec("grid:m=3,d=2").unwrap(),
            TreeModelSpec::Grid { m: 3, d: 2 }
        );
        // median-of-11 binary search trees
        assert_eq!(
            parse_model_spec("mary:m=2,t=5").unwrap(),
            TreeModelSpec::Mary { m: 2, t: 5 }
        );
        assert_eq!(parse_model_spec("quad:d=1").unwrap(), TreeModelSpec::Quad { d: 1 });
        assert_eq!(
            parse_model_spec("mary:t=1,m=3").unwrap(),
            TreeModelSpec::Mary { m: 3, t: 1 }
        );
        assert_eq!(
            parse_model_spec("increasing:phi=1,0.5,2.25").unwrap(),
            TreeModelSpec::Increasing {
                phi: vec![rational(1, 1), rational(1, 2), rational(9, 4)]
            }
        );
    }

    #[test]
    fn rejects_bad_strings_naming_the_field() {
        let err = parse_model_spec("mary:m=1,t=0").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { field: "m", .. }));
        let err = parse_model_spec("quad:d=0").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { field: "d", .. }));
        let err = parse_model_spec("grid:m=1,d=2").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { field: "m", .. }));
        let err = parse_model_spec("increasing:phi=0,1,1").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { field: "phi", .. }));
        let err = parse_model_spec("increasing:phi=1,1,0").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { field: "phi", .. }));
        let err = parse_model_spec("increasing:phi=1,1").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { field: "phi", .. }));

        for bad in [
            "",
            "tree",
            "mary:m=2",
            "mary:m=2,t=1,x=3",
            "mary:m=2,m=3",
            "quad",
            "quad:d=-1",
            "recursive:n=3",
            "increasing:phi=1,-2,1",
            "increasing:phi=1,a,1",
            "increasing:1,2,1",
        ] {
            assert!(
                matches!(parse_model_spec(bad), Err(Error::MalformedModel { .. })),
                "{bad:?} should be malformed"
            );
        }
    }

    #[test]
    fn canonical_formatting() {
        let spec = parse_model_spec("increasing:phi=1.50,0,00.25").unwrap();
        assert_eq!(spec.to_string(), "increasing:phi=1.5,0,0.25");
        assert_eq!(parse_model_spec("mary:t=0,m=2").unwrap().to_string(), "mary:m=2,t=0");
    }

    #[test]
    fn width_examples() {
        let w = width_and_mode(&Profile::new(vec![1, 2, 1], 4)).unwrap();
        assert_eq!((w.width, w.mode_level, w.tie_count), (2, 1, 1));
        let w = width_and_mode(&Profile::new(vec![1, 1, 1], 3)).unwrap();
        assert_eq!((w.width, w.mode_level, w.tie_count), (1, 0, 3));
        let w = width_and_mode(&Profile::new(vec![1, 3, 3, 1], 8)).unwrap();
        assert_eq!((w.width, w.mode_level, w.tie_count), (3, 1, 2));
        assert_eq!(
            width_and_mode(&Profile::new(vec![], 0)),
            Err(Error::EmptyProfile)
        );
    }

    #[test]
    fn log_scale_floor() {
        assert_eq!(log_n(1.0), 1.0);
        assert_eq!(log_n(2.0), 1.0);
        assert!((log_n(1e6) - 13.815510557964274).abs() < 1e-12);
        let s = LogScale::new(1e6);
        assert!((s.delta(14.0, 1.0) - (14.0 - 13.815510557964274)).abs() < 1e-12);
    }

    fn arb_model() -> impl Strategy<Value = TreeModelSpec> {
        let coeff = (0u32..400, 0u32..3).prop_map(|(v, scale)| {
            Rational::new(BigInt::from(v), num_traits::pow(BigInt::from(10), scale as usize))
        });
        prop_oneof![
            Just(TreeModelSpec::Recursive),
            Just(TreeModelSpec::Port),
            Just(TreeModelSpec::Mobile),
            (2u32..20, 0u32..10).prop_map(|(m, t)| TreeModelSpec::Mary { m, t }),
            (1u32..8).prop_map(|d| TreeModelSpec::Quad { d }),
            (2u32..10, 1u32..5).prop_map(|(m, d)| TreeModelSpec::Grid { m, d }),
            (1u32..50, prop::collection::vec(coeff, 1..5), 1u32..50).prop_map(|(c0, mid, cd)| {
                let mut phi = vec![Rational::from_integer(BigInt::from(c0))];
                phi.extend(mid);
                phi.push(Rational::new(BigInt::from(cd), BigInt::from(4)));
                TreeModelSpec::Increasing { phi }
            }),
        ]
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(spec in arb_model()) {
            let text = spec.to_string();
            let back = parse_model_spec(&text).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(back.to_string(), text);
        }

        #[test]
        fn width_ignores_trailing_zero_levels(
            counts in prop::collection::vec(0u64..50, 1..12),
            extra in 0usize..5,
        ) {
            let mut counts = counts;
            counts[0] = counts[0].max(1);
            let base = width_of_counts(&counts).unwrap();
            let mut padded = counts.clone();
            padded.extend(std::iter::repeat_n(0, extra));
            prop_assert_eq!(width_of_counts(&padded).unwrap(), base);
            prop_assert_eq!(counts[base.mode_level], base.width);
            prop_assert!(base.tie_count >= 1);
        }
    }
}
