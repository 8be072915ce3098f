//! Spec model for multidimensional polynomial Euler products and numerical
//! evaluation of the product, its log series, and the normalized function
//! f_sigma(t), all with certified truncation tails.
//!
//! The log of the product is DEFINED as the Dirichlet series
//! sum_p sum_{r>=1} sum_{l,k} (1/r) alpha_{lk}(p)^r p^{-r<a_l,s>},
//! never as a principal-branch log of the product, so no branch cuts arise.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Ratio};
use num_traits::Zero;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::arith::{is_prime_u64, sieve, PrimeTable, RealCharacter, SIEVE_LIMIT_CAP};
use crate::error::{Error, Result, Violation};
use crate::util::{par_chunked_product, par_chunked_sum_complex, KahanComplex};

/// Validation caps. Generous for every practical spec; they keep exact
/// rational arithmetic overflow-free and memory bounded.
pub const RAT_MAGNITUDE_CAP: i64 = 1_000_000_000;
pub const POWER_LIMIT_CAP: u32 = 10_000;
pub const DIMENSION_CAP: usize = 32;
pub const RANK_CAP: usize = 64;
pub const TUPLE_CAP: usize = 64;

/// Exact rational scalar used for direction entries.
///
/// Serializes as a bare integer when the denominator is 1 and as a string
/// like `"3/2"` otherwise; accepts both forms when deserializing. Decimal
/// literals are rejected so direction arithmetic stays exact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rat(Ratio<i64>);

impl Rat {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("rational with zero denominator".into()));
        }
        Ok(Rat(Ratio::new(num, den)))
    }

    pub fn integer(n: i64) -> Self {
        Rat(Ratio::from_integer(n))
    }

    pub fn from_ratio(ratio: Ratio<i64>) -> Self {
        Rat(ratio)
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(*self.0.numer()), BigInt::from(*self.0.denom()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    /// Multiplies by a small positive integer; safe under the magnitude cap
    /// combined with the power-limit cap.
    pub fn scale(&self, k: i64) -> Self {
        Rat(Ratio::new(self.0.numer() * k, *self.0.denom()))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if *self.0.denom() == 1 {
            serializer.serialize_i64(*self.0.numer())
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RatVisitor;

        impl Visitor<'_> for RatVisitor {
            type Value = Rat;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a rational string like \"3/2\"")
            }

            fn visit_i64<E: de::Error>(self, n: i64) -> std::result::Result<Rat, E> {
                Ok(Rat::integer(n))
            }

            fn visit_u64<E: de::Error>(self, n: u64) -> std::result::Result<Rat, E> {
                i64::try_from(n)
                    .map(Rat::integer)
                    .map_err(|_| E::custom(format!("integer {n} overflows direction entry")))
            }

            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<Rat, E> {
                Err(E::custom(format!(
                    "decimal literal {x} is not accepted for direction entries; \
                     use an integer or a rational string like \"1/2\""
                )))
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Rat, E> {
                let parse = |part: &str| {
                    part.trim()
                        .parse::<i64>()
                        .map_err(|_| E::custom(format!("invalid rational component {part:?}")))
                };
                match s.split_once('/') {
                    Some((num, den)) => {
                        let den = parse(den)?;
                        if den == 0 {
                            return Err(E::custom("rational with zero denominator"));
                        }
                        Ok(Rat(Ratio::new(parse(num)?, den)))
                    }
                    None => Ok(Rat::integer(parse(s)?)),
                }
            }
        }

        deserializer.deserialize_any(RatVisitor)
    }
}

/// How the coefficient alpha_{lk}(p) depends on the prime p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientScheme {
    /// alpha(p) = value for every prime.
    Constant { value: f64 },
    /// alpha(p) = chi(p) for a real Dirichlet character.
    Character(RealCharacter),
    /// alpha(p) = overrides[p] where present, default elsewhere.
    Table {
        default: f64,
        #[serde(
            default,
            skip_serializing_if = "BTreeMap::is_empty",
            deserialize_with = "de_overrides"
        )]
        overrides: BTreeMap<u64, f64>,
    },
}

/// Accepts override keys as JSON strings ("2") or bare integers. The
/// internally-tagged enum buffers its content, which disables serde_json's
/// native string-to-integer map key coercion.
fn de_overrides<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> std::result::Result<BTreeMap<u64, f64>, D::Error> {
    struct PrimeKey(u64);

    impl<'de> Deserialize<'de> for PrimeKey {
        fn deserialize<D: Deserializer<'de>>(
            deserializer: D,
        ) -> std::result::Result<Self, D::Error> {
            struct KeyVisitor;

            impl Visitor<'_> for KeyVisitor {
                type Value = PrimeKey;

                fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                    f.write_str("a prime as an integer or integer string")
                }

                fn visit_u64<E: de::Error>(self, n: u64) -> std::result::Result<PrimeKey, E> {
                    Ok(PrimeKey(n))
                }

                fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<PrimeKey, E> {
                    s.parse::<u64>()
                        .map(PrimeKey)
                        .map_err(|_| E::custom(format!("invalid override key {s:?}")))
                }
            }

            deserializer.deserialize_any(KeyVisitor)
        }
    }

    struct MapVisitor;

    impl<'de> Visitor<'de> for MapVisitor {
        type Value = BTreeMap<u64, f64>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a map from prime to coefficient value")
        }

        fn visit_map<A: de::MapAccess<'de>>(
            self,
            mut map: A,
        ) -> std::result::Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((key, value)) = map.next_entry::<PrimeKey, f64>()? {
                out.insert(key.0, value);
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(MapVisitor)
}

impl CoefficientScheme {
    pub fn constant(value: f64) -> Self {
        CoefficientScheme::Constant { value }
    }

    /// Coefficient value at the prime `p`.
    pub fn alpha(&self, p: u64) -> f64 {
        match self {
            CoefficientScheme::Constant { value } => *value,
            CoefficientScheme::Character(chi) => f64::from(chi.value(p)),
            CoefficientScheme::Table { default, overrides } => {
                overrides.get(&p).copied().unwrap_or(*default)
            }
        }
    }

    /// True when every attainable value lies in {-1, 0, +1}.
    pub fn is_strict(&self) -> bool {
        let strict = |x: f64| x == -1.0 || x == 0.0 || x == 1.0;
        match self {
            CoefficientScheme::Constant { value } => strict(*value),
            CoefficientScheme::Character(_) => true,
            CoefficientScheme::Table { default, overrides } => {
                strict(*default) && overrides.values().all(|&x| strict(x))
            }
        }
    }

    fn check(&self, field: &str, violations: &mut Vec<Violation>) {
        let check_range = |x: f64, what: &str, violations: &mut Vec<Violation>| {
            if !x.is_finite() || !(-1.0..=1.0).contains(&x) {
                violations.push(Violation {
                    field: field.to_string(),
                    message: format!("{what} = {x} is outside [-1, 1]"),
                });
            }
        };
        match self {
            CoefficientScheme::Constant { value } => check_range(*value, "value", violations),
            CoefficientScheme::Character(chi) => {
                if let Err(Error::Validation(inner)) = chi.validate(field) {
                    violations.extend(inner);
                }
            }
            CoefficientScheme::Table { default, overrides } => {
                check_range(*default, "default", violations);
                for (&p, &x) in overrides {
                    check_range(x, &format!("overrides[{p}]"), violations);
                    if !is_prime_u64(p) {
                        violations.push(Violation {
                            field: field.to_string(),
                            message: format!("override key {p} is not prime"),
                        });
                    }
                }
            }
        }
    }
}

/// Optional declaration of the intended direction regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionModeHint {
    /// Directions are declared linearly independent.
    Li,
    /// Directions are declared collinear with real ratios psi_l; the note
    /// records where the decimal values come from.
    Lr { psis: Vec<f64>, note: String },
}

/// Full description of a multidimensional polynomial Euler product
/// Z(s) = prod_p prod_{l=1..rank} prod_{k=1..tuple_size}
///        (1 - alpha_{lk}(p) p^{-<a_l, s>})^{-1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    /// Ambient dimension of s.
    pub d: usize,
    /// Direction vectors a_1..a_phi, each of length d, exact rationals.
    pub directions: Vec<Vec<Rat>>,
    /// Number of factors per direction (eta).
    pub tuple_size: usize,
    /// phi x eta grid of coefficient schemes; row l column k is alpha_{lk}.
    pub coefficients: Vec<Vec<CoefficientScheme>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_mode_hint: Option<DirectionModeHint>,
}

impl ProductSpec {
    pub fn rank(&self) -> usize {
        self.directions.len()
    }

    pub fn from_json(text: &str) -> Result<ValidatedSpec> {
        let spec: ProductSpec = serde_json::from_str(text)?;
        validate(spec)
    }
}

/// Point of evaluation s = sigma + i t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub sigma: Vec<f64>,
    pub t: Vec<f64>,
}

/// Truncation policy: primes up to `prime_limit`, powers up to
/// `power_limit`, with `target_tail_tol` recording the tail size the
/// policy was chosen to achieve (the achieved bound is reported by the
/// evaluation operations themselves).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub prime_limit: u64,
    pub power_limit: u32,
    pub target_tail_tol: f64,
}

impl TruncationPolicy {
    pub fn new(prime_limit: u64, power_limit: u32, target_tail_tol: f64) -> Result<Self> {
        let policy = TruncationPolicy { prime_limit, power_limit, target_tail_tol };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.prime_limit < 2 {
            violations.push(Violation {
                field: "policy.prime_limit".into(),
                message: format!("prime_limit {} must be >= 2", self.prime_limit),
            });
        }
        if self.prime_limit > SIEVE_LIMIT_CAP {
            violations.push(Violation {
                field: "policy.prime_limit".into(),
                message: format!("prime_limit {} exceeds cap {SIEVE_LIMIT_CAP}", self.prime_limit),
            });
        }
        if self.power_limit < 1 || self.power_limit > POWER_LIMIT_CAP {
            violations.push(Violation {
                field: "policy.power_limit".into(),
                message: format!(
                    "power_limit {} must be in [1, {POWER_LIMIT_CAP}]",
                    self.power_limit
                ),
            });
        }
        if self.target_tail_tol <= 0.0 || !self.target_tail_tol.is_finite() {
            violations.push(Violation {
                field: "policy.target_tail_tol".into(),
                message: format!("target_tail_tol {} must be positive", self.target_tail_tol),
            });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }

    /// Default policy for convergence margin `v`: P = 10^5 and
    /// R = max(2, ceil(40 / v)), which typically yields a tail around
    /// 10^(-4(v-1)).
    pub fn default_for_margin(v: f64) -> Result<Self> {
        if v <= 1.0 {
            return Err(Error::Domain(format!("convergence margin v = {v} must exceed 1")));
        }
        let r = ((40.0 / v).ceil() as u32).max(2);
        let target = 10f64.powf(-4.0 * (v - 1.0)).clamp(1e-300, 0.5);
        TruncationPolicy::new(100_000, r, target)
    }

    /// Smallest simple policy whose certified tail bound is at most `eps`
    /// for `m = phi * eta` factor families at margin `v`. Uses the
    /// overestimate pi(P) <= 1.26 P / ln P, so the achieved bound can only
    /// be smaller.
    pub fn for_tolerance(eps: f64, v: f64, m: usize) -> Result<Self> {
        if v <= 1.0 {
            return Err(Error::Domain(format!("convergence margin v = {v} must exceed 1")));
        }
        if eps <= 0.0 || !eps.is_finite() {
            return Err(Error::Domain(format!("tolerance {eps} must be positive")));
        }
        let m = m as f64;
        // First term m*2*P^(1-v)/(v-1) <= eps/2.
        let p_exact = (eps * (v - 1.0) / (4.0 * m)).powf(1.0 / (1.0 - v));
        let p = (p_exact.ceil().max(100.0)) as u64;
        if p > SIEVE_LIMIT_CAP {
            return Err(Error::Domain(format!(
                "tolerance {eps} needs prime_limit {p} beyond cap {SIEVE_LIMIT_CAP}"
            )));
        }
        let pi_over = 1.26 * p as f64 / (p as f64).ln();
        let mut r = 2u32;
        loop {
            let second = m * pi_over * 2f64.powf(-((r + 1) as f64) * v)
                / ((r + 1) as f64 * (1.0 - 2f64.powf(-v)));
            if second <= eps / 2.0 {
                break;
            }
            r += 1;
            if r > POWER_LIMIT_CAP {
                return Err(Error::Domain(format!(
                    "tolerance {eps} needs power_limit beyond cap {POWER_LIMIT_CAP}"
                )));
            }
        }
        TruncationPolicy::new(p, r, eps)
    }
}

/// A `ProductSpec` that passed validation, with cached float directions
/// and the strictness flag. Immutable; safe to share across workers.
#[derive(Debug, Clone)]
pub struct ValidatedSpec {
    spec: ProductSpec,
    dirs_f64: Vec<Vec<f64>>,
    strict: bool,
}

/// Checks every structural invariant of the spec and returns a validated
/// wrapper, or the full list of violations.
pub fn validate(spec: ProductSpec) -> Result<ValidatedSpec> {
    let mut violations = Vec::new();

    if spec.d < 1 || spec.d > DIMENSION_CAP {
        violations.push(Violation {
            field: "d".into(),
            message: format!("dimension {} must be in [1, {DIMENSION_CAP}]", spec.d),
        });
    }
    let phi = spec.directions.len();
    if !(1..=RANK_CAP).contains(&phi) {
        violations.push(Violation {
            field: "directions".into(),
            message: format!("rank {phi} must be in [1, {RANK_CAP}]"),
        });
    }
    for (l, dir) in spec.directions.iter().enumerate() {
        let field = format!("directions[{l}]");
        if dir.len() != spec.d {
            violations.push(Violation {
                field: field.clone(),
                message: format!("has {} entries, expected d = {}", dir.len(), spec.d),
            });
            continue;
        }
        if dir.iter().all(Rat::is_zero) {
            violations.push(Violation {
                field: field.clone(),
                message: "is the zero vector".into(),
            });
        }
        for (j, entry) in dir.iter().enumerate() {
            if entry.numer().abs() > RAT_MAGNITUDE_CAP || entry.denom() > RAT_MAGNITUDE_CAP {
                violations.push(Violation {
                    field: format!("{field}[{j}]"),
                    message: format!("entry {entry} exceeds magnitude cap {RAT_MAGNITUDE_CAP}"),
                });
            }
        }
    }
    if spec.tuple_size < 1 || spec.tuple_size > TUPLE_CAP {
        violations.push(Violation {
            field: "tuple_size".into(),
            message: format!("tuple size {} must be in [1, {TUPLE_CAP}]", spec.tuple_size),
        });
    }
    if spec.coefficients.len() != phi {
        violations.push(Violation {
            field: "coefficients".into(),
            message: format!("has {} rows, expected rank {phi}", spec.coefficients.len()),
        });
    }
    for (l, row) in spec.coefficients.iter().enumerate() {
        if row.len() != spec.tuple_size {
            violations.push(Violation {
                field: format!("coefficients[{l}]"),
                message: format!(
                    "has {} entries, expected tuple_size {}",
                    row.len(),
                    spec.tuple_size
                ),
            });
        }
        for (k, scheme) in row.iter().enumerate() {
            scheme.check(&format!("coefficients[{l}][{k}]"), &mut violations);
        }
    }
    match &spec.direction_mode_hint {
        Some(DirectionModeHint::Lr { psis, note }) => {
            if psis.len() != phi {
                violations.push(Violation {
                    field: "direction_mode_hint.psis".into(),
                    message: format!("has {} entries, expected rank {phi}", psis.len()),
                });
            }
            for (l, psi) in psis.iter().enumerate() {
                if !psi.is_finite() || *psi == 0.0 {
                    violations.push(Violation {
                        field: format!("direction_mode_hint.psis[{l}]"),
                        message: format!("ratio {psi} must be finite and nonzero"),
                    });
                }
            }
            if note.is_empty() {
                violations.push(Violation {
                    field: "direction_mode_hint.note".into(),
                    message: "declared ratios need a provenance note".into(),
                });
            }
        }
        Some(DirectionModeHint::Li) | None => {}
    }

    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }

    let dirs_f64 =
        spec.directions.iter().map(|dir| dir.iter().map(Rat::to_f64).collect()).collect();
    let strict = spec.coefficients.iter().flatten().all(CoefficientScheme::is_strict);
    Ok(ValidatedSpec { spec, dirs_f64, strict })
}

impl ValidatedSpec {
    pub fn spec(&self) -> &ProductSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    /// Number of directions (phi).
    pub fn rank(&self) -> usize {
        self.spec.directions.len()
    }

    /// Factors per direction (eta).
    pub fn tuple_size(&self) -> usize {
        self.spec.tuple_size
    }

    /// Total factor families m = phi * eta.
    pub fn family_count(&self) -> usize {
        self.rank() * self.tuple_size()
    }

    pub fn direction(&self, l: usize) -> &[Rat] {
        &self.spec.directions[l]
    }

    pub fn direction_f64(&self, l: usize) -> &[f64] {
        &self.dirs_f64[l]
    }

    pub fn scheme(&self, l: usize, k: usize) -> &CoefficientScheme {
        &self.spec.coefficients[l][k]
    }

    /// True when every coefficient scheme only attains {-1, 0, +1}.
    pub fn is_strict(&self) -> bool {
        self.strict
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// v = min_l <a_l, sigma>. Downstream operations require v > 1; this
/// returns the margin itself so callers can report how close they are.
pub fn convergence_margin(vspec: &ValidatedSpec, sigma: &[f64]) -> Result<f64> {
    if sigma.len() != vspec.d() {
        return Err(Error::Domain(format!(
            "sigma has {} entries, expected d = {}",
            sigma.len(),
            vspec.d()
        )));
    }
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("sigma entries must be finite".into()));
    }
    Ok((0..vspec.rank())
        .map(|l| dot(vspec.direction_f64(l), sigma))
        .fold(f64::INFINITY, f64::min))
}

/// Upper bound on the absolute value of every omitted log-series term
/// (p > P or r > R):
///   B = m * 2 * P^(1-v) / (v-1)
///     + m * pi(P) * 2^(-(R+1)v) / ((R+1)(1 - 2^(-v))).
pub fn tail_bound(policy: &TruncationPolicy, v: f64, m: usize) -> Result<f64> {
    policy.validate()?;
    let pi_p = sieve(policy.prime_limit)?.count();
    tail_bound_with_pi(policy, v, m, pi_p)
}

pub(crate) fn tail_bound_with_pi(
    policy: &TruncationPolicy,
    v: f64,
    m: usize,
    pi_p: usize,
) -> Result<f64> {
    if v <= 1.0 {
        return Err(Error::Domain(format!("convergence margin v = {v} must exceed 1")));
    }
    let m = m as f64;
    let p = policy.prime_limit as f64;
    let r1 = (policy.power_limit + 1) as f64;
    let prime_tail = m * 2.0 * p.powf(1.0 - v) / (v - 1.0);
    let power_tail = m * pi_p as f64 * 2f64.powf(-r1 * v) / (r1 * (1.0 - 2f64.powf(-v)));
    Ok(prime_tail + power_tail)
}

/// Reusable evaluator for one (spec, sigma, policy) triple.
///
/// Construction sieves the primes once and caches ln p, the per-direction
/// decay p^(-<a_l, sigma>), and the coefficient grid, so evaluating many
/// t values (grids, searches, characteristic-function scans) costs only
/// the trigonometric work per point.
pub struct CfEvaluator<'a> {
    vspec: &'a ValidatedSpec,
    sigma: Vec<f64>,
    policy: TruncationPolicy,
    margin: f64,
    tail: f64,
    primes: Vec<u64>,
    ln_p: Vec<f64>,
    /// p^(-<a_l, sigma>), layout [i * phi + l].
    decay: Vec<f64>,
    /// alpha_{lk}(p), layout [i * m + l * eta + k].
    alphas: Vec<f64>,
    log_sigma: Complex64,
}

impl<'a> CfEvaluator<'a> {
    pub fn new(
        vspec: &'a ValidatedSpec,
        sigma: &[f64],
        policy: &TruncationPolicy,
    ) -> Result<Self> {
        policy.validate()?;
        let margin = convergence_margin(vspec, sigma)?;
        if margin <= 1.0 {
            return Err(Error::Domain(format!(
                "convergence margin v = {margin} must exceed 1"
            )));
        }
        let table = sieve(policy.prime_limit)?;
        Self::with_table(vspec, sigma, policy, &table)
    }

    /// Like `new` but reuses an existing prime table (which must extend at
    /// least to the policy's prime limit).
    pub fn with_table(
        vspec: &'a ValidatedSpec,
        sigma: &[f64],
        policy: &TruncationPolicy,
        table: &PrimeTable,
    ) -> Result<Self> {
        policy.validate()?;
        let margin = convergence_margin(vspec, sigma)?;
        if margin <= 1.0 {
            return Err(Error::Domain(format!(
                "convergence margin v = {margin} must exceed 1"
            )));
        }
        if table.limit() < policy.prime_limit {
            return Err(Error::Internal(format!(
                "prime table limit {} is below policy prime limit {}",
                table.limit(),
                policy.prime_limit
            )));
        }
        let primes: Vec<u64> =
            table.primes()[..table.count_leq(policy.prime_limit)].to_vec();
        let phi = vspec.rank();
        let eta = vspec.tuple_size();
        let m = phi * eta;
        let n = primes.len();

        let ln_p: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
        let w: Vec<f64> = (0..phi).map(|l| dot(vspec.direction_f64(l), sigma)).collect();

        let mut decay = vec![0.0; n * phi];
        let mut alphas = vec![0.0; n * m];
        for i in 0..n {
            for (l, &wl) in w.iter().enumerate() {
                decay[i * phi + l] = (-wl * ln_p[i]).exp();
                for k in 0..eta {
                    alphas[i * m + l * eta + k] = vspec.scheme(l, k).alpha(primes[i]);
                }
            }
        }

        let tail = tail_bound_with_pi(policy, margin, m, n)?;
        let mut eval = CfEvaluator {
            vspec,
            sigma: sigma.to_vec(),
            policy: *policy,
            margin,
            tail,
            primes,
            ln_p,
            decay,
            alphas,
            log_sigma: Complex64::new(0.0, 0.0),
        };
        eval.log_sigma = eval.log_at(&vec![0.0; vspec.d()])?;
        Ok(eval)
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Certified bound on all omitted log-series terms.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn prime_count(&self) -> usize {
        self.primes.len()
    }

    /// Truncated log series at s = sigma + i t, accumulated per prime in
    /// descending order with compensated summation.
    pub fn log_at(&self, t: &[f64]) -> Result<Complex64> {
        let u = self.phase_rates(t)?;
        let phi = self.vspec.rank();
        let eta = self.vspec.tuple_size();
        let m = phi * eta;
        let r_max = self.policy.power_limit;
        Ok(par_chunked_sum_complex(self.primes.len(), |range| {
            let mut acc = KahanComplex::new();
            for i in range.rev() {
                let mut per_prime = Complex64::new(0.0, 0.0);
                for (l, &rate) in u.iter().enumerate() {
                    let x = self.decay[i * phi + l];
                    let theta = rate * self.ln_p[i];
                    let (sin, cos) = theta.sin_cos();
                    let e = Complex64::new(cos, -sin);
                    for k in 0..eta {
                        let alpha = self.alphas[i * m + l * eta + k];
                        if alpha == 0.0 {
                            continue;
                        }
                        let z = alpha * x * e;
                        let mut zp = z;
                        for r in 1..=r_max {
                            per_prime += zp / f64::from(r);
                            zp *= z;
                            if zp.norm_sqr() == 0.0 {
                                break;
                            }
                        }
                    }
                }
                acc.add(per_prime);
            }
            acc
        }))
    }

    /// Truncated Euler product at s = sigma + i t (all powers, primes up
    /// to P).
    pub fn product_at(&self, t: &[f64]) -> Result<Complex64> {
        let u = self.phase_rates(t)?;
        let phi = self.vspec.rank();
        let eta = self.vspec.tuple_size();
        let m = phi * eta;
        Ok(par_chunked_product(self.primes.len(), |range| {
            let mut acc = Complex64::new(1.0, 0.0);
            for i in range.rev() {
                for (l, &rate) in u.iter().enumerate() {
                    let x = self.decay[i * phi + l];
                    let theta = rate * self.ln_p[i];
                    let (sin, cos) = theta.sin_cos();
                    let e = Complex64::new(cos, -sin);
                    for k in 0..eta {
                        let alpha = self.alphas[i * m + l * eta + k];
                        if alpha == 0.0 {
                            continue;
                        }
                        acc /= Complex64::new(1.0, 0.0) - alpha * x * e;
                    }
                }
            }
            acc
        }))
    }

    /// Truncated log series at sigma itself (t = 0).
    pub fn log_sigma(&self) -> Complex64 {
        self.log_sigma
    }

    /// Normalized function f_sigma(t) = exp(log(sigma + i t) - log(sigma)).
    /// At t = 0 the two logs coincide bit for bit, so f = 1 exactly.
    pub fn cf(&self, t: &[f64]) -> Result<Complex64> {
        Ok((self.log_at(t)? - self.log_sigma).exp())
    }

    fn phase_rates(&self, t: &[f64]) -> Result<Vec<f64>> {
        if t.len() != self.vspec.d() {
            return Err(Error::Domain(format!(
                "t has {} entries, expected d = {}",
                t.len(),
                self.vspec.d()
            )));
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("t entries must be finite".into()));
        }
        Ok((0..self.vspec.rank()).map(|l| dot(self.vspec.direction_f64(l), t)).collect())
    }
}

/// Truncated log series value and its certified tail bound.
pub fn eval_log(
    vspec: &ValidatedSpec,
    point: &EvalPoint,
    policy: &TruncationPolicy,
) -> Result<(Complex64, f64)> {
    let eval = CfEvaluator::new(vspec, &point.sigma, policy)?;
    Ok((eval.log_at(&point.t)?, eval.tail()))
}

/// Truncated Euler product value, cross-checked against exp(eval_log).
/// The two paths share no code beyond the cached tables, so agreement
/// within the combined tolerance guards both implementations.
pub fn eval(
    vspec: &ValidatedSpec,
    point: &EvalPoint,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let evaluator = CfEvaluator::new(vspec, &point.sigma, policy)?;
    let product = evaluator.product_at(&point.t)?;
    let series = evaluator.log_at(&point.t)?.exp();
    let tolerance = (2.0 * evaluator.tail() + 1e-12) * series.norm();
    if (product - series).norm() > tolerance {
        return Err(Error::Internal(format!(
            "product/series cross-check failed: |{product} - {series}| > {tolerance}"
        )));
    }
    Ok(product)
}

/// f_sigma(t) = Z(sigma + i t) / Z(sigma), computed from the log series.
pub fn normalized_cf(
    vspec: &ValidatedSpec,
    sigma: &[f64],
    t: &[f64],
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    CfEvaluator::new(vspec, sigma, policy)?.cf(t)
}
