//! Decides whether the normalized function f_sigma is a compound Poisson
//! characteristic function via the three sign-condition theorems (tuple,
//! rank, and the general grid case), plus an atom-level certification for
//! specs outside the theorems' hypotheses.
//!
//! The decision is structural: the relevant row sums beta_l(p) are
//! analyzed over all primes at once (constants are trivial, characters
//! reduce to unit residue classes, tables to a default plus finitely many
//! overrides), so a "never negative" answer really quantifies over every
//! prime and not just a scanned range.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::arith::{is_prime_u64, sieve};
use crate::error::{Error, Result};
use crate::levy::{certify_scan, LevyAtom};
use crate::product::{
    convergence_margin, CoefficientScheme, DirectionModeHint, Rat, TruncationPolicy,
    ValidatedSpec,
};

/// Cap on the lcm of character moduli within one row; keeps the residue
/// class analysis linear in the lcm.
const CLASS_MODULUS_CAP: u64 = 1_000_000;

/// Witness scan cap for the smallest prime in a residue class.
const WITNESS_SCAN_CAP: u64 = 1_000_000_000;

/// Relative tolerance when matching declared direction ratios against the
/// exact rational ratios stored in the spec.
const RATIO_DECLARATION_TOL: f64 = 1e-9;

/// How the direction vectors relate, with the evidence for the call.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DirectionCondition {
    /// Exact rational rank equals the number of directions.
    Li { rank: usize },
    /// Collinear with ratios the spec declares to be irrational and
    /// rationally independent; the declaration is recorded, not proved.
    Lr { psis: Vec<f64>, note: String },
    /// Collinear with rational ratios (a_l = ratios[l] * a_1); outside
    /// both theorem regimes.
    CollinearRational { ratios: Vec<Rat> },
    /// Neither independent nor collinear.
    Mixed { rank: usize },
}

/// Final classification verdict. Serialized by variant name so reports
/// read "NotCharacteristic" etc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    CompoundPoisson,
    NotCharacteristic,
    OutOfTheoremScope,
    Inconclusive,
}

/// Which theorem (or fallback) produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TheoremUsed {
    /// All directions equal; condition on sum_{l,k} alpha_{lk}(p).
    Tuple,
    /// One factor per direction (LI or LR); condition on each alpha_l(p).
    Rank,
    /// Full grid with LI or LR directions; condition on each row sum
    /// beta_l(p) = sum_k alpha_{lk}(p).
    Main,
    /// Atom-level certification outside the theorems.
    AtomCertificate,
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationResult {
    pub verdict: Verdict,
    pub theorem_used: TheoremUsed,
    /// (row index 1-based, prime) pairs where the sign condition fails:
    /// every failing prime up to 100 plus one witness per failing residue
    /// class. Nonempty whenever the verdict is NotCharacteristic.
    pub offending_primes: Vec<(usize, u64)>,
    pub notes: String,
}

/// Whether a row sum beta(p) is negative for some prime, decided over all
/// primes at once.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowNegativity {
    NeverNegative,
    /// `witness` is the smallest prime with beta(p) < 0.
    NegativeAt { witness: u64 },
}

/// Row sums over a prime range plus the structural per-row answer.
#[derive(Debug, Clone)]
pub struct SignProfile {
    /// (direction index 1-based, prime) -> beta_l(p).
    pub betas: BTreeMap<(usize, u64), f64>,
    pub row_negativity: Vec<RowNegativity>,
}

/// Atom-level certification outcome.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtomCertificate {
    /// Every merged atom with p <= P, r <= R has nonnegative mass.
    CertifiedUpToTruncation { min_merged_mass: f64 },
    /// Disproof candidate: hand its location to the witness search.
    NegativeAtomFound { atom: LevyAtom },
    /// Reserved for certification strategies that cannot decide a sign;
    /// the exact-arithmetic scan used here always decides.
    Inconclusive { reason: String },
}

/// Exact rank of the direction matrix over the rationals.
fn exact_rank(vspec: &ValidatedSpec) -> usize {
    let phi = vspec.rank();
    let d = vspec.d();
    let mut rows: Vec<Vec<BigRational>> = (0..phi)
        .map(|l| vspec.direction(l).iter().map(Rat::to_big).collect())
        .collect();
    let mut rank = 0;
    for col in 0..d {
        let Some(pivot) = (rank..phi).find(|&row| !rows[row][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let (pivot_rows, rest) = rows.split_at_mut(rank + 1);
        let pivot_row = &pivot_rows[rank];
        for target in rest.iter_mut() {
            if target[col].is_zero() {
                continue;
            }
            let factor = &target[col] / &pivot_row[col];
            for (x, pv) in target[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= &factor * pv;
            }
        }
        rank += 1;
        if rank == phi {
            break;
        }
    }
    rank
}

/// Exact ratios c_l with a_l = c_l * a_1, when all directions are scalar
/// multiples of the first.
fn collinear_ratios(vspec: &ValidatedSpec) -> Option<Vec<Rat>> {
    let base = vspec.direction(0);
    let j0 = base.iter().position(|e| !e.is_zero())?;
    let mut ratios = Vec::with_capacity(vspec.rank());
    for l in 0..vspec.rank() {
        let dir = vspec.direction(l);
        let c = dir[j0].ratio() / base[j0].ratio();
        for (a, b) in dir.iter().zip(base) {
            if a.ratio() != c * b.ratio() {
                return None;
            }
        }
        ratios.push(Rat::from_ratio(c));
    }
    Some(ratios)
}

/// Classifies the direction set: exact rank for LI, declared ratios for
/// LR (checked for consistency against the stored rational ratios),
/// collinear-rational and mixed otherwise.
pub fn direction_condition(vspec: &ValidatedSpec) -> DirectionCondition {
    let phi = vspec.rank();
    let rank = exact_rank(vspec);
    if rank == phi {
        return DirectionCondition::Li { rank };
    }
    if let Some(ratios) = collinear_ratios(vspec) {
        if let Some(DirectionModeHint::Lr { psis, note }) = &vspec.spec().direction_mode_hint {
            let consistent = ratios.iter().zip(psis).all(|(c, &psi)| {
                let declared = psi / psis[0];
                let stored = c.to_f64();
                (declared - stored).abs() <= RATIO_DECLARATION_TOL * stored.abs().max(1.0)
            });
            if consistent {
                return DirectionCondition::Lr { psis: psis.clone(), note: note.clone() };
            }
        }
        return DirectionCondition::CollinearRational { ratios };
    }
    DirectionCondition::Mixed { rank }
}

fn all_directions_equal(vspec: &ValidatedSpec) -> bool {
    (1..vspec.rank()).all(|l| vspec.direction(l) == vspec.direction(0))
}

/// Structural analysis of one row sum beta(p) = sum over the row's
/// schemes of alpha(p).
struct RowAnalysis {
    negativity: RowNegativity,
    /// Failing primes <= 100 plus one witness per failing class, sorted.
    offenders: Vec<u64>,
}

fn beta_at(row: &[&CoefficientScheme], p: u64) -> f64 {
    row.iter().map(|scheme| scheme.alpha(p)).sum()
}

/// Value of beta on the residue class u mod Q of primes outside the
/// special set (characters read their table, others their default).
fn beta_on_class(row: &[&CoefficientScheme], u: u64) -> f64 {
    row.iter()
        .map(|scheme| match scheme {
            CoefficientScheme::Constant { value } => *value,
            CoefficientScheme::Character(chi) => f64::from(chi.value(u)),
            CoefficientScheme::Table { default, .. } => *default,
        })
        .sum()
}

fn smallest_prime_in_class(u: u64, q: u64, specials: &BTreeSet<u64>) -> Result<u64> {
    let mut n = u;
    while n <= WITNESS_SCAN_CAP {
        if n >= 2 && !specials.contains(&n) && is_prime_u64(n) {
            return Ok(n);
        }
        n += q;
    }
    Err(Error::Internal(format!(
        "no prime found in class {u} mod {q} below {WITNESS_SCAN_CAP}"
    )))
}

fn analyze_row(row: &[&CoefficientScheme]) -> Result<RowAnalysis> {
    // Q = lcm of the character moduli; beta on primes outside the special
    // set depends only on the residue class mod Q.
    let mut q: u64 = 1;
    for scheme in row {
        if let CoefficientScheme::Character(chi) = scheme {
            q = q.lcm(&chi.modulus);
            if q > CLASS_MODULUS_CAP {
                return Err(Error::Domain(format!(
                    "combined character modulus {q} exceeds analysis cap {CLASS_MODULUS_CAP}"
                )));
            }
        }
    }

    let mut specials: BTreeSet<u64> = BTreeSet::new();
    for scheme in row {
        if let CoefficientScheme::Table { overrides, .. } = scheme {
            specials.extend(overrides.keys().copied());
        }
    }
    let mut rem = q;
    let mut f = 2u64;
    while f * f <= rem {
        if rem.is_multiple_of(f) {
            specials.insert(f);
            while rem.is_multiple_of(f) {
                rem /= f;
            }
        }
        f += 1;
    }
    if rem > 1 {
        specials.insert(rem);
    }

    let mut negative_witnesses: BTreeSet<u64> = BTreeSet::new();
    for &p in &specials {
        if beta_at(row, p) < 0.0 {
            negative_witnesses.insert(p);
        }
    }
    for u in 1..=q {
        if u.gcd(&q) != 1 {
            continue;
        }
        if beta_on_class(row, u % q) < 0.0 {
            negative_witnesses.insert(smallest_prime_in_class(u, q, &specials)?);
        }
    }

    if negative_witnesses.is_empty() {
        return Ok(RowAnalysis { negativity: RowNegativity::NeverNegative, offenders: vec![] });
    }

    let mut offenders: BTreeSet<u64> = negative_witnesses.clone();
    for &p in sieve(100)?.primes() {
        if beta_at(row, p) < 0.0 {
            offenders.insert(p);
        }
    }
    Ok(RowAnalysis {
        negativity: RowNegativity::NegativeAt {
            witness: *negative_witnesses.iter().next().unwrap(),
        },
        offenders: offenders.into_iter().collect(),
    })
}

/// Per-row negativity analyses plus the combined (row, prime) offender list.
type RowScan = (Vec<RowAnalysis>, Vec<(usize, u64)>);

fn analyze_rows(rows: &[Vec<&CoefficientScheme>]) -> Result<RowScan> {
    let mut analyses = Vec::with_capacity(rows.len());
    let mut offending = Vec::new();
    for (l, row) in rows.iter().enumerate() {
        let analysis = analyze_row(row)?;
        for &p in &analysis.offenders {
            offending.push((l + 1, p));
        }
        analyses.push(analysis);
    }
    offending.sort_unstable();
    Ok((analyses, offending))
}

/// Row sums beta_l(p) for every direction and prime up to `prime_limit`,
/// plus the structural per-row negativity answer. Requires strict
/// coefficients; the interesting sign questions for general coefficients
/// go through `classify` (rank case) or `certify_by_atoms`.
pub fn sign_profile(vspec: &ValidatedSpec, prime_limit: u64) -> Result<SignProfile> {
    if !vspec.is_strict() {
        return Err(Error::NonStrict(
            "sign profile requires coefficients restricted to {-1, 0, 1}".into(),
        ));
    }
    let rows: Vec<Vec<&CoefficientScheme>> = (0..vspec.rank())
        .map(|l| (0..vspec.tuple_size()).map(|k| vspec.scheme(l, k)).collect())
        .collect();
    let (analyses, _) = analyze_rows(&rows)?;
    let mut betas = BTreeMap::new();
    for &p in sieve(prime_limit)?.primes() {
        for (l, row) in rows.iter().enumerate() {
            betas.insert((l + 1, p), beta_at(row, p));
        }
    }
    Ok(SignProfile {
        betas,
        row_negativity: analyses.into_iter().map(|a| a.negativity).collect(),
    })
}

fn verdict_from(
    theorem: TheoremUsed,
    analyses: Vec<RowAnalysis>,
    offending: Vec<(usize, u64)>,
    mut notes: String,
) -> ClassificationResult {
    let negative = analyses
        .iter()
        .any(|a| matches!(a.negativity, RowNegativity::NegativeAt { .. }));
    if negative {
        let witnesses: Vec<String> = analyses
            .iter()
            .enumerate()
            .filter_map(|(l, a)| match a.negativity {
                RowNegativity::NegativeAt { witness } => {
                    Some(format!("row {} at p = {}", l + 1, witness))
                }
                RowNegativity::NeverNegative => None,
            })
            .collect();
        notes.push_str(&format!("; sign condition fails: {}", witnesses.join(", ")));
        ClassificationResult {
            verdict: Verdict::NotCharacteristic,
            theorem_used: theorem,
            offending_primes: offending,
            notes,
        }
    } else {
        notes.push_str("; sign condition holds for every prime");
        ClassificationResult {
            verdict: Verdict::CompoundPoisson,
            theorem_used: theorem,
            offending_primes: vec![],
            notes,
        }
    }
}

/// Applies the matching theorem:
/// - all directions equal: the tuple condition on sum_{l,k} alpha_{lk}(p)
///   (strict coefficients required);
/// - LI or LR directions with one factor per direction: the rank
///   condition on each alpha_l(p), any coefficients in [-1, 1];
/// - LI or LR directions with a full grid: the row-sum condition on each
///   beta_l(p) (strict coefficients required);
/// - collinear-rational or mixed directions: out of theorem scope, use
///   `certify_by_atoms`.
pub fn classify(vspec: &ValidatedSpec, sigma: &[f64]) -> Result<ClassificationResult> {
    let margin = convergence_margin(vspec, sigma)?;
    if margin <= 1.0 {
        return Err(Error::Domain(format!("convergence margin v = {margin} must exceed 1")));
    }
    let phi = vspec.rank();
    let eta = vspec.tuple_size();

    if all_directions_equal(vspec) {
        if vspec.is_strict() {
            let combined: Vec<&CoefficientScheme> = (0..phi)
                .flat_map(|l| (0..eta).map(move |k| (l, k)))
                .map(|(l, k)| vspec.scheme(l, k))
                .collect();
            let m = combined.len();
            let (analyses, offending) = analyze_rows(std::slice::from_ref(&combined))?;
            let notes = format!(
                "all directions equal; applied the {m}-tuple condition to the combined row"
            );
            return Ok(verdict_from(TheoremUsed::Tuple, analyses, offending, notes));
        }
        if phi == 1 && eta == 1 {
            // A single direction is linearly independent on its own, so
            // the rank condition applies with general coefficients.
            let row = vec![vspec.scheme(0, 0)];
            let (analyses, offending) = analyze_rows(std::slice::from_ref(&row))?;
            let notes =
                "single direction; applied the rank condition with general coefficients"
                    .to_string();
            return Ok(verdict_from(TheoremUsed::Rank, analyses, offending, notes));
        }
        return Err(Error::NonStrict(
            "equal-direction specs with several factors need coefficients in {-1, 0, 1}; \
             general coefficients satisfy no known sign criterion"
                .into(),
        ));
    }

    match direction_condition(vspec) {
        DirectionCondition::Li { rank } | DirectionCondition::Mixed { rank }
            if rank == phi =>
        {
            theorem_for_independent(vspec, format!("directions linearly independent (rank {rank})"))
        }
        DirectionCondition::Lr { psis, note } => theorem_for_independent(
            vspec,
            format!(
                "collinear directions with declared rationally independent ratios {psis:?} \
                 (declaration, not proof: {note})"
            ),
        ),
        DirectionCondition::CollinearRational { ratios } => Ok(ClassificationResult {
            verdict: Verdict::OutOfTheoremScope,
            theorem_used: TheoremUsed::None,
            offending_primes: vec![],
            notes: format!(
                "directions collinear with rational ratios {ratios:?}; no sign theorem \
                 applies, run certify_by_atoms for a truncation-level answer"
            ),
        }),
        DirectionCondition::Mixed { rank } => Ok(ClassificationResult {
            verdict: Verdict::OutOfTheoremScope,
            theorem_used: TheoremUsed::None,
            offending_primes: vec![],
            notes: format!(
                "directions neither independent (rank {rank} of {phi}) nor collinear; no \
                 sign theorem applies, run certify_by_atoms for a truncation-level answer"
            ),
        }),
        DirectionCondition::Li { .. } => unreachable!("LI implies full rank"),
    }
}

fn theorem_for_independent(
    vspec: &ValidatedSpec,
    evidence: String,
) -> Result<ClassificationResult> {
    let phi = vspec.rank();
    let eta = vspec.tuple_size();
    if eta == 1 {
        let rows: Vec<Vec<&CoefficientScheme>> =
            (0..phi).map(|l| vec![vspec.scheme(l, 0)]).collect();
        let (analyses, offending) = analyze_rows(&rows)?;
        return Ok(verdict_from(TheoremUsed::Rank, analyses, offending, evidence));
    }
    if !vspec.is_strict() {
        return Err(Error::NonStrict(
            "the grid condition needs coefficients in {-1, 0, 1}; general coefficients \
             satisfy no known sign criterion"
                .into(),
        ));
    }
    let rows: Vec<Vec<&CoefficientScheme>> = (0..phi)
        .map(|l| (0..eta).map(|k| vspec.scheme(l, k)).collect())
        .collect();
    let (analyses, offending) = analyze_rows(&rows)?;
    Ok(verdict_from(TheoremUsed::Main, analyses, offending, evidence))
}

/// Enumerates merged atoms in ascending prime order with exact rational
/// coefficient signs, reporting the first negative atom or certifying
/// nonnegativity up to the truncation.
pub fn certify_by_atoms(
    vspec: &ValidatedSpec,
    sigma: &[f64],
    policy: &TruncationPolicy,
) -> Result<AtomCertificate> {
    let scan = certify_scan(vspec, sigma, policy)?;
    Ok(match scan.first_negative {
        Some(atom) => AtomCertificate::NegativeAtomFound { atom },
        None => AtomCertificate::CertifiedUpToTruncation { min_merged_mass: scan.min_mass },
    })
}
