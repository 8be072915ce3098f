//! Named, pre-validated product specs for the standard example families,
//! with exact closed-form merged coefficients where one is known.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::arith::RealCharacter;
use crate::classify::TheoremUsed;
use crate::error::{Error, Result};
use crate::product::{validate, CoefficientScheme, ProductSpec, Rat, ValidatedSpec};

/// Expected outcome of the sign analysis for a catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpectedClassification {
    CompoundPoisson(TheoremUsed),
    NotCharacteristic(TheoremUsed),
    /// No sign theorem applies; the atom certificate resolves the entry.
    OutOfTheoremScope(ExpectedCertificate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpectedCertificate {
    /// Every complete merged mass is nonnegative up to the truncation.
    Certified,
    /// A negative merged atom exists; the witness search should then
    /// certify |f| > 1 somewhere.
    NegativeAtom,
}

/// Exact merged coefficient at the location n log p (the mass is this
/// coefficient times p^{-n sigma} in one dimension).
pub type ClosedForm = fn(p: u64, n: u32) -> BigRational;

pub struct CatalogEntry {
    pub name: &'static str,
    /// What the product is, in ordinary terms.
    pub describes: &'static str,
    pub spec: ProductSpec,
    /// Evaluation point with convergence margin exactly 2.
    pub default_sigma: Vec<f64>,
    pub expected: ExpectedClassification,
    pub closed_form: Option<ClosedForm>,
}

impl CatalogEntry {
    pub fn validated(&self) -> Result<ValidatedSpec> {
        validate(self.spec.clone())
    }
}

/// Entry names in presentation order.
pub fn list() -> Vec<&'static str> {
    vec![
        "riemann",
        "zeta_2s",
        "zeta2s_over_zeta",
        "L_chi4",
        "L1",
        "L2",
        "L1L2",
        "zeta_L_chi",
        "dedekind_qi",
        "zeta2_L2s",
        "L_zeta2s",
        "odd_riemann",
        "md_iii",
        "md_iv",
        "rank_shift",
        "tuple_rank_i",
        "tuple_rank_ii",
    ]
}

fn c(value: f64) -> CoefficientScheme {
    CoefficientScheme::constant(value)
}

fn chi4() -> CoefficientScheme {
    CoefficientScheme::Character(RealCharacter::mod_four())
}

/// Coefficient 1 everywhere except the named prime.
fn table_except(p: u64, value: f64) -> CoefficientScheme {
    CoefficientScheme::Table {
        default: 1.0,
        overrides: std::collections::BTreeMap::from([(p, value)]),
    }
}

fn dirs(rows: &[&[i64]]) -> Vec<Vec<Rat>> {
    rows.iter().map(|row| row.iter().map(|&e| Rat::integer(e)).collect()).collect()
}

fn spec(directions: Vec<Vec<Rat>>, coefficients: Vec<Vec<CoefficientScheme>>) -> ProductSpec {
    ProductSpec {
        d: directions[0].len(),
        tuple_size: coefficients[0].len(),
        directions,
        coefficients,
        direction_mode_hint: None,
    }
}

fn frac(num: i64, den: u32) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sign of chi4(p)^n for odd p: (-1)^{n (p-1)/2}.
fn chi4_power_sign(p: u64, n: u32) -> i64 {
    if (u64::from(n) * ((p - 1) / 2)) % 2 == 1 {
        -1
    } else {
        1
    }
}

/// zeta(s) chi4-L(s): coefficient (1 + chi4(p)^n)/n, and 1/n at p = 2.
fn dedekind_qi_closed(p: u64, n: u32) -> BigRational {
    if p == 2 {
        return frac(1, n);
    }
    frac(1 + chi4_power_sign(p, n), n)
}

/// zeta(s)^2 chi4-L(2s): 2/n at odd locations and at p = 2; at even
/// locations n = 2k the second row adds chi4(p)^k / k.
fn zeta2_l2s_closed(p: u64, n: u32) -> BigRational {
    let base = frac(2, n);
    if n % 2 == 1 || p == 2 {
        return base;
    }
    base + frac(chi4_power_sign(p, n / 2), n / 2)
}

/// chi4-L(s) zeta(2s): chi4(p)^n / n plus 2/n at even locations.
fn l_zeta2s_closed(p: u64, n: u32) -> BigRational {
    let mut total = if p == 2 { BigRational::zero() } else { frac(chi4_power_sign(p, n), n) };
    if n.is_multiple_of(2) {
        total += frac(2, n);
    }
    total
}

/// Evaluation point for the shifted-argument entry: the third coordinate
/// is pinned to the shift, so both inner products equal 2 for any
/// alpha > 0 and the convergence margin stays exactly 2.
pub fn rank_shift_sigma(alpha: f64) -> Result<Vec<f64>> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("shift alpha must be positive and finite, got {alpha}")));
    }
    Ok(vec![2.0 - alpha, alpha, alpha])
}

pub fn get(name: &str) -> Result<CatalogEntry> {
    use ExpectedCertificate::{Certified, NegativeAtom};
    use ExpectedClassification::{CompoundPoisson, NotCharacteristic, OutOfTheoremScope};
    let entry = match name {
        "riemann" => CatalogEntry {
            name: "riemann",
            describes: "Riemann zeta(s)",
            spec: spec(dirs(&[&[1]]), vec![vec![c(1.0)]]),
            default_sigma: vec![2.0],
            expected: CompoundPoisson(TheoremUsed::Tuple),
            closed_form: None,
        },
        "zeta_2s" => CatalogEntry {
            name: "zeta_2s",
            describes: "zeta(2s) as a one-variable product with doubled direction",
            spec: spec(dirs(&[&[2]]), vec![vec![c(1.0)]]),
            default_sigma: vec![1.0],
            expected: CompoundPoisson(TheoremUsed::Tuple),
            closed_form: None,
        },
        "zeta2s_over_zeta" => CatalogEntry {
            name: "zeta2s_over_zeta",
            describes: "zeta(2s)/zeta(s), the coefficient -1 product",
            spec: spec(dirs(&[&[1]]), vec![vec![c(-1.0)]]),
            default_sigma: vec![2.0],
            expected: NotCharacteristic(TheoremUsed::Tuple),
            closed_form: None,
        },
        "L_chi4" => CatalogEntry {
            name: "L_chi4",
            describes: "Dirichlet L(s, chi4) for the real non-principal character mod 4",
            spec: spec(dirs(&[&[1]]), vec![vec![chi4()]]),
            default_sigma: vec![2.0],
            expected: NotCharacteristic(TheoremUsed::Tuple),
            closed_form: None,
        },
        "L1" => CatalogEntry {
            name: "L1",
            describes: "Euler product with coefficient -1 at p = 2 and 1 elsewhere",
            spec: spec(dirs(&[&[1]]), vec![vec![table_except(2, -1.0)]]),
            default_sigma: vec![2.0],
            expected: NotCharacteristic(TheoremUsed::Tuple),
            closed_form: None,
        },
        "L2" => CatalogEntry {
            name: "L2",
            describes: "Euler product with coefficient -1 at p = 3 and 1 elsewhere",
            spec: spec(dirs(&[&[1]]), vec![vec![table_except(3, -1.0)]]),
            default_sigma: vec![2.0],
            expected: NotCharacteristic(TheoremUsed::Tuple),
            closed_form: None,
        },
        "L1L2" => CatalogEntry {
            name: "L1L2",
            describes: "product of the two single-override entries; the row sums repair both signs",
            spec: spec(
                dirs(&[&[1]]),
                vec![vec![table_except(2, -1.0), table_except(3, -1.0)]],
            ),
            default_sigma: vec![2.0],
            expected: CompoundPoisson(TheoremUsed::Tuple),
            closed_form: None,
        },
        "zeta_L_chi" => CatalogEntry {
            name: "zeta_L_chi",
            describes: "zeta(s) L(s, chi4); row sum 1 + chi4(p) is never negative",
            spec: spec(dirs(&[&[1]]), vec![vec![c(1.0), chi4()]]),
            default_sigma: vec![2.0],
            expected: CompoundPoisson(TheoremUsed::Tuple),
            closed_form: None,
        },
        "dedekind_qi" => CatalogEntry {
            name: "dedekind_qi",
            describes: "Dedekind zeta of the Gaussian rationals, zeta(s) L(s, chi4)",
            spec: spec(dirs(&[&[1]]), vec![vec![c(1.0), chi4()]]),
            default_sigma: vec![2.0],
            expected: CompoundPoisson(TheoremUsed::Tuple),
            closed_form: Some(dedekind_qi_closed),
        },
        "zeta2_L2s" => CatalogEntry {
            name: "zeta2_L2s",
            describes: "zeta(s)^2 L(2s, chi4); cross-power cancellations keep merged masses nonnegative",
            spec: spec(
                dirs(&[&[1], &[2]]),
                vec![vec![c(1.0), c(1.0)], vec![chi4(), c(0.0)]],
            ),
            default_sigma: vec![2.0],
            expected: OutOfTheoremScope(Certified),
            closed_form: Some(zeta2_l2s_closed),
        },
        "L_zeta2s" => CatalogEntry {
            name: "L_zeta2s",
            describes: "L(s, chi4) zeta(2s); a negative first-power atom survives every merge",
            spec: spec(dirs(&[&[1], &[2]]), vec![vec![chi4()], vec![c(1.0)]]),
            default_sigma: vec![2.0],
            expected: OutOfTheoremScope(NegativeAtom),
            closed_form: Some(l_zeta2s_closed),
        },
        "odd_riemann" => CatalogEntry {
            name: "odd_riemann",
            describes: "Euler product over odd primes only (coefficient 0 at p = 2)",
            spec: spec(dirs(&[&[1]]), vec![vec![table_except(2, 0.0)]]),
            default_sigma: vec![2.0],
            expected: CompoundPoisson(TheoremUsed::Tuple),
            closed_form: None,
        },
        "md_iii" => CatalogEntry {
            name: "md_iii",
            describes: "zeta(s1) zeta(s1 + s2) on independent directions",
            spec: spec(dirs(&[&[1, 0], &[1, 1]]), vec![vec![c(1.0)], vec![c(1.0)]]),
            default_sigma: vec![2.0, 0.5],
            expected: CompoundPoisson(TheoremUsed::Rank),
            closed_form: None,
        },
        "md_iv" => CatalogEntry {
            name: "md_iv",
            describes: "zeta(s1) L(s1 + 2 s2, chi4) on independent directions",
            spec: spec(dirs(&[&[1, 0], &[1, 2]]), vec![vec![c(1.0)], vec![chi4()]]),
            default_sigma: vec![2.0, 0.5],
            expected: NotCharacteristic(TheoremUsed::Rank),
            closed_form: None,
        },
        "rank_shift" => CatalogEntry {
            name: "rank_shift",
            describes: "zeta(s1 + alpha) zeta(s1 + s2) with the shift alpha carried by a \
                        pinned third coordinate (default alpha = 1/2)",
            spec: spec(dirs(&[&[1, 0, 1], &[1, 1, 0]]), vec![vec![c(1.0)], vec![c(1.0)]]),
            default_sigma: rank_shift_sigma(0.5)?,
            expected: CompoundPoisson(TheoremUsed::Rank),
            closed_form: None,
        },
        "tuple_rank_i" => CatalogEntry {
            name: "tuple_rank_i",
            describes: "zeta(s1) L1(s1) zeta(s1+s2) L1(s1+s2): a two-by-two grid whose \
                        row sums stay nonnegative",
            spec: spec(
                dirs(&[&[1, 0], &[1, 1]]),
                vec![
                    vec![c(1.0), table_except(2, -1.0)],
                    vec![c(1.0), table_except(2, -1.0)],
                ],
            ),
            default_sigma: vec![2.0, 0.5],
            expected: CompoundPoisson(TheoremUsed::Main),
            closed_form: None,
        },
        "tuple_rank_ii" => CatalogEntry {
            name: "tuple_rank_ii",
            describes: "L2(s1) zeta(s1+s2) L2(s1+s2): the unpaired override row goes \
                        negative at p = 3",
            spec: spec(
                dirs(&[&[1, 0], &[1, 1]]),
                vec![
                    vec![table_except(3, -1.0), c(0.0)],
                    vec![c(1.0), table_except(3, -1.0)],
                ],
            ),
            default_sigma: vec![2.0, 0.5],
            expected: NotCharacteristic(TheoremUsed::Main),
            closed_form: None,
        },
        other => return Err(Error::UnknownEntry(other.to_string())),
    };
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{certify_by_atoms, classify, AtomCertificate, Verdict};
    use crate::product::{convergence_margin, TruncationPolicy};
    use num_rational::Ratio;

    #[test]
    fn every_entry_validates_at_margin_two() {
        for name in list() {
            let entry = get(name).unwrap();
            let vspec = entry.validated().unwrap_or_else(|e| panic!("{name}: {e}"));
            let margin = convergence_margin(&vspec, &entry.default_sigma).unwrap();
            assert_eq!(margin, 2.0, "{name}");
        }
    }

    #[test]
    fn expected_classifications_hold() {
        let policy = TruncationPolicy::new(500, 12, 1e-3).unwrap();
        for name in list() {
            let entry = get(name).unwrap();
            let vspec = entry.validated().unwrap();
            match entry.expected {
                ExpectedClassification::CompoundPoisson(theorem) => {
                    let result = classify(&vspec, &entry.default_sigma).unwrap();
                    assert_eq!(result.verdict, Verdict::CompoundPoisson, "{name}");
                    assert_eq!(result.theorem_used, theorem, "{name}");
                    assert!(result.offending_primes.is_empty(), "{name}");
                }
                ExpectedClassification::NotCharacteristic(theorem) => {
                    let result = classify(&vspec, &entry.default_sigma).unwrap();
                    assert_eq!(result.verdict, Verdict::NotCharacteristic, "{name}");
                    assert_eq!(result.theorem_used, theorem, "{name}");
                    assert!(!result.offending_primes.is_empty(), "{name}");
                }
                ExpectedClassification::OutOfTheoremScope(cert) => {
                    let result = classify(&vspec, &entry.default_sigma).unwrap();
                    assert_eq!(result.verdict, Verdict::OutOfTheoremScope, "{name}");
                    let outcome =
                        certify_by_atoms(&vspec, &entry.default_sigma, &policy).unwrap();
                    match (cert, outcome) {
                        (
                            ExpectedCertificate::Certified,
                            AtomCertificate::CertifiedUpToTruncation { min_merged_mass },
                        ) => assert!(min_merged_mass >= 0.0, "{name}"),
                        (
                            ExpectedCertificate::NegativeAtom,
                            AtomCertificate::NegativeAtomFound { atom },
                        ) => assert!(atom.mass < 0.0, "{name}"),
                        (_, other) => panic!("{name}: unexpected certificate {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn closed_forms_match_merged_coefficients_exactly() {
        for name in ["dedekind_qi", "zeta2_L2s", "L_zeta2s"] {
            let entry = get(name).unwrap();
            let closed = entry.closed_form.unwrap();
            let vspec = entry.validated().unwrap();
            for p in [2u64, 3, 5, 7, 11, 13, 17, 19] {
                let terms =
                    crate::levy::merged_coefficient_terms(&vspec, &entry.default_sigma, p, 16);
                for n in 1u32..=8 {
                    let want = closed(p, n);
                    let got = terms
                        .iter()
                        .find(|term| {
                            term.key.len() == 1 && term.key[0].ratio() == Ratio::from(i64::from(n))
                        })
                        .unwrap_or_else(|| panic!("{name}: no merged term at {n} log {p}"));
                    assert_eq!(got.coefficient, want, "{name} at p = {p}, n = {n}");
                }
            }
        }
    }

    #[test]
    fn closed_form_spot_values() {
        assert_eq!(dedekind_qi_closed(5, 1), frac(2, 1));
        assert_eq!(dedekind_qi_closed(3, 1), frac(0, 1));
        assert_eq!(dedekind_qi_closed(3, 2), frac(1, 1));
        assert_eq!(l_zeta2s_closed(3, 1), frac(-1, 1));
        assert_eq!(zeta2_l2s_closed(3, 22), frac(0, 1));
        assert_eq!(zeta2_l2s_closed(5, 4), frac(2, 4) + frac(1, 2));
    }

    #[test]
    fn shift_parameter_keeps_the_margin() {
        for alpha in [0.25, 0.5, 1.0, 1.75] {
            let entry = get("rank_shift").unwrap();
            let vspec = entry.validated().unwrap();
            let sigma = rank_shift_sigma(alpha).unwrap();
            assert_eq!(convergence_margin(&vspec, &sigma).unwrap(), 2.0);
        }
        assert!(rank_shift_sigma(0.0).is_err());
        assert!(rank_shift_sigma(-1.0).is_err());
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(get("nope"), Err(Error::UnknownEntry(_))));
        assert_eq!(list().len(), 17);
    }
}
