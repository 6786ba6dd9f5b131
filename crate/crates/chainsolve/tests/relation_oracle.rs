//! Certification suite for the bundled kinship composition table.

use chainsolve::relation::{
    compose, generate_table, solve_relation_chain, verify_table, Assertion, CompositionTable,
    Gender, KinRelation, RelationProgram,
};
use KinRelation::*;

/// Sampling parameters the bundled table was generated with. The
/// `regenerate_table_fixture` test rewrites the JSON file from these.
const GEN_TRIALS: u64 = 20_000;
const GEN_SEED: u64 = 11;

#[test]
fn builtin_table_matches_generator() {
    let generated = generate_table(GEN_TRIALS, GEN_SEED);
    assert_eq!(CompositionTable::builtin(), &generated);
}

#[test]
fn spot_entries_hold() {
    let t = CompositionTable::builtin();
    assert_eq!(t.get(Son, Daughter), Some(Grandson));
    assert_eq!(t.get(Grandfather, Daughter), Some(Father));
    assert_eq!(t.get(Brother, Brother), Some(Brother));
    assert_eq!(t.get(Mother, Sister), Some(Mother));
    assert_eq!(t.get(Mother, Brother), Some(Mother));
}

#[test]
fn grandmother_through_son_resolved_to_blood() {
    let t = CompositionTable::builtin();
    assert_eq!(t.get(Grandmother, Son), Some(Mother));
    let flagged = t
        .ambiguous()
        .iter()
        .find(|a| a.left == Grandmother && a.right == Son)
        .expect("ambiguity recorded in table metadata");
    assert!(flagged.observed.contains(&Mother));
    assert!(flagged.observed.contains(&MotherInLaw));
    assert_eq!(flagged.resolved, Some(Mother));
}

#[test]
fn gender_consistency_exhaustive() {
    for (l, _, result) in CompositionTable::builtin().entries() {
        assert_eq!(result.gender(), l.gender(), "{l} composed");
    }
}

#[test]
fn inverse_consistency_exhaustive() {
    // For an entry r1 @ r2 = r: inverting the premise chain composes
    // inverse(r2) with inverse(r1) and must agree with inverse(r),
    // wherever the table defines the flipped entry.
    let t = CompositionTable::builtin();
    let mut checked = 0u32;
    for (r1, r2, r) in t.entries() {
        for g in [Gender::Male, Gender::Female] {
            let (Some(inv_r), Some(inv_r2)) = (r.inverse(g), r2.inverse(g)) else {
                continue;
            };
            let Some(inv_r1) = r1.inverse(r2.gender()) else {
                continue;
            };
            if let Some(flipped) = t.get(inv_r2, inv_r1) {
                assert_eq!(flipped, inv_r, "inverse of {r1} @ {r2} for {g:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "only {checked} inverse pairs were defined");
}

#[test]
fn associativity_exhaustive_on_defined_domain() {
    let t = CompositionTable::builtin();
    let mut checked = 0u32;
    for (r1, r2, a) in t.entries() {
        for r3 in KinRelation::ALL {
            let (Some(left), Some(b)) = (t.get(a, r3), t.get(r2, r3)) else {
                continue;
            };
            let Some(right) = t.get(r1, b) else { continue };
            assert_eq!(left, right, "({r1} @ {r2}) @ {r3} vs {r1} @ ({r2} @ {r3})");
            checked += 1;
        }
    }
    assert!(checked > 500, "only {checked} triples were defined");
}

#[test]
fn verification_run_is_clean() {
    let report = verify_table(CompositionTable::builtin(), 5_000, 23);
    assert!(
        report.violations.is_empty(),
        "violations: {:?}",
        report.violations
    );
    assert!(report.unrealized.is_empty(), "unrealized: {:?}", report.unrealized);
}

#[test]
fn full_scale_verification_is_clean() {
    let report = verify_table(CompositionTable::builtin(), 100_000, 37);
    assert!(
        report.violations.is_empty(),
        "violations: {:?}",
        report.violations
    );
    assert!(report.unrealized.is_empty(), "unrealized: {:?}", report.unrealized);
    assert!(report
        .ambiguous
        .iter()
        .any(|a| a.left == Grandmother && a.right == Son));
}

#[test]
fn pruned_entries_stay_outside_the_table() {
    let t = CompositionTable::builtin();
    assert!(!t.pruned().is_empty());
    for row in t.pruned() {
        assert_eq!(t.get(row.left, row.right), None, "{} @ {}", row.left, row.right);
    }
}

#[test]
fn injected_bad_entry_is_caught() {
    let mut t = CompositionTable::builtin().clone();
    t.insert(Son, Daughter, Granddaughter);
    let report = verify_table(&t, 2_000, 23);
    assert!(report
        .violations
        .iter()
        .any(|v| v.left == Son && v.right == Daughter));
}

#[test]
fn table_2_style_three_hop_chain() {
    let program = RelationProgram {
        assertions: vec![
            Assertion {
                left: "Valerie".to_string(),
                right: "Annie".to_string(),
                relation: Mother,
                rationale: None,
            },
            Assertion {
                left: "Annie".to_string(),
                right: "Carlos".to_string(),
                relation: Sister,
                rationale: None,
            },
            Assertion {
                left: "Carlos".to_string(),
                right: "Clarence".to_string(),
                relation: Brother,
                rationale: None,
            },
        ],
        goal: ("Valerie".to_string(), "Clarence".to_string()),
        expression: vec![
            ("Valerie".to_string(), "Annie".to_string()),
            ("Annie".to_string(), "Carlos".to_string()),
            ("Carlos".to_string(), "Clarence".to_string()),
        ],
    };
    assert_eq!(
        solve_relation_chain(&program, CompositionTable::builtin()),
        Ok(Mother)
    );
}

#[test]
fn compose_matches_direct_lookup() {
    let t = CompositionTable::builtin();
    assert_eq!(compose(Son, Daughter, t), Ok(Grandson));
    assert!(compose(Husband, Husband, t).is_err());
}

/// Rewrites the bundled JSON fixture. Run manually after changing the
/// generator or its parameters:
/// `cargo test -p chainsolve --test relation_oracle regenerate_table_fixture -- --ignored`
#[test]
#[ignore]
fn regenerate_table_fixture() {
    let table = generate_table(GEN_TRIALS, GEN_SEED);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/kinship_table.json");
    std::fs::write(path, table.to_json()).expect("fixture written");
    println!(
        "wrote {} entries, {} ambiguous premises",
        table.len(),
        table.ambiguous().len()
    );
}
