//! Oracle-equivalence and scoring properties at full counts.

use entlab_core::checks;

#[test]
fn prover_matches_naive_fixed_point_on_500_theories() {
    let out = checks::prover_oracle_equivalence(500);
    assert!(out.passed, "{}", out.detail);
}

#[test]
fn derived_relations_match_genealogy_oracle_on_1000_graphs() {
    let out = checks::kinship_oracle_equivalence(1000).unwrap();
    assert!(out.passed, "{}", out.detail);
}

#[test]
fn kinship_scoring_matches_inverse_table_exhaustively() {
    let out = checks::scoring_fidelity();
    assert!(out.passed, "{}", out.detail);
}

#[test]
fn generated_corpora_round_trip_the_tokenizer() {
    let out = checks::vocab_round_trip().unwrap();
    assert!(out.passed, "{}", out.detail);
}

#[test]
fn abstraction_invariants_hold_on_generated_text() {
    let out = checks::abstraction_invariants().unwrap();
    assert!(out.passed, "{}", out.detail);
}
