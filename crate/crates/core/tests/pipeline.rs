use anosov_census::census::{class_count, enumerate_classes};
use anosov_census::closing::{axis_frame, box_coords, flow_box_membership, FlowBoxSpec};
use anosov_census::cone::{cone_hull, AlgebraBasis, LinearForm, NormLike};
use anosov_census::equidist::{build_census, read_census_csv, write_census_csv};
use anosov_census::fixtures::{first_factor_length, twisted_joining};
use anosov_census::group::{evaluate_word, group_config_to_json};
use anosov_census::invariants::{class_representative, jordan};
use anosov_census::{parse_group_config, Word};
use proptest::prelude::*;

#[test]
fn config_round_trip_preserves_the_census() {
    let spec = twisted_joining().unwrap();
    let text = group_config_to_json(&spec).to_string();
    let again = parse_group_config(&text).unwrap();
    assert_eq!(spec, again);
    let psi = LinearForm::new(first_factor_length(&spec));
    let a = build_census(&spec, 6, &psi, &[], 2).unwrap();
    let b = build_census(&again, 6, &psi, &[], 3).unwrap();
    assert_eq!(a.records, b.records);
}

#[test]
fn census_table_round_trips() {
    let spec = twisted_joining().unwrap();
    let psi = LinearForm::new(first_factor_length(&spec));
    let census = build_census(&spec, 7, &psi, &[NormLike::euclidean("l2")], 4).unwrap();
    assert_eq!(census.records.len() as u64, class_count(2, 7, true).unwrap());
    let mut buf = Vec::new();
    write_census_csv(&spec, &census, &mut buf).unwrap();
    let back = read_census_csv(&spec, buf.as_slice()).unwrap();
    assert_eq!(back.norm_names, vec!["l2"]);
    for (x, y) in census.records.iter().zip(&back.records) {
        assert_eq!(x.word, y.word);
        assert_eq!(x.ell_psi.to_bits(), y.ell_psi.to_bits());
        assert!(x.lambda.dist(&y.lambda) < 1e-14);
        assert!(x.holonomy.approx_eq(&y.holonomy, 1e-15));
    }
}

#[test]
fn census_rows_are_class_representatives() {
    let spec = twisted_joining().unwrap();
    let psi = LinearForm::new(first_factor_length(&spec));
    let census = build_census(&spec, 5, &psi, &[], 1).unwrap();
    let words = enumerate_classes(2, 5, true).unwrap();
    assert_eq!(census.records.iter().map(|r| r.word.clone()).collect::<Vec<_>>(), words);
    for r in &census.records {
        let l = jordan(&spec, &class_representative(&spec, &r.word.to_word()).unwrap()).unwrap();
        assert!(l.dist(&r.lambda) < 1e-12);
    }
}

#[test]
fn limit_cone_contains_every_sample() {
    let spec = twisted_joining().unwrap();
    let psi = LinearForm::new(first_factor_length(&spec));
    let census = build_census(&spec, 8, &psi, &[], 2).unwrap();
    let samples = census.sample_set();
    let hull = cone_hull(&AlgebraBasis::new(&spec.factor_dims()), &samples.points, 1e-9).unwrap();
    assert!(samples.points.iter().all(|p| hull.contains(p, 1e-9)));
    psi.check_positive(&hull).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn axis_frames_sit_at_the_box_center(codes in prop::collection::vec(0u8..4, 1..7)) {
        let spec = twisted_joining().unwrap();
        let w = anosov_census::reduce_word(codes.into_iter().map(anosov_census::Letter::from_code));
        prop_assume!(!w.is_empty());
        let g = class_representative(&spec, &w).unwrap();
        let frame = axis_frame(&spec, &g).unwrap();
        let c = box_coords(&spec, &frame, &frame).unwrap();
        prop_assert!(c.radius(&spec) < 1e-12);
        let b = FlowBoxSpec::new(frame.clone(), 0.01).unwrap();
        prop_assert!(flow_box_membership(&spec, &b, &frame).unwrap().inside);
        // the frame diagonalizes g
        let d = frame.inverse().unwrap().mul(&g).mul(&frame);
        for m in &d.0 {
            prop_assert!(m[(0, 1)].norm() < 1e-8 * m.max_abs() && m[(1, 0)].norm() < 1e-8 * m.max_abs());
        }
    }
}

#[test]
fn word_text_forms_agree() {
    let w: Word = "a b' a'".parse().unwrap();
    assert_eq!(Word::parse_signed(&w.to_signed_string()).unwrap(), w);
    let spec = twisted_joining().unwrap();
    assert!(evaluate_word(&spec, &w).is_ok());
}
