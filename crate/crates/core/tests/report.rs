//! Report serialisation round trips.

use lpkato::report::*;
use lpkato::{DecayProfile, DecisionRule, Limit, Verdict};
use proptest::prelude::*;

fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::In), Just(Verdict::Out), Just(Verdict::Inconclusive)]
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => -1e12f64..1e12,
        4 => (-300i32..300, 1.0f64..10.0).prop_map(|(e, m)| m * 10f64.powi(e)),
        1 => Just(f64::INFINITY),
        1 => Just(0.0),
    ]
}

#[test]
fn formatting_examples() {
    assert_eq!(fmt_sig(123_456_789.0), "1.23457e8");
    assert_eq!(fmt_sig(0.000_123_456_7), "0.000123457");
    assert_eq!(fmt_sig(1e6), "1e6");
    assert_eq!(fmt_sig(2.5), "2.5");
    assert_eq!(fmt_sig(f64::INFINITY), "inf");
    assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
}

#[test]
fn profile_table_of_a_real_profile() {
    let pts = [(1.0, 2.0), (0.5, 0.5), (0.25, 0.125), (0.125, 0.03125)];
    let p = DecayProfile::from_points("local[x]", Limit::Zero, pts.to_vec(), &DecisionRule::default());
    let text = profile_table(&[&p]).to_csv(&["lpkato test".into()]);
    assert!(text.starts_with("# lpkato test\nprofile,abscissa,value,verdict\n"));
    let rows = parse_profile_rows(&Table::from_csv(&text).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.verdict == p.verdict));
}

#[test]
fn record_text_rounds_floats() {
    #[derive(serde::Serialize)]
    struct R {
        x: f64,
        v: Vec<f64>,
    }
    let t = record_text(&["h".into()], &R { x: 1.0 / 3.0, v: vec![2.0 / 3.0, f64::INFINITY] }).unwrap();
    assert!(t.starts_with("# h\n"));
    let back: toml::Value = toml::from_str(&t).unwrap();
    assert_eq!(back["x"].as_float(), Some(0.333333));
    assert_eq!(back["v"][1].as_float(), Some(f64::INFINITY));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fmt_sig_round_trip(x in value()) {
        let r = round_sig(x);
        prop_assert_eq!(round_sig(r), r);
        prop_assert_eq!(fmt_sig(r), fmt_sig(x));
        if x.is_finite() && x != 0.0 {
            prop_assert!(((r - x) / x).abs() <= 5e-6);
        }
    }

    #[test]
    fn profile_rows_round_trip(
        rows in prop::collection::vec(("[a-z_\\[\\];=, ]{1,12}", value(), value(), verdict()), 0..20),
    ) {
        let rows: Vec<ProfileRow> = rows
            .into_iter()
            .map(|(profile, a, v, verdict)| ProfileRow { profile, abscissa: round_sig(a), value: round_sig(v), verdict })
            .collect();
        let text = profile_rows(&rows).to_csv(&["header".into(), "second line".into()]);
        let back = parse_profile_rows(&Table::from_csv(&text).unwrap()).unwrap();
        prop_assert_eq!(&back, &rows);
        prop_assert_eq!(profile_rows(&back).to_csv(&["header".into(), "second line".into()]), text);
    }
}
