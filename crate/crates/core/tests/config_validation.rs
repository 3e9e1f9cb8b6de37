//! Configuration parsing and field-specific rejection messages.

use scbf::config::parse_config;

#[test]
fn defaults_parse_and_validate() {
    let cfg = parse_config("").unwrap();
    assert_eq!((cfg.model.d, cfg.model.n), (2, 8));
    cfg.build().unwrap();
}

#[test]
fn rejections_name_the_offending_field() {
    let cases = [
        ("[model]\nd = 4", "d"),
        ("[model]\nr = 0.5", "r"),
        ("[model]\nmu = 0.0", "mu"),
        ("[model]\npadding = 1.2", "padding"),
        ("[time]\ndt = -1.0", "dt"),
        ("[time]\nhorizon = 1.0\ndt = 0.3", "dt"),
        ("[noise]\nq_s = 0.9", "q_s"),
        ("[noise]\nintensity = -2.0", "intensity"),
        ("[noise]\nmark_low = 1.0\nmark_high = 0.0", "mark_high"),
        ("[run]\ncutoffs = [8, 4]", "cutoffs"),
        ("[initial]\npreset = \"file\"", "path"),
    ];
    for (text, field) in cases {
        let err = parse_config(text).expect_err(text).to_string();
        assert!(err.contains(field), "{text:?} gave {err:?}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(parse_config("[model]\nviscosity = 1.0").is_err());
    assert!(parse_config("[extras]\nx = 1").is_err());
}

#[test]
fn uniqueness_regime_is_checked_on_request() {
    let refused = parse_config("[model]\nd = 3\nn = 3\nr = 3.0\nmu = 0.5\nbeta = 0.5").unwrap();
    assert!(refused.check_uniqueness_regime().unwrap_err().to_string().contains("2βμ"));
    let fine = parse_config("[model]\nd = 3\nn = 3\nr = 3.0\nmu = 1.0\nbeta = 1.0").unwrap();
    fine.check_uniqueness_regime().unwrap();
}
