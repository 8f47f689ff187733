use serde_json::Value;
use ssdfrc_web::{detection_curve, encode_index_bits, trace_subcarrier};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).expect("valid json")
}

#[test]
fn noiseless_private_trace_ends_on_the_true_antenna() {
    let v = parse(trace_subcarrier(64, 60.0, 3, true));
    assert_eq!(v["class"], v["truth"], "{v}");
    assert_eq!(v["class"]["kind"], "private");
    // 32 columns halve down to one: five levels.
    assert_eq!(v["steps"].as_array().unwrap().len(), 5);
    let first = &v["steps"][0]["groups"];
    assert_eq!(first, &serde_json::json!([[0, 16], [16, 32]]));
}

#[test]
fn shared_trace_stops_early() {
    let v = parse(trace_subcarrier(64, 60.0, 3, false));
    assert_eq!(v["class"]["kind"], "shared");
    assert_eq!(v["steps"].as_array().unwrap().len(), 1);
}

#[test]
fn curve_has_one_point_per_snr() {
    let v = parse(detection_curve(64, 20.0, 30.0, 5.0, 4, 1));
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 3);
    for p in pts {
        let (lo, pr, hi) = (p["ci_low"].as_f64().unwrap(), p["probability"].as_f64().unwrap(), p["ci_high"].as_f64().unwrap());
        assert!(lo <= pr && pr <= hi);
    }
    assert_eq!(pts[2]["probability"].as_f64(), Some(1.0));
}

#[test]
fn bad_inputs_report_errors() {
    assert!(parse(detection_curve(32, 5.0, 0.0, 1.0, 4, 1))["error"].is_string());
    assert!(parse(trace_subcarrier(0, 0.0, 1, true))["error"].is_string());
    assert!(parse(encode_index_bits("10x1"))["error"].is_string());
    assert!(parse(encode_index_bits(&"1".repeat(56)))["error"].is_string());
}

#[test]
fn index_bits_map_to_a_valid_pairing() {
    let v = parse(encode_index_bits("1011"));
    assert_eq!(v["capacity"], 55);
    assert_eq!(v["roundtrip"], true);
    let ants = v["active_antennas"].as_array().unwrap();
    assert_eq!(ants.len(), 6);
    let zero = parse(encode_index_bits(""));
    assert_eq!(zero["active_antennas"], serde_json::json!([0, 1, 2, 3, 4, 5]));
    assert_eq!(zero["private_subcarriers"], serde_json::json!([0, 1, 2, 3, 4, 5]));
}
