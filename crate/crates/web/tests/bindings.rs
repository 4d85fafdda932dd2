use ronet_web::{attack_trace_json, pe_heatmap_json, simulate_pair_json, MAX_BUDGET};
use serde_json::Value;

const STATE: (f64, f64, f64, f64, f64) = (15_000.0, 15_000.0, 12.0, 16.0, 150.0);

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn simulate_pair_histogram_accounts_for_every_completion() {
    let (a, b, c, d, e) = STATE;
    let v = parse(&simulate_pair_json(a, b, c, d, e, 30.0, 30.0, 1.0, 200.0, 1).unwrap());
    let counts: u64 = v["counts"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(counts, v["completed"].as_u64().unwrap());
    assert!(v["completed"].as_u64().unwrap() > 0);
    let pe = v["pe"].as_f64().unwrap();
    let expected = v["prob"].as_f64().unwrap() / v["usage"].as_f64().unwrap();
    assert!((pe - expected).abs() < 1e-12);
    // deterministic for a fixed seed
    assert_eq!(
        simulate_pair_json(a, b, c, d, e, 30.0, 30.0, 1.0, 200.0, 1).unwrap(),
        simulate_pair_json(a, b, c, d, e, 30.0, 30.0, 1.0, 200.0, 1).unwrap()
    );
}

#[test]
fn invalid_inputs_are_reported_not_panicked() {
    let (a, b, c, d, e) = STATE;
    assert!(simulate_pair_json(a, b, c, d, e, 80.0, 30.0, 1.0, 200.0, 1).is_err());
    assert!(simulate_pair_json(5.0, b, c, d, e, 30.0, 30.0, 1.0, 200.0, 1).is_err());
    assert!(pe_heatmap_json(a, b, c, d, e, 1.0, 200.0, 1, 1).is_err());
    assert!(attack_trace_json(a, b, c, d, e, 30.0, 30.0, 1.0, 0.2, MAX_BUDGET + 1, 1).is_err());
    assert!(attack_trace_json(a, b, c, d, e, 30.0, 30.0, 1.0, 0.9, 5, 1).is_err());
}

#[test]
fn heatmap_shape_and_best_cell() {
    let (a, b, c, d, e) = STATE;
    let v = parse(&pe_heatmap_json(a, b, c, d, e, 1.0, 200.0, 6, 2).unwrap());
    let rows = v["pe"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.as_array().unwrap().len() == 6));
    let axis: Vec<f64> = v["bandwidth_ul"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(axis, vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0]);
    // zero bandwidth in either direction completes nothing
    assert!(rows[0].as_array().unwrap().iter().all(|x| x.as_f64().unwrap() == 0.0));
    let max = rows
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        .fold(f64::MIN, f64::max);
    let best = v["best"].as_array().unwrap();
    let (i, j) = (
        (best[0].as_f64().unwrap() / 10.0) as usize,
        (best[1].as_f64().unwrap() / 10.0) as usize,
    );
    assert_eq!(rows[i][j].as_f64().unwrap(), max);
}

#[test]
fn attack_trace_running_best_is_non_increasing() {
    let (a, b, c, d, e) = STATE;
    let v = parse(&attack_trace_json(a, b, c, d, e, 30.0, 30.0, 1.0, 0.2, 8, 4).unwrap());
    for key in ["bo_running_best", "rn_running_best"] {
        let xs: Vec<f64> = v[key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(xs.len(), 8);
        assert!(xs.windows(2).all(|w| w[1] <= w[0]), "{key}: {xs:?}");
    }
    let best = v["bo_best_attack"].as_array().unwrap();
    assert!(best.iter().all(|x| x.as_f64().unwrap().abs() <= 0.2));
}
