use reprogram_lab::data::{generate_orthosep, LabeledDataset};
use reprogram_lab::flow::{balanced_live_init, train, weights_from_text, weights_to_text, TrainerConfig};
use reprogram_lab::network::TwoLayerNet;
use reprogram_lab::numerics::SeededRng;
use reprogram_lab::reprogram::ProgramImage;
use reprogram_lab::verify::{report_json, theorem2_suite, Theorem2Config};

#[test]
fn network_record_round_trips_bitwise() {
    let net = TwoLayerNet::random_init(9, 4, &mut SeededRng::new(1, 0)).unwrap();
    let text = net.to_text();
    assert!(text.starts_with("9 4\n"));
    assert_eq!(text.lines().count(), 1 + 4 + 1);
    let back = TwoLayerNet::from_text(&format!("# a comment\n{text}")).unwrap();
    assert_eq!(back, net);
}

#[test]
fn dataset_record_round_trips_bitwise() {
    let data = generate_orthosep(5, 3, 2, &mut SeededRng::new(2, 0)).unwrap();
    let text = data.to_text();
    assert!(text.starts_with("5 5\n"));
    assert_eq!(LabeledDataset::from_text(&text).unwrap(), data);
    assert!(LabeledDataset::from_text("1 2\n0 1 1\n").is_err());
}

#[test]
fn trained_weights_round_trip() {
    let data = LabeledDataset::four_point();
    let theta = balanced_live_init(&data, 4, 0.5, &mut SeededRng::new(3, 0)).unwrap();
    let rep = train(&theta, &data, &TrainerConfig { max_steps: 100, ..TrainerConfig::default() }).unwrap();
    let back = weights_from_text(&weights_to_text(&rep.final_theta)).unwrap();
    assert_eq!(back, rep.final_theta);
    let csv = rep.to_csv("seed = 3");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# seed = 3"));
    assert_eq!(lines.next(), Some("step,loss,balance_residual,min_margin"));
    assert!(lines.all(|l| l.split(',').count() == 4));
    assert!(!csv.contains('\r'));
}

#[test]
fn image_formats_round_trip() {
    let mut rng = SeededRng::new(4, 0);
    let img = ProgramImage::from_fn(5, 7, 3, |_, _, _| rng.uniform_range(-1.0, 1.0)).unwrap();
    assert_eq!(ProgramImage::from_text(&img.to_text()).unwrap(), img);
    let ppm = img.to_ppm("seed = 4\nscheme = 1").unwrap();
    assert!(ppm.starts_with(b"P6\n# seed = 4\n# scheme = 1\n7 5\n255\n"));
    let back = ProgramImage::from_ppm(&ppm).unwrap();
    for (a, b) in back.pixels().iter().zip(img.pixels()) {
        assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
    }
    // a second pass through 8 bits is exact
    assert_eq!(ProgramImage::from_ppm(&back.to_ppm("").unwrap()).unwrap(), back);
}

#[test]
fn verdict_report_puts_config_first() {
    let cfg = Theorem2Config {
        n_datasets: 2,
        max_steps: 100_000,
        ..Theorem2Config::reference(5)
    };
    let v = theorem2_suite(&cfg).unwrap();
    let json = report_json(&cfg, &v).unwrap();
    assert!(json.trim_start().starts_with("{\n  \"config\""));
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    let result = &parsed["result"];
    for key in ["name", "passed", "measured", "threshold", "seed", "runtime_seconds"] {
        assert!(result.get(key).is_some(), "missing {key}");
    }
    for key in result["threshold"].as_object().unwrap().keys() {
        assert!(result["measured"].get(key).is_some());
    }
}
