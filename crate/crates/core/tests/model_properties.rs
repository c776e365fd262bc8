use multisweep::rng::substream;
use multisweep::{build_model, zero_model, Mat, ModelMessage, NodeId, ValueModel, Vector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        -1e-6..1e-6f64,
        Just(0.0),
        any::<f64>().prop_filter("finite", |x| x.is_finite())
    ]
}

fn model_strategy() -> impl Strategy<Value = ValueModel> {
    (1usize..=4).prop_flat_map(|m| {
        (
            prop::collection::vec(finite(), m * m),
            prop::collection::vec(finite(), m),
            prop::collection::vec(finite(), m),
            0.0..1e3f64,
            finite(),
        )
            .prop_map(move |(h, g, a, sigma, offset)| ValueModel {
                h: Mat::from_row_slice(m, m, &h),
                g: Vector::from_vec(g),
                sigma,
                anchor: Vector::from_vec(a),
                offset,
            })
    })
}

fn bits(m: &ValueModel) -> Vec<u64> {
    m.h.iter()
        .chain(m.g.iter())
        .chain(m.anchor.iter())
        .chain([m.sigma, m.offset].iter())
        .map(|x| x.to_bits())
        .collect()
}

fn gaussian(n: usize, rng: &mut impl Rng) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_model(rng: &mut impl Rng) -> ValueModel {
    let m = rng.random_range(1..=4);
    let a = Mat::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    ValueModel {
        h: &a + a.transpose(),
        g: gaussian(m, rng),
        sigma: rng.random_range(0.0..3.0),
        anchor: gaussian(m, rng),
        offset: rng.random_range(-5.0..5.0),
    }
}

#[test]
fn reference_values() {
    let w = ValueModel {
        h: Mat::from_element(1, 1, 2.0),
        g: Vector::from_element(1, -2.0),
        sigma: 0.0,
        anchor: Vector::zeros(1),
        offset: 0.0,
    };
    let p = Vector::from_element(1, 1.0);
    assert!((w.eval(&p).unwrap() + 1.0).abs() < 1e-15);
    assert!(w.gradient(&p).unwrap()[0].abs() < 1e-15);

    let cubic = ValueModel {
        h: Mat::zeros(1, 1),
        g: Vector::zeros(1),
        sigma: 1.0,
        anchor: Vector::zeros(1),
        offset: 0.0,
    };
    let p = Vector::from_element(1, 2.0);
    assert!((cubic.eval(&p).unwrap() - 8.0).abs() < 1e-12);
    assert!((cubic.gradient(&p).unwrap()[0] - 12.0).abs() < 1e-12);

    let w = build_model(
        0.0,
        &Vector::zeros(2),
        &Mat::identity(2, 2),
        &Vector::zeros(2),
        0.0,
    );
    let p = Vector::from_vec(vec![3.0, -4.0]);
    assert!((w.eval(&p).unwrap() - 12.5).abs() < 1e-12);

    let z = zero_model(3);
    assert_eq!(z.eval(&Vector::from_vec(vec![1.0, 2.0, 3.0])).unwrap(), 0.0);
    assert!(z.eval(&Vector::zeros(2)).is_err());
}

#[test]
fn built_model_matches_value_gradient_and_hessian_at_anchor() {
    let mut rng = substream(11, "build");
    for _ in 0..50 {
        let m = rng.random_range(1..=4);
        let a = Mat::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let hess = &a * a.transpose();
        let grad = gaussian(m, &mut rng);
        let anchor = gaussian(m, &mut rng);
        let value: f64 = rng.random_range(-10.0..10.0);
        let sigma = rng.random_range(0.0..2.0);
        let w = build_model(value, &grad, &hess, &anchor, sigma);
        assert!((w.eval(&anchor).unwrap() - value).abs() < 1e-10 * (1.0 + value.abs()));
        assert!((w.gradient(&anchor).unwrap() - &grad).amax() < 1e-10);
        assert!((w.hessian(&anchor).unwrap() - &hess).amax() < 1e-10);
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = substream(12, "fd");
    let mut checked = 0;
    while checked < 100 {
        let w = random_model(&mut rng);
        let m = w.dim();
        let p = &w.anchor + gaussian(m, &mut rng);
        if (&p - &w.anchor).norm() < 1e-8 {
            continue;
        }
        checked += 1;
        let g = w.gradient(&p).unwrap();
        let h = w.hessian(&p).unwrap();
        let eps = 1e-6;
        let mut fd_g = Vector::zeros(m);
        let mut fd_h = Mat::zeros(m, m);
        for k in 0..m {
            let mut e = Vector::zeros(m);
            e[k] = eps;
            fd_g[k] = (w.eval(&(&p + &e)).unwrap() - w.eval(&(&p - &e)).unwrap()) / (2.0 * eps);
            let col =
                (w.gradient(&(&p + &e)).unwrap() - w.gradient(&(&p - &e)).unwrap()) / (2.0 * eps);
            fd_h.set_column(k, &col);
        }
        assert!(
            (&g - &fd_g).amax() / fd_g.amax().max(1.0) < 1e-5,
            "gradient mismatch"
        );
        assert!(
            (&h - &fd_h).amax() / fd_h.amax().max(1.0) < 1e-5,
            "Hessian mismatch"
        );
    }
}

proptest! {
    #[test]
    fn message_round_trip_is_bit_identical(model in model_strategy(), from in 1usize..100, to in 1usize..100, tag in any::<u64>()) {
        let msg = ModelMessage { from: NodeId(from), to: NodeId(to), model, sweep_tag: tag };
        let back = ModelMessage::from_json(&msg.to_json()).unwrap();
        prop_assert_eq!(bits(&back.model), bits(&msg.model));
        prop_assert_eq!((back.from, back.to, back.sweep_tag), (msg.from, msg.to, msg.sweep_tag));
        prop_assert_eq!(back.model.h.shape(), msg.model.h.shape());
    }

    #[test]
    fn cubic_term_only_adds(seed in any::<u64>(), scale in 0.0..10.0f64) {
        let mut rng = substream(seed, "cubic");
        let w = random_model(&mut rng);
        let p = &w.anchor + gaussian(w.dim(), &mut rng) * scale;
        prop_assert!(w.eval(&p).unwrap() >= w.quadratic_part(&p) - 1e-9 * (1.0 + w.eval(&p).unwrap().abs()));
    }

    #[test]
    fn wire_format_has_the_documented_fields(model in model_strategy()) {
        let msg = ModelMessage { from: NodeId(1), to: NodeId(2), model, sweep_tag: 3 };
        let v: serde_json::Value = serde_json::from_str(&msg.to_json()).unwrap();
        for key in ["from", "to", "dim", "H", "g", "sigma", "anchor", "offset", "sweep_tag"] {
            prop_assert!(v.get(key).is_some(), "missing {}", key);
        }
        prop_assert_eq!(v["H"].as_array().unwrap().len(), msg.model.dim() * msg.model.dim());
    }
}
