use chromaforest::color::rgb_to_yuv;
use chromaforest::features::assemble_features;
use chromaforest::model_file::{model_from_str, model_to_string};
use chromaforest::superpixel::extract_superpixels;
use chromaforest::{
    colorize, colorize_detailed, to_grayscale, train_model, PipelineConfig, Raster, Rgb,
};
use proptest::prelude::*;

fn stripes(w: usize, h: usize) -> Raster {
    let colors = [
        Rgb::new(0.7, 0.35, 0.3),
        Rgb::new(0.3, 0.55, 0.7),
        Rgb::new(0.55, 0.7, 0.3),
    ];
    Raster::from_fn_rgb(w, h, |r, c| {
        let base = colors[(c * 3) / w];
        // Mild texture so features vary within a stripe.
        let t = 0.04 * ((r as f64 * 0.7).sin() * (c as f64 * 0.45).cos());
        Rgb::new(base.r + t, base.g + t, base.b + t)
    })
    .unwrap()
}

fn config() -> PipelineConfig {
    PipelineConfig {
        clusters: 6,
        trees: 16,
        ..PipelineConfig::default()
    }
}

#[test]
fn output_keeps_the_input_luminance() {
    let img = stripes(60, 45);
    let cfg = config();
    let model = train_model(std::slice::from_ref(&img), &cfg).unwrap();
    let gray = to_grayscale(&img);
    let out = colorize(&gray, &model, &cfg, None).unwrap();
    let mut checked = 0;
    for p in 0..out.len() {
        let c = out.rgb_at(p);
        let clamped = [c.r, c.g, c.b].iter().any(|&v| v <= 0.0 || v >= 1.0);
        if !clamped {
            assert!((rgb_to_yuv(c).y - gray.channel(0)[p]).abs() < 1e-9);
            checked += 1;
        }
    }
    assert!(checked > out.len() / 2);
}

#[test]
fn colorization_is_deterministic() {
    let img = stripes(48, 40);
    let cfg = config();
    let a = train_model(std::slice::from_ref(&img), &cfg).unwrap();
    let b = train_model(std::slice::from_ref(&img), &cfg).unwrap();
    assert_eq!(model_to_string(&a), model_to_string(&b));
    let gray = to_grayscale(&img);
    assert_eq!(
        colorize(&gray, &a, &cfg, None).unwrap(),
        colorize(&gray, &b, &cfg, None).unwrap()
    );
}

#[test]
fn detailed_colorization_shapes() {
    let img = stripes(48, 40);
    let cfg = config();
    let other = PipelineConfig { seed: 7, ..cfg };
    let model = train_model(std::slice::from_ref(&img), &other).unwrap();
    let detail = colorize_detailed(&to_grayscale(&img), &model, &other, None).unwrap();
    assert_eq!(detail.predicted.len(), detail.superpixels.len());
    assert_eq!(detail.scribbles.len(), detail.superpixels.len());
    assert!(detail.labels.iter().all(|&l| l < model.palette.k()));
}

#[test]
fn model_round_trip_preserves_predictions() {
    let img = stripes(48, 40);
    let model = train_model(std::slice::from_ref(&img), &config()).unwrap();
    let loaded = model_from_str(&model_to_string(&model)).unwrap();
    let gray = to_grayscale(&stripes(36, 30));
    let sp = extract_superpixels(&gray, 40).unwrap();
    for f in model.features(&gray, &sp).unwrap() {
        let (a, b) = (model.forest.predict(&f[..]), loaded.forest.predict(&f[..]));
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn features_are_bounded_by_the_raster() {
    let gray = to_grayscale(&stripes(50, 40));
    let sp = extract_superpixels(&gray, 40).unwrap();
    let (lo, hi) = gray
        .channel(0)
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    for f in assemble_features(&gray, &sp).unwrap() {
        assert_eq!(f.len(), 172);
        assert!(f[0] >= lo - 1e-12 && f[0] <= hi + 1e-12);
        assert!(f[1] >= lo - 1e-12 && f[1] <= hi + 1e-12);
        assert!(f[2] >= 0.0 && f[3] >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn superpixels_partition_any_raster(
        (w, h, pixels) in (1usize..40, 1usize..40)
            .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0.0f64..=1.0, w * h))),
        target in 4usize..80,
    ) {
        let gray = Raster::gray(w, h, pixels).unwrap();
        let sp = extract_superpixels(&gray, target).unwrap();
        prop_assert!(sp.is_connected());
        let mut total = 0;
        for i in 0..sp.len() {
            prop_assert!(!sp.members(i).is_empty());
            total += sp.members(i).len();
            let p = sp.centroid_pixel(i).unwrap();
            prop_assert_eq!(sp.labels()[p], i);
        }
        prop_assert_eq!(total, w * h);
        let again = extract_superpixels(&gray, target).unwrap();
        prop_assert_eq!(again.labels(), sp.labels());
    }
}
