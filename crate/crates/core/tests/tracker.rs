mod common;

use common::{random_tensor, rng};
use proptest::prelude::*;
use std::sync::OnceLock;
use twinbranch::data::synthetic::{Clutter, Motion};
use twinbranch::data::{generate_synthetic, Sequence, ShapeClass, SyntheticSpec};
use twinbranch::eval::track_sequence;
use twinbranch::experiment::{generate_suite, ExperimentConfig};
use twinbranch::geometry::BoundingBox;
use twinbranch::networks::{
    ANet, AttentionMlp, NetworkProfile, ResponseMap, SNet, SemanticHead, SemanticVariant,
};
use twinbranch::tracker::{
    attention_csv, channel_mean, combine_responses, crop_with_context, dump_attention, hann_window,
    normalize_jointly, sample_patch, search_side, ResponseDumpWriter, TrackConfig, TrackerModels,
    TrackerState,
};
use twinbranch::train::train_appearance;
use twinbranch::Tensor;

fn profile() -> NetworkProfile {
    NetworkProfile::desk()
}

/// An A-Net trained on the desk schedule, shared by every test in this binary.
fn anet() -> &'static ANet {
    static NET: OnceLock<ANet> = OnceLock::new();
    NET.get_or_init(|| {
        let cfg = ExperimentConfig::desk();
        let seqs = generate_suite(&cfg.train_suite).unwrap();
        train_appearance(&seqs, &profile(), &cfg.appearance)
            .unwrap()
            .0
    })
}

fn appearance_models() -> TrackerModels {
    TrackerModels::new(profile(), Some(anet().clone()), None).unwrap()
}

fn full_models() -> TrackerModels {
    let p = profile();
    let snet = SNet::init(&p, &mut rng(2)).unwrap();
    let head = SemanticHead::init(&p, SemanticVariant::FULL, &mut rng(3));
    TrackerModels::new(p, Some(anet().clone()), Some((snet, head))).unwrap()
}

fn moving(velocity: [f32; 2], frames: usize, drift: f32) -> Sequence {
    generate_synthetic(&SyntheticSpec {
        name: "moving".into(),
        canvas: [192, 144],
        frames,
        shape: ShapeClass::Disk,
        color: [0.9, 0.2, 0.2],
        color_end: None,
        background: [0.15, 0.2, 0.25],
        size: 24.0,
        start: [60.0, 60.0],
        motion: Motion {
            velocity,
            wobble_amplitude: 0.0,
            wobble_period: 20.0,
        },
        scale_drift: drift,
        clutter: Clutter {
            count: 2,
            palette: vec![[0.2, 0.8, 0.3]],
            size_range: [14.0, 18.0],
            speed: 0.5,
            classes: vec![ShapeClass::Square],
        },
        noise: 0.02,
        seed: 9,
    })
    .unwrap()
}

fn centre_error(a: &BoundingBox, b: &BoundingBox) -> f32 {
    ((a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2)).sqrt()
}

/// Independent bilinear sampler: taps outside the frame read `fill`.
fn sample_ref(frame: &Tensor, cx: f64, cy: f64, side: f64, out: usize, fill: &[f32]) -> Vec<f64> {
    let (h, w, c) = (frame.shape()[0], frame.shape()[1], frame.shape()[2]);
    let at = |y: i64, x: i64, ch: usize| -> f64 {
        if (0..h as i64).contains(&y) && (0..w as i64).contains(&x) {
            frame.data()[(y as usize * w + x as usize) * c + ch] as f64
        } else {
            fill[ch] as f64
        }
    };
    let mut v = Vec::new();
    for i in 0..out {
        let sy = cy + (i as f64 - (out as f64 - 1.0) / 2.0) * side / out as f64;
        for j in 0..out {
            let sx = cx + (j as f64 - (out as f64 - 1.0) / 2.0) * side / out as f64;
            let (y0, x0) = (sy.floor() as i64, sx.floor() as i64);
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            for ch in 0..c {
                v.push(
                    (1.0 - fy) * ((1.0 - fx) * at(y0, x0, ch) + fx * at(y0, x0 + 1, ch))
                        + fy * ((1.0 - fx) * at(y0 + 1, x0, ch) + fx * at(y0 + 1, x0 + 1, ch)),
                );
            }
        }
    }
    v
}

fn ramp() -> Tensor {
    Tensor::from_fn3(20, 20, 3, |y, x, c| {
        (x as f32 + 20.0 * y as f32) / 400.0 + c as f32 * 0.1
    })
}

#[test]
fn aligned_crop_copies_pixels() {
    let f = ramp();
    let fill = channel_mean(&f).unwrap();
    // unit step with the centre between pixels 9 and 10 lands on integers
    let p = sample_patch(&f, 9.5, 9.5, 10.0, 10, &fill).unwrap();
    for i in 0..10 {
        for j in 0..10 {
            for c in 0..3 {
                assert_eq!(p.at3(i, j, c), f.at3(i + 5, j + 5, c));
            }
        }
    }
}

#[test]
fn crop_matches_bilinear_oracle() {
    let f = ramp();
    let fill = channel_mean(&f).unwrap();
    let mut r = rng(4);
    use rand::Rng;
    for _ in 0..200 {
        let (cx, cy) = (r.gen_range(-8.0..28.0f32), r.gen_range(-8.0..28.0f32));
        let side = r.gen_range(2.0..40.0f32);
        let out = r.gen_range(1..16);
        let got = sample_patch(&f, cx, cy, side, out, &fill).unwrap();
        let want = sample_ref(&f, cx as f64, cy as f64, side as f64, out, &fill);
        let err = got
            .data()
            .iter()
            .zip(&want)
            .map(|(&a, &b)| (a as f64 - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "({cx}, {cy}) side {side} out {out}: {err}");
    }
}

#[test]
fn crop_is_centred_on_the_target() {
    let p = profile();
    let f = Tensor::from_fn3(200, 200, 3, |y, x, c| (y * 200 + x) as f32 + c as f32);
    let b = BoundingBox::new(87.0, 113.0, 20.0, 30.0);
    let patch = crop_with_context(&f, &b, p.search_size, &p).unwrap();
    let mid = (p.search_size - 1) / 2;
    for c in 0..3 {
        assert_eq!(patch.at3(mid, mid, c), f.at3(113, 87, c));
    }
}

#[test]
fn constant_frame_crops_to_constant() {
    let p = profile();
    let f = Tensor::full(&[30, 40, 3], 0.37);
    let b = BoundingBox::new(2.0, 3.0, 25.0, 25.0);
    let patch = crop_with_context(&f, &b, p.search_size, &p).unwrap();
    assert!(patch.data().iter().all(|&v| (v - 0.37).abs() < 1e-6));
}

#[test]
fn padding_uses_the_channel_mean() {
    let f = ramp();
    let mean = channel_mean(&f).unwrap();
    let expected: Vec<f64> = (0..3)
        .map(|c| {
            (0..400)
                .map(|i| i as f64 / 400.0 + c as f64 * 0.1)
                .sum::<f64>()
                / 400.0
        })
        .collect();
    for c in 0..3 {
        assert!((mean[c] as f64 - expected[c]).abs() < 1e-6);
    }
    // a box at the corner: the far quadrant of the crop is all padding
    let b = BoundingBox::new(0.0, 0.0, 4.0, 4.0);
    let p = profile();
    let patch = crop_with_context(&f, &b, p.search_size, &p).unwrap();
    for (c, &m) in mean.iter().enumerate() {
        assert_eq!(patch.at3(0, 0, c), m);
    }
    assert!(crop_with_context(&f, &BoundingBox::new(-50.0, -50.0, 4.0, 4.0), 127, &p).is_err());
    assert!(crop_with_context(&f, &BoundingBox::new(5.0, 5.0, 0.0, 4.0), 127, &p).is_err());
}

fn map(data: Vec<f32>) -> ResponseMap {
    let n = (data.len() as f64).sqrt() as usize;
    ResponseMap::new(Tensor::new(vec![n, n, 1], data).unwrap(), 8)
}

#[test]
fn combination_endpoints_are_exact() {
    let mut r = rng(5);
    let a = map(random_tensor(&mut r, &[81]).data().to_vec());
    let s = map(random_tensor(&mut r, &[81]).data().to_vec());
    assert_eq!(combine_responses(&a, &s, 1.0).unwrap(), a);
    assert_eq!(combine_responses(&a, &s, 0.0).unwrap(), s);
    let m = combine_responses(&a, &s, 0.3).unwrap();
    for ((&v, &x), &y) in m
        .scores
        .data()
        .iter()
        .zip(a.scores.data())
        .zip(s.scores.data())
    {
        assert!((v - (0.3 * x + 0.7 * y)).abs() < 1e-6);
    }
    assert!(combine_responses(&a, &s, 1.1).is_err());
    let ones = map(vec![1.0; 81]);
    let zeros = map(vec![0.0; 81]);
    let m = combine_responses(&ones, &zeros, 0.3).unwrap();
    assert!(m.scores.data().iter().all(|&v| (v - 0.3).abs() < 1e-7));
    assert!(combine_responses(&a, &map(vec![0.0; 49]), 0.5).is_err());
}

#[test]
fn hann_window_sums_to_one() {
    for n in [9, 17] {
        let w = hann_window(n);
        assert!((w.sum() - 1.0).abs() < 1e-5);
        assert_eq!(w.argmax(), n * n / 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_ignores_constant_offsets(seed in 0u64..10_000, ca in -50.0f32..50.0, cs in -50.0f32..50.0, lambda in 0.0f32..=1.0) {
        let mut r = rng(seed);
        let a = map(random_tensor(&mut r, &[81]).data().to_vec());
        let s = map(random_tensor(&mut r, &[81]).data().to_vec());
        let base = combine_responses(&a, &s, lambda).unwrap();
        let mut sorted = base.scores.data().to_vec();
        sorted.sort_by(|x, y| y.total_cmp(x));
        prop_assume!(sorted[0] - sorted[1] > 1e-3);
        let shifted = combine_responses(&map(a.scores.data().iter().map(|v| v + ca).collect()), &map(s.scores.data().iter().map(|v| v + cs).collect()), lambda).unwrap();
        prop_assert_eq!(base.scores.argmax(), shifted.scores.argmax());
    }

    #[test]
    fn joint_normalisation_removes_offset_and_scale(seed in 0u64..10_000, c in -20.0f32..20.0, k in 0.5f32..4.0) {
        let mut r = rng(seed);
        let maps: Vec<ResponseMap> = (0..3).map(|_| map(random_tensor(&mut r, &[25]).data().to_vec())).collect();
        let mut a = maps.clone();
        let mut b: Vec<ResponseMap> = maps.iter().map(|m| map(m.scores.data().iter().map(|v| k * v + c).collect())).collect();
        normalize_jointly(&mut a);
        normalize_jointly(&mut b);
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.scores.data().iter().zip(y.scores.data()) {
                prop_assert!((u - v).abs() < 1e-4);
                prop_assert!((0.0..=1.0).contains(u));
            }
        }
    }
}

#[test]
fn tracking_a_still_frame_stays_put() {
    let seq = moving([0.0, 0.0], 2, 1.0);
    let models = appearance_models();
    let frame = seq.frame(0).unwrap();
    let mut st =
        TrackerState::init(&frame, seq.first_box(), &models, TrackConfig::default()).unwrap();
    let stride = 8.0 * search_side(&seq.first_box(), &models.profile) / 127.0;
    let b = st.track_frame(&frame).unwrap();
    assert!(centre_error(&b, &seq.first_box()) <= stride, "{b:?}");
}

#[test]
fn static_target_drift_stays_within_two_pixels() {
    let seq = moving([0.0, 0.0], 50, 1.0);
    let boxes = track_sequence(&appearance_models(), TrackConfig::default(), &seq).unwrap();
    assert_eq!(boxes.len(), 50);
    let worst = boxes
        .iter()
        .map(|b| centre_error(b, &seq.first_box()))
        .fold(0.0, f32::max);
    assert!(worst <= 2.0, "drift {worst}");
}

#[test]
fn translation_error_stays_below_one_stride() {
    let seq = moving([2.0, 1.0], 40, 1.0);
    let models = appearance_models();
    let boxes = track_sequence(&models, TrackConfig::default(), &seq).unwrap();
    for (i, (b, g)) in boxes.iter().zip(&seq.groundtruth).enumerate() {
        let stride = 8.0 * search_side(b, &models.profile) / 127.0;
        let e = centre_error(b, g);
        assert!(e <= stride, "frame {i}: error {e} > stride {stride}");
    }
}

#[test]
fn zooming_target_picks_the_enlarging_scale() {
    let seq = moving([0.0, 0.0], 21, 1.025);
    let models = appearance_models();
    let mut st = TrackerState::init(
        &seq.frame(0).unwrap(),
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )
    .unwrap();
    let mut enlarging = 0;
    for i in 1..seq.len() {
        st.track_frame(&seq.frame(i).unwrap()).unwrap();
        if st.last_responses().unwrap().best_scale == 2 {
            enlarging += 1;
        }
    }
    assert!(
        enlarging >= 12,
        "enlarging scale chosen in {enlarging} of 20 frames"
    );
    assert!(st.bbox().w > seq.first_box().w);
}

#[test]
fn lambda_one_matches_the_appearance_only_tracker() {
    let seq = moving([2.0, 1.0], 15, 1.0);
    let a = track_sequence(&appearance_models(), TrackConfig::with_lambda(1.0), &seq).unwrap();
    let b = track_sequence(&full_models(), TrackConfig::with_lambda(1.0), &seq).unwrap();
    assert_eq!(a, b);
    let c = track_sequence(&full_models(), TrackConfig::with_lambda(1.0), &seq).unwrap();
    assert_eq!(b, c);
}

#[test]
fn attention_runs_once_per_sequence() {
    let seq = moving([1.0, 0.5], 100, 1.0);
    let models = full_models();
    let mut st = TrackerState::init(
        &seq.frame(0).unwrap(),
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )
    .unwrap();
    let xi = st.semantic_target().unwrap().xi.clone();
    for i in 1..seq.len() {
        st.track_frame(&seq.frame(i).unwrap()).unwrap();
    }
    assert_eq!(st.attention_evaluations(), 1);
    assert_eq!(st.semantic_target().unwrap().xi, xi);
}

#[test]
fn attention_dump_is_sorted_and_in_range() {
    let seq = moving([0.0, 0.0], 1, 1.0);
    let models = full_models();
    let st = TrackerState::init(
        &seq.frame(0).unwrap(),
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )
    .unwrap();
    let rows = dump_attention(&st);
    assert_eq!(rows.len(), 48 + 64);
    for layer in 0..2 {
        let w: Vec<f32> = rows
            .iter()
            .filter(|r| r.layer == layer)
            .map(|r| r.weight)
            .collect();
        assert!(w.windows(2).all(|p| p[0] >= p[1]));
        assert!(w.iter().all(|&v| v > 0.5 && v < 1.5));
    }
    let csv = attention_csv(&rows);
    assert!(csv.starts_with("layer,rank,channel_index,weight\n"));
    assert_eq!(csv.lines().count(), rows.len() + 1);
}

#[test]
fn zero_attention_dump_keeps_index_order() {
    let p = profile();
    let snet = SNet::init(&p, &mut rng(2)).unwrap();
    let mut head = SemanticHead::init(&p, SemanticVariant::FULL, &mut rng(3));
    for m in &mut head.attention.as_mut().unwrap().layers {
        *m = AttentionMlp::zeros();
    }
    let models = TrackerModels::new(p, None, Some((snet, head))).unwrap();
    let seq = moving([0.0, 0.0], 1, 1.0);
    let st = TrackerState::init(
        &seq.frame(0).unwrap(),
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )
    .unwrap();
    let rows = dump_attention(&st);
    for layer in 0..2 {
        let layer_rows: Vec<_> = rows.iter().filter(|r| r.layer == layer).collect();
        for (k, r) in layer_rows.iter().enumerate() {
            assert_eq!((r.rank, r.channel, r.weight), (k, k, 1.0));
        }
    }
}

#[test]
fn init_is_deterministic() {
    let seq = moving([1.0, 1.0], 6, 1.0);
    let models = full_models();
    let a = TrackerState::init(
        &seq.frame(0).unwrap(),
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )
    .unwrap();
    let b = TrackerState::init(
        &seq.frame(0).unwrap(),
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )
    .unwrap();
    assert_eq!(a.semantic_target(), b.semantic_target());
    assert_eq!(a.bbox(), b.bbox());
    let t1 = track_sequence(&models, TrackConfig::default(), &seq).unwrap();
    let t2 = track_sequence(&models, TrackConfig::default(), &seq).unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn grid_offsets_map_back_to_the_patch_centre() {
    // a blob placed where response cell (i, j) points must land at the
    // centre of a crop taken around the implied location
    let p = profile();
    let b = BoundingBox::new(100.0, 90.0, 24.0, 24.0);
    let px = search_side(&b, &p) / p.search_size as f32;
    let grid = ResponseMap::new(Tensor::zeros(&[9, 9, 1]), p.total_stride);
    for (i, j) in [(0.0, 0.0), (2.0, 7.0), (4.0, 4.0), (8.0, 3.5), (6.25, 1.0)] {
        let (dy, dx) = grid.cell_offset(i, j);
        let (tx, ty) = (b.cx + dx * px, b.cy + dy * px);
        let f = Tensor::from_fn3(200, 200, 3, |y, x, _| {
            let d2 = (x as f32 - tx).powi(2) + (y as f32 - ty).powi(2);
            (-d2 / 8.0).exp()
        });
        let located = BoundingBox::new(tx, ty, b.w, b.h);
        let patch = crop_with_context(&f, &located, p.search_size, &p).unwrap();
        let (mut sy, mut sx, mut sw) = (0.0f64, 0.0f64, 0.0f64);
        for y in 0..p.search_size {
            for x in 0..p.search_size {
                let v = patch.at3(y, x, 0) as f64;
                sy += v * y as f64;
                sx += v * x as f64;
                sw += v;
            }
        }
        let mid = (p.search_size as f64 - 1.0) / 2.0;
        let e = ((sy / sw - mid).powi(2) + (sx / sw - mid).powi(2)).sqrt();
        assert!(e <= 1.0, "cell ({i}, {j}): centroid off by {e}");
    }
}

#[test]
fn response_dump_layout() {
    let seq = moving([1.0, 0.0], 3, 1.0);
    let models = appearance_models();
    let mut st = TrackerState::init(
        &seq.frame(0).unwrap(),
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )
    .unwrap();
    let mut w = ResponseDumpWriter::new(Vec::new());
    for i in 1..3 {
        st.track_frame(&seq.frame(i).unwrap()).unwrap();
        w.write_frame(i, st.last_responses().unwrap()).unwrap();
    }
    let bytes = w.into_inner();
    assert_eq!(&bytes[..8], b"TWBRESP\0");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 9);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    assert_eq!(bytes.len(), 16 + 2 * (8 + 3 * 81 * 4));
    assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 1);
}

#[test]
fn box_conventions_round_trip() {
    let b = BoundingBox::from_top_left(10.0, 20.0, 30.0, 40.0);
    assert_eq!((b.cx, b.cy), (25.0, 40.0));
    assert_eq!(b.top_left(), (10.0, 20.0, 30.0, 40.0));
    let mut r = rng(6);
    use rand::Rng;
    for _ in 0..100 {
        let (x, y) = (r.gen_range(-50.0..50.0f32), r.gen_range(-50.0..50.0f32));
        let (w, h) = (r.gen_range(1.0..60.0f32), r.gen_range(1.0..60.0f32));
        let (x2, y2, w2, h2) = BoundingBox::from_top_left(x, y, w, h).top_left();
        assert!((x - x2).abs() < 1e-4 && (y - y2).abs() < 1e-4 && w == w2 && h == h2);
    }
}
