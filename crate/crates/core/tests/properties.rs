use lgca::alignment::{softmax_weights, WEIGHT_SUM_TOLERANCE};
use lgca::{expand_region, sample_crops, CropParams, ImageFrame, Region};
use proptest::prelude::*;

fn frame(w: u32, h: u32) -> ImageFrame {
    ImageFrame::filled("p", w, h, [0, 0, 0]).unwrap()
}

proptest! {
    #[test]
    fn sampled_crops_fit_and_respect_ratio(
        w in 2u32..400, h in 2u32..400, n in 2usize..40,
        lo in 0.05f64..0.95, span in 0.0f64..0.5, seed in any::<u64>(),
    ) {
        let hi = (lo + span).min(1.0);
        let img = frame(w, h);
        let params = CropParams { n_crops: n, ratio_lo: lo, ratio_hi: hi, seed };
        let crops = sample_crops(&img, &params).unwrap();
        prop_assert_eq!(crops.len(), n);
        let short = f64::from(w.min(h));
        for c in &crops {
            prop_assert!(c.fits(&img));
            prop_assert!(c.side >= 1);
            prop_assert!(f64::from(c.side) >= (lo * short).floor().max(1.0));
            prop_assert!(f64::from(c.side) <= (hi * short).ceil());
        }
        prop_assert_eq!(crops, sample_crops(&img, &params).unwrap());
    }

    #[test]
    fn expansion_contains_grows_and_stays_inside(
        w in 2u32..400, h in 2u32..400, fx in 0.0f64..1.0, fy in 0.0f64..1.0, fs in 0.0f64..1.0,
        tau in 1.001f64..3.0,
    ) {
        let img = frame(w, h);
        let short = w.min(h);
        let side = 1 + ((f64::from(short - 1) * fs) as u32).min(short - 2);
        let x0 = ((f64::from(w - side)) * fx) as u32;
        let y0 = ((f64::from(h - side)) * fy) as u32;
        let r = Region::new(x0, y0, side);
        let g = expand_region(r, tau, &img).unwrap();
        prop_assert!(g.fits(&img));
        prop_assert!(g.side > r.side);
        prop_assert!(g.contains(&r), "{:?} does not contain {:?}", g, r);
    }

    #[test]
    fn expansion_of_full_short_side_is_idempotent(w in 2u32..300, h in 2u32..300, tau in 1.01f64..3.0) {
        let img = frame(w, h);
        let r = Region::new(0, 0, w.min(h));
        prop_assert_eq!(expand_region(r, tau, &img).unwrap(), r);
    }

    #[test]
    fn softmax_is_a_distribution(xs in prop::collection::vec(-1.0f64..1.0, 1..200), t in 0.01f64..10.0) {
        let w = softmax_weights(&xs, t).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0 && x.is_finite()));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
    }
}
