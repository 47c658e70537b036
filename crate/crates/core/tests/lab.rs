use bbl_core::lab::{
    family_triple, fit_loglog_slope, gen_dented, gen_sharpness_pair, gen_two_bump, hat, indicator, parabola_bump,
    parse_delta_grid, random_blobs_2d, row_seed, sweep, symdiff_slope, write_sweep_csv, Family, Hole, SWEEP_HEADER,
};
use bbl_core::{deficit, p_concave_hull, MeanParams};
use proptest::prelude::*;

fn half(p: f64) -> MeanParams {
    MeanParams::new(0.5, p, 1).unwrap()
}

#[test]
fn shapes_have_the_stated_masses() {
    assert!((indicator(2.0, 0.01).unwrap().integral() - 2.0).abs() < 1e-12);
    assert!((hat(2.0, 0.01).unwrap().integral() - 1.0).abs() < 1e-3);
    let b = parabola_bump(0.01).unwrap();
    assert!(b.values().iter().all(|&v| v <= 1.0));
    // (1 - x²)₊ integrates to 4/3
    assert!((b.integral() - 4.0 / 3.0).abs() < 1e-3);
    for p in [0.0, 1.0] {
        assert!(p_concave_hull(&b, p).unwrap().gap_mass <= 1e-12);
    }
}

#[test]
fn random_blobs_are_seeded() {
    let a = random_blobs_2d(3).unwrap();
    assert_eq!(a.values(), random_blobs_2d(3).unwrap().values());
    assert_ne!(a.values(), random_blobs_2d(4).unwrap().values());
    assert_eq!(a.shape(), &[32, 32]);
}

#[test]
fn every_family_gives_a_valid_triple() {
    for family in [Family::Sharpness, Family::Dented, Family::TwoBump, Family::Perturbed] {
        for p in [-0.25, 0.0, 1.0] {
            let params = half(p);
            let (f, g, h) = family_triple(family, 0.02, 0.01, &params, 7).unwrap();
            assert!((f.integral() - g.integral()).abs() <= 1e-9 * f.integral(), "{family} p = {p}");
            let d = deficit(&f, &g, &h, &params).unwrap();
            assert_eq!(d.pointwise_violations, 0, "{family} p = {p}");
            assert!(d.delta >= -1e-12);
        }
        assert_eq!(family.name().parse::<Family>().unwrap(), family);
    }
    assert!("triangle".parse::<Family>().is_err());
}

#[test]
fn sharpness_deficit_tracks_delta0() {
    for d0 in [1e-3, 1e-2, 4e-2] {
        let t = gen_sharpness_pair(d0, 1e-4).unwrap();
        let s = d0.sqrt();
        let expected = 0.5 * ((1.0 + s) + 1.0 / (1.0 + s)) - 1.0;
        let delta = t.h.integral() / t.f.integral() - 1.0;
        assert!((delta - expected).abs() <= 2e-4 * (1.0 + s), "{d0}: {delta} vs {expected}");
    }
    assert!(gen_sharpness_pair(0.0, 1e-3).is_err());
    assert!(gen_sharpness_pair(0.01, 0.0).is_err());
}

#[test]
fn dented_and_two_bump_inputs() {
    let base = indicator(1.0, 0.01).unwrap();
    let f = gen_dented(&base, &[Hole::new(vec![0.5], 0.1, 1.0)]).unwrap();
    assert!((f.integral() - 0.9).abs() < 1e-9);
    let g = gen_dented(&base, &[Hole::new(vec![0.3], 0.1, 0.5), Hole::new(vec![0.7], 0.1, 0.5)]).unwrap();
    assert!((g.integral() - 0.9).abs() < 1e-9);
    assert!(gen_dented(&base, &[Hole::new(vec![0.5], 0.2, 1.0), Hole::new(vec![0.6], 0.2, 1.0)]).is_err());
    assert!(gen_dented(&base, &[Hole::new(vec![0.5, 0.5], 0.1, 1.0)]).is_err());
    assert!(gen_dented(&base, &[Hole::new(vec![0.5], 0.1, 1.5)]).is_err());
    assert!(gen_dented(&base, &[Hole::new(vec![0.5], 0.0, 1.0)]).is_err());

    let tb = gen_two_bump(1e-3, 20.0, 0.05).unwrap();
    let near: f64 = tb.values().iter().take(tb.len() / 2).sum::<f64>() * tb.spacing();
    assert!(near > 0.9 * tb.integral());
}

#[test]
fn sweep_rows_are_sorted_and_reproducible() {
    let params = half(0.0);
    let grid = [4e-3, 1e-3, 2e-3];
    let a = sweep(Family::Perturbed, &grid, &params, 0.02, 0.05, 11).unwrap();
    let b = sweep(Family::Perturbed, &grid, &params, 0.02, 0.05, 11).unwrap();
    assert!(a.windows(2).all(|w| w[0].delta0 < w[1].delta0));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.delta, x.symdiff_distance, x.main_distance, x.seed), (y.delta, y.symdiff_distance, y.main_distance, y.seed));
    }
    // seeds follow the input order, not the sorted one
    assert_eq!(a[0].seed, row_seed(11, 1));
    assert!(a.iter().all(|r| r.valid));
}

#[test]
fn sweep_csv_parses_back() {
    let params = half(1.0);
    let rows = sweep(Family::Dented, &[0.02, 0.04], &params, 0.01, 0.05, 1).unwrap();
    for timing in [false, true] {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows, 1.0, timing).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header.len(), SWEEP_HEADER.len() + timing as usize);
        assert_eq!(&header[..SWEEP_HEADER.len()], &SWEEP_HEADER[..]);
        let recs: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(recs.len(), 2);
        for (rec, row) in recs.iter().zip(&rows) {
            assert_eq!(rec[0].to_string(), row.scenario);
            assert_eq!(rec[2].parse::<f64>().unwrap(), row.delta0);
            assert_eq!(rec[3].parse::<f64>().unwrap(), row.delta);
            assert_eq!(rec[14].parse::<bool>().unwrap(), row.valid);
            assert_eq!(rec[15].parse::<f64>().unwrap(), 1.0);
        }
    }
}

#[test]
fn delta_grids() {
    let g = parse_delta_grid("1e-4:1e-2:log3").unwrap();
    assert_eq!(g.len(), 3);
    assert!((g[1] - 1e-3).abs() < 1e-15);
    assert_eq!(parse_delta_grid("0.1:0.3:lin3").unwrap().len(), 3);
    assert_eq!(parse_delta_grid("0.1, 0.2,0.5").unwrap(), vec![0.1, 0.2, 0.5]);
    for bad in ["", "0:1:log3", "1:0.5:lin4", "0.1:1:exp3", "0.1:1:log1", "0.1,-2", "a:b:c:d"] {
        assert!(parse_delta_grid(bad).is_err(), "{bad}");
    }
}

proptest! {
    #[test]
    fn slope_fit_recovers_power_laws(k in -2.0f64..2.0, c in 0.1f64..10.0, n in 4usize..12) {
        let x: Vec<f64> = (0..n).map(|i| 1e-4 * 2f64.powi(i as i32)).collect();
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(k)).collect();
        let fit = fit_loglog_slope(&x, &y).unwrap();
        prop_assert!((fit.slope - k).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-8);
        prop_assert!(fit.stderr < 1e-6);
    }
}

#[test]
fn slope_fit_rejections() {
    assert!(fit_loglog_slope(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(fit_loglog_slope(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(fit_loglog_slope(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 4.0]).is_err());
    assert!(fit_loglog_slope(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
}

#[test]
fn sharpness_sweep_slope_is_near_one_half() {
    let params = half(0.0);
    let rows = sweep(Family::Sharpness, &[1e-3, 2e-3, 4e-3, 8e-3], &params, 5e-4, 0.05, 0).unwrap();
    let fit = symdiff_slope(&rows).unwrap();
    assert!((fit.slope - 0.5).abs() < 0.1, "{fit:?}");
}
