mod common;

use blockfade::constellation::Constellation;
use blockfade::infotheory::{mi_bicm, Decoder, MiCurve};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// Straight Monte Carlo estimate of the CM mutual information, returning
/// `(mean, standard error)`.
fn mc_mi_cm(c: &Constellation, rho: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let pts = c.points();
    let m = c.bits_per_symbol() as f64;
    let sq = rho.sqrt();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let x = pts[rng.random_range(0..pts.len())];
        let zr: f64 = rng.sample(StandardNormal);
        let zi: f64 = rng.sample(StandardNormal);
        let z = Complex64::new(zr, zi) / 2f64.sqrt();
        let y = sq * x + z;
        let num = (-(y - sq * x).norm_sqr()).exp();
        let den: f64 = pts.iter().map(|&xp| (-(y - sq * xp).norm_sqr()).exp()).sum();
        let v = (den / num).log2();
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let var = s2 / n as f64 - mean * mean;
    (m - mean, (var / n as f64).sqrt())
}

#[test]
fn qpsk_mi_matches_monte_carlo_at_one_bit() {
    let q = common::qpsk();
    let rho = q.inv_mi(1.0).unwrap();
    let c = Constellation::by_name("qpsk").unwrap();
    let (est, se) = mc_mi_cm(&c, rho, 400_000, 11);
    assert!((est - 1.0).abs() < 4.0 * se + 1e-4, "mc {est} +- {se}");
}

#[test]
fn sixteen_qam_mi_matches_monte_carlo() {
    let p = common::profile("16qam", Decoder::Cm);
    let c = Constellation::by_name("16qam").unwrap();
    for (i, db) in [0.0, 10.0, 16.0].into_iter().enumerate() {
        let rho = 10f64.powf(db / 10.0);
        let (est, se) = mc_mi_cm(&c, rho, 100_000, 20 + i as u64);
        assert!(
            (p.mi(rho) - est).abs() < 4.0 * se + 1e-4,
            "{db} dB: {} vs {est}",
            p.mi(rho)
        );
    }
}

#[test]
fn bicm_mmse_is_scaled_mi_slope() {
    let p = common::profile("16qam", Decoder::Bicm);
    let c = Constellation::by_name("16qam").unwrap();
    for db in [-5.0, 3.0, 9.0, 14.0] {
        let rho: f64 = 10f64.powf(db / 10.0);
        let h = 1e-4 * rho;
        let fd = (mi_bicm(&c, rho + h).unwrap() - mi_bicm(&c, rho - h).unwrap()) / (2.0 * h);
        let want = std::f64::consts::LN_2 * fd;
        assert!(
            (p.mmse(rho) - want).abs() < 2e-3 * want.max(1e-2),
            "{db} dB: {} vs {want}",
            p.mmse(rho)
        );
    }
}

#[test]
fn gsv_identity_holds_for_cm_profiles() {
    for name in ["qpsk", "8psk", "16qam"] {
        let dev = common::profile(name, Decoder::Cm).gsv_max_deviation();
        assert!(dev <= 1e-3, "{name}: {dev}");
    }
}

#[test]
fn low_snr_slope_is_one_over_ln2() {
    for name in ["qpsk", "8psk", "16qam"] {
        let p = common::profile(name, Decoder::Cm);
        let rho = 1e-3;
        let want = rho / std::f64::consts::LN_2;
        assert!((p.mi(rho) / want - 1.0).abs() < 2e-3, "{name}");
    }
}

#[test]
fn bicm_never_exceeds_cm() {
    for name in ["8psk", "16qam"] {
        let cm = common::profile(name, Decoder::Cm);
        let bicm = common::profile(name, Decoder::Bicm);
        for i in 0..=70 {
            let rho = 10f64.powf((-30.0 + i as f64) / 10.0);
            assert!(bicm.mi(rho) <= cm.mi(rho) + 1e-9, "{name} at {rho}");
        }
    }
}
