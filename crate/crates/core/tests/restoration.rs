use gsr_core::grouping::{block_match, exemplar_positions, form_group};
use gsr_core::io::{add_gaussian_noise, make_mask};
use gsr_core::metrics::psnr;
use gsr_core::restore::{
    default_denoise_params, default_inpaint_params, denoise, estimate_group, inpaint, relative_change, should_stop,
};
use gsr_core::verify::GroupSampler;
use gsr_core::{ImageBuffer, MaskBuffer, RestoreParams, Solver};

fn smooth(h: usize, w: usize) -> ImageBuffer {
    ImageBuffer::from_fn(h, w, |r, c| {
        120.0 + 50.0 * (r as f64 / 6.0).sin() + 40.0 * (c as f64 / 5.0).cos()
    })
}

fn small_denoise_params(sigma: f64) -> RestoreParams {
    let mut p = default_denoise_params(sigma).params;
    p.window = 12;
    p.group_size = 16;
    p.max_iter = 3;
    p
}

#[test]
fn clean_input_is_a_fixed_point() {
    let y = smooth(24, 24);
    let mut p = small_denoise_params(20.0);
    p.sigma_n = 1e-3;
    let (out, rep) = denoise(&y, &p).unwrap();
    assert!(rep.iterations_run <= 2, "{rep:?}");
    assert!(rep.converged);
    assert!(out.pixels().iter().zip(y.pixels()).all(|(a, b)| (a - b).abs() < 1e-3));
}

#[test]
fn constant_image_noise_is_reduced() {
    let clean = ImageBuffer::filled(32, 32, 100.0);
    let noisy = add_gaussian_noise(&clean, 20.0, 4).unwrap();
    for solver in [Solver::Wnnm, Solver::Nnm] {
        let mut p = small_denoise_params(20.0);
        p.solver = solver;
        let (out, _) = denoise(&noisy, &p).unwrap();
        assert!(out.variance() < noisy.variance(), "{solver:?}");
        assert!(psnr(&out, &clean).unwrap() > psnr(&noisy, &clean).unwrap(), "{solver:?}");
    }
}

#[test]
fn textured_image_improves() {
    let clean = smooth(40, 40);
    let noisy = add_gaussian_noise(&clean, 25.0, 8).unwrap();
    let (out, rep) = denoise(&noisy, &default_denoise_params(25.0).params).unwrap();
    assert_eq!(rep.effective_sigmas[0], 25.0);
    assert_eq!(rep.relative_changes.len(), rep.iterations_run);
    assert!(psnr(&out, &clean).unwrap() > psnr(&noisy, &clean).unwrap() + 3.0);
    assert!(out.pixels().iter().all(|v| (0.0..=255.0).contains(v)));
}

#[test]
fn all_observed_mask_returns_input() {
    let y = smooth(24, 24);
    let mut p = default_inpaint_params(0.5).params;
    p.max_iter = 5;
    let (out, _) = inpaint(&y, &MaskBuffer::all_observed(24, 24), &p).unwrap();
    for (a, b) in out.pixels().iter().zip(y.pixels()) {
        assert!((a - b).abs() < 0.5, "{a} vs {b}");
    }
}

#[test]
fn constant_image_is_recovered_from_half_the_pixels() {
    let clean = ImageBuffer::filled(32, 32, 150.0);
    let mask = make_mask((32, 32), 0.5, 3).unwrap();
    let y = mask.apply(&clean).unwrap();
    let mut p = default_inpaint_params(0.5).params;
    p.window = 16;
    let (out, rep) = inpaint(&y, &mask, &p).unwrap();
    let worst = out.pixels().iter().map(|v| (v - 150.0).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "worst {worst}, {} iterations", rep.iterations_run);
}

#[test]
fn inpainting_rejects_bad_masks() {
    let y = smooth(16, 16);
    let p = default_inpaint_params(0.5).params;
    assert!(inpaint(&y, &MaskBuffer::all_observed(16, 15), &p).is_err());
    assert!(MaskBuffer::new(2, 2, vec![false; 4]).is_err());
}

#[test]
fn shrinkage_never_amplifies_a_group() {
    let mut s = GroupSampler::new(6);
    let img = ImageBuffer::from_fn(30, 30, |_, _| s.uniform(0.0, 255.0));
    for solver in [Solver::Wnnm, Solver::Nnm] {
        let mut p = small_denoise_params(30.0);
        p.solver = solver;
        let spec = p.patch_spec();
        for pos in exemplar_positions(&img, &spec).unwrap() {
            let g = form_group(&img, &block_match(&img, pos, &spec).unwrap(), spec.side).unwrap();
            let est = estimate_group(&g, 30.0, &p).unwrap();
            assert!(est.frobenius_norm() <= g.frobenius_norm() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn deterministic_mode_ignores_thread_count() {
    let clean = smooth(48, 48);
    let noisy = add_gaussian_noise(&clean, 30.0, 1).unwrap();
    let mut p = small_denoise_params(30.0);
    p.deterministic = true;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| denoise(&noisy, &p).unwrap().0)
    };
    let one = run(1);
    for threads in [2, 8] {
        let other = run(threads);
        assert!(one.pixels().iter().zip(other.pixels()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn stop_rule_matches_direct_formula() {
    let mut s = GroupSampler::new(12);
    for _ in 0..20 {
        let a = ImageBuffer::from_fn(5, 7, |_, _| s.uniform(0.0, 255.0));
        let b = ImageBuffer::from_fn(5, 7, |r, c| a.get(r, c) + s.uniform(-3.0, 3.0));
        let num: f64 = a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.pixels().iter().map(|y| y * y).sum();
        let r = relative_change(&a, &b).unwrap().unwrap();
        assert!((r - num / den).abs() <= 1e-14 * r);
        assert!(should_stop(&a, &b, r * 1.000001).unwrap());
        assert!(!should_stop(&a, &b, r).unwrap());
    }
}
