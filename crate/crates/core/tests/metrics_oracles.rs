use gsr_core::io::add_gaussian_noise;
use gsr_core::metrics::{evaluate, psnr, ssim};
use gsr_core::verify::GroupSampler;
use gsr_core::ImageBuffer;

/// Direct 2-D evaluation of mean SSIM over every full 11×11 window.
fn naive_ssim(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let n = 11;
    let g: Vec<f64> = (0..n).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5)).exp()).collect();
    let mut win = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            win[i * n + j] = g[i] * g[j];
            total += g[i] * g[j];
        }
    }
    win.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let (h, w) = a.shape();
    let mut sum = 0.0;
    let mut count = 0;
    for r in 0..=h - n {
        for c in 0..=w - n {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    mx += win[i * n + j] * a.get(r + i, c + j);
                    my += win[i * n + j] * b.get(r + i, c + j);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let (dx, dy) = (a.get(r + i, c + j) - mx, b.get(r + i, c + j) - my);
                    vx += win[i * n + j] * dx * dx;
                    vy += win[i * n + j] * dy * dy;
                    cov += win[i * n + j] * dx * dy;
                }
            }
            sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    sum / count as f64
}

fn random_image(s: &mut GroupSampler, h: usize, w: usize) -> ImageBuffer {
    ImageBuffer::from_fn(h, w, |_, _| s.uniform(0.0, 255.0))
}

#[test]
fn ssim_matches_naive_reference() {
    let mut s = GroupSampler::new(1);
    for (h, w) in [(11, 11), (16, 23), (30, 19)] {
        let a = random_image(&mut s, h, w);
        let b = ImageBuffer::from_fn(h, w, |r, c| (a.get(r, c) * 0.7 + s.uniform(0.0, 60.0)).min(255.0));
        assert!((ssim(&a, &b).unwrap() - naive_ssim(&a, &b)).abs() < 1e-6);
    }
}

#[test]
fn metrics_are_symmetric() {
    let mut s = GroupSampler::new(2);
    let a = random_image(&mut s, 20, 20);
    let b = random_image(&mut s, 20, 20);
    assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    let m = evaluate(&a, &a).unwrap();
    assert_eq!((m.psnr_db, m.ssim), (f64::INFINITY, 1.0));
}

#[test]
fn psnr_decreases_with_noise_amplitude() {
    let clean = ImageBuffer::from_fn(64, 64, |r, c| 128.0 + 60.0 * ((r as f64) / 9.0).sin() * ((c as f64) / 7.0).cos());
    for seed in 0..20 {
        let values: Vec<f64> = [2.0, 5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&sigma| psnr(&add_gaussian_noise(&clean, sigma, seed).unwrap(), &clean).unwrap())
            .collect();
        assert!(values.windows(2).all(|p| p[0] > p[1]), "seed {seed}: {values:?}");
    }
}
