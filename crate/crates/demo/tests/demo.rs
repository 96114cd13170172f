use mstsvd_demo::{denoised, image_to_rgba, noisy, quality, rgba_to_image, scene};

#[test]
fn rgba_round_trip_ignores_alpha() {
    let mut px = scene(16, 1).unwrap();
    assert_eq!(px.len(), 16 * 16 * 4);
    assert!(px.chunks(4).all(|p| p[3] == 255));
    px[3] = 7;
    let img = rgba_to_image(&px, 16, 16).unwrap();
    let back = image_to_rgba(&img);
    assert_eq!(&back[..3], &px[..3]);
    assert_eq!(back[3], 255);
    assert_eq!(&back[4..], &px[4..]);
}

#[test]
fn wrong_length_rejected() {
    assert!(rgba_to_image(&[0; 15], 2, 2).is_err());
}

#[test]
fn noise_then_denoise_improves_psnr() {
    let (w, h) = (48, 40);
    let clean = scene(48, 2).unwrap()[..w * h * 4].to_vec();
    let dirty = noisy(&clean, w, h, 25.0, 3).unwrap();
    assert_eq!(dirty, noisy(&clean, w, h, 25.0, 3).unwrap());
    let before = quality(&clean, &dirty, w, h).unwrap();
    for method in ["mstsvd", "cmstsvd", "hosvd4d"] {
        let (out, secs) = denoised(&dirty, w, h, 25.0, method).unwrap();
        assert!(secs >= 0.0);
        let after = quality(&clean, &out, w, h).unwrap();
        assert!(after[0] > before[0] + 3.0, "{method}: {} -> {}", before[0], after[0]);
    }
}

#[test]
fn identical_buffers_score_perfectly() {
    let px = scene(24, 5).unwrap();
    let m = quality(&px, &px, 24, 24).unwrap();
    assert!(m[0].is_infinite());
    assert!((m[1] - 1.0).abs() < 1e-12);
    assert_eq!(m[2], 0.0);
    assert_eq!(m[3], 0.0);
}

#[test]
fn unknown_and_twist_methods_rejected() {
    let px = scene(24, 5).unwrap();
    assert!(denoised(&px, 24, 24, 10.0, "bm3d").is_err());
    assert!(denoised(&px, 24, 24, 10.0, "twist").is_err());
}
