use std::ffi::{CStr, CString};
use std::ptr;

use pfan_core::arch::PfanConfig;
use pfan_core::model::Desmoker;
use pfan_core::nn::encode_weights;
use pfan_core::synth::procedural_tissue;
use pfan_ffi::*;

fn last_error() -> String {
    let p = pfan_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn tissue(w: usize, h: usize) -> Vec<u8> {
    procedural_tissue(4, w, h).to_rgb8()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(pfan_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generator_lifecycle() {
    let cfg = PfanConfig::desk();
    let model = Desmoker::new(&cfg, 9).unwrap();
    let bytes = encode_weights(&model.store, &cfg.to_string());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.pfw");
    std::fs::write(&path, &bytes).unwrap();

    let mut from_file = ptr::null_mut();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { pfan_generator_load(cpath.as_ptr(), &mut from_file) },
        PfanStatus::Ok
    );
    assert!(pfan_last_error().is_null());
    let mut from_mem = ptr::null_mut();
    assert_eq!(
        unsafe { pfan_generator_from_bytes(bytes.as_ptr(), bytes.len(), &mut from_mem) },
        PfanStatus::Ok
    );

    let mut n = 0usize;
    assert_eq!(unsafe { pfan_generator_param_count(from_file, &mut n) }, PfanStatus::Ok);
    assert_eq!(n, model.param_count());

    let (w, h) = (13, 9);
    let input = tissue(w, h);
    let mut a = vec![0u8; w * h * 3];
    let mut b = vec![0u8; w * h * 3];
    unsafe {
        assert_eq!(
            pfan_generator_desmoke(from_file, input.as_ptr(), w, h, a.as_mut_ptr()),
            PfanStatus::Ok
        );
        assert_eq!(
            pfan_generator_desmoke(from_mem, input.as_ptr(), w, h, b.as_mut_ptr()),
            PfanStatus::Ok
        );
    }
    assert_eq!(a, b);
    let img = pfan_core::Image::from_rgb8(w, h, &input).unwrap();
    assert_eq!(a, model.desmoke(&img).unwrap().to_rgb8());
    unsafe {
        pfan_generator_free(from_file);
        pfan_generator_free(from_mem);
        pfan_generator_free(ptr::null_mut());
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut g = ptr::null_mut();
    let missing = CString::new("/nonexistent/gen.pfw").unwrap();
    assert_eq!(unsafe { pfan_generator_load(missing.as_ptr(), &mut g) }, PfanStatus::Io);
    assert!(last_error().contains("nonexistent"));
    assert!(g.is_null());

    let junk = b"not weights";
    assert_eq!(
        unsafe { pfan_generator_from_bytes(junk.as_ptr(), junk.len(), &mut g) },
        PfanStatus::Weights
    );
    assert!(last_error().contains("magic"));

    assert_eq!(
        unsafe { pfan_generator_load(ptr::null(), &mut g) },
        PfanStatus::NullPointer
    );
    let mut out = 0.0;
    let img = tissue(8, 8);
    assert_eq!(
        unsafe { pfan_psnr_rgb8(img.as_ptr(), img.as_ptr(), 0, 8, &mut out) },
        PfanStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { pfan_psnr_rgb8(img.as_ptr(), ptr::null(), 8, 8, &mut out) },
        PfanStatus::NullPointer
    );
    // success clears the previous message
    assert_eq!(
        unsafe { pfan_psnr_rgb8(img.as_ptr(), img.as_ptr(), 8, 8, &mut out) },
        PfanStatus::Ok
    );
    assert!(pfan_last_error().is_null());
    assert!(out.is_infinite());
}

#[test]
fn metrics_match_library() {
    let (w, h) = (16, 12);
    let a = tissue(w, h);
    let b: Vec<u8> = a.iter().map(|&v| v.saturating_add(9)).collect();
    let (ia, ib) = (
        pfan_core::Image::from_rgb8(w, h, &a).unwrap(),
        pfan_core::Image::from_rgb8(w, h, &b).unwrap(),
    );
    let mut v = 0.0;
    unsafe {
        assert_eq!(pfan_psnr_rgb8(a.as_ptr(), b.as_ptr(), w, h, &mut v), PfanStatus::Ok);
        assert_eq!(v, pfan_core::metrics::psnr(&ia, &ib).unwrap());
        assert_eq!(pfan_ssim_rgb8(a.as_ptr(), b.as_ptr(), w, h, &mut v), PfanStatus::Ok);
        assert_eq!(v, pfan_core::metrics::ssim(&ia, &ib).unwrap());
        assert_eq!(
            pfan_ciede2000_rgb8(a.as_ptr(), b.as_ptr(), w, h, &mut v),
            PfanStatus::Ok
        );
        assert_eq!(v, pfan_core::metrics::image_ciede2000(&ia, &ib).unwrap());
    }
    // first pair of the standard CIEDE2000 test set
    let d = pfan_ciede2000_lab(50.0, 2.6772, -79.7751, 50.0, 0.0, -82.7485);
    assert!((d - 2.0425).abs() < 1e-4);
}

#[test]
fn smoke_render_and_composite() {
    let (w, h) = (16, 16);
    let params = PfanSmokeParams {
        density: 0.7,
        intensity: 0.8,
        temperature: 0.5,
        source_x: 0.5,
        source_y: 0.55,
        light_x: 0.5,
        light_y: 0.3,
        light_intensity: 0.3,
        seed: 11,
        frame: 2,
    };
    let mut layer = vec![0f32; w * h];
    assert_eq!(
        unsafe { pfan_render_smoke(&params, w, h, layer.as_mut_ptr()) },
        PfanStatus::Ok
    );
    let want = pfan_core::synth::render_smoke_frame(&params.into(), w, h).unwrap();
    assert_eq!(layer, want.data);

    let clean = tissue(w, h);
    let mut out = vec![0u8; w * h * 3];
    assert_eq!(
        unsafe { pfan_composite_rgb8(clean.as_ptr(), layer.as_ptr(), w, h, out.as_mut_ptr()) },
        PfanStatus::Ok
    );
    assert!(out.iter().zip(&clean).all(|(o, c)| o >= c));
    let zero = vec![0f32; w * h];
    assert_eq!(
        unsafe { pfan_composite_rgb8(clean.as_ptr(), zero.as_ptr(), w, h, out.as_mut_ptr()) },
        PfanStatus::Ok
    );
    assert_eq!(out, clean);

    let bad = PfanSmokeParams { density: 2.0, ..params };
    assert_eq!(
        unsafe { pfan_render_smoke(&bad, w, h, layer.as_mut_ptr()) },
        PfanStatus::Data
    );
}

#[test]
fn flop_counts() {
    let mut n = 0u64;
    assert_eq!(
        unsafe { pfan_flop_count(PfanAttnKind::Full, 8, 4, 4, 8, 8, &mut n) },
        PfanStatus::Ok
    );
    assert_eq!(n, 64 * 64 * 9);
    let big = 1 << 20;
    assert_eq!(
        unsafe { pfan_flop_count(PfanAttnKind::Full, 8, 4, 4, big, big, &mut n) },
        PfanStatus::InvalidArgument
    );
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/pfan.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in [
        "pfan_generator_desmoke",
        "pfan_last_error",
        "PFAN_STATUS_PANIC",
        "PfanSmokeParams",
    ] {
        assert!(text.contains(sym), "{sym}");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(status.success());
}
