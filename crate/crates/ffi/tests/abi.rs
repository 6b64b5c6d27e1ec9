use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use crossreg::bench::{generate_scene, SceneParams};
use crossreg::PointCloud;
use crossreg_ffi::*;

fn to_handle(c: &PointCloud) -> *mut CrPointCloud {
    let flat: Vec<f64> = c.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { crossreg_cloud_new(flat.as_ptr(), c.len(), &mut h) },
        CrStatus::Ok
    );
    h
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(crossreg_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn register_identical_clouds_through_the_abi() {
    let params = SceneParams {
        density_ratio: 1.0,
        noise: 0.0,
        outlier_fraction: 0.0,
        overlap: 1.0,
        base_points: 3000,
    };
    let scene = generate_scene(&params, 3).unwrap();
    let src = to_handle(&scene.source);
    assert_eq!(unsafe { crossreg_cloud_len(src) }, scene.source.len());

    let mut res = ptr::null_mut();
    assert_eq!(
        unsafe { crossreg_register(src, src, ptr::null(), &mut res) },
        CrStatus::Ok
    );
    let mut t = [0.0; 12];
    assert_eq!(
        unsafe { crossreg_result_transform(res, t.as_mut_ptr()) },
        CrStatus::Ok
    );
    let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    // dense groups mix exact self-matches with neighbors a few cm away
    for (a, b) in t.iter().zip(id) {
        assert!((a - b).abs() < 0.02, "{t:?}");
    }
    assert!(unsafe { crossreg_result_inlier_count(res) } > 0);

    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { crossreg_result_json(res, &mut json) },
        CrStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["rotation"].as_array().unwrap().len(), 9);
    assert!(v.get("timings").is_none());
    unsafe {
        crossreg_string_free(json);
        crossreg_result_free(res);
        crossreg_cloud_free(src);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("k_lose = 3").unwrap();
    assert_eq!(
        unsafe { crossreg_config_parse(bad.as_ptr(), &mut cfg) },
        CrStatus::Parse
    );
    assert!(last_error().contains("k_lose"));
    assert!(cfg.is_null());

    let ok = CString::new("k_loose = 1\n").unwrap();
    assert_eq!(
        unsafe { crossreg_config_parse(ok.as_ptr(), &mut cfg) },
        CrStatus::Ok
    );
    unsafe { crossreg_config_free(cfg) };

    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { crossreg_cloud_new(ptr::null(), 4, &mut h) },
        CrStatus::NullPointer
    );
    let nan = [f64::NAN, 0.0, 0.0];
    assert_eq!(
        unsafe { crossreg_cloud_new(nan.as_ptr(), 1, &mut h) },
        CrStatus::InvalidArgument
    );

    // too few points for the pyramid
    let tiny = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
    let t = to_handle(&tiny);
    let mut res = ptr::null_mut();
    assert_eq!(
        unsafe { crossreg_register(t, t, ptr::null(), &mut res) },
        CrStatus::RegistrationFailed
    );
    assert!(res.is_null());
    assert!(last_error().contains("features"));
    assert_eq!(
        unsafe { crossreg_register(ptr::null(), t, ptr::null(), &mut res) },
        CrStatus::NullPointer
    );
    unsafe {
        crossreg_cloud_free(t);
        crossreg_cloud_free(ptr::null_mut());
        crossreg_result_free(ptr::null_mut());
        crossreg_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(crossreg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/crossreg.h");
    assert!(header.exists());
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-xc", "-Wall", "-Werror"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler found; skipping header check");
        return;
    };
    assert!(status.success());
}
