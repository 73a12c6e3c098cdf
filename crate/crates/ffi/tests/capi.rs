use std::ffi::CStr;
use std::ptr;

use rl_lab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let need = unsafe { rl_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(need > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn synthetic_handle_round_trip() {
    let mut chart = ptr::null_mut();
    unsafe {
        assert_eq!(rl_synthetic_new(1, true, 3, 2.0, f64::NAN, &mut chart), RlStatus::Ok);
        let mut k1 = 0.0;
        assert_eq!(rl_chart_calibrate(chart, 500.0, RlMeasure::ZeroState, &mut k1), RlStatus::Ok);
        assert!((k1 - 2.2238).abs() < 5e-4, "{k1}");
        let mut stored = 0.0;
        assert_eq!(rl_chart_parameter(chart, &mut stored), RlStatus::Ok);
        assert_eq!(stored, k1);
        let mut arl = 0.0;
        assert_eq!(rl_chart_arl(chart, 0.0, RlMeasure::ZeroState, &mut arl), RlStatus::Ok);
        assert!((arl - 500.0).abs() < 1e-6, "{arl}");
        rl_chart_free(chart);
    }
}

#[test]
fn ced_fills_caller_buffer() {
    let mut chart = ptr::null_mut();
    unsafe {
        assert_eq!(rl_shewhart_new(3.0, &mut chart), RlStatus::Ok);
        let mut values = [0.0; 5];
        let (mut written, mut limit) = (0usize, 0.0);
        let st = rl_chart_ced(chart, 1.0, 5, values.as_mut_ptr(), values.len(), &mut written, &mut limit);
        assert_eq!(st, RlStatus::Ok);
        assert_eq!(written, 5);
        // Memoryless chart: every D_tau equals the out-of-control ARL.
        let mut arl = 0.0;
        rl_chart_arl(chart, 1.0, RlMeasure::ZeroState, &mut arl);
        for v in values.iter().chain([&limit]) {
            assert!((v - arl).abs() < 1e-9 * arl);
        }
        let st = rl_chart_ced(chart, 1.0, 6, values.as_mut_ptr(), values.len(), &mut written, &mut limit);
        assert_eq!(st, RlStatus::BufferTooSmall);
        rl_chart_free(chart);
    }
}

#[test]
fn errors_are_reported_per_thread() {
    let mut chart = ptr::null_mut();
    unsafe {
        assert_eq!(rl_ewma_new(1.5, 3.0, RlLimits::Exact, f64::NAN, 0, &mut chart), RlStatus::InvalidParameter);
        assert!(chart.is_null());
        assert!(last_error().contains("lambda"), "{}", last_error());
        assert_eq!(rl_synthetic_new(9, false, 3, 2.0, f64::NAN, &mut chart), RlStatus::InvalidParameter);
        assert_eq!(rl_chart_arl(ptr::null(), 0.0, RlMeasure::ZeroState, &mut 0.0), RlStatus::NullPointer);
        assert!(last_error().contains("chart"));
    }
    let other = std::thread::spawn(|| unsafe { rl_last_error(ptr::null_mut(), 0) }).join().unwrap();
    assert_eq!(other, 0);
}

#[test]
fn truncated_message_stays_terminated() {
    unsafe {
        rl_shewhart_new(-1.0, ptr::null_mut());
        let mut buf = [1 as std::ffi::c_char; 4];
        let need = rl_last_error(buf.as_mut_ptr(), buf.len());
        assert!(need > 4);
        assert_eq!(buf[3], 0);
    }
}

#[test]
fn cusum_calibrates_decision_interval() {
    let mut chart = ptr::null_mut();
    unsafe {
        assert_eq!(rl_cusum_new(0.5, 3.0, f64::NAN, 51, &mut chart), RlStatus::Ok);
        let mut h = 0.0;
        assert_eq!(rl_chart_calibrate(chart, 500.0, RlMeasure::ZeroState, &mut h), RlStatus::Ok);
        assert!(h > 4.0 && h < 6.0, "{h}");
        rl_chart_free(chart);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(rl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rl_lab.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["rl_synthetic_new", "rl_chart_ced", "rl_last_error", "RL_STATUS_OK", "typedef struct RlChart RlChart"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    // Skipped quietly where no C compiler is installed.
    let Ok(o) = std::process::Command::new("cc").args(["-std=c99", "-fsyntax-only", "-x", "c", header]).output() else {
        return;
    };
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
