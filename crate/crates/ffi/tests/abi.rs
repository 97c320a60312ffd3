use std::ffi::{CStr, CString};
use std::ptr;

use dpbench_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = dpb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn synth(rows: usize) -> *mut DpbDataset {
    let w = [1.0, -0.5];
    let mut d = ptr::null_mut();
    let s = unsafe { dpb_dataset_synth(rows, w.as_ptr(), w.len(), 0.1, 7, &mut d) };
    assert_eq!(s, DpbStatus::Ok);
    d
}

#[test]
fn dataset_lifecycle_and_queries() {
    let d = synth(500);
    unsafe {
        assert_eq!(dpb_dataset_size(d), 500);
        let col = c("age");
        let mut exact = 0.0;
        assert_eq!(dpb_query_exact(d, DpbQueryKind::Count, col.as_ptr(), &mut exact), DpbStatus::Ok);
        assert_eq!(exact, 500.0);
        assert!(dpb_last_error().is_null());

        let mut a = 0.0;
        let mut b = 0.0;
        let s = dpb_query_private(d, DpbQueryKind::Avg, col.as_ptr(), 1.0, ptr::null_mut(), 3, &mut a);
        assert_eq!(s, DpbStatus::Ok);
        dpb_query_private(d, DpbQueryKind::Avg, col.as_ptr(), 1.0, ptr::null_mut(), 3, &mut b);
        assert_eq!(a, b);
        let mut truth = 0.0;
        dpb_query_exact(d, DpbQueryKind::Avg, col.as_ptr(), &mut truth);
        assert!((a - truth).abs() < 10.0, "{a} vs {truth}");

        let group = c("group");
        let mut bins = [0.0; 4];
        let mut len = 0;
        assert_eq!(dpb_histogram_exact(d, group.as_ptr(), bins.as_mut_ptr(), 4, &mut len), DpbStatus::Ok);
        assert_eq!(len, 4);
        assert_eq!(bins.iter().sum::<f64>(), 500.0);

        let mut small = [0.0; 2];
        let s = dpb_histogram_private(d, group.as_ptr(), 1.0, ptr::null_mut(), 1, small.as_mut_ptr(), 2, &mut len);
        assert_eq!(s, DpbStatus::BufferTooSmall);
        assert_eq!(len, 4);

        let s = dpb_query_exact(d, DpbQueryKind::Histogram, group.as_ptr(), &mut exact);
        assert_eq!(s, DpbStatus::InvalidArgument);
        let s = dpb_query_exact(d, DpbQueryKind::Sum, group.as_ptr(), &mut exact);
        assert_eq!(s, DpbStatus::Ineligible);
        assert!(last_error().contains("group"));
        dpb_dataset_free(d);
        dpb_dataset_free(ptr::null_mut());
    }
}

#[test]
fn ledger_enforces_budget() {
    let d = synth(100);
    unsafe {
        let mut ledger = ptr::null_mut();
        assert_eq!(dpb_ledger_new(0.75, 0.0, &mut ledger), DpbStatus::Ok);
        let col = c("age");
        let mut v = 0.0;
        assert_eq!(dpb_query_private(d, DpbQueryKind::Count, col.as_ptr(), 0.5, ledger, 1, &mut v), DpbStatus::Ok);
        assert_eq!(
            dpb_query_private(d, DpbQueryKind::Count, col.as_ptr(), 0.5, ledger, 2, &mut v),
            DpbStatus::BudgetExhausted
        );
        let (mut e, mut dl) = (0.0, 0.0);
        assert_eq!(dpb_ledger_remaining(ledger, &mut e, &mut dl), DpbStatus::Ok);
        assert!((e - 0.25).abs() < 1e-12);
        dpb_ledger_free(ledger);
        dpb_dataset_free(d);
    }
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(
            dpb_query_exact(ptr::null(), DpbQueryKind::Count, c("a").as_ptr(), &mut v),
            DpbStatus::NullPointer
        );
        assert!(last_error().contains("dataset"));
        assert_eq!(dpb_calibrate_sigma(-1.0, 1e-5, 0.01, 10, &mut v), DpbStatus::InvalidArgument);
        assert_eq!(dpb_rmspe(ptr::null(), ptr::null(), 0, &mut v), DpbStatus::Numeric);
        let mut d = ptr::null_mut();
        let s = dpb_dataset_load(c("/nonexistent.csv").as_ptr(), c("/nonexistent.json").as_ptr(), &mut d);
        assert_eq!(s, DpbStatus::Io);
        assert!(d.is_null());
    }
}

#[test]
fn metrics_and_accountant() {
    unsafe {
        let np = [100.0, 100.0];
        let dp = [90.0, 110.0];
        let mut v = 0.0;
        assert_eq!(dpb_rmspe(np.as_ptr(), dp.as_ptr(), 2, &mut v), DpbStatus::Ok);
        assert!((v - 10.0).abs() < 1e-12);
        assert_eq!(dpb_overhead_percent(120.0, 100.0, &mut v), DpbStatus::Ok);
        assert!((v - 20.0).abs() < 1e-12);

        let mut sigma = 0.0;
        assert_eq!(dpb_calibrate_sigma(1.0, 1e-5, 0.01, 1000, &mut sigma), DpbStatus::Ok);
        let mut eps = 0.0;
        assert_eq!(dpb_rdp_epsilon(sigma, 0.01, 1000, 1e-5, &mut eps), DpbStatus::Ok);
        assert!((eps - 1.0).abs() <= 1e-2);
        assert_eq!(dpb_calibrate_sigma(1e-6, 1e-5, 1.0, 100_000, &mut sigma), DpbStatus::Numeric);
    }
}

#[test]
fn harness_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let records = dir.path().join("r.jsonl");
    let summaries = dir.path().join("s.jsonl");
    let grid = dir.path().join("g.csv");
    std::fs::write(
        &plan,
        r#"{"epsilons":[1.0],"sizes":[200],"tasks":[{"type":"query","kind":"sum","column":"age"}],
            "repetitions":5,"probes":{"measure":false}}"#,
    )
    .unwrap();
    let p = |x: &std::path::Path| c(x.to_str().unwrap());
    let d = synth(300);
    unsafe {
        assert_eq!(dpb_run_plan(p(&plan).as_ptr(), d, true, 4, p(&records).as_ptr()), DpbStatus::Ok);
        assert_eq!(dpb_aggregate(p(&records).as_ptr(), 1, p(&summaries).as_ptr()), DpbStatus::Ok);
        assert_eq!(
            dpb_emit_report(p(&summaries).as_ptr(), DpbMetric::Utility, DpbShape::Lines, p(&grid).as_ptr()),
            DpbStatus::Ok
        );
        std::fs::write(&plan, r#"{"tasks":[],"nope":1}"#).unwrap();
        assert_eq!(dpb_run_plan(p(&plan).as_ptr(), d, false, 0, p(&records).as_ptr()), DpbStatus::Parse);
        dpb_dataset_free(d);
    }
    let text = std::fs::read_to_string(&grid).unwrap();
    assert!(text.starts_with("task,series,epsilon,value\nsum:age,size=200,1,"));
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dpb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
