use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn header() -> String {
    std::fs::read_to_string(crate_dir().join("include/dpbench.h")).expect("header generated by build.rs")
}

#[test]
fn header_declares_every_export() {
    let h = header();
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 20, "{exports:?}");
    for name in exports {
        assert!(h.contains(&format!(" {name}(")) || h.contains(&format!("*{name}(")), "{name} missing");
    }
    for token in ["typedef struct DpbDataset DpbDataset;", "typedef struct DpbLedger DpbLedger;", "DPB_STATUS_OK = 0"] {
        assert!(h.contains(token), "{token}");
    }
}

fn cc() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok()?.status.success().then_some(cc)
}

/// `target/<profile>` holding the static library built alongside this test.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let lib = artifact_dir().join("libdpbench_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "dpbench.h"

int main(void) {
    double w[2] = {1.0, -0.5};
    DpbDataset *d = NULL;
    if (dpb_dataset_synth(300, w, 2, 0.1, 1, &d) != DPB_STATUS_OK) return 1;
    double v = 0.0;
    if (dpb_query_exact(d, DPB_QUERY_KIND_COUNT, "age", &v) != DPB_STATUS_OK || v != 300.0) return 2;
    DpbLedger *l = NULL;
    if (dpb_ledger_new(1.0, 0.0, &l) != DPB_STATUS_OK) return 3;
    if (dpb_query_private(d, DPB_QUERY_KIND_SUM, "age", 1.0, l, 9, &v) != DPB_STATUS_OK) return 4;
    if (dpb_query_private(d, DPB_QUERY_KIND_SUM, "age", 0.5, l, 9, &v) != DPB_STATUS_BUDGET_EXHAUSTED) return 5;
    if (strstr(dpb_last_error(), "budget") == NULL) return 6;
    double sigma = 0.0;
    if (dpb_calibrate_sigma(1.0, 1e-5, 0.01, 1000, &sigma) != DPB_STATUS_OK) return 7;
    printf("%s %.4f\n", dpb_version(), sigma);
    dpb_ledger_free(l);
    dpb_dataset_free(d);
    return 0;
}
"#,
    )
    .unwrap();
    let include = crate_dir().join("include");
    let status = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg(arg("-I", &include))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")), "{stdout}");
}

fn arg(flag: &str, p: &Path) -> String {
    format!("{flag}{}", p.display())
}
