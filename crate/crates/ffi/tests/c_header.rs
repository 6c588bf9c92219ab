//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is on the PATH.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "simgap.h"

int main(void) {
    double gains[4] = {13.0, 15.0, 31.0, 1.6};
    SimgapController *ctrl = NULL;
    if (simgap_controller_proportional(gains, &ctrl) != SIMGAP_STATUS_OK) return 1;
    SimgapPlant plant;
    if (simgap_plant_nominal(&plant) != SIMGAP_STATUS_OK) return 2;
    double s[4] = {0.0, 0.0, 0.1, 0.0};
    for (int k = 0; k < 300; ++k) {
        double f;
        if (simgap_controller_step(ctrl, s, NULL, 0, &f, NULL) != SIMGAP_STATUS_OK) return 3;
        if (f > 20.0) f = 20.0;
        if (f < -20.0) f = -20.0;
        if (simgap_rk4_step(&plant, s, simgap_plant_force(f), 0.01, 10.0, s) != SIMGAP_STATUS_OK) return 4;
    }
    simgap_controller_free(ctrl);
    if (fabs(s[2]) > 1e-3) return 5;
    double duty;
    if (simgap_force_to_duty(1.0, 0.0, 1.5, &duty, NULL) != SIMGAP_STATUS_INVALID_ARGUMENT) return 6;
    if (simgap_last_error()[0] == '\0') return 7;
    printf("ok %.3e\n", s[2]);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps/<name>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_balances() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipped");
        return;
    }
    let lib = target_dir().join("libsimgap_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok"));
}
