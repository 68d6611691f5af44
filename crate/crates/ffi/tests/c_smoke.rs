//! Compile and run a small C program against the generated header and the
//! static library, proving the ABI surface works from C.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "signet.h"

int main(void) {
    SignetGraph *clean = NULL;
    SignetStatus st = signet_graph_two_faction(80, 0.15, 0.15, 0.02, 7, &clean);
    assert(st == SIGNET_STATUS_OK);
    assert(signet_graph_node_count(clean) == 80);

    SignetBalanceReport report;
    st = signet_balance_degree(clean, &report);
    assert(st == SIGNET_STATUS_OK);
    assert(report.d3 > 0.8 && report.d3 <= 1.0);
    assert(report.degenerate == 0);

    SignetGraph *poisoned = NULL;
    st = signet_balance_attack(clean, 0.2, &poisoned);
    assert(st == SIGNET_STATUS_OK);
    SignetBalanceReport after;
    signet_balance_degree(poisoned, &after);
    assert(after.d3 < report.d3);

    int64_t dist = signet_perturbation_distance(clean, poisoned);
    assert(dist > 0);
    double overlap = signet_overlap_ratio(clean, poisoned);
    assert(overlap > 0.0 && overlap < 1.0);

    SignetGraph *restored = NULL;
    uint64_t flips = 0;
    st = signet_balance_restore(poisoned, 0.9, &restored, &flips);
    assert(st == SIGNET_STATUS_OK);
    SignetBalanceReport fixed;
    signet_balance_degree(restored, &fixed);
    assert(fixed.d3 >= after.d3);

    char *text = signet_graph_to_edge_list(restored);
    assert(text != NULL);
    signet_string_free(text);

    /* error path: self-loop must fail with a message */
    SignetGraph *bad = NULL;
    st = signet_graph_parse("0 0 1\n", 0, &bad);
    assert(st == SIGNET_STATUS_PARSE_ERROR);
    assert(signet_last_error() != NULL);

    signet_graph_free(clean);
    signet_graph_free(poisoned);
    signet_graph_free(restored);
    printf("c smoke ok: d3 %.4f -> %.4f -> %.4f\n", report.d3, after.d3, fixed.d3);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    let lib_dir = manifest.join("../../target/debug");
    let static_lib = lib_dir.join("libsignet_ffi.a");
    if !static_lib.exists() {
        // `cargo test -p signet-ffi` builds it; standalone harness runs may not
        eprintln!("static library not built at {static_lib:?}; skipping C smoke test");
        return;
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler available; skipping C smoke test");
        return;
    }

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();

    let compile = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&static_lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .expect("compiler invocation");
    assert!(
        compile.status.success(),
        "cc failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin).output().expect("smoke binary runs");
    assert!(
        run.status.success(),
        "smoke binary failed:\n{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("c smoke ok"), "stdout: {stdout}");
}
