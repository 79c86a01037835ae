#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const TOOL: &str = env!("CARGO_BIN_EXE_toposieve");
pub const BRIDGE: &str = env!("CARGO_BIN_EXE_reference-bridge");

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mini").join(name)
}

/// Run the tool with `args`, with no inherited `TOPOSIEVE_` variables.
pub fn tool(args: &[&str]) -> Output {
    tool_with_env(args, &[])
}

pub fn tool_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(TOOL);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("TOPOSIEVE_")) {
        cmd.env_remove(k);
    }
    cmd.args(args).envs(env.iter().copied()).output().expect("run toposieve")
}

pub fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}\nstderr:\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Build the fixture snapshot into `dir` and return its path.
pub fn build_index(dir: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    ok(&tool(&[
        "build-index",
        "--geonames",
        path(&fixture("allCountries.txt")),
        "--alternate-names",
        path(&fixture("alternateNames.txt")),
        "--adjectival",
        path(&fixture("adjectival.tsv")),
        "--feature-codes",
        path(&fixture("featureCodes.txt")),
        "--out",
        path(&out),
    ]));
    out
}
