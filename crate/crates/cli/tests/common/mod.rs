#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn canonical_config() -> Value {
    json!({
        "system": {
            "domain": [1.0],
            "lotka_volterra": {"a0": [3.0, 2.0], "b0": [[2.0, 0.1], [0.1, 2.0]]}
        },
        "grid": {"nodes": [41]},
        "solver": {"dt": 0.002, "t_end": 9.0, "record_every": 5},
        "verify": {"window": 8.0},
        "seed": 11
    })
}

pub fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

pub fn kolmo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolmo")).args(args).output().unwrap()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}
