#![allow(dead_code)]

pub mod server;
pub mod synth;

use std::path::{Path, PathBuf};

use codai_cli::config::Config;
use codai_cli::pipeline::Context;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn context(config: &Path, out: &Path) -> Context {
    Context::new(Config::load(config).unwrap(), out)
}
