#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn semtrails(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semtrails"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// The six inputs of a corpus directory laid out like `semtrails gen` writes it.
pub struct Corpus {
    pub dir: PathBuf,
    pub checkins: &'static str,
    pub cities: &'static str,
    pub wikidata: bool,
}

impl Corpus {
    pub fn reference() -> Self {
        Self {
            dir: data("reference"),
            checkins: "checkins.tsv",
            cities: "cities.txt",
            wikidata: true,
        }
    }

    pub fn generated(dir: &Path) -> Self {
        Self {
            dir: dir.to_owned(),
            checkins: "checkins.tsv",
            cities: "cities.txt",
            wikidata: true,
        }
    }

    pub fn path(&self, name: &str) -> String {
        s(&self.dir.join(name)).to_owned()
    }

    /// `build` arguments for every input; outputs are up to the caller.
    pub fn build_args(&self) -> Vec<String> {
        let mut args = vec![
            "build".to_owned(),
            "--checkins".into(),
            self.path(self.checkins),
            "--venues".into(),
            self.path("venues.csv"),
            "--cities".into(),
            self.path(self.cities),
            "--mapping".into(),
            self.path("mapping.csv"),
            "--taxonomy".into(),
            self.path("taxonomy.csv"),
        ];
        if self.wikidata {
            args.extend(["--wikidata".into(), self.path("wikidata.csv")]);
        }
        args
    }
}

pub fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    semtrails(&refs)
}

pub fn with(mut base: Vec<String>, extra: &[&str]) -> Vec<String> {
    base.extend(extra.iter().map(|s| (*s).to_owned()));
    base
}

pub fn gen(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["gen", "--out-dir", s(dir)];
    args.extend_from_slice(extra);
    semtrails(&args)
}
