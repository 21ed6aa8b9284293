#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn kanon() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kanon"));
    for (key, _) in std::env::vars() {
        if key.starts_with("KANON_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    kanon().args(args).output().expect("spawn kanon")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Persons from the motivating example: three people linked to Lisbon,
/// one of whom is also linked to Freamunde and a full name.
pub const LISBON_KG: &str = r#"{"id":1,"terms":["Lisbon"]}
{"id":2,"terms":["Lisbon"]}
{"id":3,"terms":["Porto"]}
{"id":4,"terms":["Leandro Micael Gomes Albano","Lisbon","Freamunde"]}
{"id":5,"terms":["Freamunde"]}
"#;

/// Player fixture: lisbon=[1..5], freamunde=[4,6], leandro…=[4],
/// footballer=[1,2,4,5,6], 1992=[2,4].
pub const PLAYER_KG: &str = r#"{"id":1,"terms":["lisbon","footballer"]}
{"id":2,"terms":["lisbon","footballer","1992"]}
{"id":3,"terms":["lisbon"]}
{"id":4,"terms":["lisbon","freamunde","leandro micael gomes albano","footballer","1992"]}
{"id":5,"terms":["lisbon","footballer"]}
{"id":6,"terms":["freamunde","footballer"]}
"#;

pub const PLAYER_TEXT: &str =
    "Leandro Micael Gomes Albano (1992) is a footballer from Lisbon who grew up in Freamunde.";

pub const WINNIPEG_TEXT: &str = "Jenn Mierau is a Canadian electropop musician originally from Winnipeg, who is now based in Montreal.";

/// Char span of `needle` in `text`.
pub fn char_span(text: &str, needle: &str) -> (usize, usize) {
    let b = text.find(needle).expect("needle present");
    let start = text[..b].chars().count();
    (start, start + needle.chars().count())
}
