//! Output directory: atomic CSV/JSON writes, verdicts and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fail::CliError;

pub const MANIFEST: &str = "manifest.json";

/// One pass/fail line of a verdict. Informational checks never fail a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub informational: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: &str, value: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            target: None,
            tolerance: None,
            pass,
            informational: false,
            note: None,
        }
    }

    /// `|value − target| ≤ tolerance`.
    pub fn abs(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value - target).abs() <= tolerance;
        Self {
            target: Some(target),
            tolerance: Some(tolerance),
            ..Self::new(name, value, pass)
        }
    }

    /// `|value/target − 1| ≤ tolerance`.
    pub fn rel(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value / target - 1.0).abs() <= tolerance;
        Self {
            target: Some(target),
            tolerance: Some(tolerance),
            ..Self::new(name, value, pass)
        }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            tolerance: Some(bound),
            ..Self::new(name, value, value <= bound)
        }
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn new(checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass || c.informational);
        Self { pass, checks }
    }

    pub fn summary(&self) -> VerdictSummary {
        let failed = self
            .checks
            .iter()
            .filter(|c| !c.pass && !c.informational)
            .map(|c| c.name.clone())
            .collect();
        VerdictSummary {
            pass: self.pass,
            n_checks: self.checks.len(),
            failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub pass: bool,
    pub n_checks: usize,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub config_hash: String,
    /// Canonical TOML of the effective config; saving it and rerunning with
    /// the same seed reproduces the outputs.
    pub config: String,
    pub toolkit_version: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub verdict: VerdictSummary,
}

/// One manifest per output directory, with an entry per subcommand run there.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunEntry>,
}

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip decimal form; `.` separator regardless of locale.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub struct OutDir {
    path: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path)
            .map_err(|e| CliError::io(e, &format!("cannot create {}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn atomic_write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.path.join(name);
        let tmp = self.path.join(format!(".{name}.tmp"));
        let ctx = |e| CliError::io(e, &format!("cannot write {}", target.display()));
        let mut f = fs::File::create(&tmp).map_err(ctx)?;
        f.write_all(bytes).map_err(ctx)?;
        f.sync_all().map_err(ctx)?;
        drop(f);
        fs::rename(&tmp, &target).map_err(ctx)
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let err = |e: csv::Error| CliError::runtime(format!("csv {name}: {e}"));
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::runtime(format!("csv {name}: {e}")))?;
        self.atomic_write(name, &bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::runtime(format!("json {name}: {e}")))?;
        text.push('\n');
        self.atomic_write(name, text.as_bytes())?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Adds or replaces the entry for `command` in the directory's manifest.
    pub fn record_run(&self, command: &str, entry: RunEntry) -> Result<(), CliError> {
        let path = self.path.join(MANIFEST);
        let mut manifest = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str::<Manifest>(&text).unwrap_or_else(|e| {
                log::warn!("replacing unreadable manifest {}: {e}", path.display());
                Manifest::default()
            }),
            Err(_) => Manifest::default(),
        };
        manifest.runs.insert(command.to_string(), entry);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        self.atomic_write(MANIFEST, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            config_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 4096.0, 1e-300, 2.5e17] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "0.5");
    }

    #[test]
    fn informational_checks_do_not_fail() {
        let v = Verdict::new(vec![
            Check::abs("a", 1.0, 1.05, 0.1),
            Check::rel("b", 2.0, 1.0, 0.1).informational(),
        ]);
        assert!(v.pass);
        let v = Verdict::new(vec![Check::at_most("c", 2.0, 1.0)]);
        assert!(!v.pass);
        assert_eq!(v.summary().failed, vec!["c".to_string()]);
    }

    #[test]
    fn writes_are_atomic_and_manifest_merges() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write_csv("a.csv", &["x", "y"], &[vec!["1".into(), "a,b".into()]])
            .unwrap();
        let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "x,y\r\n1,\"a,b\"\r\n");
        let entry = RunEntry {
            config_hash: "h".into(),
            config: String::new(),
            toolkit_version: "0".into(),
            seed: 1,
            workers: 1,
            wall_time_seconds: 0.0,
            outputs: out.written().to_vec(),
            verdict: Verdict::new(vec![]).summary(),
        };
        out.record_run("tail", entry.clone()).unwrap();
        out.record_run("survival", entry).unwrap();
        let m: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m.runs.len(), 2);
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 2);
    }
}
