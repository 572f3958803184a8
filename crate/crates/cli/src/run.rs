use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (",
    env!("WAVEGAIN_GIT_REV"),
    ")"
);

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Verification(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Verification(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Verification(m) => write!(f, "verification failed: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<wavegain::Error> for CliError {
    fn from(e: wavegain::Error) -> Self {
        use wavegain::Error as E;
        match e {
            E::Config(_) | E::Dimension(_) => Self::Config(e.to_string()),
            E::NonFinite(_) | E::Verification(_) | E::Degenerate(_) => {
                Self::Verification(e.to_string())
            }
            E::Format { .. } | E::Io { .. } | E::Json(_) => Self::Io(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Keys every subcommand accepts, from the config file or the command line.
#[derive(Clone, Debug, Serialize)]
pub struct Common {
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

/// Resolves settings with the precedence defaults < config file < flags.
///
/// The config file is a JSON object using the same snake_case keys as the
/// flags. `out_dir` and `threads` are shared; every other key must belong
/// to the subcommand.
pub fn resolve<S: Serialize + DeserializeOwned + Default>(
    command: &str,
    config: Option<&Path>,
    flags: &impl Serialize,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
) -> CliResult<(S, Common)> {
    let mut file = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => {
                    return Err(CliError::Config(format!(
                        "{}: expected a JSON object",
                        path.display()
                    )))
                }
                Err(e) => return Err(CliError::Config(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let file_out = file.remove("out_dir");
    let file_threads = file.remove("threads");
    let mut merged = match serde_json::to_value(S::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("settings serialise to objects"),
    };
    for (k, v) in file {
        if !merged.contains_key(&k) {
            return Err(CliError::Config(format!(
                "unknown key '{k}' for '{command}'"
            )));
        }
        merged.insert(k, v);
    }
    if let Ok(Value::Object(m)) = serde_json::to_value(flags) {
        merged.extend(m);
    }
    let settings = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Config(e.to_string()))?;

    let out_dir = match (out_dir, file_out) {
        (Some(p), _) => p,
        (None, Some(Value::String(s))) => PathBuf::from(s),
        (None, Some(v)) => {
            return Err(CliError::Config(format!(
                "out_dir must be a string, got {v}"
            )))
        }
        (None, None) => Path::new("wavegain-out").join(command),
    };
    let threads = match (threads, file_threads) {
        (Some(t), _) => Some(t),
        (None, Some(v)) => Some(v.as_u64().filter(|&t| t > 0).ok_or_else(|| {
            CliError::Config(format!("threads must be a positive integer, got {v}"))
        })? as usize),
        (None, None) => None,
    };
    if threads == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    Ok((settings, Common { out_dir, threads }))
}

/// Output directory plus the manifest describing the run.
pub struct Run {
    pub dir: PathBuf,
    manifest: Map<String, Value>,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(
        command: &str,
        settings: &impl Serialize,
        common: &Common,
        seeds: &[u64],
    ) -> CliResult<Self> {
        fs::create_dir_all(&common.out_dir).map_err(|e| io_err(&common.out_dir, e))?;
        let mut manifest = Map::new();
        manifest.insert("command".into(), command.into());
        manifest.insert("version".into(), VERSION.into());
        manifest.insert("config".into(), json(settings));
        manifest.insert("threads".into(), json(&common.threads));
        manifest.insert("seeds".into(), json(&seeds));
        Ok(Self {
            dir: common.out_dir.clone(),
            manifest,
            outputs: Vec::new(),
        })
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.manifest.insert(key.into(), json(&value));
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.record(name);
        Ok(path)
    }

    /// Registers a file some library call already wrote.
    pub fn record(&mut self, name: &str) {
        self.outputs.push(name.to_owned());
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.manifest.insert("outputs".into(), json(&self.outputs));
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest is valid JSON");
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }
}

pub fn json(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("plain data serialises")
}

pub fn to_pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("plain data serialises") + "\n"
}

pub fn skip_false(b: &bool) -> bool {
    !*b
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct S {
        a: u32,
        b: String,
    }

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        a: Option<u32>,
    }

    #[test]
    fn flags_override_the_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"a": 3, "b": "x", "out_dir": "o", "threads": 2}"#).unwrap();
        let (s, c): (S, _) = resolve("t", Some(&cfg), &Flags { a: None }, None, None).unwrap();
        assert_eq!((s.a, s.b.as_str()), (3, "x"));
        assert_eq!(c.out_dir, PathBuf::from("o"));
        assert_eq!(c.threads, Some(2));
        let (s, c): (S, _) = resolve(
            "t",
            Some(&cfg),
            &Flags { a: Some(9) },
            Some("p".into()),
            None,
        )
        .unwrap();
        assert_eq!(s.a, 9);
        assert_eq!(c.out_dir, PathBuf::from("p"));
        let (s, c): (S, _) = resolve("t", None, &Flags { a: None }, None, None).unwrap();
        assert_eq!(s.a, 0);
        assert_eq!(c.out_dir, Path::new("wavegain-out").join("t"));
    }

    #[test]
    fn unknown_keys_and_bad_types_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"c": 1}"#).unwrap();
        let err = resolve::<S>("t", Some(&cfg), &Flags { a: None }, None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        fs::write(&cfg, r#"{"a": "many"}"#).unwrap();
        assert_eq!(
            resolve::<S>("t", Some(&cfg), &Flags { a: None }, None, None)
                .unwrap_err()
                .exit_code(),
            2
        );
        let missing = dir.path().join("missing.json");
        assert_eq!(
            resolve::<S>("t", Some(&missing), &Flags { a: None }, None, None)
                .unwrap_err()
                .exit_code(),
            4
        );
    }
}
