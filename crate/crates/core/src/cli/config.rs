//! INI-style run configuration.
//!
//! Keys outside any section apply to every command; keys under a section
//! named after a command (`[train]`, `[oracle-check]`, ...) apply to that
//! command only and override the global ones. Key names are the long flag
//! names, with `-` and `_` interchangeable. Flags given on the command line
//! always win over the file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use ini::Ini;

use crate::error::{GqeError, Result};

pub const COMMANDS: [&str; 6] = ["ingest", "sample", "train", "eval", "answer", "oracle-check"];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// Set for keys from the command's own section: these must be used.
    strict: bool,
}

/// Configuration values visible to one command.
#[derive(Debug, Clone, Default)]
pub struct ConfigValues {
    entries: BTreeMap<String, Entry>,
    used: BTreeSet<String>,
    origin: String,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigValues {
    pub fn load(path: &Path, command: &str) -> Result<Self> {
        let ini = Ini::load_from_file(path).map_err(|e| match e {
            ini::Error::Io(source) if source.kind() == std::io::ErrorKind::NotFound => {
                GqeError::MissingInput {
                    path: path.to_path_buf(),
                    hint: "check the --config path".into(),
                }
            }
            ini::Error::Io(source) => GqeError::io(path, source),
            ini::Error::Parse(p) => GqeError::Parse {
                path: path.display().to_string(),
                line: p.line,
                message: p.msg.to_string(),
            },
        })?;
        Self::from_ini(&ini, command, &path.display().to_string())
    }

    pub fn parse(text: &str, command: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|p| GqeError::Parse {
            path: "<config>".into(),
            line: p.line,
            message: p.msg.to_string(),
        })?;
        Self::from_ini(&ini, command, "<config>")
    }

    fn from_ini(ini: &Ini, command: &str, origin: &str) -> Result<Self> {
        let mut values = ConfigValues {
            origin: origin.to_string(),
            ..Default::default()
        };
        for (section, props) in ini.iter() {
            let strict = match section {
                None => false,
                Some(name) if name == command => true,
                Some(name) if COMMANDS.contains(&name) => continue,
                Some(name) => {
                    return Err(GqeError::Argument(format!(
                        "{origin}: unknown section [{name}] (expected one of {})",
                        COMMANDS.join(", ")
                    )))
                }
            };
            for (k, v) in props.iter() {
                let key = normalize(k);
                if strict || !values.entries.contains_key(&key) {
                    values.entries.insert(
                        key,
                        Entry {
                            value: v.trim().to_string(),
                            strict,
                        },
                    );
                }
            }
        }
        Ok(values)
    }

    /// Fills `slot` from the key when the command line left it unset.
    pub fn fill<T>(&mut self, key: &str, slot: &mut Option<T>) -> Result<()>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let key = normalize(key);
        self.used.insert(key.clone());
        if slot.is_some() {
            return Ok(());
        }
        if let Some(e) = self.entries.get(&key) {
            let parsed = e.value.parse().map_err(|err| {
                GqeError::Argument(format!("{}: `{key} = {}`: {err}", self.origin, e.value))
            })?;
            *slot = Some(parsed);
        }
        Ok(())
    }

    /// Rejects section keys the command never asked for.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .iter()
            .filter(|(k, e)| e.strict && !self.used.contains(*k))
            .map(|(k, _)| k.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(GqeError::Argument(format!(
                "{}: unknown keys for this command: {}",
                self.origin,
                unknown.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_overrides_global_and_flags_win() {
        let text = "seed = 3\ndim = 8\n[train]\ndim = 16\nlearning-rate = 0.5\n[sample]\ntrain = 7\n";
        let mut c = ConfigValues::parse(text, "train").unwrap();
        let (mut seed, mut dim, mut lr) = (None::<u64>, None::<usize>, Some(0.1f64));
        c.fill("seed", &mut seed).unwrap();
        c.fill("dim", &mut dim).unwrap();
        c.fill("learning_rate", &mut lr).unwrap();
        c.finish().unwrap();
        assert_eq!((seed, dim, lr), (Some(3), Some(16), Some(0.1)));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let mut c = ConfigValues::parse("[train]\nlearnin_rate = 1\n", "train").unwrap();
        c.fill("learning_rate", &mut None::<f64>).unwrap();
        assert!(c.finish().is_err());
        assert!(ConfigValues::parse("[trian]\nx = 1\n", "train").is_err());
        let mut c = ConfigValues::parse("dim = eight\n", "train").unwrap();
        assert!(c.fill("dim", &mut None::<usize>).is_err());
        let c = ConfigValues::parse("whatever = 1\n", "train").unwrap();
        c.finish().unwrap();
    }
}
