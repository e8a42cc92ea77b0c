//! JSON instance files.
//!
//! ```json
//! {
//!   "name": "two-arm",
//!   "horizon": 1, "states": 1, "actions": 2, "initial_state": 0,
//!   "transitions": [],
//!   "rewards": [[[1.0, 0.0]]]
//! }
//! ```
//!
//! `transitions` is nested `[h][s][a][s']` over the first `H - 1` stages,
//! `rewards` is `[h][s][a]`.

use std::fs;
use std::path::Path;

use pacbound_core::mdp::MdpSpec;
use pacbound_core::{Error as CoreError, Shape};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Free-form provenance, e.g. the generator family and seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    #[serde(default)]
    pub initial_state: usize,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
}

/// A parsed instance with its display name.
#[derive(Clone, Debug)]
pub struct NamedMdp {
    pub name: String,
    pub source: Option<String>,
    pub mdp: MdpSpec,
}

fn expect_len(field: &str, found: usize, expected: usize, what: &str) -> std::result::Result<(), String> {
    if found == expected {
        Ok(())
    } else {
        Err(format!("{field}: expected {expected} {what}, found {found}"))
    }
}

impl MdpFile {
    pub fn from_mdp(mdp: &MdpSpec, name: Option<String>, source: Option<String>) -> Self {
        let shape = mdp.shape();
        let (hh, ss, aa) = (shape.horizon, shape.states, shape.actions);
        let transitions = (0..hh - 1)
            .map(|h| (0..ss).map(|s| (0..aa).map(|a| mdp.transition_row(h, s, a).to_vec()).collect()).collect())
            .collect();
        let rewards =
            (0..hh).map(|h| (0..ss).map(|s| (0..aa).map(|a| mdp.reward(h, s, a)).collect()).collect()).collect();
        Self {
            name,
            source,
            horizon: hh,
            states: ss,
            actions: aa,
            initial_state: mdp.initial_state(),
            transitions,
            rewards,
        }
    }

    fn check_nesting(&self) -> std::result::Result<(), String> {
        if self.horizon == 0 || self.states == 0 || self.actions == 0 {
            return Err("horizon, states and actions must all be at least 1".into());
        }
        expect_len("transitions", self.transitions.len(), self.horizon - 1, "stages (horizon - 1)")?;
        for (h, stage) in self.transitions.iter().enumerate() {
            expect_len(&format!("transitions[{h}]"), stage.len(), self.states, "states")?;
            for (s, row) in stage.iter().enumerate() {
                expect_len(&format!("transitions[{h}][{s}]"), row.len(), self.actions, "actions")?;
                for (a, next) in row.iter().enumerate() {
                    expect_len(
                        &format!("transitions[{h}][{s}][{a}]"),
                        next.len(),
                        self.states,
                        "next-state probabilities",
                    )?;
                }
            }
        }
        expect_len("rewards", self.rewards.len(), self.horizon, "stages")?;
        for (h, stage) in self.rewards.iter().enumerate() {
            expect_len(&format!("rewards[{h}]"), stage.len(), self.states, "states")?;
            for (s, row) in stage.iter().enumerate() {
                expect_len(&format!("rewards[{h}][{s}]"), row.len(), self.actions, "actions")?;
            }
        }
        Ok(())
    }

    /// Validates and builds the model; messages name the offending field.
    pub fn to_mdp(&self) -> std::result::Result<MdpSpec, String> {
        self.check_nesting()?;
        let shape = Shape::new(self.horizon, self.states, self.actions).map_err(|e| e.to_string())?;
        let transitions: Vec<f64> = self.transitions.iter().flatten().flatten().flatten().copied().collect();
        let rewards: Vec<f64> = self.rewards.iter().flatten().flatten().copied().collect();
        if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
            let (h, s, a) = shape.unindex(i);
            return Err(format!("rewards[{h}][{s}][{a}]: reward must be finite"));
        }
        MdpSpec::new(shape, self.initial_state, transitions, rewards).map_err(|e| match e {
            CoreError::Stochasticity { h, s, a, sum } => {
                format!("transitions[{h}][{s}][{a}]: probabilities sum to {sum}, expected 1")
            }
            CoreError::NegativeProbability { h, s, a, next, value } => {
                format!("transitions[{h}][{s}][{a}][{next}]: negative probability {value}")
            }
            CoreError::NonFinite { h, s, a } => format!("transitions[{h}][{s}][{a}]: non-finite entry"),
            CoreError::Dimension(m) if m.contains("initial state") => format!("initial_state: {m}"),
            other => other.to_string(),
        })
    }
}

/// Parses an instance from JSON text; `origin` labels error messages.
pub fn parse_mdp(text: &str, origin: &Path) -> Result<NamedMdp> {
    let file: MdpFile = serde_json::from_str(text)
        .map_err(|e| CliError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
    let mdp = file.to_mdp().map_err(|message| CliError::Parse { path: origin.to_path_buf(), message })?;
    let name = file.name.clone().unwrap_or_else(|| {
        origin.file_stem().map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned())
    });
    Ok(NamedMdp { name, source: file.source, mdp })
}

pub fn read_mdp(path: &Path) -> Result<NamedMdp> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied | std::io::ErrorKind::InvalidData => {
            CliError::Input(format!("cannot read instance {}: {e}", path.display()))
        }
        _ => CliError::io(path, e),
    })?;
    parse_mdp(&text, path)
}

pub fn to_json(mdp: &MdpSpec, name: Option<&str>, source: Option<&str>) -> String {
    let file = MdpFile::from_mdp(mdp, name.map(str::to_owned), source.map(str::to_owned));
    serde_json::to_string_pretty(&file).expect("instance files always serialize")
}

pub fn write_mdp(path: &Path, mdp: &MdpSpec, name: Option<&str>, source: Option<&str>) -> Result<()> {
    fs::write(path, to_json(mdp, name, source) + "\n").map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<NamedMdp> {
        parse_mdp(text, Path::new("test.json"))
    }

    const TWO_STAGE: &str = r#"{
        "horizon": 2, "states": 2, "actions": 1,
        "transitions": [[[[0.5, 0.5]], [[0.0, 1.0]]]],
        "rewards": [[[0.1], [0.2]], [[0.3], [0.4]]]
    }"#;

    #[test]
    fn round_trip() {
        let named = parse(TWO_STAGE).unwrap();
        assert_eq!(named.name, "test");
        let text = to_json(&named.mdp, Some("x"), Some("hand"));
        let again = parse(&text).unwrap();
        assert_eq!(again.mdp, named.mdp);
        assert_eq!((again.name.as_str(), again.source.as_deref()), ("x", Some("hand")));
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let err = parse("{\n  \"horizon\": 1,\n  \"states\": ,\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let bad_row = TWO_STAGE.replace("[[0.0, 1.0]]", "[[0.0, 0.9]]");
        let err = parse(&bad_row).unwrap_err().to_string();
        assert!(err.contains("transitions[0][1][0]") && err.contains("0.9"), "{err}");

        let short = TWO_STAGE.replace("[[0.3], [0.4]]", "[[0.3]]");
        assert!(parse(&short).unwrap_err().to_string().contains("rewards[1]: expected 2 states"));

        let unknown = TWO_STAGE.replace("\"horizon\"", "\"gamma\": 1, \"horizon\"");
        assert!(parse(&unknown).unwrap_err().to_string().contains("gamma"));

        let start = TWO_STAGE.replace("\"horizon\": 2", "\"initial_state\": 5, \"horizon\": 2");
        assert!(parse(&start).unwrap_err().to_string().contains("initial_state"));
    }

    #[test]
    fn missing_file_is_an_input_error() {
        let err = read_mdp(Path::new("/nonexistent/instance.json")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/nonexistent/instance.json"));
    }
}
