//! Run manifests: every `--out-dir` run records its resolved command,
//! input and output digests so it can be reproduced by `selbound replay`.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{Command, Outcome, ReplayArgs};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    /// Subcommand name.
    pub command: String,
    /// Resolved arguments, seed included.
    pub args: serde_json::Value,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub exit_code: u8,
}

impl RunManifest {
    fn command(&self) -> Result<Command> {
        let value = serde_json::json!({ "name": self.command, "args": self.args });
        serde_json::from_value(value).context("manifest does not describe a known command")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes the outcome's files and `manifest.json` into `dir`.
pub fn write_run(dir: &Path, command: &Command, outcome: &Outcome) -> Result<RunManifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut outputs = Vec::with_capacity(outcome.files.len());
    for (name, contents) in &outcome.files {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(Artifact {
            path: (*name).to_owned(),
            sha256: sha256_hex(contents.as_bytes()),
        });
    }
    let inputs = command
        .inputs()
        .iter()
        .map(|p| {
            Ok(Artifact {
                path: p.display().to_string(),
                sha256: file_digest(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let value = serde_json::to_value(command)?;
    let manifest = RunManifest {
        tool: "selbound".to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        command: command.name().to_owned(),
        args: value["args"].clone(),
        inputs,
        outputs,
        exit_code: outcome.exit_code,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

pub fn replay(args: &ReplayArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading {}", args.manifest.display()))?;
    let recorded: RunManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.manifest.display()))?;
    let mut command = recorded.command()?;
    if matches!(command, Command::Replay(_)) {
        bail!("a manifest cannot record a replay");
    }
    for input in &recorded.inputs {
        let now = file_digest(Path::new(&input.path))?;
        if now != input.sha256 {
            bail!("input {} changed since the recorded run", input.path);
        }
    }
    command.set_out_dir(args.out_dir.clone());
    let outcome = command.execute()?;
    let fresh = write_run(&args.out_dir, &command, &outcome)?;

    let mut mismatched = Vec::new();
    for want in &recorded.outputs {
        match fresh.outputs.iter().find(|a| a.path == want.path) {
            Some(got) if got.sha256 == want.sha256 => println!("identical {} {}", want.path, want.sha256),
            Some(got) => {
                println!("differs   {} {} != {}", want.path, got.sha256, want.sha256);
                mismatched.push(want.path.clone());
            }
            None => {
                println!("missing   {}", want.path);
                mismatched.push(want.path.clone());
            }
        }
    }
    if fresh.outputs.len() != recorded.outputs.len() {
        bail!("replay produced {} outputs, manifest lists {}", fresh.outputs.len(), recorded.outputs.len());
    }
    if !mismatched.is_empty() {
        bail!("replay differs in {}", mismatched.join(", "));
    }
    if fresh.exit_code != recorded.exit_code {
        bail!("replay exit code {} differs from recorded {}", fresh.exit_code, recorded.exit_code);
    }
    Ok(0)
}
