use std::path::PathBuf;
use std::process::{Command, Output};

use serde::Deserialize;

use super::{ContainerState, Health, HostProfile, RunOutputs, Runner, RunnerError, SmokeOutput};
use crate::render::{ArtifactSet, COMPOSE_PATH};

/// Deploys with the local `docker compose` CLI. Host policy entries are not
/// applied here; the host itself is the profile.
#[derive(Debug, Clone)]
pub struct ComposeRunner {
    pub workdir: PathBuf,
    pub project: String,
    pub wait_timeout_s: u32,
}

#[derive(Deserialize)]
struct PsEntry {
    #[serde(rename = "Service")]
    service: String,
    #[serde(rename = "ExitCode", default)]
    exit_code: i32,
    #[serde(rename = "Health", default)]
    health: String,
    #[serde(rename = "State", default)]
    state: String,
}

impl ComposeRunner {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        Self {
            workdir: workdir.into(),
            project: "dds".into(),
            wait_timeout_s: 300,
        }
    }

    fn compose(&self, args: &[&str]) -> Result<Output, RunnerError> {
        Command::new("docker")
            .arg("compose")
            .args(["-p", &self.project, "-f", COMPOSE_PATH])
            .args(args)
            .current_dir(&self.workdir)
            .output()
            .map_err(|e| RunnerError::Unavailable(format!("docker: {e}")))
    }

    pub fn available() -> bool {
        Command::new("docker")
            .args(["compose", "version"])
            .output()
            .is_ok_and(|o| o.status.success())
    }
}

impl Runner for ComposeRunner {
    fn deploy(&mut self, artifacts: &ArtifactSet, _profile: &HostProfile) -> Result<RunOutputs, RunnerError> {
        if !Self::available() {
            return Err(RunnerError::Unavailable("`docker compose` not found".into()));
        }
        artifacts
            .write_to(&self.workdir)
            .map_err(|e| RunnerError::Deploy(e.to_string()))?;
        let timeout = self.wait_timeout_s.to_string();
        let up = self.compose(&["up", "-d", "--wait", "--wait-timeout", &timeout])?;
        let mut out = RunOutputs {
            compose_stderr: String::from_utf8_lossy(&up.stderr).into_owned(),
            ..RunOutputs::default()
        };

        let ps = self.compose(&["ps", "-a", "--format", "json"])?;
        for line in String::from_utf8_lossy(&ps.stdout).lines() {
            let Ok(e) = serde_json::from_str::<PsEntry>(line) else {
                continue;
            };
            let health = match (e.health.as_str(), e.state.as_str()) {
                ("healthy", _) | ("", "running") => Health::Healthy,
                ("starting", _) => Health::Starting,
                _ => Health::Unhealthy,
            };
            out.container_states.insert(
                e.service.clone(),
                ContainerState {
                    exit_code: e.exit_code,
                    health,
                },
            );
        }
        for svc in artifacts.services.keys() {
            out.container_states.entry(svc.clone()).or_insert(ContainerState {
                exit_code: 1,
                health: Health::Unhealthy,
            });
            let logs = self.compose(&["logs", "--no-color", svc])?;
            out.container_logs
                .insert(svc.clone(), String::from_utf8_lossy(&logs.stdout).into_owned());
        }

        if let Some(smoke) = artifacts.smoke() {
            std::thread::sleep(std::time::Duration::from_secs(u64::from(smoke.priming_delay_s)));
            let client: &[&str] = match smoke.target.system.as_str() {
                "postgresql" => &["psql", "-U", "dds", "-d", "dds", "-tAc"],
                _ => &["clickhouse-client", "--query"],
            };
            let mut args = vec!["exec", "-T", smoke.target.service.as_str()];
            args.extend_from_slice(client);
            args.push(&smoke.query);
            let q = self.compose(&args)?;
            let text = String::from_utf8_lossy(&q.stdout);
            out.smoke_output = if q.status.success() {
                SmokeOutput {
                    rows_returned: text.trim().parse().unwrap_or(0),
                    query_error: None,
                    lag_events: None,
                }
            } else {
                SmokeOutput {
                    rows_returned: 0,
                    query_error: Some(String::from_utf8_lossy(&q.stderr).trim().to_string()),
                    lag_events: None,
                }
            };
        }
        Ok(out)
    }

    fn teardown(&mut self) -> Result<(), RunnerError> {
        let down = self.compose(&["down", "-v", "--remove-orphans"])?;
        if down.status.success() {
            Ok(())
        } else {
            Err(RunnerError::Deploy(String::from_utf8_lossy(&down.stderr).into_owned()))
        }
    }
}
