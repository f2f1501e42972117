use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use serde_yaml::Value;

use super::{
    ContainerState, FaultClass, FaultInjection, Health, HostProfile, RunOutputs, Runner, RunnerError,
    SmokeOutput,
};
use crate::render::{marker_in, ArtifactSet, COMPOSE_PATH};
use crate::skill::ddl::{clause_uses, create_tables};

const IMAGES: &str = include_str!("../../config/images.yaml");

/// Field path fragment whose marker makes a package line count as declared.
const LIBRARY_FIELD: &str = "required_client_libraries";

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ImageRegistry {
    pub images: BTreeSet<String>,
}

impl Default for ImageRegistry {
    fn default() -> Self {
        serde_yaml::from_str(IMAGES).expect("embedded image list parses")
    }
}

impl ImageRegistry {
    pub fn contains(&self, image: &str) -> bool {
        self.images.contains(image)
    }

    /// First pullable tag of the repository `image` names.
    pub fn by_repo(&self, image: &str) -> Option<&str> {
        let repo = image.rsplit_once(':').map_or(image, |(r, _)| r);
        self.images
            .iter()
            .find(|i| i.rsplit_once(':').is_some_and(|(r, _)| r == repo))
            .map(String::as_str)
    }
}

/// Boots nothing; derives outcomes from the artifacts and host profile by
/// fixed rules, so the same inputs always yield the same outputs.
#[derive(Debug, Clone, Default)]
pub struct SimulatedRunner {
    pub registry: ImageRegistry,
    pub injections: Vec<FaultInjection>,
}

struct Service {
    name: String,
    image: String,
    /// (host, container) after policy remaps.
    ports: Vec<(u16, u16)>,
}

fn parse_services(compose: &str, profile: &HostProfile) -> Result<Vec<Service>, RunnerError> {
    let doc: Value = serde_yaml::from_str(compose)
        .map_err(|e| RunnerError::Deploy(format!("{COMPOSE_PATH}: {e}")))?;
    let services = doc
        .get("services")
        .and_then(Value::as_mapping)
        .ok_or_else(|| RunnerError::Deploy(format!("{COMPOSE_PATH}: no services")))?;
    let mut out = Vec::new();
    for (name, svc) in services {
        let name = name.as_str().unwrap_or_default().to_string();
        let image = svc.get("image").and_then(Value::as_str).unwrap_or_default().to_string();
        let ports = svc
            .get("ports")
            .and_then(Value::as_sequence)
            .map(|seq| {
                seq.iter()
                    .filter_map(|p| {
                        let (h, c) = p.as_str()?.split_once(':')?;
                        let h: u16 = h.parse().ok()?;
                        Some((profile.remapped(h), c.parse().ok()?))
                    })
                    .collect()
            })
            .unwrap_or_default();
        out.push(Service { name, image, ports });
    }
    Ok(out)
}

/// `runtime:package` entries that sit under a client-library marker.
fn declared_packages(manifest: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut pending = false;
    for line in manifest.lines() {
        if let Some(c) = marker_in(line) {
            pending = c.contains(LIBRARY_FIELD);
            continue;
        }
        if pending {
            if let Some(item) = line.trim_start().strip_prefix("- ") {
                out.insert(item.trim().trim_matches('"').to_string());
            }
        }
        pending = false;
    }
    out
}

fn module_of(package: &str) -> String {
    let pkg = package.split_once(':').map_or(package, |(_, p)| p);
    pkg.replace('-', "_")
}

fn pull_error(service: &str, image: &str) -> String {
    format!(
        "Error response from daemon: manifest for {image} not found: manifest unknown (service {service})"
    )
}

fn bind_error(service: &str, port: u16) -> String {
    format!(
        "Error starting userland proxy: listen tcp4 0.0.0.0:{port}: bind: address already in use (service {service})"
    )
}

fn missing_module(module: &str) -> String {
    format!("ModuleNotFoundError: No module named '{module}'")
}

fn ttl_error(table: &str, column: &str, column_type: &str) -> String {
    format!(
        "Code: 450. DB::Exception: TTL expression result column should have DateTime or Date type, \
         but has {column_type} (column `{column}` of table `{table}`). (BAD_TTL_EXPRESSION)"
    )
}

impl SimulatedRunner {
    pub fn new(injections: Vec<FaultInjection>) -> Self {
        Self {
            registry: ImageRegistry::default(),
            injections,
        }
    }

    fn injected(&self, class: FaultClass) -> impl Iterator<Item = &FaultInjection> {
        self.injections.iter().filter(move |i| i.class == class)
    }
}

impl Runner for SimulatedRunner {
    fn deploy(&mut self, artifacts: &ArtifactSet, profile: &HostProfile) -> Result<RunOutputs, RunnerError> {
        let services = parse_services(&artifacts.compose, profile)?;
        let mut out = RunOutputs::default();
        let mut stderr: Vec<String> = Vec::new();
        let mut logs: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut down: BTreeSet<String> = BTreeSet::new();
        let mut bound: BTreeSet<u16> = profile.occupied_ports.clone();

        for svc in &services {
            let forced_pull = self
                .injected(FaultClass::ImagePullFailure)
                .any(|i| i.service == svc.name);
            if forced_pull || !self.registry.contains(&svc.image) {
                stderr.push(pull_error(&svc.name, &svc.image));
                down.insert(svc.name.clone());
                continue;
            }
            let forced_port = self
                .injected(FaultClass::HostPortConflict)
                .find(|i| i.service == svc.name)
                .map(|i| {
                    i.params
                        .get("port")
                        .and_then(|p| p.parse().ok())
                        .or_else(|| svc.ports.first().map(|p| p.0))
                        .unwrap_or(0)
                });
            let clash = forced_port.or_else(|| svc.ports.iter().map(|p| p.0).find(|h| bound.contains(h)));
            if let Some(port) = clash {
                stderr.push(bind_error(&svc.name, port));
                down.insert(svc.name.clone());
                continue;
            }
            bound.extend(svc.ports.iter().map(|p| p.0));
        }

        for (name, text) in &artifacts.producer_manifests {
            if down.contains(name) {
                continue;
            }
            let Some(manifest) = artifacts.manifest(name) else {
                continue;
            };
            let declared = declared_packages(text);
            let missing = manifest
                .requires
                .iter()
                .find(|r| !declared.contains(*r) && !profile.has_package(r));
            if let Some(pkg) = missing {
                logs.entry(name.clone()).or_default().push(missing_module(&module_of(pkg)));
                down.insert(name.clone());
            }
        }
        for i in self.injected(FaultClass::LibraryMissing) {
            let module = i.params.get("module").cloned().unwrap_or_else(|| {
                artifacts
                    .manifest(&i.service)
                    .and_then(|m| m.requires.first().map(|p| module_of(p)))
                    .unwrap_or_else(|| "dds_client".to_string())
            });
            logs.entry(i.service.clone()).or_default().push(missing_module(&module));
            down.insert(i.service.clone());
        }

        for (system, sql) in &artifacts.init_scripts {
            let Some(service) = artifacts
                .services
                .iter()
                .find(|(_, s)| *s == system)
                .map(|(n, _)| n.clone())
            else {
                continue;
            };
            if down.contains(&service) {
                continue;
            }
            for u in clause_uses(sql, "TTL") {
                if u.direct && u.column.base_type() == "DateTime64" {
                    logs.entry(service.clone()).or_default().push(ttl_error(
                        &u.table,
                        &u.column.name,
                        &u.column.column_type,
                    ));
                    down.insert(service.clone());
                }
            }
        }
        for i in self.injected(FaultClass::DdlTypeConstraint) {
            let table = artifacts
                .services
                .get(&i.service)
                .and_then(|s| artifacts.init_scripts.get(s))
                .and_then(|sql| create_tables(sql).into_iter().next().map(|t| t.name))
                .unwrap_or_else(|| "events".to_string());
            logs.entry(i.service.clone())
                .or_default()
                .push(ttl_error(&table, "event_time", "DateTime64(3)"));
            down.insert(i.service.clone());
        }

        for svc in &services {
            let ok = !down.contains(&svc.name);
            out.container_states.insert(
                svc.name.clone(),
                ContainerState {
                    exit_code: if ok { 0 } else { 1 },
                    health: if ok { Health::Healthy } else { Health::Unhealthy },
                },
            );
            out.container_logs
                .insert(svc.name.clone(), logs.remove(&svc.name).unwrap_or_default().join("\n"));
        }
        out.compose_stderr = stderr.join("\n");

        let smoke = artifacts.smoke();
        out.smoke_output = match smoke {
            None => SmokeOutput {
                rows_returned: 0,
                query_error: Some("no smoke spec".into()),
                lag_events: None,
            },
            Some(s) if down.contains(&s.target.service) => SmokeOutput {
                rows_returned: 0,
                query_error: Some(format!("service {} is not running", s.target.service)),
                lag_events: None,
            },
            Some(s) => {
                let priming = f64::from(s.priming_delay_s);
                let injected = self
                    .injected(FaultClass::ConsumerLag)
                    .next()
                    .map(|i| i.params.get("lag").and_then(|l| l.parse().ok()).unwrap_or(s.max_lag_events * 10));
                let starved = s.path_capacity_eps < s.ingest_rate_eps;
                let lag = match injected {
                    Some(l) => Some(l),
                    None if starved => {
                        let backlog = ((s.ingest_rate_eps - s.path_capacity_eps) * priming) as i64;
                        Some(backlog.max(s.max_lag_events + 1))
                    }
                    None => Some(0),
                };
                let lagging = lag.is_some_and(|l| l > s.max_lag_events);
                SmokeOutput {
                    // A lagging consumer has not delivered anything yet.
                    rows_returned: if lagging { 0 } else { (s.ingest_rate_eps * priming) as i64 },
                    query_error: None,
                    lag_events: lag,
                }
            }
        };
        Ok(out)
    }

    fn teardown(&mut self) -> Result<(), RunnerError> {
        Ok(())
    }
}
