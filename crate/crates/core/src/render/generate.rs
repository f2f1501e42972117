use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::templates::{fill, table_for_role, SystemTemplates};
use super::{
    ArtifactKind, ArtifactSet, DeploymentBrief, ProducerTarget, RenderError,
    SmokeSpec, SmokeTarget, MARKER,
};
use crate::intent::IntentSpec;
use crate::operator::{aggregate_slo, OperatorTypeRegistry};
use crate::planner::{ConfigDecision, PhysicalPlan, PRODUCER, TTL_KEY};
use crate::skill::SkillCatalog;

/// Simulated seconds between boot and the smoke query.
pub const PRIMING_DELAY_S: u32 = 30;
pub const MAX_LAG_EVENTS: i64 = 1000;

fn marker(indent: usize, citation: &str) -> String {
    format!("{:indent$}{MARKER}{citation}\n", "")
}

fn sql_marker(citation: &str) -> String {
    format!("-- {MARKER}{citation}\n")
}

/// Value line, preceded by a marker when the decision is cited.
fn cited_line(indent: usize, d: Option<&ConfigDecision>, line: &str) -> String {
    let mut out = String::new();
    if let Some(d) = d.filter(|d| d.is_cited()) {
        out.push_str(&marker(indent, &d.citation));
    }
    let _ = writeln!(out, "{:indent$}{line}", "");
    out
}

fn trim_nl(mut s: String) -> String {
    while s.ends_with('\n') {
        s.pop();
    }
    s
}

pub fn render(
    brief: &DeploymentBrief,
    plan: &PhysicalPlan,
    catalog: &SkillCatalog,
    intent: &IntentSpec,
) -> Result<ArtifactSet, RenderError> {
    let templates = SystemTemplates::default();
    let lattice = OperatorTypeRegistry::default().lattice().clone();
    let mut set = ArtifactSet::default();

    let service_of = |node: &str| -> Option<String> {
        let sys = plan.system_of(node)?;
        if sys == PRODUCER {
            Some(node.to_string())
        } else {
            plan.owner_of(sys).map(str::to_string)
        }
    };

    // Init scripts first: the compose descriptor mounts them.
    for system in plan.systems() {
        let mut sql = String::new();
        for n in &plan.dag.nodes {
            if plan.system_of(&n.id) != Some(system) {
                continue;
            }
            let Some(t) = templates.init_template(system, &n.role) else {
                continue;
            };
            let ttl = plan.bindings[&n.id].decision(TTL_KEY);
            let ttl_text = match ttl {
                Some(d) => {
                    let mut s = String::new();
                    if d.is_cited() {
                        s.push_str(&sql_marker(&d.citation));
                    }
                    s.push_str(&format!("TTL {}", d.value.as_str().unwrap_or_default()));
                    s
                }
                None => String::new(),
            };
            let holes = BTreeMap::from([
                ("table", table_for_role(&n.role, intent, &lattice)),
                ("ttl", ttl_text),
            ]);
            sql.push_str(&fill(t, &holes).map_err(|h| unfilled(system, &n.role, h))?);
        }
        // Connectors realized inside the consuming store.
        let mut done = BTreeSet::new();
        for c in plan.connectors.values() {
            if plan.system_of(&c.to) != Some(system) {
                continue;
            }
            let Some(t) = templates.connector_template(system, &c.connector) else {
                continue;
            };
            if !done.insert((c.from.clone(), c.connector.clone())) {
                continue;
            }
            let role = &plan.dag.node(&c.to).map(|n| n.role.clone()).unwrap_or_default();
            let broker_sys = plan.system_of(&c.from).unwrap_or_default();
            let broker = format!(
                "{}:{}",
                service_of(&c.from).unwrap_or_default(),
                templates.ports(broker_sys).first().copied().unwrap_or(9092)
            );
            let table = table_for_role(role, intent, &lattice);
            let holes = BTreeMap::from([
                ("table", table.clone()),
                ("broker", broker),
                ("topic", table),
            ]);
            if !sql.is_empty() {
                sql.push('\n');
            }
            if let Some(cit) = &c.citation {
                sql.push_str(&sql_marker(cit));
            }
            sql.push_str(&fill(t, &holes).map_err(|h| unfilled(system, &c.connector, h))?);
        }
        if !sql.is_empty() {
            set.init_scripts.insert(system.to_string(), sql);
        }
    }

    // Compose descriptor.
    let mut compose = String::from("# Generated deployment; values under a `# skill:` line come from that skill field.\nservices:\n");
    for system in plan.systems() {
        let owner = plan.owner_of(system).expect("bound system has an owner");
        let node = plan.dag.node(owner).expect("owner node");
        let Some(t) = templates.service_template(system) else {
            return Err(RenderError::TemplateGap {
                system: system.to_string(),
                role: node.role.clone(),
            });
        };
        let binding = &plan.bindings[owner];
        let image = binding
            .decision("image")
            .and_then(|d| d.value.as_str().map(str::to_string))
            .unwrap_or_else(|| templates.default_image(system));
        let image_line = cited_line(4, binding.decision("image"), &format!("image: \"{image}\""));

        let mut ports = String::new();
        for &p in templates.ports(system) {
            let d = binding.decision(&format!("host_port.{p}"));
            let host = d.and_then(|d| d.value.as_u64()).unwrap_or(p as u64);
            if ports.is_empty() {
                ports.push_str("    ports:\n");
            }
            ports.push_str(&cited_line(6, d, &format!("- \"{host}:{p}\"")));
        }

        let volumes = match (set.init_scripts.contains_key(system), templates.get(system)) {
            (true, Some(st)) => {
                let mount = st.init_mount.as_deref().unwrap_or("/docker-entrypoint-initdb.d");
                format!("    volumes:\n      - ./init/{system}.sql:{mount}/{system}.sql:ro\n")
            }
            _ => String::new(),
        };

        let upstream = upstream_services(plan, system, &service_of);
        let depends_on = depends_block(&upstream);

        let mut labels = format!("    labels:\n      dds.system: \"{system}\"\n");
        let mut seen = BTreeSet::new();
        for c in plan.connectors.values() {
            if plan.system_of(&c.to) != Some(system) || c.citation.is_none() {
                continue;
            }
            if templates.connector_template(system, &c.connector).is_some() {
                continue;
            }
            let from = service_of(&c.from).unwrap_or_default();
            if !seen.insert(from.clone()) {
                continue;
            }
            labels.push_str(&marker(6, c.citation.as_deref().unwrap_or_default()));
            let _ = writeln!(labels, "      dds.connector.{from}: \"{}\"", c.connector);
        }

        let holes = BTreeMap::from([
            ("service", owner.to_string()),
            ("image", trim_nl(image_line)),
            ("ports", trim_nl(ports)),
            ("volumes", trim_nl(volumes)),
            ("depends_on", trim_nl(depends_on)),
            ("labels", trim_nl(labels)),
        ]);
        compose.push_str(&fill(t, &holes).map_err(|h| unfilled(system, &node.role, h))?);
        set.services.insert(owner.to_string(), system.to_string());
    }

    // Producers: one per INGEST node.
    for n in plan.dag.ingest_nodes() {
        let binding = &plan.bindings[&n.id];
        let mut targets = Vec::new();
        let mut requires = BTreeSet::new();
        for succ in plan.dag.successors(&n.id) {
            let Some(sys) = plan.system_of(succ) else { continue };
            let service = service_of(succ).unwrap_or_default();
            if targets.iter().any(|t: &ProducerTarget| t.service == service) {
                continue;
            }
            for pkg in templates.producer.requires.get(sys).into_iter().flatten() {
                requires.insert(format!("{}:{pkg}", templates.producer.runtime));
            }
            let role = plan.dag.node(succ).map(|x| x.role.clone()).unwrap_or_default();
            targets.push(ProducerTarget {
                system: sys.to_string(),
                service,
                topic: table_for_role(&role, intent, &lattice),
            });
        }
        set.producer_manifests
            .insert(n.id.clone(), producer_manifest(&n.id, &templates, &targets, &requires, &binding.decisions, intent));

        let mut svc = format!("  {}:\n    image: \"{}\"\n", n.id, templates.producer.image);
        let _ = writeln!(
            svc,
            "    command: [\"python\", \"-m\", \"dds_producer\", \"/producers/{}.yaml\"]",
            n.id
        );
        svc.push_str("    volumes:\n      - ./producers:/producers:ro\n");
        let ups: Vec<String> = targets.iter().map(|t| t.service.clone()).collect();
        svc.push_str(&depends_block(&ups));
        let _ = writeln!(svc, "    labels:\n      dds.system: \"{PRODUCER}\"");
        compose.push_str(&svc);
        set.services.insert(n.id.clone(), PRODUCER.to_string());
    }
    set.compose = compose;

    set.smoke_spec = smoke_spec(plan, intent, &templates, &lattice, &service_of);

    // Citations: every marker must resolve and the set must match the brief.
    let inline = set.inline_citations();
    for c in &inline {
        if catalog.resolve(&c.citation).is_none() {
            return Err(RenderError::DanglingCitation(c.citation.clone()));
        }
    }
    let found: BTreeSet<String> = inline.iter().map(|c| c.citation.clone()).collect();
    if found != brief.citations_required {
        return Err(RenderError::CitationMismatch {
            missing: brief.citations_required.difference(&found).cloned().collect(),
            unexpected: found.difference(&brief.citations_required).cloned().collect(),
        });
    }
    set.citation_index = inline;

    debug_assert!(brief
        .artifacts_to_generate
        .iter()
        .all(|a| a.kind == ArtifactKind::Compose || set.text_of(&a.path).is_some()));
    Ok(set)
}

fn unfilled(system: &str, key: &str, holes: Vec<String>) -> RenderError {
    RenderError::UnfilledHoles {
        template: format!("{system}/{key}"),
        holes,
    }
}

fn upstream_services(
    plan: &PhysicalPlan,
    system: &str,
    service_of: &impl Fn(&str) -> Option<String>,
) -> Vec<String> {
    let mut out = Vec::new();
    for n in &plan.dag.nodes {
        if plan.system_of(&n.id) != Some(system) {
            continue;
        }
        for p in plan.dag.predecessors(&n.id) {
            let Some(ps) = plan.system_of(p) else { continue };
            if ps == system || ps == PRODUCER {
                continue;
            }
            if let Some(svc) = service_of(p) {
                if !out.contains(&svc) {
                    out.push(svc);
                }
            }
        }
    }
    out
}

fn depends_block(services: &[String]) -> String {
    if services.is_empty() {
        return String::new();
    }
    let mut s = String::from("    depends_on:\n");
    for svc in services {
        let _ = writeln!(s, "      {svc}:\n        condition: service_healthy");
    }
    s
}

fn producer_manifest(
    name: &str,
    templates: &SystemTemplates,
    targets: &[ProducerTarget],
    requires: &BTreeSet<String>,
    decisions: &[ConfigDecision],
    intent: &IntentSpec,
) -> String {
    let p = &templates.producer;
    let mut s = String::new();
    let _ = writeln!(s, "name: {name}");
    let _ = writeln!(s, "runtime: {}", p.runtime);
    let _ = writeln!(s, "image: \"{}\"", p.image);
    let _ = writeln!(s, "template: {}", p.template);
    s.push_str("targets:\n");
    for t in targets {
        let _ = writeln!(
            s,
            "  - system: {}\n    service: {}\n    topic: {}",
            t.system, t.service, t.topic
        );
    }
    let _ = writeln!(s, "rate_eps: {}", intent.ingest_rate());
    if requires.is_empty() {
        s.push_str("requires: []\n");
    } else {
        s.push_str("requires:\n");
        for r in requires {
            let _ = writeln!(s, "  - \"{r}\"");
        }
    }
    let libs: Vec<&ConfigDecision> = decisions
        .iter()
        .filter(|d| d.key.starts_with("client_library."))
        .collect();
    if libs.is_empty() {
        s.push_str("packages: []\n");
    } else {
        s.push_str("packages:\n");
        for d in libs {
            s.push_str(&cited_line(2, Some(d), &format!("- \"{}\"", d.value.as_str().unwrap_or_default())));
        }
    }
    s
}

fn smoke_spec(
    plan: &PhysicalPlan,
    intent: &IntentSpec,
    templates: &SystemTemplates,
    lattice: &crate::consistency::ConsistencyLattice,
    service_of: &impl Fn(&str) -> Option<String>,
) -> String {
    let target = plan
        .dag
        .serving_nodes()
        .find_map(|n| {
            let sys = plan.system_of(&n.id)?;
            let q = templates.get(sys)?.smoke_query.as_deref()?;
            Some((n, sys, q))
        })
        .or_else(|| {
            plan.dag.nodes.iter().find_map(|n| {
                let sys = plan.system_of(&n.id)?;
                let q = templates.get(sys)?.smoke_query.as_deref()?;
                Some((n, sys, q))
            })
        });
    let (service, system, query) = match target {
        Some((n, sys, q)) => {
            let table = table_for_role(&n.role, intent, lattice);
            let query = fill(q, &BTreeMap::from([("table", table)])).unwrap_or_default();
            (service_of(&n.id).unwrap_or_default(), sys.to_string(), query)
        }
        None => (String::new(), String::new(), String::new()),
    };
    let mut capacity = f64::INFINITY;
    for i in plan.dag.ingest_nodes() {
        for t in plan.dag.serving_nodes() {
            for p in aggregate_slo(&plan.dag, &i.id, &t.id, lattice).unwrap_or_default() {
                capacity = capacity.min(p.min_throughput_eps);
            }
        }
    }
    if capacity.is_infinite() {
        capacity = 0.0;
    }
    let spec = SmokeSpec {
        target: SmokeTarget { service, system },
        query,
        min_rows: 1,
        priming_delay_s: PRIMING_DELAY_S,
        ingest_rate_eps: intent.ingest_rate() as f64,
        path_capacity_eps: capacity,
        max_lag_events: MAX_LAG_EVENTS,
    };
    serde_yaml::to_string(&spec).expect("smoke spec serializes")
}
