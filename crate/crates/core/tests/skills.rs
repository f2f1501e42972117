mod oracles;

use std::fs;

use serde_json::json;
use serde_yaml::{Mapping, Value};

use dds_core::clock::FixedClock;
use dds_core::operator::OperatorTypeRegistry;
use dds_core::skill::{apply_patch, load_catalog, write_lock, Ablation, LockFile, PatchOp, Provenance, SkillPatch};
use oracles::*;

fn image_patch(image: &str, signal: &str) -> SkillPatch {
    SkillPatch {
        target: "kafka".into(),
        path: "operational.recommended_images".parse().unwrap(),
        op: PatchOp::AddEntry,
        value: json!(image),
        provenance: Provenance {
            signal_id: signal.into(),
            note: String::new(),
        },
    }
}

fn reversed(v: Value) -> Value {
    match v {
        Value::Mapping(m) => {
            let pairs: Vec<(Value, Value)> = m.into_iter().collect();
            let mut out = Mapping::new();
            for (k, v) in pairs.into_iter().rev() {
                out.insert(k, reversed(v));
            }
            Value::Mapping(out)
        }
        Value::Sequence(s) => Value::Sequence(s.into_iter().map(reversed).collect()),
        other => other,
    }
}

#[test]
fn lock_hash_ignores_key_order() {
    let original = catalog("skills");
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixtures().join("skills")).unwrap() {
        let path = entry.unwrap().path();
        let doc: Value = serde_yaml::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let shuffled = serde_yaml::to_string(&reversed(doc)).unwrap();
        fs::write(dir.path().join(path.file_name().unwrap()), shuffled).unwrap();
    }
    let shuffled = load_catalog(dir.path(), &OperatorTypeRegistry::default()).unwrap();
    assert_eq!(shuffled.lock_hash(), original.lock_hash());
    assert_eq!(write_lock(&shuffled), write_lock(&original));
}

#[test]
fn lock_hash_tracks_content() {
    let full = catalog("skills");
    let degraded = catalog("degraded");
    assert_ne!(full.lock_hash(), degraded.lock_hash());
    let lock = LockFile::from_yaml(&write_lock(&full)).unwrap();
    let kafka = lock.entry("kafka").unwrap();
    let degraded_lock = LockFile::from_yaml(&write_lock(&degraded)).unwrap();
    assert_ne!(degraded_lock.entry("kafka").unwrap(), kafka);
    // Redis is identical in both sets.
    assert_eq!(degraded_lock.entry("redis"), lock.entry("redis"));
}

#[test]
fn reapplying_a_patch_changes_nothing() {
    let clock = FixedClock::epoch();
    let base = catalog("degraded");
    let p = image_patch("apache/kafka:3.7.0", "c1-s1");
    let once = apply_patch(&base, &p, &clock).unwrap();
    let twice = apply_patch(&once, &p, &clock).unwrap();
    assert_eq!(once.lock_hash(), twice.lock_hash());
    assert_eq!(once.lineage(), twice.lineage());
    assert_eq!(once.lineage().len(), 1);
    assert_eq!(
        once.resolve("kafka.operational.recommended_images"),
        Some(json!(["apache/kafka:3.7.0"]))
    );

    // Same content under another signal is the same patch.
    let again = image_patch("apache/kafka:3.7.0", "c2-s4");
    assert_eq!(again.id(), p.id());
    assert_eq!(apply_patch(&once, &again, &clock).unwrap().lineage().len(), 1);

    let lineage = &once.lineage()[0];
    assert_eq!(lineage.skill, "kafka");
    assert_eq!(lineage.field_path, "operational.recommended_images");
    assert_eq!(lineage.signal_id, "c1-s1");
    assert_eq!(lineage.patch_id, p.id());
}

#[test]
fn remove_undoes_add() {
    let clock = FixedClock::epoch();
    let base = catalog("degraded");
    let added = apply_patch(&base, &image_patch("apache/kafka:3.7.0", "s"), &clock).unwrap();
    let mut undo = image_patch("apache/kafka:3.7.0", "s");
    undo.op = PatchOp::RemoveEntry;
    let removed = apply_patch(&added, &undo, &clock).unwrap();
    assert_eq!(removed.lock_hash(), base.lock_hash());
    assert_eq!(removed.lineage().len(), 2);
}

#[test]
fn ill_typed_patches_are_refused() {
    let clock = FixedClock::epoch();
    let base = catalog("skills");
    let mut p = image_patch("x", "s");
    p.target = "cassandra".into();
    assert_eq!(apply_patch(&base, &p, &clock).unwrap_err().code(), "UNKNOWN_SKILL");

    let mut p = image_patch("x", "s");
    p.path = "capabilities.monthly_usd_estimate".parse().unwrap();
    assert_eq!(apply_patch(&base, &p, &clock).unwrap_err().code(), "TYPE_MISMATCH");

    let mut p = image_patch("x", "s");
    p.path = "nowhere.deeper".parse().unwrap();
    assert_eq!(apply_patch(&base, &p, &clock).unwrap_err().code(), "UNRESOLVABLE_PATH");

    let mut p = image_patch("other", "s");
    p.path = "system".parse().unwrap();
    p.op = PatchOp::SetValue;
    assert_eq!(apply_patch(&base, &p, &clock).unwrap_err().code(), "TYPE_MISMATCH");
}

#[test]
fn patches_round_trip_through_yaml() {
    let p = image_patch("apache/kafka:3.7.0", "c1-s1");
    let back = SkillPatch::from_yaml(&p.to_yaml()).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.field(), "kafka.operational.recommended_images");
}

#[test]
fn ablations_strip_in_order() {
    let full = catalog("skills");
    let ops = full.ablate(Ablation::OpsStripped);
    let minimal = full.ablate(Ablation::Minimal);
    for s in ops.skills() {
        assert!(s.operational.recommended_images.is_empty() && s.anti_patterns.is_empty());
        assert_eq!(s.compositions, full.get(&s.system).unwrap().compositions);
    }
    assert!(minimal.skills().all(|s| s.compositions.is_empty()));
    assert_eq!(full.ablate(Ablation::Full), full);
}
