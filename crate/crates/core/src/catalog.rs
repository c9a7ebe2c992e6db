//! Environment model: scenes, items and their attributes, plus the canonical
//! textual scene profile that retrieval and reranking operate on.
//!
//! Profile grammar (UTF-8, single spaces):
//!
//! ```text
//! SCENE <scene_id> :: <summary> :: ITEMS [ <item_id> { slot=value; ... } | ... ]
//! ```
//!
//! Items are sorted by id, slots by name. Structural characters inside ids,
//! summaries, slots and values are backslash-escaped so that distinct profiles
//! never serialize to the same string.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::StateSchema;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("duplicate scene id `{0}`")]
    DuplicateScene(String),
    #[error("duplicate item id `{item_id}` in scene `{scene_id}`")]
    DuplicateItem { scene_id: String, item_id: String },
    #[error("empty {0}")]
    EmptyId(&'static str),
    #[error("environment has no scenes")]
    NoScenes,
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
}

/// A candidate item. Slot names are lowercased on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<f64>>,
    #[serde(flatten, default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Item {
    pub fn new<I, K, V>(item_id: impl Into<String>, attributes: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Item {
            item_id: item_id.into(),
            attributes: attributes
                .into_iter()
                .map(|(k, v)| (k.into().to_lowercase(), v.into()))
                .collect(),
            price: None,
            position: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn attribute(&self, slot: &str) -> Option<&str> {
        self.attributes
            .get(&slot.to_lowercase())
            .map(String::as_str)
    }

    /// Short human descriptor, e.g. "red jacket".
    pub fn descriptor(&self) -> String {
        let kind = self
            .attribute("type")
            .or_else(|| self.attribute("asset type"))
            .unwrap_or(&self.item_id);
        match self.attribute("color") {
            Some(color) => format!("{color} {kind}"),
            None => kind.to_string(),
        }
    }

    fn normalize(&mut self) {
        if self
            .attributes
            .keys()
            .any(|k| k.chars().any(char::is_uppercase))
        {
            self.attributes = std::mem::take(&mut self.attributes)
                .into_iter()
                .map(|(k, v)| (k.to_lowercase(), v))
                .collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    #[serde(default)]
    pub image_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_notes: Option<String>,
    pub items: Vec<Item>,
    #[serde(flatten, default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Scene {
    pub fn new(scene_id: impl Into<String>, items: Vec<Item>) -> Self {
        Scene {
            scene_id: scene_id.into(),
            image_ref: String::new(),
            spatial_notes: None,
            items,
            extra: BTreeMap::new(),
        }
    }

    pub fn item(&self, item_id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.item_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub scenes: Vec<Scene>,
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
}

fn default_schema_version() -> String {
    SCHEMA_VERSION.to_string()
}

impl Environment {
    /// Builds an environment, enforcing id uniqueness.
    pub fn new(mut scenes: Vec<Scene>) -> Result<Self, CatalogError> {
        if scenes.is_empty() {
            return Err(CatalogError::NoScenes);
        }
        let mut scene_ids = HashSet::new();
        for scene in &mut scenes {
            if scene.scene_id.is_empty() {
                return Err(CatalogError::EmptyId("scene_id"));
            }
            if !scene_ids.insert(scene.scene_id.clone()) {
                return Err(CatalogError::DuplicateScene(scene.scene_id.clone()));
            }
            let mut item_ids = HashSet::new();
            for item in &mut scene.items {
                if item.item_id.is_empty() {
                    return Err(CatalogError::EmptyId("item_id"));
                }
                if !item_ids.insert(item.item_id.clone()) {
                    return Err(CatalogError::DuplicateItem {
                        scene_id: scene.scene_id.clone(),
                        item_id: item.item_id.clone(),
                    });
                }
                item.normalize();
            }
        }
        Ok(Environment {
            scenes,
            schema_version: SCHEMA_VERSION.to_string(),
        })
    }

    /// Number of scenes (C).
    pub fn scene_count(&self) -> usize {
        self.scenes.len()
    }

    pub fn item_count(&self) -> usize {
        self.scenes.iter().map(|s| s.items.len()).sum()
    }

    pub fn scene(&self, scene_id: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }

    pub fn require_scene(&self, scene_id: &str) -> Result<&Scene, CatalogError> {
        self.scene(scene_id)
            .ok_or_else(|| CatalogError::UnknownScene(scene_id.to_string()))
    }

    pub fn item(&self, scene_id: &str, item_id: &str) -> Option<&Item> {
        self.scene(scene_id).and_then(|s| s.item(item_id))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment serializes")
    }
}

#[derive(Deserialize)]
struct RawEnvironment {
    scenes: Vec<Scene>,
    #[serde(default)]
    schema_version: Option<String>,
}

/// Parses an environment from JSON text. `origin` names the source in errors.
pub fn parse_environment(text: &str, origin: &str) -> Result<Environment, CatalogError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawEnvironment =
        serde_path_to_error::deserialize(de).map_err(|e| CatalogError::Parse {
            path: format!("{origin}:{}", e.path()),
            message: e.inner().to_string(),
        })?;
    let mut env = Environment::new(raw.scenes)?;
    if let Some(v) = raw.schema_version {
        env.schema_version = v;
    }
    Ok(env)
}

pub fn load_environment(source: &Path) -> Result<Environment, CatalogError> {
    let text = std::fs::read_to_string(source).map_err(|e| CatalogError::Io {
        path: source.display().to_string(),
        source: e,
    })?;
    parse_environment(&text, &source.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }

    fn push(&mut self, severity: Severity, location: String, message: String) {
        self.violations.push(Violation {
            severity,
            location,
            message,
        });
    }
}

/// Lists every violation: duplicate ids and empty scenes as errors, slot
/// names outside the schema as warnings.
pub fn validate_environment(env: &Environment, schema: &StateSchema) -> ValidationReport {
    let mut report = ValidationReport::default();
    if env.scenes.is_empty() {
        report.push(Severity::Error, "scenes".into(), "no scenes".into());
    }
    let mut scene_ids = HashSet::new();
    for scene in &env.scenes {
        let loc = format!("scene `{}`", scene.scene_id);
        if !scene_ids.insert(scene.scene_id.as_str()) {
            report.push(Severity::Error, loc.clone(), "duplicate scene id".into());
        }
        if scene.items.is_empty() {
            report.push(Severity::Error, loc.clone(), "scene has no items".into());
        }
        let mut item_ids = HashSet::new();
        for item in &scene.items {
            let iloc = format!("{loc} item `{}`", item.item_id);
            if item.item_id.is_empty() {
                report.push(Severity::Error, iloc.clone(), "empty item id".into());
            }
            if !item_ids.insert(item.item_id.as_str()) {
                report.push(Severity::Error, iloc.clone(), "duplicate item id".into());
            }
            for slot in item.attributes.keys() {
                if !schema.has_slot(slot) {
                    report.push(
                        Severity::Warning,
                        iloc.clone(),
                        format!("unknown slot `{slot}` (treated as other)"),
                    );
                }
            }
        }
    }
    report
}

/// Produces a free-text scene summary. Implemented by text backends.
pub trait Summarizer {
    fn summarize(&self, scene: &Scene) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneProfile {
    pub scene_id: String,
    pub summary: String,
    pub item_catalog: Vec<(String, BTreeMap<String, String>)>,
    pub canonical_text: String,
}

impl SceneProfile {
    /// Assembles a profile from parts; the catalog is sorted and the
    /// canonical text derived.
    pub fn from_parts(
        scene_id: impl Into<String>,
        summary: impl Into<String>,
        mut item_catalog: Vec<(String, BTreeMap<String, String>)>,
    ) -> Self {
        item_catalog.sort_by(|a, b| a.0.cmp(&b.0));
        let mut profile = SceneProfile {
            scene_id: scene_id.into(),
            summary: summary.into(),
            item_catalog,
            canonical_text: String::new(),
        };
        profile.canonical_text = canonical_profile_text(&profile);
        profile
    }
}

impl fmt::Display for SceneProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text)
    }
}

pub fn rule_based_summary(scene: &Scene) -> String {
    let mut kinds: Vec<String> = Vec::new();
    for item in &scene.items {
        let d = item.descriptor();
        if !kinds.contains(&d) {
            kinds.push(d);
        }
    }
    let mut summary = format!(
        "Scene with {} items: {}",
        scene.items.len(),
        kinds.join(", ")
    );
    if let Some(notes) = scene
        .spatial_notes
        .as_deref()
        .filter(|n| !n.trim().is_empty())
    {
        summary.push_str(". ");
        summary.push_str(notes.trim());
    }
    summary
}

/// Profile plus any warnings raised while building it.
#[derive(Debug, Clone)]
pub struct BuiltProfile {
    pub profile: SceneProfile,
    pub warnings: Vec<String>,
}

pub fn build_profile(scene: &Scene, summarizer: Option<&dyn Summarizer>) -> BuiltProfile {
    let mut warnings = Vec::new();
    let summary = match summarizer.map(|s| s.summarize(scene)) {
        Some(Ok(text)) if !text.trim().is_empty() => text,
        Some(Ok(_)) => {
            let msg = format!("summarizer returned empty text for `{}`", scene.scene_id);
            log::warn!("{msg}");
            warnings.push(msg);
            rule_based_summary(scene)
        }
        Some(Err(e)) => {
            let msg = format!("summarizer failed for `{}`: {e}", scene.scene_id);
            log::warn!("{msg}");
            warnings.push(msg);
            rule_based_summary(scene)
        }
        None => rule_based_summary(scene),
    };
    let catalog = scene
        .items
        .iter()
        .map(|i| {
            let attrs = i
                .attributes
                .iter()
                .map(|(k, v)| (k.to_lowercase(), v.clone()))
                .collect();
            (i.item_id.clone(), attrs)
        })
        .collect();
    BuiltProfile {
        profile: SceneProfile::from_parts(scene.scene_id.clone(), summary, catalog),
        warnings,
    }
}

/// Profiles for every scene, keyed by scene id.
pub fn build_profiles(
    env: &Environment,
    summarizer: Option<&dyn Summarizer>,
) -> BTreeMap<String, SceneProfile> {
    env.scenes
        .iter()
        .map(|s| (s.scene_id.clone(), build_profile(s, summarizer).profile))
        .collect()
}

fn escape_into(out: &mut String, raw: &str) {
    for ch in raw.chars() {
        match ch {
            '\\' | ':' | ';' | '|' | '{' | '}' | '[' | ']' | '=' => {
                out.push('\\');
                out.push(ch);
            }
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(ch),
        }
    }
}

/// Deterministic serialization under the profile grammar. Independent of the
/// order of `item_catalog`.
pub fn canonical_profile_text(profile: &SceneProfile) -> String {
    let mut items: Vec<&(String, BTreeMap<String, String>)> = profile.item_catalog.iter().collect();
    items.sort_by(|a, b| a.0.cmp(&b.0));

    let mut out = String::from("SCENE ");
    escape_into(&mut out, &profile.scene_id);
    out.push_str(" :: ");
    escape_into(&mut out, &profile.summary);
    out.push_str(" :: ITEMS [");
    for (n, (item_id, attrs)) in items.iter().enumerate() {
        out.push_str(if n == 0 { " " } else { " | " });
        escape_into(&mut out, item_id);
        out.push_str(" {");
        let sorted: BTreeSet<(String, &String)> =
            attrs.iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        for (m, (slot, value)) in sorted.iter().enumerate() {
            out.push_str(if m == 0 { " " } else { "; " });
            escape_into(&mut out, slot);
            out.push('=');
            escape_into(&mut out, value);
        }
        out.push_str(" }");
    }
    out.push_str(" ]");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(id: &str, items: Vec<Item>) -> Scene {
        Scene::new(id, items)
    }

    #[test]
    fn counts_scenes_and_items() {
        let text = r#"{"scenes":[{"scene_id":"s1","image_ref":"img/1.png","items":[
            {"item_id":"i1","attributes":{"color":"red","type":"jacket"}},
            {"item_id":"i2","attributes":{"color":"blue","type":"hat"},"price":12.5}]}]}"#;
        let env = parse_environment(text, "inline").unwrap();
        assert_eq!(env.scene_count(), 1);
        assert_eq!(env.scenes[0].items.len(), 2);
        assert_eq!(env.item_count(), 2);
    }

    #[test]
    fn duplicate_scene_is_rejected() {
        let text = r#"{"scenes":[{"scene_id":"s1","items":[]},{"scene_id":"s1","items":[]}]}"#;
        assert!(matches!(
            parse_environment(text, "inline"),
            Err(CatalogError::DuplicateScene(id)) if id == "s1"
        ));
    }

    #[test]
    fn duplicate_item_is_rejected() {
        let env = Environment::new(vec![scene(
            "s",
            vec![
                Item::new("i", [("color", "red")]),
                Item::new("i", [("color", "blue")]),
            ],
        )]);
        assert!(matches!(env, Err(CatalogError::DuplicateItem { .. })));
    }

    #[test]
    fn malformed_record_names_the_path() {
        let text = r#"{"scenes":[{"scene_id":"s1","items":[{"item_id":7}]}]}"#;
        match parse_environment(text, "env.json") {
            Err(CatalogError::Parse { path, .. }) => {
                assert!(path.contains("scenes[0].items[0].item_id"), "{path}")
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let text = r#"{"scenes":[{"scene_id":"s1","lighting":"dim","items":[
            {"item_id":"i1","attributes":{"Color":"red"},"sku":"A-1"}]}]}"#;
        let env = parse_environment(text, "inline").unwrap();
        assert_eq!(env.scenes[0].items[0].attribute("color"), Some("red"));
        let again = parse_environment(&env.to_json(), "again").unwrap();
        assert_eq!(env, again);
        assert_eq!(again.scenes[0].extra["lighting"], "dim");
    }

    #[test]
    fn profile_catalog_is_sorted() {
        let s = scene(
            "s",
            vec![
                Item::new("i2", [("type", "hat")]),
                Item::new("i1", [("type", "shirt")]),
            ],
        );
        let p = build_profile(&s, None).profile;
        let ids: Vec<_> = p.item_catalog.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["i1", "i2"]);
    }

    #[test]
    fn rule_based_summary_mentions_type_and_color() {
        let s = scene(
            "s",
            vec![Item::new("i1", [("type", "jacket"), ("color", "red")])],
        );
        let p = build_profile(&s, None).profile;
        assert!(p.summary.contains("jacket"));
        assert!(p.summary.contains("red"));
        assert_eq!(p.summary, "Scene with 1 items: red jacket");
    }

    struct Failing;
    impl Summarizer for Failing {
        fn summarize(&self, _: &Scene) -> Result<String, String> {
            Err("offline".into())
        }
    }

    struct Fixed;
    impl Summarizer for Fixed {
        fn summarize(&self, _: &Scene) -> Result<String, String> {
            Ok("a rack by the window".into())
        }
    }

    #[test]
    fn summarizer_failure_falls_back_with_warning() {
        let s = scene("s", vec![Item::new("i1", [("type", "hat")])]);
        let built = build_profile(&s, Some(&Failing));
        assert_eq!(built.warnings.len(), 1);
        assert_eq!(built.profile.summary, "Scene with 1 items: hat");
        let built = build_profile(&s, Some(&Fixed));
        assert!(built.warnings.is_empty());
        assert_eq!(built.profile.summary, "a rack by the window");
    }

    #[test]
    fn canonical_text_golden() {
        let s = Scene {
            spatial_notes: Some("hats hang on the left wall".into()),
            ..scene(
                "store-1",
                vec![
                    Item::new(
                        "i2",
                        [("type", "hat"), ("color", "blue"), ("Brand", "Acme")],
                    ),
                    Item::new(
                        "i1",
                        [("type", "jacket"), ("color", "red"), ("price", "<50")],
                    ),
                ],
            )
        };
        let p = build_profile(&s, None).profile;
        assert_eq!(
            p.canonical_text,
            "SCENE store-1 :: Scene with 2 items\\: blue hat, red jacket. hats hang on the left wall \
             :: ITEMS [ i1 { color=red; price=<50; type=jacket } | i2 { brand=Acme; color=blue; type=hat } ]"
        );
    }

    #[test]
    fn canonical_text_ignores_catalog_order() {
        let a = SceneProfile::from_parts(
            "s",
            "x",
            vec![
                ("b".into(), BTreeMap::from([("color".into(), "red".into())])),
                ("a".into(), BTreeMap::new()),
            ],
        );
        let mut b = a.clone();
        b.item_catalog.reverse();
        assert_eq!(canonical_profile_text(&a), canonical_profile_text(&b));
        assert_eq!(
            a.canonical_text,
            "SCENE s :: x :: ITEMS [ a { } | b { color=red } ]"
        );
    }

    #[test]
    fn validation_flags_unknown_slot_and_empty_scene() {
        let schema = StateSchema::default();
        let ok =
            Environment::new(vec![scene("s", vec![Item::new("i", [("color", "red")])])]).unwrap();
        assert!(validate_environment(&ok, &schema).is_empty());

        let env = Environment::new(vec![
            scene("s", vec![Item::new("i", [("foo", "bar")])]),
            scene("t", vec![]),
        ])
        .unwrap();
        let report = validate_environment(&env, &schema);
        assert_eq!(report.warnings().count(), 1);
        assert_eq!(report.errors().count(), 1);
    }
}
