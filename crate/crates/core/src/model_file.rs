//! JSON model files.
//!
//! Layout: top-level fields on their own lines and one tree per line, so
//! files stay diffable without becoming enormous.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::FeatureScales;
use crate::forest::{DecisionForest, DecisionTree, NodeRecord};
use crate::pipeline::{Model, PipelineConfig};
use crate::quantize::ChromaPalette;

pub const FORMAT_TAG: &str = "CFM";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    #[allow(dead_code)]
    format: String,
    #[allow(dead_code)]
    version: u64,
    config: PipelineConfig,
    palette: Vec<[f64; 2]>,
    feature_scales: FeatureScales,
    trees: Vec<Vec<NodeRecord>>,
}

fn json<T: serde::Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("model components serialize to JSON")
}

pub fn model_to_string(model: &Model) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "\"format\": {},", json(FORMAT_TAG));
    let _ = writeln!(s, "\"version\": {FORMAT_VERSION},");
    let _ = writeln!(s, "\"config\": {},", json(&model.config));
    let _ = writeln!(s, "\"palette\": {},", json(model.palette.centers()));
    let _ = writeln!(s, "\"feature_scales\": {},", json(&model.feature_scales));
    s.push_str("\"trees\": [\n");
    let trees = model.forest.trees();
    for (i, t) in trees.iter().enumerate() {
        s.push_str(&json(&t.to_records()));
        s.push_str(if i + 1 < trees.len() { ",\n" } else { "\n" });
    }
    s.push_str("]\n}\n");
    s
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let header = value
        .as_object()
        .ok_or_else(|| Error::ModelFormat("top level is not an object".into()))?;
    match header.get("format").and_then(Value::as_str) {
        Some(FORMAT_TAG) => {}
        Some(other) => {
            return Err(Error::ModelFormat(format!(
                "format is '{other}', expected '{FORMAT_TAG}'"
            )))
        }
        None => return Err(Error::ModelFormat("missing field 'format'".into())),
    }
    let version = header
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::ModelFormat("missing or non-integer field 'version'".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    // Re-parse from text so errors keep their line and column.
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    doc.config
        .validate()
        .map_err(|e| Error::ModelFormat(format!("field 'config': {e}")))?;
    let palette = ChromaPalette::new(doc.palette)
        .map_err(|e| Error::ModelFormat(format!("field 'palette': {e}")))?;
    let k = palette.k();
    let trees = doc
        .trees
        .iter()
        .enumerate()
        .map(|(i, r)| {
            DecisionTree::from_records(r, k)
                .map_err(|e| Error::ModelFormat(format!("tree {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let forest = DecisionForest::from_trees(trees, k, doc.config.forest_config())
        .map_err(|e| Error::ModelFormat(format!("field 'trees': {e}")))?;
    Model::new(doc.config, palette, doc.feature_scales, forest)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_string(model)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_str(&text).map_err(|e| match e {
        Error::ModelFormat(m) => Error::ModelFormat(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestConfig;

    fn tiny_model() -> Model {
        let cfg = PipelineConfig {
            trees: 2,
            clusters: 2,
            ..PipelineConfig::default()
        };
        let t1 = DecisionTree::from_records(
            &[
                NodeRecord::Split {
                    n: 3,
                    tau: 0.1 + 0.2,
                },
                NodeRecord::Leaf {
                    dist: vec![1.0, 0.0],
                },
                NodeRecord::Leaf {
                    dist: vec![1.0 / 3.0, 2.0 / 3.0],
                },
            ],
            2,
        )
        .unwrap();
        let t2 = DecisionTree::leaf(vec![0.5, 0.5]);
        let forest = DecisionForest::from_trees(
            vec![t1, t2],
            2,
            ForestConfig {
                trees: 2,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        Model::new(
            cfg,
            ChromaPalette::new(vec![[12.345678901234567, -3.0], [0.0, 1e-300]]).unwrap(),
            FeatureScales {
                gabor: 0.123,
                sift: 7.0,
            },
            forest,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = tiny_model();
        let text = model_to_string(&m);
        assert_eq!(model_from_str(&text).unwrap(), m);
        assert_eq!(model_to_string(&model_from_str(&text).unwrap()), text);
        // Header lines plus one line per tree.
        assert_eq!(text.lines().count(), 11);
    }

    #[test]
    fn version_and_format_checks() {
        let text = model_to_string(&tiny_model());
        let v2 = text.replace("\"version\": 1,", "\"version\": 2,");
        assert!(matches!(
            model_from_str(&v2),
            Err(Error::UnsupportedVersion(2))
        ));
        let other = text.replace("\"CFM\"", "\"XYZ\"");
        assert!(matches!(model_from_str(&other), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let text = model_to_string(&tiny_model());
        let cut = &text[..text.len() / 2];
        match model_from_str(cut) {
            Err(Error::ModelFormat(m)) => assert!(m.contains("line"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_trees_are_rejected() {
        let text = model_to_string(&tiny_model());
        let bad = text.replace(
            "{\"type\":\"leaf\",\"dist\":[0.5,0.5]}",
            "{\"type\":\"leaf\",\"dist\":[0.5]}",
        );
        assert_ne!(bad, text);
        match model_from_str(&bad) {
            Err(Error::ModelFormat(m)) => assert!(m.starts_with("tree 1"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&tiny_model(), &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), tiny_model());
        assert!(load_model(dir.path().join("missing.json"))
            .unwrap_err()
            .is_io());
    }
}
