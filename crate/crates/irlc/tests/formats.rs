use irlc::config::{build_instance, InstanceConfig, InstanceSource, LoadedConfig};
use irlc::format::*;
use irlc::CliError;
use irlc_core::exploration::{explore_reward_free_tabular, ExploreConfig};
use irlc_core::instances::{random_instance, RandomStructure};
use irlc_core::mdp::Dims;
use irlc_core::sampler::ForwardSampler;
use std::path::Path;

#[test]
fn random_linear_instance_round_trips() {
    let r = random_instance(4, 2, 3, RandomStructure::Linear { dim: 2 }, 3).unwrap();
    let mut inst = Instance::new(r.mdp);
    inst.features = r.spec.as_ref().map(|s| s.features().clone());
    inst.spec = r.spec;
    inst.policies = vec![("expert".into(), r.expert)];
    let text = serde_json::to_string(&inst.to_document()).unwrap();
    let back = Instance::from_document(serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back, inst);
}

#[test]
fn tree_instance_round_trips_with_provenance() {
    let c = InstanceConfig {
        source: InstanceSource::Tree,
        horizon: 7,
        hidden: Some([2, 1, 0]),
        ..InstanceConfig::default()
    };
    let inst = build_instance(&c, Path::new("."), 0).unwrap();
    let doc = inst.to_document();
    assert_eq!(doc.provenance.as_ref().unwrap().generator, "tree");
    assert_eq!(Instance::from_document(doc).unwrap(), inst);
}

#[test]
fn bad_probability_row_is_rejected() {
    let r = random_instance(2, 2, 1, RandomStructure::Tabular, 1).unwrap();
    let mut doc = Instance::new(r.mdp).to_document();
    doc.p[0][1][0] = vec![0.7, 0.7];
    let err = Instance::from_document(doc).unwrap_err();
    assert!(matches!(err, CliError::Core(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn wrong_shape_and_version_are_rejected() {
    let r = random_instance(2, 2, 1, RandomStructure::Tabular, 1).unwrap();
    let mut doc = Instance::new(r.mdp).to_document();
    doc.p[0].pop();
    assert!(matches!(
        Instance::from_document(doc.clone()),
        Err(CliError::Format(_))
    ));
    doc.version = 2;
    let msg = Instance::from_document(doc).unwrap_err().to_string();
    assert!(msg.contains("version"));
}

#[test]
fn reward_documents_parse_both_forms() {
    let text = r#"{"version":1,"S":1,"A":2,"H":1,"d0":[1.0],"p":[[[[1.0],[1.0]]]],
        "rewards":{"dense":[[[0.5,-0.5]]],"lin":{"theta":[[1.0]]}},
        "features":{"d":1,"phi":[[1.0],[0.0]]}}"#;
    let inst = Instance::from_document(serde_json::from_str(text).unwrap()).unwrap();
    assert_eq!(inst.rewards.len(), 2);
    assert!(inst.features.is_some() && inst.spec.is_none());
}

#[test]
fn jsonl_errors_carry_line_numbers() {
    let dims = Dims::new(2, 2, 2).unwrap();
    let text = "{\"states\":[0,1,1],\"actions\":[0,1]}\n\nnot json\n{\"states\":[0,5],\"actions\":[0,1]}\n{\"states\":[0,1],\"actions\":[0]}\n";
    let errors = parse_episodes(text, dims).unwrap_err();
    let lines: Vec<usize> = errors.iter().map(|e| e.line).collect();
    assert_eq!(lines, vec![3, 4, 5]);
    let ok = parse_episodes("{\"states\":[0,1],\"actions\":[1,1]}\n", dims).unwrap();
    assert_eq!(ok.len(), 1);
}

#[test]
fn dataset_container_round_trips_and_detects_tampering() {
    let r = random_instance(3, 2, 3, RandomStructure::Tabular, 2).unwrap();
    let cfg = ExploreConfig::new(0.5, 0.1, 50).unwrap();
    let mut sampler = ForwardSampler::new(&r.mdp, 2);
    let data = explore_reward_free_tabular(&mut sampler, &cfg)
        .unwrap()
        .dataset;
    let doc = DatasetDocument::new(&data, "reward_free", &cfg, 2);
    let text = serde_json::to_string(&doc).unwrap();
    let back: DatasetDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back.to_dataset().unwrap(), data);
    let mut bad = back;
    bad.counts[0] += 1;
    assert!(bad.to_dataset().is_err());
}

#[test]
fn config_validation() {
    let base = Path::new(".");
    assert!(LoadedConfig::parse("", base).is_ok());
    let err = LoadedConfig::parse("[algorithm]\nepsilon = 1.5\n", base).unwrap_err();
    assert!(err.to_string().contains("epsilon"));
    assert_eq!(err.exit_code(), 2);
    let err = LoadedConfig::parse(
        "[instance]\nsource = \"file\"\npath = \"nope.json\"\n",
        base,
    )
    .unwrap_err();
    assert!(err.to_string().contains("does not exist"));
    assert!(LoadedConfig::parse("[algorithm]\nunknown = 1\n", base).is_err());
    let a = LoadedConfig::parse("[replication]\nseeds = [1]\n", base).unwrap();
    let b = LoadedConfig::parse("[replication]\nseeds = [2]\n", base).unwrap();
    assert_ne!(a.hash, b.hash);
    assert_eq!(a.hash.len(), 64);
}
