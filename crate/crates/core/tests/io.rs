use std::fs;

use edgeimpact_core::graph_model::{
    benchmark_preset, erdos_renyi, path_graph, read_edge_list, read_network, write_network, NetworkFile,
};
use edgeimpact_core::{EdgeMod, SpectralCondition};

#[test]
fn json_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let mut cfg = benchmark_preset(5);
    cfg.n = 60;
    cfg.inputs = Some(6);
    cfg.outputs = Some(9);
    let net = erdos_renyi(&cfg).unwrap();
    write_network(&net, &path).unwrap();
    assert_eq!(read_network(&path).unwrap(), net);
}

#[test]
fn relaxed_condition_survives_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grown.json");
    let net = path_graph(6, 0.25)
        .unwrap()
        .with_condition(SpectralCondition::Displacement)
        .unwrap()
        .apply_mod(&EdgeMod::new(1, 3, 0.35))
        .unwrap();
    assert!(net.laplacian_spectral_radius() > 1.0);
    write_network(&net, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("displacement"));
    let back = read_network(&path).unwrap();
    assert_eq!(back, net);

    let strict = NetworkFile {
        condition: SpectralCondition::Strict,
        ..NetworkFile::from(&net)
    };
    assert!(strict.into_network().is_err());
}

#[test]
fn edge_list_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g.txt");
    let meta = dir.path().join("g.json");
    fs::write(&edges, "# path\n0 1 0.2\n1 2 0.2\n\n2 3 0.2\n").unwrap();
    fs::write(&meta, r#"{"kind": "laplacian", "inputs": [0, 1, 2, 3], "outputs": [0, 1, 2, 3]}"#).unwrap();
    let net = read_edge_list(&edges, &meta).unwrap();
    assert_eq!(net, path_graph(4, 0.2).unwrap());
}

#[test]
fn malformed_inputs_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"n": 2, "kind": "direct", "edges": [[0, 1, -0.5]], "inputs": [0], "outputs": [1]}"#,
        r#"{"n": 2, "kind": "direct", "edges": [[0, 1, 0.5], [0, 1, 0.2]], "inputs": [0], "outputs": [1]}"#,
        r#"{"n": 2, "kind": "direct", "edges": [[0, 4, 0.5]], "inputs": [0], "outputs": [1]}"#,
        r#"{"n": 2, "kind": "direct", "edges": [], "inputs": [], "outputs": [1]}"#,
        r#"{"n": 2, "kind": "sideways", "edges": [], "inputs": [0], "outputs": [1]}"#,
        "not json",
    ];
    for (i, text) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.json"));
        fs::write(&path, text).unwrap();
        let err = read_network(&path).unwrap_err();
        assert!(err.is_parse_error(), "case {i}: {err}");
    }
    let missing = read_network(dir.path().join("absent.json")).unwrap_err();
    assert!(missing.is_parse_error());

    let unstable = dir.path().join("unstable.json");
    fs::write(&unstable, r#"{"n": 2, "kind": "direct", "edges": [[0, 1, 1.0], [1, 0, 1.5]], "inputs": [0], "outputs": [1]}"#).unwrap();
    assert!(!read_network(&unstable).unwrap_err().is_parse_error());
}
