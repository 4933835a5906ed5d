use std::fs;

use cqfd::corpus::{corpus, CorpusConfig};
use cqfd::io::{
    hypergraph_json, instance_json, parse_value, read_hypergraph, read_instance, write_instance_csv, write_text,
};
use cqfd::IoError;
use cqfd_core::instance::{Symbols, Value};
use cqfd_core::parse::parse_query;
use tempfile::TempDir;

#[test]
fn values_parse_and_render_back() {
    let mut s = Symbols::default();
    for text in ["a1", "⊥", "(a1,c1)", "(⊥,(b,c))", "x y"] {
        let v = parse_value(&mut s, text).unwrap();
        assert_eq!(s.render(&v), text);
    }
    assert_eq!(parse_value(&mut s, "⊥").unwrap(), Value::Bottom);
    assert!(parse_value(&mut s, "(a,").is_err());
}

#[test]
fn csv_round_trip_over_corpus() {
    let dir = TempDir::new().unwrap();
    for (n, t) in corpus(11, 40, &CorpusConfig::default()).iter().enumerate() {
        let path = dir.path().join(format!("i{n}"));
        write_instance_csv(&path, &t.instance).unwrap();
        let back = read_instance(&path, &t.query).unwrap();
        assert_eq!(back.rendered(), t.instance.rendered(), "triple {n}");
    }
}

#[test]
fn csv_round_trip_with_structured_values() {
    let q = parse_query("Q(x) :- R(x, y).").unwrap();
    let mut i = cqfd_core::instance::Instance::new();
    let a = i.intern("a1");
    let c = i.intern("c,1");
    i.add_tuple("R", vec![Value::pair(a, c), Value::Bottom]).unwrap();
    let dir = TempDir::new().unwrap();
    write_instance_csv(dir.path(), &i).unwrap();
    assert_eq!(read_instance(dir.path(), &q).unwrap().rendered(), i.rendered());
}

#[test]
fn json_instances_match_csv() {
    let q = parse_query("Q(x) :- R(x, y), S(y).").unwrap();
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("i.json");
    write_text(&p, r#"{"R": [["1", "2"], ["1", "3"]], "S": [["2"]]}"#).unwrap();
    let i = read_instance(&p, &q).unwrap();
    assert_eq!(instance_json(&i), serde_json::json!({"R": [["1", "2"], ["1", "3"]], "S": [["2"]]}));
}

#[test]
fn bad_instances_are_reported() {
    let q = parse_query("Q(x) :- R(x, y).").unwrap();
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("R.csv"), "1,2\n3\n").unwrap();
    assert!(read_instance(dir.path(), &q).is_err());
    let p = dir.path().join("i.json");
    fs::write(&p, r#"{"R": [["1"]]}"#).unwrap();
    assert!(read_instance(&p, &q).is_err());
    fs::write(&p, "not json").unwrap();
    assert!(matches!(read_instance(&p, &q), Err(IoError::Format { .. }) | Err(IoError::Core { .. })));
}

#[test]
fn comments_and_missing_relations() {
    let q = parse_query("Q(x) :- R(x, y), S(y).").unwrap();
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("R.csv"), "# R/2\n1,2\n\n").unwrap();
    let i = read_instance(dir.path(), &q).unwrap();
    assert_eq!(i.relation("R").unwrap().len(), 1);
    assert!(i.relation("S").is_none_or(|r| r.is_empty()));
}

#[test]
fn hypergraph_json_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("g.json");
    write_text(&p, r#"{"vertices": ["a", "b", "c", "d"], "edges": [["a", "b", "c"], ["c", "d"]]}"#).unwrap();
    let g = read_hypergraph(&p).unwrap();
    assert_eq!(g.vertices().len(), 4);
    write_text(&p, &hypergraph_json(&g).to_string()).unwrap();
    assert_eq!(read_hypergraph(&p).unwrap(), g);
}
