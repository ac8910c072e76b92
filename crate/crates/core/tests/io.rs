use std::collections::BTreeMap;
use std::io::Write;

use btmodel::block_model::{simulate_chain, CategoryParams, EntityLayout, Model, ModelParams, SimulationConfig, SubsetParams};
use btmodel::graph_core::{AddressId, Category, EntityId, LedgerError, TxId};
use btmodel::io::{
    block_to_line, parse_blocks, parse_blocks_str, parse_labels, read_labels, write_blocks, write_labels, IoError,
    LabelTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simulated(seed: u64) -> btmodel::block_model::SimulationOutput {
    let m = Model::entity(ModelParams::default(), CategoryParams::default(), EntityLayout::uniform(6));
    simulate_chain(m, SubsetParams::default(), SimulationConfig::new(25, seed)).unwrap()
}

const COINBASE: &str = r#"{"height":0,"timestamp":100,"txs":[{"id":0,"coinbase":true,"inputs":[],"outputs":[{"addr":1,"new":true,"values_sat":[1000]}],"fee_sat":0}]}"#;

#[test]
fn empty_file_is_an_empty_stream() {
    let f = tempfile::NamedTempFile::new().unwrap();
    assert!(parse_blocks(f.path()).unwrap().is_empty());
    assert!(parse_blocks_str("\n\n").unwrap().is_empty());
}

#[test]
fn simulate_write_parse_round_trip() {
    let out = simulated(21);
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write_blocks(&mut f, &out.blocks).unwrap();
    f.flush().unwrap();
    let back = parse_blocks(f.path()).unwrap();
    // Ownership travels in the label file, not the block stream.
    let mut expected = out.blocks.clone();
    expected.iter_mut().flat_map(|b| &mut b.transactions).for_each(|t| t.input_entity = None);
    assert_eq!(back, expected);

    let mut again = Vec::new();
    write_blocks(&mut again, &back).unwrap();
    assert_eq!(again, std::fs::read(f.path()).unwrap());
    // No floats on the wire.
    assert!(!String::from_utf8(again).unwrap().contains('.'));
}

#[test]
fn canonical_line_is_byte_stable() {
    let blocks = parse_blocks_str(COINBASE).unwrap();
    assert_eq!(block_to_line(&blocks[0]), COINBASE);
}

#[test]
fn conservation_violation_names_the_tx() {
    let spend = r#"{"height":1,"timestamp":700,"txs":[{"id":5,"coinbase":false,"inputs":[{"addr":1,"utxos":[{"id":"0:0","value_sat":1000}]}],"outputs":[{"addr":2,"new":true,"values_sat":[990]}],"fee_sat":20}]}"#;
    let err = parse_blocks_str(&format!("{COINBASE}\n{spend}\n")).unwrap_err();
    match err {
        IoError::Invalid { line, tx, source } => {
            assert_eq!((line, tx), (2, TxId(5)));
            assert_eq!(source, LedgerError::Conservation { tx: TxId(5) });
        }
        other => panic!("{other}"),
    }
    assert!(err_text(&format!("{COINBASE}\n{spend}")).contains("transaction 5"));
}

fn err_text(s: &str) -> String {
    parse_blocks_str(s).unwrap_err().to_string()
}

#[test]
fn malformed_line_reports_line_and_key() {
    let bad = COINBASE.replace(r#""fee_sat":0"#, r#""fee_sat":"zero""#).replace(r#""height":0"#, r#""height":1"#);
    match parse_blocks_str(&format!("{COINBASE}\n{bad}")).unwrap_err() {
        IoError::Malformed { line, key, .. } => {
            assert_eq!(line, 2);
            assert_eq!(key, "txs[0].fee_sat");
        }
        other => panic!("{other}"),
    }
    let unknown = COINBASE.replace(r#""fee_sat":0"#, r#""fee_sat":0,"memo":1"#);
    assert!(matches!(parse_blocks_str(&unknown).unwrap_err(), IoError::Malformed { line: 1, .. }));
}

#[test]
fn heights_must_increase_by_one_and_time_must_not_go_back() {
    let next = |h: u64, ts: u64| {
        format!(r#"{{"height":{h},"timestamp":{ts},"txs":[]}}"#)
    };
    assert!(matches!(
        parse_blocks_str(&format!("{COINBASE}\n{}", next(2, 700))).unwrap_err(),
        IoError::Height { line: 2, previous: 0, found: 2 }
    ));
    assert!(matches!(
        parse_blocks_str(&format!("{COINBASE}\n{}", next(1, 50))).unwrap_err(),
        IoError::Timestamp { line: 2, height: 1 }
    ));
    assert_eq!(parse_blocks_str(&format!("{COINBASE}\n{}", next(1, 100))).unwrap().len(), 2);
}

#[test]
fn three_label_rows() {
    let text = "address_id,entity_id,category\n1,0,Exchange\n2,0,Exchange\n3,1,Gambling\n";
    let t = read_labels(text.as_bytes()).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t.get(AddressId(3)), Some((EntityId(1), Category::Gambling)));
}

#[test]
fn label_errors() {
    let conflict = "address_id,entity_id,category\n1,7,Exchange\n2,7,Service\n";
    let msg = read_labels(conflict.as_bytes()).unwrap_err().to_string();
    assert!(msg.contains("entity 7"), "{msg}");

    let addr = "address_id,entity_id,category\n1,7,Exchange\n1,8,Exchange\n";
    assert!(read_labels(addr.as_bytes()).unwrap_err().to_string().contains("address 1"));

    let unknown = "address_id,entity_id,category\n1,7,Casino\n";
    assert!(read_labels(unknown.as_bytes()).unwrap_err().to_string().contains("Casino"));

    let header = "addr,entity,category\n1,7,Exchange\n";
    assert!(matches!(read_labels(header.as_bytes()), Err(IoError::Labels(_))));

    let missing = tempfile::tempdir().unwrap().path().join("nope.csv");
    assert!(matches!(parse_labels(&missing), Err(IoError::Open { .. })));
}

#[test]
fn entity_counts_match_construction() {
    let target = [
        (Category::Exchange, 108),
        (Category::Service, 68),
        (Category::Gambling, 65),
        (Category::MiningPool, 19),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = Vec::new();
    let mut entity = 0u32;
    let mut addr = 0u64;
    for &(c, n) in &target {
        for _ in 0..n {
            for _ in 0..rng.random_range(1..6) {
                rows.push((AddressId(addr), EntityId(entity), c));
                addr += 1;
            }
            entity += 1;
        }
    }
    let table = LabelTable::from_rows(rows.clone()).unwrap();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write_labels(&mut f, &table).unwrap();
    let back = parse_labels(f.path()).unwrap();
    assert_eq!(back, table);

    // Recount from raw rows.
    let mut per: BTreeMap<Category, std::collections::BTreeSet<EntityId>> = BTreeMap::new();
    for (_, e, c) in rows {
        per.entry(c).or_default().insert(e);
    }
    let recount: BTreeMap<Category, usize> = per.into_iter().map(|(c, s)| (c, s.len())).collect();
    assert_eq!(back.entity_counts(), recount);
    assert_eq!(recount.values().sum::<usize>(), 260);
    for (c, n) in target {
        assert_eq!(recount[&c], n);
    }
}

#[test]
fn simulated_labels_round_trip() {
    let out = simulated(22);
    let table = LabelTable::from_rows(out.labels.iter().copied()).unwrap();
    let mut buf = Vec::new();
    write_labels(&mut buf, &table).unwrap();
    assert_eq!(read_labels(buf.as_slice()).unwrap(), table);
    assert_eq!(table.entity_counts().values().sum::<usize>(), 24);
}
