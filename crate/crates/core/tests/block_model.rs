use std::collections::HashSet;

use btmodel::block_model::{
    simulate_chain, CategoryParams, CategorySpec, ChainState, Draft, EntityLayout, Model, ModelParams,
    Scope, SimulationConfig, Simulator, SubsetParams,
};
use btmodel::distributions::tpois_mean;
use btmodel::graph_core::{AddressId, Block, Category, EntityId, TransactionRecord, TxOutput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ordinary(blocks: &[Block]) -> impl Iterator<Item = &TransactionRecord> {
    blocks.iter().flat_map(|b| &b.transactions).filter(|t| t.is_ordinary())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn run_until(model: Model, subset: SubsetParams, seed: u64, min_txs: usize) -> Vec<Block> {
    let mut sim = Simulator::new(model, subset, SimulationConfig::new(u64::MAX, seed)).unwrap();
    let mut blocks = Vec::new();
    let mut n = 0;
    while n < min_txs {
        let b = sim.next_block().unwrap();
        n += b.ordinary_count();
        blocks.push(b);
    }
    blocks
}

#[test]
fn fresh_rate_one_makes_every_output_new() {
    let params = ModelParams { p_new: 1.0, ..ModelParams::default() };
    let blocks = run_until(Model::address(params), SubsetParams::default(), 1, 2_000);
    assert!(ordinary(&blocks).flat_map(|t| t.internal_outputs()).all(|o| o.is_new));
}

#[test]
fn unit_output_utxo_rate_gives_one_utxo_per_output() {
    let blocks = run_until(Model::address(ModelParams::default()), SubsetParams::default(), 2, 2_000);
    assert!(ordinary(&blocks).flat_map(|t| &t.outputs).all(|o| o.values.len() == 1));
}

#[test]
fn input_and_output_counts_follow_truncated_means() {
    let params = ModelParams::default();
    let blocks = run_until(Model::address(params), SubsetParams::default(), 3, 10_000);
    let txs: Vec<_> = ordinary(&blocks).collect();
    let ins: Vec<f64> = txs.iter().map(|t| t.inputs.len() as f64).collect();
    let outs: Vec<f64> = txs.iter().map(|t| t.internal_outputs().count() as f64).collect();
    let (mi, si) = mean_se(&ins);
    let (mo, so) = mean_se(&outs);
    assert!((mi - tpois_mean(2.99)).abs() < 3.0 * si, "I_t mean {mi}");
    assert!((mo - tpois_mean(1.21)).abs() < 3.0 * so, "O_t mean {mo}");
}

#[test]
fn block_size_mean_matches_rate() {
    let params = ModelParams { lambda_in: 1.0, ..ModelParams::default() };
    let out = simulate_chain(Model::address(params), SubsetParams::default(), SimulationConfig::new(1_000, 4)).unwrap();
    let sizes: Vec<f64> = out.blocks.iter().map(|b| b.ordinary_count() as f64).collect();
    let (m, se) = mean_se(&sizes);
    assert!((m - 65.6).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn tiny_block_rate_gives_mostly_empty_blocks() {
    let params = ModelParams { lambda_size: 1e-3, ..ModelParams::default() };
    let out = simulate_chain(Model::address(params), SubsetParams::default(), SimulationConfig::new(200, 5)).unwrap();
    let empty = out.blocks.iter().filter(|b| b.ordinary_count() == 0).count();
    assert!(empty >= 195);
}

#[test]
fn chain_preserves_conservation_and_structure() {
    let out = simulate_chain(
        Model::address(ModelParams::default()),
        SubsetParams::default(),
        SimulationConfig::new(50, 6),
    )
    .unwrap();
    let acc = out.ledger.accounts();
    assert!(acc.balanced());
    assert_eq!(out.ledger.recount_unspent(), (acc.unspent_value, acc.unspent_count));
    for (i, b) in out.blocks.iter().enumerate() {
        assert_eq!(b.height, i as u64);
        assert!(b.transactions[0].is_coinbase);
        assert_eq!(b.transactions.iter().filter(|t| t.is_coinbase).count(), 1);
        for t in &b.transactions {
            assert!(t.is_conserving());
            assert!(t.outputs.iter().all(|o| o.values.iter().all(|&v| v >= 1)));
        }
    }
    assert!(out.blocks.windows(2).all(|w| w[1].timestamp == w[0].timestamp + 600));
}

#[test]
fn same_seed_same_stream() {
    let run = |seed| {
        let m = Model::entity(ModelParams::default(), CategoryParams::default(), EntityLayout::uniform(5));
        simulate_chain(m, SubsetParams::default(), SimulationConfig::new(20, seed)).unwrap().blocks
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn entity_inputs_come_from_one_owner() {
    let m = Model::entity(ModelParams::default(), CategoryParams::default(), EntityLayout::uniform(8));
    let out = simulate_chain(m, SubsetParams::default(), SimulationConfig::new(60, 7)).unwrap();
    let owners: std::collections::HashMap<AddressId, EntityId> =
        out.labels.iter().map(|&(a, e, _)| (a, e)).collect();
    for t in ordinary(&out.blocks) {
        let set: HashSet<_> = t.input_addresses().map(|a| owners[&a]).collect();
        assert_eq!(set.len(), 1);
        assert_eq!(t.input_entity, set.into_iter().next());
    }
    // Coinbase outputs land on mining pools.
    for b in &out.blocks {
        for o in b.transactions[0].internal_outputs() {
            let e = owners[&o.address];
            assert!(out.labels.iter().any(|&(_, id, c)| id == e && c == Category::MiningPool));
        }
    }
}

#[test]
fn entity_attachment_ratio_nine_to_zero() {
    let mut state = ChainState::new();
    let a = state.register_entity(EntityId(0), Category::Exchange);
    let _b = state.register_entity(EntityId(1), Category::Exchange);
    // Give entity 0 nine UTXOs on one address.
    let address = state.fresh_address();
    let id = state.next_tx_id();
    let tx = TransactionRecord::new(
        id,
        0,
        vec![],
        vec![TxOutput { address, is_new: true, external: false, values: vec![1; 9] }],
        0,
        false,
    );
    state.commit(&Draft { tx, owners: vec![(address, EntityId(0))] }).unwrap();
    assert_eq!(state.funded(Scope::Entity(a)), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| state.pick_input_entity(Category::Exchange, &mut rng) == Some(a))
        .count();
    let p = 10.0 / 11.0;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
}

fn single_category(spec: CategorySpec) -> CategoryParams {
    CategoryParams { categories: [(Category::MiningPool, spec)].into_iter().collect() }
}

#[test]
fn mining_pool_shape() {
    let spec = CategoryParams::default().categories[&Category::MiningPool];
    let layout = EntityLayout { counts: [(Category::MiningPool, 10)].into_iter().collect() };
    let model = Model::entity(ModelParams::default(), single_category(CategorySpec { activity: 1.0, ..spec }), layout);
    let blocks = run_until(model, SubsetParams::default(), 9, 5_000);
    let txs: Vec<_> = ordinary(&blocks).collect();
    let (mi, si) = mean_se(&txs.iter().map(|t| t.inputs.len() as f64).collect::<Vec<_>>());
    assert!((mi - 21.2).abs() < 3.0 * si, "{mi}");
    let (new, total) = txs.iter().flat_map(|t| t.internal_outputs()).fold((0, 0), |(n, k), o| (n + o.is_new as u64, k + 1));
    let ratio = new as f64 / total as f64;
    assert!((ratio - 0.55).abs() < 0.01, "{ratio}");
}

#[test]
fn single_entity_matches_address_model_marginals() {
    let spec = CategorySpec {
        lambda_in: 2.99,
        lambda_out: 1.21,
        p_new: 0.26,
        p_utxo_in: 0.92,
        p_utxo_out: 1.0,
        activity: 1.0,
    };
    let layout = EntityLayout { counts: [(Category::MiningPool, 1)].into_iter().collect() };
    let ea = run_until(
        Model::entity(ModelParams::default(), single_category(spec), layout),
        SubsetParams::default(),
        10,
        10_000,
    );
    let a = run_until(Model::address(ModelParams::default()), SubsetParams::default(), 11, 10_000);
    for blocks in [&ea, &a] {
        let txs: Vec<_> = ordinary(blocks).collect();
        let (mi, si) = mean_se(&txs.iter().map(|t| t.inputs.len() as f64).collect::<Vec<_>>());
        let (mo, so) = mean_se(&txs.iter().map(|t| t.internal_outputs().count() as f64).collect::<Vec<_>>());
        assert!((mi - tpois_mean(2.99)).abs() < 3.0 * si);
        assert!((mo - tpois_mean(1.21)).abs() < 3.0 * so);
    }
}

#[test]
fn boundary_flows() {
    let subset = SubsetParams { lambda_size_sub: 0.0, ..SubsetParams::default() };
    let params = ModelParams { lambda_size: 5.0, ..ModelParams::default() };
    let out = simulate_chain(Model::address(params), subset, SimulationConfig { auto_fund: true, ..SimulationConfig::new(30, 12) }).unwrap();
    for b in &out.blocks {
        let inputless: Vec<_> = b.transactions.iter().filter(|t| t.inputs.is_empty()).collect();
        assert!(inputless[0].is_coinbase);
        // Any further inputless transactions are auto-funding ones.
        assert!(inputless[1..].iter().all(|t| t.is_boundary_in && t.outputs.iter().all(|o| o.is_new)));
    }

    let blocks = run_until(Model::address(ModelParams::default()), SubsetParams::default(), 13, 10_000);
    let ext: Vec<f64> = ordinary(&blocks).map(|t| t.outputs.iter().filter(|o| o.external).count() as f64).collect();
    let (m, se) = mean_se(&ext);
    assert!((m - 0.5).abs() < 3.0 * se, "{m}");
}

#[test]
fn exhaustion_without_auto_funding() {
    let subset = SubsetParams { lambda_size_sub: 0.0, lambda_out_sub: 1e-9, ..SubsetParams::default() };
    let params = ModelParams { lambda_in: 30.0, ..ModelParams::default() };
    let cfg = SimulationConfig { auto_fund: false, ..SimulationConfig::new(10, 14) };
    let err = simulate_chain(Model::address(params), subset, cfg).unwrap_err();
    assert!(matches!(err, btmodel::block_model::BlockError::Exhausted { height: 0, .. }), "{err}");
}
