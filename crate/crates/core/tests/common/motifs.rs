use std::collections::{BTreeMap, BTreeSet, HashMap};

use btmodel::graph_core::{AddressId, Block, TransactionRecord, UtxoId};

pub type Counts = BTreeMap<(usize, usize, usize), u64>;

/// Counts every entity/transaction path by exhaustive search over ordered
/// transaction tuples. Keys are (entity row, role, kind).
pub fn brute_force_motifs(blocks: &[Block], owner: &HashMap<AddressId, usize>, n: usize) -> Counts {
    let txs: Vec<&TransactionRecord> = blocks.iter().flat_map(|b| &b.transactions).collect();
    let mut creator: HashMap<UtxoId, (usize, AddressId)> = HashMap::new();
    for (i, t) in txs.iter().enumerate() {
        for (u, a, _, ext) in t.created_utxos() {
            if !ext {
                creator.insert(u, (i, a));
            }
        }
    }
    // (t_a, t_b, entity) for every UTXO made by t_a for entity and spent by t_b.
    let mut links = BTreeSet::new();
    for (j, t) in txs.iter().enumerate() {
        for input in &t.inputs {
            for (u, _) in &input.utxos {
                let (i, a) = creator[u];
                if let Some(&e) = owner.get(&a) {
                    links.insert((i, j, e));
                }
            }
        }
    }
    let senders = |t: usize| -> BTreeSet<usize> { txs[t].input_addresses().filter_map(|a| owner.get(&a).copied()).collect() };
    let receivers = |t: usize| -> BTreeSet<usize> { txs[t].internal_outputs().filter_map(|o| owner.get(&o.address).copied()).collect() };
    let n_ent = owner.values().max().map_or(0, |m| m + 1);
    let mut counts = Counts::new();
    let mut record = |path: &[usize]| {
        let kind = path.windows(2).any(|w| w[0] == w[1]) as usize;
        *counts.entry((path[0], 0, kind)).or_default() += 1;
        *counts.entry((*path.last().unwrap(), 1, kind)).or_default() += 1;
    };
    let m = txs.len();
    let mut seqs: Vec<Vec<usize>> = (0..m).map(|t| vec![t]).collect();
    for _ in 1..n {
        seqs = seqs
            .into_iter()
            .flat_map(|s| {
                let last = *s.last().unwrap();
                (last + 1..m).map(move |t| {
                    let mut s2 = s.clone();
                    s2.push(t);
                    s2
                })
            })
            .collect();
    }
    for seq in seqs {
        let mut mids: Vec<Vec<usize>> = vec![vec![]];
        for w in seq.windows(2) {
            let options: Vec<usize> = (0..n_ent).filter(|&e| links.contains(&(w[0], w[1], e))).collect();
            mids = mids
                .into_iter()
                .flat_map(|p| options.iter().map(move |&e| [p.clone(), vec![e]].concat()))
                .collect();
        }
        for e1 in senders(seq[0]) {
            for mid in &mids {
                for r in receivers(*seq.last().unwrap()) {
                    let path: Vec<usize> = std::iter::once(e1).chain(mid.iter().copied()).chain([r]).collect();
                    record(&path);
                }
            }
        }
    }
    counts
}

pub fn feature_counts(p: &btmodel::features::FeaturePart, n: usize) -> Counts {
    let mut c = Counts::new();
    for (ri, role) in ["src", "dst"].iter().enumerate() {
        for (ki, kind) in ["direct", "loop"].iter().enumerate() {
            for (e, v) in p.column(&format!("m{n}_{role}_{kind}_count")).unwrap().into_iter().enumerate() {
                if v > 0.0 {
                    c.insert((e, ri, ki), v as u64);
                }
            }
        }
    }
    c
}
