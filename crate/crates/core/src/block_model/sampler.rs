use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp};

use super::params::{CategoryParams, FeeParams, ModelParams, SubsetParams, TxShape};
use super::state::{ChainState, Draft, Scope};
use super::BlockError;
use crate::distributions::{bgeom_sample, poisson_sample, tgauss_sample, tpois_sample, BoundedGeometric};
use crate::graph_core::{AddressId, Category, EntityId, TransactionRecord, TxInput, TxOutput};

/// Splits `total` into `parts` positive integers: one satoshi each, then the
/// remainder in proportion to uniform integer draws on `[1, total]`, with
/// largest-remainder rounding so the parts sum exactly.
pub fn split_value<R: Rng + ?Sized>(total: u64, parts: usize, rng: &mut R) -> Vec<u64> {
    assert!(parts >= 1 && total >= parts as u64, "cannot split {total} sat into {parts} parts");
    let rest = (total - parts as u64) as u128;
    let draws: Vec<u128> = (0..parts).map(|_| rng.random_range(1..=total) as u128).collect();
    let sum: u128 = draws.iter().sum();
    let mut shares: Vec<u64> = Vec::with_capacity(parts);
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(parts);
    let mut assigned: u128 = 0;
    for (i, &d) in draws.iter().enumerate() {
        let q = rest * d / sum;
        remainders.push((rest * d % sum, i));
        shares.push(q as u64);
        assigned += q;
    }
    let left = (rest - assigned) as usize;
    remainders.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(left) {
        shares[i] += 1;
    }
    shares.iter_mut().for_each(|s| *s += 1);
    shares
}

/// Integer fee drawn from the truncated Gaussian on `[0, value]`, leaving at
/// least `reserve` satoshi for the outputs.
pub fn draw_fee<R: Rng + ?Sized>(fee: FeeParams, value: u64, reserve: u64, rng: &mut R) -> u64 {
    let cap = value.saturating_sub(reserve);
    if cap == 0 {
        return 0;
    }
    let f = if fee.sigma_sat == 0.0 {
        fee.mu_sat
    } else {
        tgauss_sample(fee.mu_sat, fee.sigma_sat, 0.0, value as f64, rng).expect("valid fee params")
    };
    (f.round().max(0.0) as u64).min(cap)
}

/// Output plan before values are assigned: address, fresh flag, external flag,
/// number of UTXOs.
struct OutputPlan {
    address: AddressId,
    is_new: bool,
    external: bool,
    utxos: u64,
}

/// Caps UTXO multiplicities, then output count, so every UTXO can hold 1 sat.
fn fit_outputs(plan: &mut Vec<OutputPlan>, budget: u64) {
    let mut total: u64 = plan.iter().map(|o| o.utxos).sum();
    for o in plan.iter_mut().rev() {
        if total <= budget {
            break;
        }
        let cut = (o.utxos - 1).min(total - budget);
        o.utxos -= cut;
        total -= cut;
    }
    if total > budget {
        plan.truncate(budget.max(1) as usize);
    }
}

fn assign_values<R: Rng + ?Sized>(plan: Vec<OutputPlan>, amount: u64, rng: &mut R) -> Vec<TxOutput> {
    let parts: usize = plan.iter().map(|o| o.utxos as usize).sum();
    let mut values = split_value(amount, parts, rng).into_iter();
    plan.into_iter()
        .map(|o| TxOutput {
            address: o.address,
            is_new: o.is_new,
            external: o.external,
            values: values.by_ref().take(o.utxos as usize).collect(),
        })
        .collect()
}

fn geometric(p: f64) -> BoundedGeometric {
    BoundedGeometric::unbounded(p).expect("validated probability")
}

/// Where the non-input side of a transaction sends its outputs.
#[derive(Debug, Clone, Copy)]
pub enum OutputTarget {
    /// Address-level attachment over the whole ledger.
    Global,
    /// Per output, an entity ∝ `k_e^out + 1` (optionally within a category),
    /// then an address within it.
    Entities(Option<Category>),
}

impl ChainState {
    /// Builds the output address plan: `fresh` new addresses, then `existing`
    /// drawn by out-degree attachment without repetition.
    fn plan_outputs<R: Rng + ?Sized>(
        &mut self,
        target: OutputTarget,
        fresh: u64,
        existing: u64,
        p_utxo_out: f64,
        rng: &mut R,
    ) -> (Vec<OutputPlan>, Vec<(AddressId, EntityId)>) {
        let geo = geometric(p_utxo_out);
        let mut plan = Vec::new();
        let mut owners = Vec::new();
        let mut chosen: Vec<usize> = Vec::new();
        for j in 0..fresh + existing {
            let entity = match target {
                OutputTarget::Global => None,
                OutputTarget::Entities(c) => self.pick_output_entity(c, rng),
            };
            let picked = if j < fresh {
                None
            } else {
                let scope = entity.map_or(Scope::Global, Scope::Entity);
                self.pick_output(scope, &chosen, rng)
            };
            let utxos = geo.sample(rng);
            match picked {
                Some(slot) => {
                    chosen.push(slot);
                    let address = self.ledger().slot(slot).address_id;
                    plan.push(OutputPlan { address, is_new: false, external: false, utxos });
                }
                None => {
                    let address = self.fresh_address();
                    if let Some(e) = entity {
                        owners.push((address, self.entity_id(e)));
                    }
                    plan.push(OutputPlan { address, is_new: true, external: false, utxos });
                }
            }
        }
        (plan, owners)
    }

    /// Draws an ordinary transaction spending from `scope` with exactly
    /// `n_inputs` input addresses. Returns `Exhausted` when the scope holds
    /// fewer funded addresses.
    pub fn draw_ordinary<R: Rng + ?Sized>(
        &mut self,
        scope: Scope,
        n_inputs: u64,
        shape: &TxShape,
        target: OutputTarget,
        fee: FeeParams,
        lambda_sub: f64,
        height: u64,
        rng: &mut R,
    ) -> Result<Draft, BlockError> {
        let available = self.funded(scope);
        let slots = self
            .take_inputs(scope, n_inputs as usize, rng)
            .ok_or_else(|| BlockError::Exhausted { height, needed: n_inputs as usize - available })?;

        let mut inputs = Vec::with_capacity(slots.len());
        for slot in slots {
            let state = self.ledger().slot(slot);
            let k = state.k_utxo();
            let u = bgeom_sample(shape.p_utxo_in, k, rng).expect("validated probability");
            let mut picks = index::sample(rng, k as usize, u as usize).into_vec();
            picks.sort_unstable();
            let utxos = picks
                .into_iter()
                .map(|i| {
                    let (id, v) = state.utxos.get_index(i).expect("index in range");
                    (*id, *v)
                })
                .collect();
            inputs.push(TxInput { address: state.address_id, utxos });
        }
        let value: u64 = inputs.iter().map(TxInput::value).sum();

        let o = tpois_sample(shape.lambda_out, rng).expect("validated lambda");
        let n_new = Binomial::new(o, shape.p_new).expect("validated p_new").sample(rng);
        let (mut plan, owners) = self.plan_outputs(target, n_new, o - n_new, shape.p_utxo_out, rng);
        let n_ext = poisson_sample(lambda_sub, rng).expect("validated lambda_sub");
        let geo = geometric(shape.p_utxo_out);
        for _ in 0..n_ext {
            let address = self.fresh_address();
            plan.push(OutputPlan { address, is_new: true, external: true, utxos: geo.sample(rng) });
        }

        fit_outputs(&mut plan, value);
        let reserve: u64 = plan.iter().map(|o| o.utxos).sum();
        let fee_sat = draw_fee(fee, value, reserve, rng);
        let outputs = assign_values(plan, value - fee_sat, rng);
        let owners = owners
            .into_iter()
            .filter(|(a, _)| outputs.iter().any(|o| o.address == *a))
            .collect();
        let mut tx = TransactionRecord::new(self.next_tx_id(), height, inputs, outputs, fee_sat, false);
        if let Scope::Entity(e) = scope {
            tx.input_entity = Some(self.entity_id(e));
        }
        Ok(Draft { tx, owners })
    }

    /// Inputless transaction minting `amount` onto a subset-shaped output set.
    pub fn draw_inputless<R: Rng + ?Sized>(
        &mut self,
        amount: u64,
        coinbase: bool,
        subset: &SubsetParams,
        target: OutputTarget,
        height: u64,
        rng: &mut R,
    ) -> Draft {
        let o = tpois_sample(subset.lambda_out_sub, rng).expect("validated lambda_out_sub");
        let n_new = Binomial::new(o, subset.p_new_sub).expect("validated p_new_sub").sample(rng);
        let (mut plan, owners) = self.plan_outputs(target, n_new, o - n_new, subset.p_utxo_out_sub, rng);
        fit_outputs(&mut plan, amount);
        let outputs = assign_values(plan, amount, rng);
        let owners = owners
            .into_iter()
            .filter(|(a, _)| outputs.iter().any(|o| o.address == *a))
            .collect();
        let tx = TransactionRecord::new(self.next_tx_id(), height, vec![], outputs, 0, coinbase);
        Draft { tx, owners }
    }

    /// Boundary-in transaction creating `n` fresh funded addresses in `scope`.
    pub fn draw_funding<R: Rng + ?Sized>(
        &mut self,
        scope: Scope,
        n: usize,
        subset: &SubsetParams,
        height: u64,
        rng: &mut R,
    ) -> Draft {
        let mut outputs = Vec::with_capacity(n);
        let mut owners = Vec::new();
        for _ in 0..n {
            let address = self.fresh_address();
            if let Scope::Entity(e) = scope {
                owners.push((address, self.entity_id(e)));
            }
            let value = boundary_amount(subset, 1, rng);
            outputs.push(TxOutput { address, is_new: true, external: false, values: vec![value] });
        }
        let tx = TransactionRecord::new(self.next_tx_id(), height, vec![], outputs, 0, false);
        Draft { tx, owners }
    }
}

/// Exponential amount with the configured mean, at least `floor` satoshi.
pub fn boundary_amount<R: Rng + ?Sized>(subset: &SubsetParams, floor: u64, rng: &mut R) -> u64 {
    let exp = Exp::new(1.0 / subset.boundary_value_mean_sat).expect("validated mean");
    (exp.sample(rng).round() as u64).max(floor)
}

/// Entity-level model: categories, their parameters and global fee/size.
#[derive(Debug, Clone)]
pub struct EntityModel {
    pub params: ModelParams,
    pub categories: CategoryParams,
}

pub(crate) const ENTITY_RETRIES: usize = 16;

fn draw_category<R: Rng + ?Sized>(cats: &CategoryParams, rng: &mut R) -> Category {
    let mut r: f64 = rng.random::<f64>() * cats.categories.values().map(|s| s.activity).sum::<f64>();
    let mut last = None;
    for (&c, spec) in &cats.categories {
        if spec.activity <= 0.0 {
            continue;
        }
        last = Some(c);
        if r < spec.activity {
            return c;
        }
        r -= spec.activity;
    }
    last.expect("some category has positive activity")
}

/// Collects drafts for one block, committing each to the chain as it goes.
pub(crate) struct BlockBuilder<'a> {
    pub state: &'a mut ChainState,
    pub height: u64,
    pub txs: Vec<TransactionRecord>,
}

impl BlockBuilder<'_> {
    pub fn push(&mut self, draft: Draft) -> Result<(), BlockError> {
        self.state.commit(&draft)?;
        self.txs.push(draft.tx);
        Ok(())
    }

    /// Coinbase first, then the incoming boundary transactions.
    pub fn boundary<R: Rng + ?Sized>(
        &mut self,
        subset: &SubsetParams,
        coinbase_target: OutputTarget,
        boundary_target: OutputTarget,
        rng: &mut R,
    ) -> Result<(), BlockError> {
        let cb = self.state.draw_inputless(subset.coinbase_reward_sat, true, subset, coinbase_target, self.height, rng);
        self.push(cb)?;
        let n = poisson_sample(subset.lambda_size_sub, rng).expect("validated lambda_size_sub");
        for _ in 0..n {
            let amount = boundary_amount(subset, 1, rng);
            let d = self.state.draw_inputless(amount, false, subset, boundary_target, self.height, rng);
            self.push(d)?;
        }
        Ok(())
    }

    pub fn ordinary_bta<R: Rng + ?Sized>(
        &mut self,
        params: &ModelParams,
        subset: &SubsetParams,
        auto_fund: bool,
        rng: &mut R,
    ) -> Result<(), BlockError> {
        let shape = params.shape();
        let n_inputs = tpois_sample(shape.lambda_in, rng).expect("validated lambda_in");
        let funded = self.state.funded(Scope::Global);
        if funded < n_inputs as usize {
            if !auto_fund {
                return Err(BlockError::Exhausted { height: self.height, needed: n_inputs as usize - funded });
            }
            let d = self.state.draw_funding(Scope::Global, n_inputs as usize - funded, subset, self.height, rng);
            self.push(d)?;
        }
        let d = self.state.draw_ordinary(
            Scope::Global,
            n_inputs,
            &shape,
            OutputTarget::Global,
            params.fee(),
            subset.lambda_sub,
            self.height,
            rng,
        )?;
        self.push(d)
    }

    pub fn ordinary_btea<R: Rng + ?Sized>(
        &mut self,
        model: &EntityModel,
        subset: &SubsetParams,
        auto_fund: bool,
        rng: &mut R,
    ) -> Result<(), BlockError> {
        let category = draw_category(&model.categories, rng);
        let shape = model.categories.get(category).expect("drawn from table").shape();
        let n_inputs = tpois_sample(shape.lambda_in, rng).expect("validated lambda_in");
        let mut first = None;
        let mut chosen = None;
        for _ in 0..ENTITY_RETRIES {
            let e = self
                .state
                .pick_input_entity(category, rng)
                .ok_or(BlockError::NoEntities(category))?;
            first.get_or_insert(e);
            if self.state.funded(Scope::Entity(e)) >= n_inputs as usize {
                chosen = Some(e);
                break;
            }
        }
        let e = match chosen {
            Some(e) => e,
            None => {
                let e = first.expect("at least one attempt");
                let funded = self.state.funded(Scope::Entity(e));
                if !auto_fund {
                    return Err(BlockError::Exhausted { height: self.height, needed: n_inputs as usize - funded });
                }
                let d = self.state.draw_funding(Scope::Entity(e), n_inputs as usize - funded, subset, self.height, rng);
                self.push(d)?;
                e
            }
        };
        let d = self.state.draw_ordinary(
            Scope::Entity(e),
            n_inputs,
            &shape,
            OutputTarget::Entities(None),
            model.params.fee(),
            subset.lambda_sub,
            self.height,
            rng,
        )?;
        self.push(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_is_exact_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(total, parts) in &[(1u64, 1usize), (5, 5), (7, 3), (1_000_000_007, 13), (u64::MAX / 2, 4)] {
            let s = split_value(total, parts, &mut rng);
            assert_eq!(s.len(), parts);
            assert_eq!(s.iter().sum::<u64>(), total);
            assert!(s.iter().all(|&v| v >= 1));
        }
    }

    #[test]
    fn fee_respects_reserve() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fee = FeeParams { mu_sat: 20_000.0, sigma_sat: 15_000.0 };
        for value in [1u64, 2, 10, 30_000, 1_000_000] {
            for _ in 0..100 {
                let f = draw_fee(fee, value, 1, &mut rng);
                assert!(f <= value - 1);
            }
        }
        let point = FeeParams { mu_sat: 500.0, sigma_sat: 0.0 };
        assert_eq!(draw_fee(point, 10_000, 1, &mut rng), 500);
    }

    #[test]
    fn output_fitting_keeps_one_sat_each() {
        let mut plan: Vec<OutputPlan> = (0..4)
            .map(|i| OutputPlan { address: AddressId(i), is_new: true, external: false, utxos: 3 })
            .collect();
        fit_outputs(&mut plan, 6);
        assert_eq!(plan.iter().map(|o| o.utxos).sum::<u64>(), 6);
        fit_outputs(&mut plan, 2);
        assert_eq!(plan.len(), 2);
        assert!(plan.iter().all(|o| o.utxos == 1));
    }
}
