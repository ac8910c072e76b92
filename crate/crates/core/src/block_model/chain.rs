use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{CategoryParams, EntityLayout, ModelParams, SubsetParams};
use super::sampler::{BlockBuilder, EntityModel, OutputTarget};
use super::state::ChainState;
use super::BlockError;
use crate::distributions::poisson_sample;
use crate::graph_core::{AddressId, Block, Category, EntityId, Ledger};

pub const GENESIS_TIMESTAMP: u64 = 1_600_000_000;
pub const BLOCK_INTERVAL_SECS: u64 = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub n_blocks: u64,
    pub seed: u64,
    /// Inject boundary funding instead of failing when inputs run short.
    pub auto_fund: bool,
}

impl SimulationConfig {
    pub fn new(n_blocks: u64, seed: u64) -> Self {
        Self { n_blocks, seed, auto_fund: true }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Address(ModelParams),
    Entity { model: EntityModel, layout: EntityLayout },
}

impl Model {
    pub fn address(params: ModelParams) -> Self {
        Model::Address(params)
    }

    pub fn entity(params: ModelParams, categories: CategoryParams, layout: EntityLayout) -> Self {
        Model::Entity { model: EntityModel { params, categories }, layout }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            Model::Address(p) => p,
            Model::Entity { model, .. } => &model.params,
        }
    }

    fn validate(&self) -> Result<(), BlockError> {
        match self {
            Model::Address(p) => p.validate(),
            Model::Entity { model, layout } => {
                model.params.validate()?;
                model.categories.validate()?;
                for (c, spec) in &model.categories.categories {
                    if spec.activity > 0.0 && layout.counts.get(c).copied().unwrap_or(0) == 0 {
                        return Err(BlockError::NoEntities(*c));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Block-by-block generator over one chain stream.
pub struct Simulator {
    model: Model,
    subset: SubsetParams,
    config: SimulationConfig,
    state: ChainState,
    rng: ChaCha8Rng,
    height: u64,
}

impl Simulator {
    pub fn new(model: Model, subset: SubsetParams, config: SimulationConfig) -> Result<Self, BlockError> {
        model.validate()?;
        subset.validate()?;
        let mut state = ChainState::new();
        if let Model::Entity { layout, .. } = &model {
            let mut next = 0u32;
            for (&c, &n) in &layout.counts {
                for _ in 0..n {
                    state.register_entity(EntityId(next), c);
                    next += 1;
                }
            }
        }
        Ok(Self {
            model,
            subset,
            config,
            state,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            height: 0,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn ledger(&self) -> &Ledger {
        self.state.ledger()
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn labels(&self) -> Vec<(AddressId, EntityId, Category)> {
        self.state.labels()
    }

    /// Samples, applies and returns the next block.
    pub fn next_block(&mut self) -> Result<Block, BlockError> {
        let height = self.height;
        let rng = &mut self.rng;
        let mut builder = BlockBuilder { state: &mut self.state, height, txs: Vec::new() };
        let (coinbase_target, boundary_target) = match &self.model {
            Model::Address(_) => (OutputTarget::Global, OutputTarget::Global),
            Model::Entity { .. } => (
                OutputTarget::Entities(Some(Category::MiningPool)),
                OutputTarget::Entities(None),
            ),
        };
        builder.boundary(&self.subset, coinbase_target, boundary_target, rng)?;
        let n = poisson_sample(self.model.params().lambda_size, rng).expect("validated lambda_size");
        for _ in 0..n {
            match &self.model {
                Model::Address(p) => builder.ordinary_bta(p, &self.subset, self.config.auto_fund, rng)?,
                Model::Entity { model, .. } => {
                    builder.ordinary_btea(model, &self.subset, self.config.auto_fund, rng)?
                }
            }
        }
        let txs = builder.txs;
        self.height += 1;
        Ok(Block {
            height,
            timestamp: GENESIS_TIMESTAMP + height * BLOCK_INTERVAL_SECS,
            transactions: txs,
        })
    }

    pub fn into_state(self) -> ChainState {
        self.state
    }
}

impl Iterator for Simulator {
    type Item = Result<Block, BlockError>;

    fn next(&mut self) -> Option<Self::Item> {
        (self.height < self.config.n_blocks).then(|| self.next_block())
    }
}

/// Output of a complete simulation run.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub blocks: Vec<Block>,
    pub ledger: Ledger,
    pub labels: Vec<(AddressId, EntityId, Category)>,
}

pub fn simulate_chain(
    model: Model,
    subset: SubsetParams,
    config: SimulationConfig,
) -> Result<SimulationOutput, BlockError> {
    if config.n_blocks == 0 {
        return Err(BlockError::InvalidParams("n_blocks must be at least 1".into()));
    }
    let mut sim = Simulator::new(model, subset, config)?;
    let mut blocks = Vec::with_capacity(config.n_blocks as usize);
    while sim.height() < config.n_blocks {
        blocks.push(sim.next_block()?);
    }
    let labels = sim.labels();
    Ok(SimulationOutput { blocks, ledger: sim.into_state().into_ledger(), labels })
}
