use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::{Frame, ParamId, ParamStore};
use crate::modelzoo::config::{ModelConfig, ModelKind};
use crate::modelzoo::network::{Forward, Network};
use crate::rng::{mix_label, SeededRng};
use crate::scalar::Scalar;
use crate::synthdata::{Catalog, FeatureSpec, SessionRecord};

/// A built architecture: configuration, resolved input geometry and named
/// parameters.
#[derive(Clone, Debug)]
pub struct Model<T> {
    config: ModelConfig,
    specs: Vec<FeatureSpec>,
    seed: u64,
    store: ParamStore<T>,
    net: Network,
}

impl<T: Scalar> Model<T> {
    /// Builds and initializes the model for the shapes in `catalog`.
    pub fn build(config: &ModelConfig, catalog: &Catalog, seed: u64) -> Result<Self> {
        let specs = config.resolve(catalog)?;
        let mut store = ParamStore::new();
        let mut rng = SeededRng::new(mix_label(seed, "init"));
        let net = Network::build(&mut store, config, &specs, &mut rng)?;
        Ok(Self {
            config: config.clone(),
            specs,
            seed,
            store,
            net,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    /// Consumed features in input order.
    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    /// Bias of the final regressor unit.
    pub fn output_bias(&self) -> ParamId {
        self.net.output_bias()
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    /// Checks that `session` carries every consumed feature at its expected
    /// shape and places the matrices on the frame's tape as constants.
    pub fn bind_inputs(&self, frame: &mut Frame<T>, session: &SessionRecord) -> Result<Vec<Var>> {
        self.specs
            .iter()
            .map(|spec| {
                let m = session.feature(&spec.name)?;
                if m.shape() != spec.shape() {
                    return Err(Error::Input {
                        feature: spec.name.clone(),
                        msg: format!("expected shape {:?}, got {:?}", spec.shape(), m.shape()),
                    });
                }
                Ok(frame.tape.constant(m.cast()))
            })
            .collect()
    }

    /// Forward pass over already bound inputs.
    pub fn forward(&self, frame: &mut Frame<T>, inputs: &[Var]) -> Result<Forward> {
        if inputs.len() != self.specs.len() {
            return Err(Error::Contract(format!(
                "model takes {} inputs, got {}",
                self.specs.len(),
                inputs.len()
            )));
        }
        for (v, spec) in inputs.iter().zip(&self.specs) {
            if frame.tape.shape(*v) != spec.shape() {
                return Err(Error::Input {
                    feature: spec.name.clone(),
                    msg: format!(
                        "expected shape {:?}, got {:?}",
                        spec.shape(),
                        frame.tape.shape(*v)
                    ),
                });
            }
        }
        self.net.forward(frame, inputs)
    }

    /// Raw regressor output for one session.
    pub fn predict(&self, session: &SessionRecord) -> Result<T> {
        let mut frame = Frame::bind(&self.store);
        let inputs = self.bind_inputs(&mut frame, session)?;
        let out = self.forward(&mut frame, &inputs)?.output;
        Ok(frame.value(out).data()[0])
    }

    /// Runs the model on raw matrices given in input order.
    pub fn predict_tensors(&self, inputs: &[Tensor<T>]) -> Result<T> {
        let mut frame = Frame::bind(&self.store);
        let vars: Vec<Var> = inputs
            .iter()
            .map(|m| frame.tape.constant(m.clone()))
            .collect();
        let out = self.forward(&mut frame, &vars)?.output;
        Ok(frame.value(out).data()[0])
    }
}

/// The single-feature architecture for `feature` with default sizes.
pub fn build_single_feature_model(feature: &FeatureSpec, seed: u64) -> Result<Model<f64>> {
    let config = ModelConfig::single(&feature.name);
    Model::build(&config, &Catalog::from_specs(vec![feature.clone()]), seed)
}

/// A fusion architecture with its default features and sizes.
pub fn build_fusion_model(kind: ModelKind, catalog: &Catalog, seed: u64) -> Result<Model<f64>> {
    if kind == ModelKind::SingleFeature {
        return Err(Error::Config(
            "single-feature kind is not a fusion model".into(),
        ));
    }
    Model::build(&ModelConfig::fusion(kind), catalog, seed)
}
