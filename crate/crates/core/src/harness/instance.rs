//! Seeded synthetic instances `M = G1 G2^T`, `b = A(M)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::dense::{self, DenseMatrix};
use crate::objective::ModelSpec;
use crate::sampling::{OperatorKind, SamplingOperator};

/// A generated problem plus its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub m_true: DenseMatrix,
    pub op: SamplingOperator,
    pub b: Vec<f64>,
}

const OPERATOR_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn gen_instance(cfg: &ExperimentConfig) -> Result<Instance, HarnessError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g1 = gaussian(cfg.m, cfg.r, &mut rng);
    let g2 = gaussian(cfg.n, cfg.r, &mut rng);
    let m_true = dense::matmul(&g1, &g2, false, true)?;
    let op = match cfg.operator {
        OperatorKind::Full => SamplingOperator::full(cfg.m, cfg.n),
        OperatorKind::UniformMask => SamplingOperator::uniform_mask(cfg.m, cfg.n, cfg.sample_ratio, &mut rng)?,
        OperatorKind::Gaussian => {
            let p = ((cfg.sample_ratio * (cfg.m * cfg.n) as f64).round() as usize).max(1);
            SamplingOperator::gaussian(cfg.m, cfg.n, p, cfg.seed ^ OPERATOR_STREAM)?
        }
    };
    let b = op.apply(&m_true)?;
    Ok(Instance { m_true, op, b })
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::new(rows, cols, data).expect("length matches")
}

impl Instance {
    /// `||A*(b)||_2`, the scale the parameter rules refer to.
    pub fn specnorm_x0(&self) -> Result<f64, HarnessError> {
        Ok(dense::spectral_norm(&self.op.adjoint(&self.b)?)?)
    }

    /// Model spec with rules evaluated on this instance.
    pub fn spec(&self, cfg: &ExperimentConfig) -> Result<ModelSpec, HarnessError> {
        let needs = cfg.lambda_rule.uses_specnorm() || cfg.rho_rule.uses_specnorm();
        let s = if needs { self.specnorm_x0()? } else { f64::NAN };
        let params = cfg.params(s)?;
        Ok(ModelSpec::new(cfg.model, self.op.clone(), self.b.clone(), params)?)
    }

    pub fn relative_error(&self, product: &DenseMatrix) -> f64 {
        product.sub(&self.m_true).frobenius_norm() / self.m_true.frobenius_norm()
    }
}
