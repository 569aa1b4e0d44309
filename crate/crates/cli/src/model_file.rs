//! Persisted model format (JSON, schema version "1").

use frfkit_core::baselines::{SeChannel, SeparateSeModel};
use frfkit_core::hybrid::{PolePair, RationalBasis, SelectionReport};
use frfkit_core::interpolate::{
    validate_training, ComplexSample, FittedModel, LinearMeanSpec, TrainingSet,
};
use frfkit_core::kernels::{KernelKind, KernelPair, KernelParams, Pseudo};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";
pub const SE_SEPARATE: &str = "se-separate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub omega: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeChannelParams {
    pub lengthscale: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSection {
    /// `szego`, `stable-spline` or `se-separate`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo: Option<Pseudo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    /// Real and imaginary channel of `se-separate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<[SeChannelParams; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSection {
    pub poles: Vec<PolePair>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: String,
    pub kernel: KernelSection,
    pub mean: Option<MeanSection>,
    pub training: Vec<SampleRow>,
    pub symmetric: bool,
    /// Augmented coefficients; for `se-separate` the real channel followed
    /// by the imaginary one.
    pub coeffs: Vec<f64>,
    pub dropped_rows: Vec<usize>,
    pub seed: u64,
    pub selection: Option<SelectionReport>,
}

/// A loaded predictor.
#[derive(Debug, Clone)]
pub enum Model {
    Kernel(FittedModel),
    SeparateSe(SeparateSeModel),
}

impl Model {
    pub fn predict_omega(&self, omega: f64) -> Result<Complex64, CliError> {
        match self {
            Model::Kernel(m) => m
                .predict_omega(omega)
                .map_err(|e| CliError::Numerical(e.to_string())),
            Model::SeparateSe(m) => Ok(m.predict_omega(omega)),
        }
    }
}

fn rows(samples: &[ComplexSample]) -> Vec<SampleRow> {
    samples
        .iter()
        .map(|s| SampleRow {
            omega: s.omega,
            re: s.y.re,
            im: s.y.im,
        })
        .collect()
}

impl ModelFile {
    pub fn from_kernel_model(
        model: &FittedModel,
        seed: u64,
        selection: Option<SelectionReport>,
    ) -> Self {
        let pair = model.pair();
        let mean = model.mean().map(|m| MeanSection {
            poles: m.basis.poles.clone(),
            beta: m.beta.clone(),
        });
        ModelFile {
            schema_version: SCHEMA_VERSION.into(),
            kernel: KernelSection {
                name: pair.kind.name().into(),
                pseudo: Some(pair.pseudo),
                alpha: Some(pair.params.alpha()),
                sigma2: Some(pair.params.sigma2()),
                channels: None,
            },
            mean,
            training: rows(model.training().samples()),
            symmetric: model.training().symmetric(),
            coeffs: model.coeffs().to_vec(),
            dropped_rows: model.dropped_rows().to_vec(),
            seed,
            selection,
        }
    }

    pub fn from_se_model(model: &SeparateSeModel, ts: &TrainingSet, seed: u64) -> Self {
        let params = |c: &SeChannel| SeChannelParams {
            lengthscale: c.lengthscale,
            sigma2: c.sigma2,
        };
        let mut coeffs = model.re.coeffs.clone();
        coeffs.extend(&model.im.coeffs);
        ModelFile {
            schema_version: SCHEMA_VERSION.into(),
            kernel: KernelSection {
                name: SE_SEPARATE.into(),
                pseudo: None,
                alpha: None,
                sigma2: None,
                channels: Some([params(&model.re), params(&model.im)]),
            },
            mean: None,
            training: rows(ts.samples()),
            symmetric: false,
            coeffs,
            dropped_rows: Vec::new(),
            seed,
            selection: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let f: ModelFile = serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("invalid model file: {e}")))?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported schema version {:?}",
                f.schema_version
            )));
        }
        Ok(f)
    }

    fn training_set(&self) -> Result<TrainingSet, CliError> {
        let samples = self
            .training
            .iter()
            .map(|r| ComplexSample::new(r.omega, Complex64::new(r.re, r.im)))
            .collect();
        TrainingSet::new(samples).map_err(|e| CliError::Input(format!("model training data: {e}")))
    }

    pub fn to_model(&self) -> Result<Model, CliError> {
        let bad = |m: &str| CliError::Input(format!("invalid model file: {m}"));
        let ts = self.training_set()?;
        if self.kernel.name == SE_SEPARATE {
            let [re, im] = self
                .kernel
                .channels
                .ok_or_else(|| bad("se-separate needs channels"))?;
            let n = ts.len();
            if self.coeffs.len() != 2 * n {
                return Err(bad("se-separate needs 2n coefficients"));
            }
            let omegas: Vec<f64> = ts.samples().iter().map(|s| s.omega).collect();
            let channel = |p: SeChannelParams, c: &[f64]| SeChannel {
                lengthscale: p.lengthscale,
                sigma2: p.sigma2,
                omegas: omegas.clone(),
                coeffs: c.to_vec(),
            };
            return Ok(Model::SeparateSe(SeparateSeModel {
                re: channel(re, &self.coeffs[..n]),
                im: channel(im, &self.coeffs[n..]),
            }));
        }
        let kind = match self.kernel.name.as_str() {
            "szego" => KernelKind::Szego,
            "stable-spline" => KernelKind::StableSpline,
            other => return Err(bad(&format!("unknown kernel {other:?}"))),
        };
        let pseudo = self.kernel.pseudo.ok_or_else(|| bad("missing pseudo"))?;
        let alpha = self.kernel.alpha.ok_or_else(|| bad("missing alpha"))?;
        let sigma2 = self.kernel.sigma2.ok_or_else(|| bad("missing sigma2"))?;
        let params = KernelParams::new(alpha, sigma2).map_err(|e| bad(&e.to_string()))?;
        let vt = validate_training(ts, self.symmetric).map_err(|e| bad(&e.to_string()))?;
        let mean = self.mean.as_ref().map(|m| LinearMeanSpec {
            basis: RationalBasis {
                poles: m.poles.clone(),
            },
            beta: m.beta.clone(),
        });
        let model = FittedModel::from_parts(
            KernelPair::new(kind, pseudo, params),
            mean,
            vt,
            self.coeffs.clone(),
            self.dropped_rows.clone(),
        )
        .map_err(|e| bad(&e.to_string()))?;
        Ok(Model::Kernel(model))
    }
}
