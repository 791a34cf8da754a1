use serde::{Deserialize, Serialize};

use super::task_metric;
use crate::dataset::{CohortDataset, Task};
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::model::{HeadKind, ModelParams, Prediction};

fn check_compatible(models: &[&ModelParams]) -> Result<()> {
    let first = models
        .first()
        .ok_or_else(|| Error::Contract("ensemble needs at least one model".into()))?;
    let shapes = first.config.layer_shapes(first.head);
    for (i, m) in models.iter().enumerate().skip(1) {
        if m.head != first.head
            || m.config.activation != first.config.activation
            || m.config.layer_shapes(m.head) != shapes
        {
            return Err(Error::Contract(format!(
                "model {i} differs in architecture or task from model 0"
            )));
        }
    }
    Ok(())
}

/// Mean of per-model predictions. Hazards and embeddings average directly;
/// classification log-probabilities are averaged as probabilities and
/// re-logged.
pub fn ensemble_predict(models: &[&ModelParams], x: &Matrix) -> Result<Prediction> {
    check_compatible(models)?;
    if models.len() == 1 {
        return models[0].predict(x);
    }
    let classify = matches!(models[0].head, HeadKind::Classification { .. });
    let mut sum_out: Option<Matrix> = None;
    let mut sum_emb: Option<Matrix> = None;
    for m in models {
        let p = m.predict(x)?;
        let out = if classify { p.output.map(f64::exp) } else { p.output };
        match (&mut sum_out, &mut sum_emb) {
            (Some(o), Some(e)) => {
                for (a, b) in o.data_mut().iter_mut().zip(out.data()) {
                    *a += b;
                }
                for (a, b) in e.data_mut().iter_mut().zip(p.embedding.data()) {
                    *a += b;
                }
            }
            _ => {
                sum_out = Some(out);
                sum_emb = Some(p.embedding);
            }
        }
    }
    let k = models.len() as f64;
    let output = sum_out
        .expect("at least one model")
        .map(|v| if classify { (v / k).ln() } else { v / k });
    let embedding = sum_emb.expect("at least one model").map(|v| v / k);
    Ok(Prediction { output, embedding })
}

/// Per-model metrics, their mean, and the metric of the averaged prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub metric: String,
    pub per_model: Vec<Option<f64>>,
    pub mean_per_model: Option<f64>,
    pub ensemble: Option<f64>,
}

pub fn evaluate_ensemble(
    models: &[&ModelParams],
    data: &CohortDataset,
    task: Task,
) -> Result<(EnsembleReport, Prediction)> {
    let per_model = models
        .iter()
        .map(|m| task_metric(task, &m.predict(&data.x)?, data))
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = per_model.iter().flatten().copied().collect();
    let mean_per_model =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let pred = ensemble_predict(models, &data.x)?;
    let ensemble = task_metric(task, &pred, data)?;
    Ok((
        EnsembleReport {
            metric: match task {
                Task::Survival => "c_index".into(),
                Task::Classification => "accuracy".into(),
            },
            per_model,
            mean_per_model,
            ensemble,
        },
        pred,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Linear;
    use crate::model::{init_params, EncoderConfig};

    fn constant_hazard_model(bias: f64) -> ModelParams {
        let cfg = EncoderConfig::new(2, vec![2]);
        let mut m = init_params(&cfg, HeadKind::Survival, 0).unwrap();
        let head = m.layers.last_mut().unwrap();
        *head = Linear {
            weight: Matrix::zeros(2, 1),
            bias: vec![bias],
        };
        m
    }

    #[test]
    fn single_model_matches_plain_inference() {
        let m = init_params(&EncoderConfig::new(3, vec![4, 2]), HeadKind::Survival, 9).unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0]]).unwrap();
        assert_eq!(ensemble_predict(&[&m], &x).unwrap(), m.predict(&x).unwrap());
        assert_eq!(ensemble_predict(&[&m, &m], &x).unwrap().output, m.predict(&x).unwrap().output);
    }

    #[test]
    fn hazards_average() {
        let a = constant_hazard_model(1.0);
        let b = constant_hazard_model(3.0);
        let x = Matrix::zeros(2, 2);
        let p = ensemble_predict(&[&a, &b], &x).unwrap();
        assert_eq!(p.hazards(), vec![2.0, 2.0]);
    }

    #[test]
    fn classification_probabilities_stay_normalized() {
        let cfg = EncoderConfig::new(3, vec![4]);
        let head = HeadKind::Classification { classes: 5 };
        let a = init_params(&cfg, head, 1).unwrap();
        let b = init_params(&cfg, head, 2).unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0]]).unwrap();
        let p = ensemble_predict(&[&a, &b], &x).unwrap();
        for r in 0..2 {
            let s: f64 = p.output.row(r).iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn architecture_mismatch_rejected() {
        let a = init_params(&EncoderConfig::new(3, vec![4]), HeadKind::Survival, 1).unwrap();
        let b = init_params(&EncoderConfig::new(3, vec![5]), HeadKind::Survival, 1).unwrap();
        let x = Matrix::zeros(1, 3);
        assert!(matches!(ensemble_predict(&[&a, &b], &x), Err(Error::Contract(_))));
        assert!(matches!(ensemble_predict(&[], &x), Err(Error::Contract(_))));
    }
}
