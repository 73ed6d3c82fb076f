use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnnotationStudy;
use crate::error::{Error, Result};
use crate::hierarchy::csv_field;
use crate::stats::{bootstrap_z_test, mean};
use crate::taxonomy::EmotionTaxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaConfig {
    pub runs: usize,
    /// Resample size; `None` uses the study size.
    pub sample_size: Option<usize>,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        Self {
            runs: 10_000,
            sample_size: None,
            alpha: 0.001,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    /// Model minus readers on the full study.
    pub delta: f64,
    pub bootstrap_mean: f64,
    pub z: f64,
    pub p: f64,
    pub significant: bool,
}

/// Category×category difference between the row-normalised model and
/// reader confusion matrices; rows are writer categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMatrix {
    pub categories: Vec<String>,
    pub cells: Vec<Vec<DeltaCell>>,
    pub runs: usize,
    pub sample_size: usize,
    pub alpha: f64,
}

impl DeltaMatrix {
    pub fn get(&self, row: usize, col: usize) -> &DeltaCell {
        &self.cells[row][col]
    }

    pub fn significant_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.significant).count()
    }

    /// Point deltas, with `*` appended to cells significant at `alpha`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("writer_category");
        for c in &self.categories {
            let _ = write!(out, ",{}", csv_field(c));
        }
        out.push('\n');
        for (name, row) in self.categories.iter().zip(&self.cells) {
            out.push_str(&csv_field(name));
            for cell in row {
                let _ = write!(out, ",{}{}", cell.delta, if cell.significant { "*" } else { "" });
            }
            out.push('\n');
        }
        out
    }
}

/// Per-example contributions: (writer category, predicted category) counts.
struct Contribution {
    model: Vec<(usize, usize)>,
    readers: Vec<(usize, usize)>,
}

fn contributions(study: &AnnotationStudy, taxonomy: &EmotionTaxonomy) -> Vec<Contribution> {
    let cats = |labels: &[usize]| {
        let mut c: Vec<usize> = labels.iter().map(|&l| taxonomy.category_of(l)).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    (0..study.len())
        .map(|i| {
            let writer = cats(&study.writer[i]);
            let model = cats(&study.model[i]);
            let mut c = Contribution {
                model: Vec::new(),
                readers: Vec::new(),
            };
            for &w in &writer {
                c.model.extend(model.iter().map(|&m| (w, m)));
                c.readers.extend(study.readers[i].iter().map(|&r| (w, taxonomy.category_of(r))));
            }
            c
        })
        .collect()
}

fn delta_for(sample: impl Iterator<Item = usize> + Clone, contrib: &[Contribution], k: usize) -> Vec<f64> {
    let accumulate = |pick: fn(&Contribution) -> &[(usize, usize)]| {
        let mut m = vec![0.0; k * k];
        for i in sample.clone() {
            for &(r, c) in pick(&contrib[i]) {
                m[r * k + c] += 1.0;
            }
        }
        for row in m.chunks_mut(k) {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        m
    };
    let model = accumulate(|c| &c.model);
    let readers = accumulate(|c| &c.readers);
    model.iter().zip(&readers).map(|(a, b)| a - b).collect()
}

/// Bootstraps the model-minus-readers category confusion difference and
/// z-tests every cell against zero.
pub fn confusion_delta_bootstrap(study: &AnnotationStudy, taxonomy: &EmotionTaxonomy, config: &DeltaConfig) -> Result<DeltaMatrix> {
    if config.runs < 100 {
        return Err(Error::InvalidArgument(format!("bootstrap needs at least 100 runs, got {}", config.runs)));
    }
    if study.is_empty() {
        return Err(Error::InvalidArgument("annotation study is empty".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    let n = study.len();
    let sample_size = config.sample_size.unwrap_or(n);
    if sample_size == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let k = taxonomy.num_categories();
    let contrib = contributions(study, taxonomy);
    let point = delta_for(0..n, &contrib, k);
    let runs: Vec<Vec<f64>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(run as u64);
            let idx: Vec<usize> = (0..sample_size).map(|_| rng.gen_range(0..n)).collect();
            delta_for(idx.iter().copied(), &contrib, k)
        })
        .collect();
    let mut column = vec![0.0; config.runs];
    let cells = (0..k)
        .map(|r| {
            (0..k)
                .map(|c| {
                    for (slot, run) in column.iter_mut().zip(&runs) {
                        *slot = run[r * k + c];
                    }
                    let (z, p) = bootstrap_z_test(&column);
                    DeltaCell {
                        delta: point[r * k + c],
                        bootstrap_mean: mean(&column),
                        z,
                        p,
                        significant: p < config.alpha,
                    }
                })
                .collect()
        })
        .collect();
    Ok(DeltaMatrix {
        categories: taxonomy.categories().to_vec(),
        cells,
        runs: config.runs,
        sample_size,
        alpha: config.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax() -> EmotionTaxonomy {
        EmotionTaxonomy::from_groups([("A", vec!["a"]), ("B", vec!["b"]), ("C", vec!["c"])]).unwrap()
    }

    fn cfg() -> DeltaConfig {
        DeltaConfig {
            runs: 200,
            ..DeltaConfig::default()
        }
    }

    #[test]
    fn identical_inputs_give_zero() {
        let study = AnnotationStudy {
            ids: (0..6).map(|i| i.to_string()).collect(),
            writer: vec![vec![0], vec![1], vec![2], vec![0], vec![1], vec![2]],
            readers: vec![vec![1; 3], vec![2; 3], vec![0; 3], vec![0; 3], vec![1; 3], vec![2; 3]],
            model: vec![vec![1], vec![2], vec![0], vec![0], vec![1], vec![2]],
        };
        let d = confusion_delta_bootstrap(&study, &tax(), &cfg()).unwrap();
        assert_eq!(d.significant_cells(), 0);
        assert!(d.cells.iter().flatten().all(|c| c.delta == 0.0 && c.bootstrap_mean == 0.0));
    }

    #[test]
    fn planted_disagreement() {
        let n = 40;
        let study = AnnotationStudy {
            ids: (0..n).map(|i| i.to_string()).collect(),
            writer: vec![vec![2]; n],
            readers: vec![vec![1; 5]; n],
            model: vec![vec![0]; n],
        };
        let d = confusion_delta_bootstrap(&study, &tax(), &cfg()).unwrap();
        assert_eq!(d.get(2, 0).delta, 1.0);
        assert_eq!(d.get(2, 1).delta, -1.0);
        assert!(d.get(2, 0).significant && d.get(2, 0).z > 0.0);
        assert!(d.get(2, 1).significant && d.get(2, 1).z < 0.0);
        assert_eq!(d.significant_cells(), 2);
        assert!(d.to_csv().contains("C,1*,-1*,0\n"));
    }

    #[test]
    fn deterministic_and_bounded() {
        let study = AnnotationStudy {
            ids: (0..5).map(|i| i.to_string()).collect(),
            writer: vec![vec![0], vec![1, 2], vec![2], vec![0], vec![1]],
            readers: vec![vec![0, 1], vec![2, 2], vec![0, 1], vec![2, 0], vec![1, 1]],
            model: vec![vec![0, 2], vec![1], vec![], vec![0], vec![2]],
        };
        let a = confusion_delta_bootstrap(&study, &tax(), &cfg()).unwrap();
        let b = confusion_delta_bootstrap(&study, &tax(), &cfg()).unwrap();
        assert_eq!(a, b);
        assert!(a.cells.iter().flatten().all(|c| c.delta.abs() <= 1.0 && c.bootstrap_mean.abs() <= 1.0));
    }

    #[test]
    fn too_few_runs() {
        let study = AnnotationStudy {
            ids: vec!["x".into()],
            writer: vec![vec![0]],
            readers: vec![vec![0]],
            model: vec![vec![0]],
        };
        let c = DeltaConfig { runs: 10, ..cfg() };
        assert!(confusion_delta_bootstrap(&study, &tax(), &c).is_err());
    }
}
