use crate::error::{Error, Result};
use crate::family::QuasiFamily;

/// Covariates, outcomes and positive observation weights.
///
/// `x` is N×P and `y` is N×K, both row-major. For binomial and multinomial
/// outcomes the weight is the count n_i and `y` holds proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    k: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    weights: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        x: Vec<f64>,
        p: usize,
        y: Vec<f64>,
        k: usize,
        weights: Option<Vec<f64>>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("outcome dimension must be positive".into()));
        }
        if y.len() % k != 0 {
            return Err(Error::Config("outcome length is not a multiple of its dimension".into()));
        }
        let n = y.len() / k;
        if x.len() != n * p {
            return Err(Error::Config(format!(
                "covariate matrix has {} entries, expected {n}×{p}",
                x.len()
            )));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if weights.len() != n {
            return Err(Error::Config("weight vector length differs from row count".into()));
        }
        let feature_names =
            feature_names.unwrap_or_else(|| (1..=p).map(|j| format!("x{j}")).collect());
        if feature_names.len() != p {
            return Err(Error::Config("feature name count differs from column count".into()));
        }
        for i in 0..n {
            let finite = x[i * p..(i + 1) * p].iter().all(|v| v.is_finite())
                && y[i * k..(i + 1) * k].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Data { row: i, message: "non-finite value".into() });
            }
            if !(weights[i] > 0.0) || !weights[i].is_finite() {
                return Err(Error::Data { row: i, message: format!("weight {} must be positive", weights[i]) });
            }
        }
        Ok(Self { n, p, k, x, y, weights, feature_names })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn outcome(&self, i: usize) -> &[f64] {
        &self.y[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.p + j]
    }

    /// Checks that outcomes lie in the family's outcome space.
    pub fn validate_for(&self, family: &QuasiFamily) -> Result<()> {
        family.validate()?;
        if self.k != family.outcome_dim() {
            return Err(Error::Config(format!(
                "{} family expects {} outcome column(s), dataset has {}",
                family.kind(),
                family.outcome_dim(),
                self.k
            )));
        }
        for i in 0..self.n {
            let y = self.outcome(i);
            let bad = match family {
                QuasiFamily::Binomial => !(0.0..=1.0).contains(&y[0]),
                QuasiFamily::Poisson => y[0] < 0.0,
                QuasiFamily::Gamma => y[0] <= 0.0,
                QuasiFamily::Power { kappa } => y[0] < 0.0 || (*kappa >= 2.0 && y[0] == 0.0),
                QuasiFamily::Multinomial { .. } => {
                    y.iter().any(|&v| v < 0.0) || (y.iter().sum::<f64>() - 1.0).abs() > 1e-10
                }
            };
            if bad {
                let message = match family {
                    QuasiFamily::Multinomial { .. } => "outcome row is not on the probability simplex".to_string(),
                    _ => format!("outcome {:?} is outside the {} outcome space", y, family.kind()),
                };
                return Err(Error::Data { row: i, message });
            }
        }
        Ok(())
    }

    /// Row subset, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut y = Vec::with_capacity(rows.len() * self.k);
        let mut w = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend_from_slice(self.row(i));
            y.extend_from_slice(self.outcome(i));
            w.push(self.weights[i]);
        }
        Dataset {
            n: rows.len(),
            p: self.p,
            k: self.k,
            x,
            y,
            weights: w,
            feature_names: self.feature_names.clone(),
        }
    }
}
