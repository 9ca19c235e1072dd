use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `forward(x) = V σ(W x) + (v′ᵀx)·1`, with `σ = max(0, ·)` coordinatewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetJson", into = "NetJson")]
pub struct TwoLayerNet {
    w: DMatrix<f64>,
    v: DMatrix<f64>,
    v_prime: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetJson {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_prime: Option<Vec<f64>>,
}

impl TryFrom<NetJson> for TwoLayerNet {
    type Error = Error;
    fn try_from(j: NetJson) -> Result<Self> {
        let n = j.w.first().map_or_else(|| j.v_prime.as_ref().map_or(0, Vec::len), Vec::len);
        let k = j.w.len();
        if j.w.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("ragged W"));
        }
        if j.v.is_empty() || j.v.iter().any(|r| r.len() != k) {
            return Err(Error::invalid(format!("V must have at least one row of length k = {k}")));
        }
        let w = DMatrix::from_row_iterator(k, n, j.w.into_iter().flatten());
        let c = j.v.len();
        let v = DMatrix::from_row_iterator(c, k, j.v.into_iter().flatten());
        let v_prime = DVector::from_vec(j.v_prime.unwrap_or_else(|| vec![0.0; n]));
        TwoLayerNet::new(w, v, v_prime)
    }
}

impl From<TwoLayerNet> for NetJson {
    fn from(net: TwoLayerNet) -> Self {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        NetJson {
            w: rows(&net.w),
            v: rows(&net.v),
            v_prime: Some(net.v_prime.iter().copied().collect()),
        }
    }
}

impl TwoLayerNet {
    pub fn new(w: DMatrix<f64>, v: DMatrix<f64>, v_prime: DVector<f64>) -> Result<Self> {
        Error::check_dim(w.nrows(), v.ncols())?;
        Error::check_dim(w.ncols(), v_prime.len())?;
        if v.nrows() == 0 {
            return Err(Error::invalid("network needs at least one output"));
        }
        Ok(TwoLayerNet { w, v, v_prime })
    }

    /// Single-output network `vᵀσ(Wx) + v′ᵀx`.
    pub fn binary(w: DMatrix<f64>, v: &[f64], v_prime: &[f64]) -> Result<Self> {
        let vm = DMatrix::from_row_slice(1, v.len(), v);
        TwoLayerNet::new(w, vm, DVector::from_column_slice(v_prime))
    }

    pub fn n(&self) -> usize {
        self.w.ncols()
    }

    pub fn k(&self) -> usize {
        self.w.nrows()
    }

    pub fn classes(&self) -> usize {
        self.v.nrows()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn v_prime(&self) -> &DVector<f64> {
        &self.v_prime
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n(), x.len())?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let h = hidden(&self.w, x);
        let lin: f64 = self.v_prime.iter().zip(x).map(|(a, b)| a * b).sum();
        (0..self.classes())
            .map(|c| self.v.row(c).iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + lin)
            .collect()
    }

    /// Index of the largest output, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let out = self.forward(x)?;
        Ok(argmax(&out))
    }

    /// The scalar network deciding between classes `i` and `j`: `V_i − V_j`
    /// for multi-output nets (the shared `v′` term cancels), the net itself
    /// when there is one output.
    pub fn pairwise(&self, pair: Option<(usize, usize)>) -> Result<BinaryNet> {
        if self.classes() == 1 {
            return Ok(BinaryNet {
                w: self.w.clone(),
                v: self.v.row(0).transpose(),
                v_prime: self.v_prime.clone(),
            });
        }
        let (i, j) = pair.ok_or_else(|| Error::invalid("multi-output net needs a class pair"))?;
        if i >= self.classes() || j >= self.classes() || i == j {
            return Err(Error::invalid(format!("bad class pair ({i}, {j})")));
        }
        Ok(BinaryNet {
            w: self.w.clone(),
            v: (self.v.row(i) - self.v.row(j)).transpose(),
            v_prime: DVector::zeros(self.n()),
        })
    }
}

/// `f(x) = vᵀσ(Wx) + v′ᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryNet {
    pub w: DMatrix<f64>,
    pub v: DVector<f64>,
    pub v_prime: DVector<f64>,
}

impl BinaryNet {
    pub fn n(&self) -> usize {
        self.w.ncols()
    }

    pub fn k(&self) -> usize {
        self.w.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let h = hidden(&self.w, x);
        self.v.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + self.v_prime.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// A subgradient, taking `σ′(0) = 0`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = self.v_prime.iter().copied().collect();
        for j in 0..self.k() {
            let pre: f64 = self.w.row(j).iter().zip(x).map(|(a, b)| a * b).sum();
            if pre > 0.0 {
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi += self.v[j] * self.w[(j, i)];
                }
            }
        }
        g
    }

    /// `δ·Σ|v_j|·‖W_j‖₁ + δ·‖v′‖₁`, a bound on how much `f` moves over the
    /// δ-box.
    pub fn scale(&self, delta: f64) -> f64 {
        let hidden: f64 = (0..self.k()).map(|j| self.v[j].abs() * self.w.row(j).iter().map(|a| a.abs()).sum::<f64>()).sum();
        delta * (hidden + self.v_prime.iter().map(|a| a.abs()).sum::<f64>())
    }
}

fn hidden(w: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..w.nrows())
        .map(|j| w.row(j).iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0))
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `(argmax, second argmax)` of `forward(x*)`, ties to the lowest index.
pub fn target_second_best(net: &TwoLayerNet, x_star: &[f64]) -> Result<(usize, usize)> {
    if net.classes() < 2 {
        return Err(Error::invalid("second-best targeting needs at least two outputs"));
    }
    let out = net.forward(x_star)?;
    let i = argmax(&out);
    let mut j = if i == 0 { 1 } else { 0 };
    for (c, &x) in out.iter().enumerate() {
        if c != i && x > out[j] {
            j = c;
        }
    }
    Ok((i, j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out_net(outputs: &[f64]) -> TwoLayerNet {
        // one hidden unit fixed at 1 via x = 1
        let w = DMatrix::from_row_slice(1, 1, &[1.0]);
        let v = DMatrix::from_column_slice(outputs.len(), 1, outputs);
        TwoLayerNet::new(w, v, DVector::zeros(1)).unwrap()
    }

    #[test]
    fn second_best_examples() {
        assert_eq!(target_second_best(&out_net(&[3.0, 1.0, 2.0]), &[1.0]).unwrap(), (0, 2));
        assert_eq!(target_second_best(&out_net(&[2.0, 2.0]), &[1.0]).unwrap(), (0, 1));
        assert_eq!(target_second_best(&out_net(&[-1.0, 4.0]), &[1.0]).unwrap(), (1, 0));
    }

    #[test]
    fn json_roundtrip() {
        let s = r#"{"W":[[1.0,0.0],[0.0,1.0]],"V":[[1.0,-1.0]],"v_prime":[0.5,0.0]}"#;
        let net: TwoLayerNet = serde_json::from_str(s).unwrap();
        assert_eq!(net.forward(&[2.0, -2.0]).unwrap(), vec![3.0]);
        assert_eq!(serde_json::to_string(&net).unwrap(), s);
        let no_linear: TwoLayerNet = serde_json::from_str(r#"{"W":[[1.0]],"V":[[2.0]]}"#).unwrap();
        assert_eq!(no_linear.forward(&[-1.0]).unwrap(), vec![0.0]);
        assert!(serde_json::from_str::<TwoLayerNet>(r#"{"W":[[1.0]],"V":[[2.0, 1.0]]}"#).is_err());
    }

    #[test]
    fn pairwise_difference() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let net = TwoLayerNet::new(w, v, DVector::from_vec(vec![0.3, -0.2])).unwrap();
        let b = net.pairwise(Some((0, 2))).unwrap();
        let x = [0.7, 1.9];
        let out = net.forward(&x).unwrap();
        assert!((b.eval(&x) - (out[0] - out[2])).abs() < 1e-15);
    }

    #[test]
    fn subgradient_at_kink_is_zero() {
        let net = TwoLayerNet::binary(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), &[2.0], &[0.0, 0.0]).unwrap();
        let b = net.pairwise(None).unwrap();
        assert_eq!(b.gradient(&[1.0, 1.0]), vec![0.0, 0.0]);
        assert_eq!(b.gradient(&[2.0, 1.0]), vec![2.0, -2.0]);
    }
}
