use serde::{Deserialize, Serialize};

use super::SimError;

/// Rational transfer function in `s`, coefficients in descending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTf", into = "RawTf")]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawTf> for TransferFunction {
    type Error = SimError;
    fn try_from(r: RawTf) -> Result<Self, SimError> {
        TransferFunction::new(r.num, r.den)
    }
}

impl From<TransferFunction> for RawTf {
    fn from(t: TransferFunction) -> Self {
        RawTf {
            num: t.num,
            den: t.den,
        }
    }
}

fn strip_leading_zeros(mut p: Vec<f64>) -> Vec<f64> {
    let first = p
        .iter()
        .position(|c| *c != 0.0)
        .unwrap_or(p.len().saturating_sub(1));
    p.drain(..first);
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, x) in a.iter().rev().enumerate() {
        out[n - 1 - i] += x;
    }
    for (i, x) in b.iter().rev().enumerate() {
        out[n - 1 - i] += x;
    }
    out
}

fn poly_at_zero(p: &[f64]) -> f64 {
    *p.last().expect("polynomials are never empty")
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, SimError> {
        if num.is_empty() || den.is_empty() {
            return Err(SimError::InvalidTransferFunction(
                "empty coefficient list".into(),
            ));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(SimError::InvalidTransferFunction(
                "non-finite coefficient".into(),
            ));
        }
        let num = strip_leading_zeros(num);
        let den = strip_leading_zeros(den);
        if den[0] == 0.0 {
            return Err(SimError::InvalidTransferFunction(
                "denominator is identically zero".into(),
            ));
        }
        if num.len() > den.len() && !(num.len() == 1 && num[0] == 0.0) {
            return Err(SimError::InvalidTransferFunction(format!(
                "improper: numerator degree {} exceeds denominator degree {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        Ok(Self { num, den })
    }

    pub fn gain(k: f64) -> Self {
        Self::new(vec![k], vec![1.0]).expect("constant gain is proper")
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    /// `num(0) / den(0)`, or `None` for a pole at the origin.
    pub fn dc_gain(&self) -> Option<f64> {
        let d0 = poly_at_zero(&self.den);
        (d0 != 0.0).then(|| poly_at_zero(&self.num) / d0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.num.iter().map(|c| c * k).collect(), self.den.clone())
            .expect("scaling keeps properness")
    }

    pub fn series(&self, other: &TransferFunction) -> Result<Self, SimError> {
        Self::new(
            poly_mul(&self.num, &other.num),
            poly_mul(&self.den, &other.den),
        )
    }

    /// Unity negative feedback around `self`: `L / (1 + L)`.
    pub fn unity_feedback(&self) -> Result<Self, SimError> {
        Self::new(self.num.clone(), poly_add(&self.den, &self.num))
    }

    /// Closed loop of a controller `c_num / c_den` (which may be improper,
    /// e.g. a PD law) in series with `plant`, under unity feedback.
    pub fn closed_loop(
        c_num: &[f64],
        c_den: &[f64],
        plant: &TransferFunction,
    ) -> Result<Self, SimError> {
        let l_num = poly_mul(c_num, &plant.num);
        let l_den = poly_mul(c_den, &plant.den);
        Self::new(l_num.clone(), poly_add(&l_den, &l_num))
    }

    pub fn eval_real(&self, s: f64) -> f64 {
        let horner = |p: &[f64]| p.iter().fold(0.0, |acc, c| acc * s + c);
        horner(&self.num) / horner(&self.den)
    }
}

/// Controllable canonical state-space realization of a proper transfer
/// function, normalized so the denominator is monic.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    /// Companion-row coefficients `a_0 .. a_{n-1}` of the monic denominator.
    pub alpha: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn controllable_canonical(tf: &TransferFunction) -> Self {
        let lead = tf.den[0];
        let n = tf.order();
        let den: Vec<f64> = tf.den.iter().map(|v| v / lead).collect();
        let mut num = vec![0.0; n + 1];
        let offset = n + 1 - tf.num.len();
        for (i, v) in tf.num.iter().enumerate() {
            num[offset + i] = v / lead;
        }
        // ascending order
        let alpha: Vec<f64> = den[1..].iter().rev().copied().collect();
        let beta: Vec<f64> = num.iter().rev().copied().collect();
        let d = beta[n];
        let c = (0..n).map(|i| beta[i] - alpha[i] * d).collect();
        Self { alpha, c, d }
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn derivative(&self, x: &[f64], u: f64, out: &mut [f64]) {
        let n = self.order();
        if n > 1 {
            out[..n - 1].copy_from_slice(&x[1..n]);
        }
        if n > 0 {
            let feedback: f64 = self.alpha.iter().zip(x).map(|(a, xi)| a * xi).sum();
            out[n - 1] = u - feedback;
        }
    }

    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        self.c.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>() + self.d * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_improper_and_degenerate() {
        assert!(TransferFunction::new(vec![1.0, 0.0], vec![1.0]).is_err());
        assert!(TransferFunction::new(vec![1.0], vec![0.0]).is_err());
        assert!(TransferFunction::new(vec![], vec![1.0]).is_err());
        assert!(TransferFunction::new(vec![f64::NAN], vec![1.0]).is_err());
        // leading zeros are not degree
        let t = TransferFunction::new(vec![0.0, 0.0, 2.0], vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(t.numerator(), &[2.0]);
        assert_eq!(t.order(), 1);
    }

    #[test]
    fn feedback_around_proper_loop() {
        let l = TransferFunction::new(vec![2.0], vec![1.0, 1.0]).unwrap();
        let t = l.unity_feedback().unwrap();
        assert_eq!(t.denominator(), &[1.0, 3.0]);
        assert_eq!(t.dc_gain(), Some(2.0 / 3.0));
        let pid = TransferFunction::closed_loop(&[1.0, 2.0, 3.0], &[1.0, 0.0], &l).unwrap();
        assert_eq!(pid.numerator(), &[2.0, 4.0, 6.0]);
        assert_eq!(pid.denominator(), &[3.0, 5.0, 6.0]);
    }

    #[test]
    fn dc_gain() {
        let t = TransferFunction::new(vec![2.0], vec![1.0, 4.0]).unwrap();
        assert_eq!(t.dc_gain(), Some(0.5));
        let integ = TransferFunction::new(vec![1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(integ.dc_gain(), None);
    }

    #[test]
    fn closed_loop_pd_around_second_order() {
        let plant = TransferFunction::new(vec![1.0], vec![1.0, 0.6, 1.0]).unwrap();
        let t = TransferFunction::closed_loop(&[3.0, 5.0], &[1.0], &plant).unwrap();
        assert_eq!(t.numerator(), &[3.0, 5.0]);
        assert_eq!(t.denominator(), &[1.0, 3.6, 6.0]);
    }

    #[test]
    fn realization_matches_transfer_function_at_dc() {
        let t = TransferFunction::new(vec![2.0, 3.0, 1.0], vec![4.0, 2.0, 8.0]).unwrap();
        let ss = StateSpace::controllable_canonical(&t);
        // steady state for u = 1: x = [1/a0, 0, ...]
        let x = [1.0 / ss.alpha[0], 0.0];
        let mut dx = [0.0; 2];
        ss.derivative(&x, 1.0, &mut dx);
        assert_eq!(dx, [0.0, 0.0]);
        assert!((ss.output(&x, 1.0) - t.dc_gain().unwrap()).abs() < 1e-12);
        assert_eq!(ss.d, 0.5);
    }
}
