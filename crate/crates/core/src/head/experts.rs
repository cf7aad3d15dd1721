use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VeError};
use crate::numeric::{Matrix, Parameters, Scalar};

/// `k` candidate projections of shape `H × (D+1)`, stored whole or as `A_i B_i`
/// with `A_i: H × r` and `B_i: r × (D+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(rename_all = "snake_case")]
pub enum ExpertBank<S> {
    Full { experts: Vec<Matrix<S>> },
    LowRank { a: Vec<Matrix<S>>, b: Vec<Matrix<S>> },
}

pub(crate) fn uniform_matrix<S: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Matrix<S> {
    let mut parts = [0.0; 2];
    Matrix::from_fn(rows, cols, |_, _| {
        for p in parts.iter_mut().take(S::REAL_PARTS) {
            *p = rng.random_range(-bound..=bound);
        }
        S::from_parts(&parts[..S::REAL_PARTS])
    })
}

impl<S: Scalar> ExpertBank<S> {
    pub fn full(experts: Vec<Matrix<S>>) -> Result<Self> {
        let bank = ExpertBank::Full { experts };
        bank.validate()?;
        Ok(bank)
    }

    pub fn low_rank(a: Vec<Matrix<S>>, b: Vec<Matrix<S>>) -> Result<Self> {
        let bank = ExpertBank::LowRank { a, b };
        bank.validate()?;
        Ok(bank)
    }

    /// Uniform `±1/sqrt(fan_in)` initialization; factors are both random
    /// because experts are trained from scratch.
    pub fn init<R: Rng + ?Sized>(
        experts: usize,
        input_dim: usize,
        horizon: usize,
        rank: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let d1 = input_dim + 1;
        match rank {
            None => {
                let bound = 1.0 / (d1 as f64).sqrt();
                ExpertBank::Full {
                    experts: (0..experts).map(|_| uniform_matrix(horizon, d1, bound, rng)).collect(),
                }
            }
            Some(r) => {
                let (mut a, mut b) = (Vec::with_capacity(experts), Vec::with_capacity(experts));
                for _ in 0..experts {
                    a.push(uniform_matrix(horizon, r, 1.0 / (r as f64).sqrt(), rng));
                    b.push(uniform_matrix(r, d1, 1.0 / (d1 as f64).sqrt(), rng));
                }
                ExpertBank::LowRank { a, b }
            }
        }
    }

    pub fn experts(&self) -> usize {
        match self {
            ExpertBank::Full { experts } => experts.len(),
            ExpertBank::LowRank { a, .. } => a.len(),
        }
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            ExpertBank::Full { .. } => None,
            ExpertBank::LowRank { a, .. } => a.first().map(Matrix::cols),
        }
    }

    /// `(H, D+1)` shared by every expert.
    pub fn expert_shape(&self) -> (usize, usize) {
        match self {
            ExpertBank::Full { experts } => experts.first().map_or((0, 0), Matrix::shape),
            ExpertBank::LowRank { a, b } => (
                a.first().map_or(0, Matrix::rows),
                b.first().map_or(0, Matrix::cols),
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExpertBank::Full { experts } => {
                let shape = experts
                    .first()
                    .map(Matrix::shape)
                    .ok_or_else(|| VeError::Config("expert bank is empty".into()))?;
                if experts.iter().any(|e| e.shape() != shape) {
                    return Err(VeError::shape("experts differ in shape"));
                }
            }
            ExpertBank::LowRank { a, b } => {
                if a.is_empty() || a.len() != b.len() {
                    return Err(VeError::Config(format!("{} A factors and {} B factors", a.len(), b.len())));
                }
                let (sa, sb) = (a[0].shape(), b[0].shape());
                if sa.1 == 0 || sa.1 != sb.0 {
                    return Err(VeError::shape(format!("factor shapes {sa:?} and {sb:?} do not compose")));
                }
                if a.iter().any(|m| m.shape() != sa) || b.iter().any(|m| m.shape() != sb) {
                    return Err(VeError::shape("factors differ in shape"));
                }
            }
        }
        Ok(())
    }

    /// Same-shaped bank of zeros, used to hold gradients.
    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<Matrix<S>>| v.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
        match self {
            ExpertBank::Full { experts } => ExpertBank::Full { experts: z(experts) },
            ExpertBank::LowRank { a, b } => ExpertBank::LowRank { a: z(a), b: z(b) },
        }
    }

    /// Gradient with respect to the stored tensors given gradients with
    /// respect to the composed experts.
    pub(crate) fn backward(&self, expert_grads: Vec<Matrix<S>>) -> Result<Self> {
        match self {
            ExpertBank::Full { .. } => Ok(ExpertBank::Full { experts: expert_grads }),
            ExpertBank::LowRank { a, b } => {
                let mut ga = Vec::with_capacity(a.len());
                let mut gb = Vec::with_capacity(b.len());
                for ((ai, bi), gp) in a.iter().zip(b).zip(&expert_grads) {
                    ga.push(gp.matmul_adjoint_right(bi)?);
                    gb.push(ai.matmul_adjoint_left(gp)?);
                }
                Ok(ExpertBank::LowRank { a: ga, b: gb })
            }
        }
    }
}

/// The experts `P_i` as dense matrices: stored ones, or `A_i B_i`.
pub fn compose_experts<S: Scalar>(bank: &ExpertBank<S>) -> Vec<Matrix<S>> {
    match bank {
        ExpertBank::Full { experts } => experts.clone(),
        ExpertBank::LowRank { a, b } => a
            .iter()
            .zip(b)
            .map(|(ai, bi)| ai.matmul(bi).expect("validated factor shapes"))
            .collect(),
    }
}

impl<S: Scalar> Parameters for ExpertBank<S> {
    fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            ExpertBank::Full { experts } => experts.write_params(out),
            ExpertBank::LowRank { a, b } => {
                for (ai, bi) in a.iter().zip(b) {
                    ai.write_params(out);
                    bi.write_params(out);
                }
            }
        }
    }

    fn read_params(&mut self, src: &mut &[f64]) -> Result<()> {
        match self {
            ExpertBank::Full { experts } => experts.read_params(src),
            ExpertBank::LowRank { a, b } => {
                for (ai, bi) in a.iter_mut().zip(b.iter_mut()) {
                    ai.read_params(src)?;
                    bi.read_params(src)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RealMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_outer_product() {
        let a = RealMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let b = RealMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let bank = ExpertBank::low_rank(vec![a], vec![b]).unwrap();
        let p = compose_experts(&bank);
        assert_eq!(p[0].as_slice(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn full_mode_is_passthrough() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bank: ExpertBank<f64> = ExpertBank::init(3, 4, 2, None, &mut rng);
        let ExpertBank::Full { experts } = &bank else { unreachable!() };
        assert_eq!(&compose_experts(&bank), experts);
    }

    /// Full-rank factorization by Gaussian elimination (`P = L U` with partial
    /// pivoting folded into `L`), independent of the bank code.
    fn factor_full_rank(p: &RealMatrix) -> (RealMatrix, RealMatrix) {
        let (h, w) = p.shape();
        let r = h.min(w);
        let mut u = p.clone();
        let mut l = RealMatrix::zeros(h, r);
        let mut rows: Vec<usize> = (0..h).collect();
        for col in 0..r {
            let piv = (col..h)
                .max_by(|&x, &y| u.get(rows[x], col).abs().total_cmp(&u.get(rows[y], col).abs()))
                .unwrap();
            rows.swap(col, piv);
            let pr = rows[col];
            let pv = u.get(pr, col);
            l.set(pr, col, 1.0);
            for &ri in &rows[col + 1..] {
                let f = u.get(ri, col) / pv;
                l.set(ri, col, f);
                for j in 0..w {
                    u.set(ri, j, u.get(ri, j) - f * u.get(pr, j));
                }
            }
        }
        let upper = RealMatrix::from_fn(r, w, |i, j| u.get(rows[i], j));
        (l, upper)
    }

    #[test]
    fn full_rank_factorization_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (h, w) in [(3usize, 5usize), (5, 3), (4, 4)] {
            let p: RealMatrix = uniform_matrix(h, w, 1.0, &mut rng);
            let (a, b) = factor_full_rank(&p);
            assert_eq!(a.cols(), h.min(w));
            let bank = ExpertBank::low_rank(vec![a], vec![b]).unwrap();
            assert!(compose_experts(&bank)[0].max_abs_diff(&p) <= 1e-10);
        }
    }

    #[test]
    fn malformed_banks_rejected() {
        let a = RealMatrix::zeros(2, 2);
        let b = RealMatrix::zeros(3, 4);
        assert!(ExpertBank::low_rank(vec![a.clone()], vec![b]).is_err());
        assert!(ExpertBank::full(vec![a, RealMatrix::zeros(2, 3)]).is_err());
        assert!(ExpertBank::<f64>::full(vec![]).is_err());
    }
}
