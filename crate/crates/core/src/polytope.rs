//! Polytopes `{θ : Aθ ≤ b}` with a declared enclosing radius and an interior
//! witness.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedTree};
use crate::sparsela::SparseMatrix;

pub const L1_BALL_MAX_DIM: usize = 16;

#[derive(Debug, Clone)]
pub struct Polytope {
    a: Arc<SparseMatrix>,
    b: Vec<f64>,
    radius: f64,
    witness: Vec<f64>,
    augmented: Arc<SparseMatrix>,
}

/// On-disk layout. Field order is the serialization order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeFile {
    pub d: usize,
    pub m: usize,
    pub coo: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    pub witness: Vec<f64>,
}

impl Polytope {
    pub fn new(a: SparseMatrix, b: Vec<f64>, radius: f64, witness: Vec<f64>) -> Result<Self> {
        let (m, d) = (a.n_rows(), a.n_cols());
        if d == 0 {
            return Err(Error::InvalidPolytope("dimension must be at least 1".into()));
        }
        if b.len() != m {
            return Err(Error::InvalidPolytope(format!(
                "b has length {}, expected m = {m}",
                b.len()
            )));
        }
        if witness.len() != d {
            return Err(Error::InvalidPolytope(format!(
                "witness has length {}, expected d = {d}",
                witness.len()
            )));
        }
        if b.iter().chain(&witness).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolytope("non-finite entry in b or witness".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidPolytope(format!("R = {radius} must be positive")));
        }
        let wnorm = witness.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wnorm > radius * (1.0 + 1e-12) {
            return Err(Error::InvalidPolytope(format!(
                "witness norm {wnorm} exceeds R = {radius}"
            )));
        }
        let augmented = Arc::new(a.vstack(&SparseMatrix::identity(d))?);
        let p = Self {
            a: Arc::new(a),
            b,
            radius,
            witness,
            augmented,
        };
        if let Some((row, s)) = p
            .slack(&p.witness)?
            .into_iter()
            .enumerate()
            .find(|(_, s)| !(*s > 0.0))
        {
            return Err(Error::InvalidPolytope(format!(
                "witness is not interior: slack {s} at row {row}"
            )));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.a.n_cols()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.n_rows()
    }

    pub fn a(&self) -> &Arc<SparseMatrix> {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    /// `Â = [A; I_d]`.
    pub fn augmented(&self) -> &Arc<SparseMatrix> {
        &self.augmented
    }

    /// `s = b − Aθ`.
    pub fn slack(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let ax = self.a.matvec(theta)?;
        Ok(self.b.iter().zip(ax).map(|(b, y)| b - y).collect())
    }

    pub fn contains_interior(&self, theta: &[f64]) -> Result<bool> {
        Ok(self.slack(theta)?.iter().all(|&s| s > 0.0))
    }

    pub fn to_file(&self) -> PolytopeFile {
        PolytopeFile {
            d: self.dim(),
            m: self.n_constraints(),
            coo: self.a.triplets(),
            b: self.b.clone(),
            r: self.radius,
            witness: self.witness.clone(),
        }
    }

    pub fn from_file(file: &PolytopeFile) -> Result<Self> {
        let a = SparseMatrix::from_triplets(file.m, file.d, &file.coo)
            .map_err(|e| Error::InvalidPolytope(e.to_string()))?;
        Self::new(a, file.b.clone(), file.r, file.witness.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolytopeFile =
            serde_json::from_str(text).map_err(|e| Error::json("<polytope>", e))?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: PolytopeFile =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_file(&file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file())
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPolytope(format!("{name} = {v} must be positive")))
    }
}

/// `[-h, h]^d` with rows ordered `+e₁, −e₁, +e₂, −e₂, ...`.
pub fn build_hypercube(d: usize, half_width: f64) -> Result<Polytope> {
    check_positive("half_width", half_width)?;
    let trip: Vec<_> = (0..d)
        .flat_map(|j| [(2 * j, j, 1.0), (2 * j + 1, j, -1.0)])
        .collect();
    let a = SparseMatrix::from_triplets(2 * d, d, &trip)?;
    Polytope::new(
        a,
        vec![half_width; 2 * d],
        half_width * (d as f64).sqrt(),
        vec![0.0; d],
    )
}

/// `{θ ≥ 0, Σθ ≤ 1}`; the witness is `1/(d+2)` in every coordinate.
pub fn build_simplex(d: usize) -> Result<Polytope> {
    let mut trip: Vec<_> = (0..d).map(|j| (j, j, -1.0)).collect();
    trip.extend((0..d).map(|j| (d, j, 1.0)));
    let a = SparseMatrix::from_triplets(d + 1, d, &trip)?;
    let mut b = vec![0.0; d + 1];
    b[d] = 1.0;
    Polytope::new(a, b, 1.0, vec![1.0 / (d as f64 + 2.0); d])
}

/// `{‖θ‖₁ ≤ radius}` written as all `2^d` sign constraints.
pub fn build_l1_ball(d: usize, radius: f64) -> Result<Polytope> {
    if d > L1_BALL_MAX_DIM {
        return Err(Error::UnsupportedDimension {
            d,
            max: L1_BALL_MAX_DIM,
        });
    }
    check_positive("radius", radius)?;
    let m = 1usize << d;
    let trip: Vec<_> = (0..m)
        .flat_map(|mask| {
            (0..d).map(move |j| (mask, j, if mask >> j & 1 == 1 { -1.0 } else { 1.0 }))
        })
        .collect();
    let a = SparseMatrix::from_triplets(m, d, &trip)?;
    Polytope::new(a, vec![radius; m], radius, vec![0.0; d])
}

/// Sparse benchmark instance with `m = 4d`: the box `[-1, 1]^d` plus `2d`
/// random rows with three nonzeros each, offsets drawn so the origin is
/// interior.
pub fn build_sparse_random(d: usize, seed: u64) -> Result<Polytope> {
    if d < 3 {
        return Err(Error::InvalidPolytope(format!(
            "sparse random polytope needs d >= 3, got {d}"
        )));
    }
    let mut rng = SeedTree::new(seed).stream(0, Purpose::Instance, d as u64);
    let mut trip: Vec<_> = (0..d)
        .flat_map(|j| [(2 * j, j, 1.0), (2 * j + 1, j, -1.0)])
        .collect();
    let mut b = vec![1.0; 2 * d];
    for i in 0..2 * d {
        let mut cols: Vec<usize> = Vec::with_capacity(3);
        while cols.len() < 3 {
            let c = rng.random_range(0..d);
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        let mut l1 = 0.0;
        for c in cols {
            let v: f64 = rng.random_range(-1.0..1.0);
            l1 += v.abs();
            trip.push((2 * d + i, c, v));
        }
        b.push(l1 * rng.random_range(0.3..0.9));
    }
    let a = SparseMatrix::from_triplets(4 * d, d, &trip)?;
    Polytope::new(a, b, (d as f64).sqrt(), vec![0.0; d])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercube_slack_and_membership() {
        let p = build_hypercube(2, 1.0).unwrap();
        assert_eq!(p.slack(&[0.0, 0.0]).unwrap(), vec![1.0; 4]);
        assert_eq!(p.slack(&[1.0, 0.0]).unwrap()[0], 0.0);
        assert!(p.contains_interior(p.witness()).unwrap());
        assert!(!p.contains_interior(&[1.0, 0.0]).unwrap());
        assert!(!p.contains_interior(&[2.0, 0.0]).unwrap());
        assert_eq!(
            p.a().to_dense(),
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0]
            ]
        );
        assert_eq!(p.b(), &[1.0; 4]);
        assert_eq!(p.a().nnz(), 4);
    }

    #[test]
    fn simplex_shape() {
        let p = build_simplex(2).unwrap();
        assert_eq!(p.n_constraints(), 3);
        assert_eq!(p.witness(), &[0.25, 0.25]);
        assert!(p.contains_interior(&[0.3, 0.3]).unwrap());
        assert!(!p.contains_interior(&[0.6, 0.6]).unwrap());
        assert!(!p.contains_interior(&[-0.1, 0.3]).unwrap());
    }

    #[test]
    fn l1_ball_shape_and_guard() {
        let p = build_l1_ball(2, 1.0).unwrap();
        assert_eq!(p.n_constraints(), 4);
        let mut rows = p.a().to_dense();
        rows.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(
            rows,
            vec![
                vec![-1.0, -1.0],
                vec![-1.0, 1.0],
                vec![1.0, -1.0],
                vec![1.0, 1.0]
            ]
        );
        assert!(matches!(
            build_l1_ball(17, 1.0),
            Err(Error::UnsupportedDimension { d: 17, max: 16 })
        ));
    }

    #[test]
    fn augmented_stacks_identity() {
        let p = Polytope::new(
            SparseMatrix::identity(2),
            vec![1.0, 1.0],
            2.0,
            vec![0.0, 0.0],
        )
        .unwrap();
        let aug = p.augmented();
        assert_eq!(aug.n_rows(), 4);
        assert_eq!(aug.nnz(), p.a().nnz() + 2);
        assert_eq!(
            aug.to_dense(),
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0]
            ]
        );
    }

    #[test]
    fn augmented_full_rank_for_rank_deficient_a() {
        use crate::sparsela::{factor, gram, DiagWeights};
        // both rows constrain only θ₁
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let p = Polytope::new(a, vec![1.0, 1.0], 5.0, vec![0.0, 0.0]).unwrap();
        let g = gram(p.augmented(), &DiagWeights::ones(4)).unwrap();
        assert!(factor(&g).is_ok());
    }

    #[test]
    fn invariants_checked_at_construction() {
        let a = SparseMatrix::identity(1);
        assert!(Polytope::new(a.clone(), vec![1.0], 1.0, vec![1.0]).is_err());
        assert!(Polytope::new(a.clone(), vec![1.0], 0.1, vec![0.5]).is_err());
        assert!(Polytope::new(a.clone(), vec![1.0, 2.0], 1.0, vec![0.0]).is_err());
        assert!(Polytope::new(a, vec![1.0], -1.0, vec![0.0]).is_err());
    }

    #[test]
    fn json_round_trip_and_duplicates() {
        let p = build_simplex(3).unwrap();
        let text = serde_json::to_string(&p.to_file()).unwrap();
        assert!(text.starts_with("{\"d\":3,\"m\":4,\"coo\":"));
        let q = Polytope::from_json(&text).unwrap();
        assert_eq!(q.a().as_ref(), p.a().as_ref());
        assert_eq!(q.b(), p.b());
        let dup = r#"{"d":1,"m":1,"coo":[[0,0,1.0],[0,0,2.0]],"b":[1.0],"R":1.0,"witness":[0.0]}"#;
        let err = Polytope::from_json(dup).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn sparse_random_shape() {
        let p = build_sparse_random(50, 3).unwrap();
        assert_eq!(p.n_constraints(), 200);
        assert_eq!(p.a().nnz(), 100 + 300);
        assert!(p.contains_interior(&vec![0.0; 50]).unwrap());
        let q = build_sparse_random(50, 3).unwrap();
        assert_eq!(p.a().as_ref(), q.a().as_ref());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn slack_is_affine(
                entries in proptest::collection::vec(-5i32..5, 12),
                b in proptest::collection::vec(1i32..10, 4),
                x in proptest::collection::vec(-8i32..8, 3),
                y in proptest::collection::vec(-8i32..8, 3),
            ) {
                let rows: Vec<Vec<f64>> = entries.chunks(3).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
                let a = SparseMatrix::from_dense(&rows).unwrap();
                let p = Polytope::new(a.clone(), b.iter().map(|&v| v as f64).collect(), 1.0, vec![0.0; 3]).unwrap();
                let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
                let sx = p.slack(&xf).unwrap();
                let sy = p.slack(&yf).unwrap();
                let diff: Vec<f64> = xf.iter().zip(&yf).map(|(a, b)| a - b).collect();
                let ad = a.matvec(&diff).unwrap();
                for i in 0..4 {
                    // small integers: every operation is exact
                    prop_assert_eq!(sx[i] - sy[i], -ad[i]);
                }
            }

            #[test]
            fn builder_witnesses_are_interior(d in 1usize..9, h in 0.1f64..5.0) {
                for p in [build_hypercube(d, h).unwrap(), build_simplex(d).unwrap(), build_l1_ball(d, h).unwrap()] {
                    prop_assert!(p.contains_interior(p.witness()).unwrap());
                    let n = p.witness().iter().map(|v| v * v).sum::<f64>().sqrt();
                    prop_assert!(n <= p.radius());
                }
            }
        }
    }
}
