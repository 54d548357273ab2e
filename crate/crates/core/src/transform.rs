//! Transformation matrices between attribute vectors.
//!
//! For a source point `a` and target `b` there are infinitely many `Δ` with
//! `Δ·a = b`. [`fit_linear`] returns the one closest to the identity, the
//! rank-one update `Id + (b − a)·aᵀ / (aᵀa)`, whose distance from the identity
//! is `‖b − a‖ / ‖a‖`. [`fit_quadratic`] instead matches quadratic forms with
//! a scaled identity. The simpler of the two is what a pair of versions is
//! judged by.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize, Serializer};

use crate::embedding::Cluster;

/// Below this source norm no fit is attempted.
pub const DEGENERACY_ETA: f64 = 1e-9;
pub const DEFAULT_MISSING_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: String, right: String },
    #[error("versions {0} and {1} share no attribute group")]
    NoOverlap(String, String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = c;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        self.data.chunks(self.cols).map(|row| dot(row, x)).collect()
    }

    fn shape(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `sqrt(trace((A − B)(A − B)ᵀ))`, i.e. the Euclidean norm of the entrywise
/// difference.
pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64, TransformError> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(TransformError::Dimension { left: a.shape(), right: b.shape() });
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformFit {
    pub kind: TransformKind,
    pub delta: Matrix,
    pub residual: f64,
    /// `‖Δ − Id‖_F`, or +∞ when the source is degenerate.
    #[serde(serialize_with = "finite_or_null")]
    pub complexity: f64,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

impl TransformFit {
    pub fn is_feasible(&self) -> bool {
        self.complexity.is_finite()
    }

    fn infeasible(kind: TransformKind, d: usize) -> Self {
        Self { kind, delta: Matrix::identity(d), residual: f64::INFINITY, complexity: f64::INFINITY }
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), TransformError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(TransformError::Dimension { left: a.len().to_string(), right: b.len().to_string() });
    }
    Ok(())
}

/// The `Δ` with `Δ·a = b` nearest the identity in Frobenius norm.
pub fn fit_linear(a: &[f64], b: &[f64]) -> Result<TransformFit, TransformError> {
    check_lengths(a, b)?;
    let d = a.len();
    let aa = dot(a, a);
    if aa.sqrt() < DEGENERACY_ETA {
        return Ok(TransformFit::infeasible(TransformKind::Linear, d));
    }
    let diff: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
    let mut delta = Matrix::identity(d);
    for (row, u) in delta.data.chunks_mut(d).zip(&diff) {
        for (x, aj) in row.iter_mut().zip(a) {
            *x += u * aj / aa;
        }
    }
    let mapped = delta.mul_vec(a);
    let residual = norm(&mapped.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    // ‖u·aᵀ‖_F = ‖u‖·‖a‖ for the rank-one update u·aᵀ with u = diff / aᵀa.
    let complexity = norm(&diff) / aa.sqrt();
    Ok(TransformFit { kind: TransformKind::Linear, delta, residual, complexity })
}

/// `Δ = c·Id` with `aᵀΔa = bᵀb`.
pub fn fit_quadratic(a: &[f64], b: &[f64]) -> Result<TransformFit, TransformError> {
    check_lengths(a, b)?;
    let d = a.len();
    let aa = dot(a, a);
    if aa.sqrt() < DEGENERACY_ETA {
        return Ok(TransformFit::infeasible(TransformKind::Quadratic, d));
    }
    let c = dot(b, b) / aa;
    let delta = Matrix::scaled_identity(d, c);
    let residual = (c * aa - dot(b, b)).abs();
    Ok(TransformFit { kind: TransformKind::Quadratic, delta, residual, complexity: (c - 1.0).abs() * (d as f64).sqrt() })
}

/// The simpler of the linear and quadratic fits; ties go to linear.
pub fn choose_transform(a: &[f64], b: &[f64]) -> Result<TransformFit, TransformError> {
    let lin = fit_linear(a, b)?;
    let quad = fit_quadratic(a, b)?;
    Ok(if quad.complexity < lin.complexity { quad } else { lin })
}

/// Indices of `pool` ordered by Frobenius distance to `target`, first `k`.
/// Equal distances keep pool order.
pub fn nearest_neighbors(target: &TransformFit, pool: &[TransformFit], k: usize) -> Result<Vec<(usize, f64)>, TransformError> {
    let mut ranked = pool
        .iter()
        .enumerate()
        .map(|(i, f)| frobenius_distance(&target.delta, &f.delta).map(|d| (i, d)))
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|x, y| x.1.total_cmp(&y.1));
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupEdgeKind {
    Linear,
    Quadratic,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTransforms {
    pub from_version: String,
    pub to_version: String,
    pub fits: BTreeMap<String, TransformFit>,
    /// Groups carried by only one of the two versions.
    pub missing: Vec<String>,
    /// Finite fit complexities plus the penalty for each missing or
    /// infeasible group.
    pub total_complexity: f64,
    /// `choose_transform` calls spent on this pair.
    pub fit_count: usize,
}

impl PairTransforms {
    pub fn kind_per_group(&self) -> BTreeMap<String, GroupEdgeKind> {
        let mut out: BTreeMap<String, GroupEdgeKind> = self
            .fits
            .iter()
            .map(|(g, f)| {
                let k = match (f.is_feasible(), f.kind) {
                    (false, _) => GroupEdgeKind::Missing,
                    (true, TransformKind::Linear) => GroupEdgeKind::Linear,
                    (true, TransformKind::Quadratic) => GroupEdgeKind::Quadratic,
                };
                (g.clone(), k)
            })
            .collect();
        for g in &self.missing {
            out.insert(g.clone(), GroupEdgeKind::Missing);
        }
        out
    }

    /// Largest single-group complexity; missing groups count as `penalty`.
    pub fn max_group_complexity(&self, penalty: f64) -> f64 {
        let worst = self.fits.values().map(|f| if f.is_feasible() { f.complexity } else { penalty }).fold(0.0, f64::max);
        if self.missing.is_empty() {
            worst
        } else {
            worst.max(penalty)
        }
    }
}

/// One [`choose_transform`] per group shared by `a` and `b`.
pub fn pair_transforms(a: &Cluster, b: &Cluster, penalty: f64) -> Result<PairTransforms, TransformError> {
    let mut fits = BTreeMap::new();
    let mut missing = Vec::new();
    let mut total = 0.0;
    for (g, pa) in &a.points {
        match b.points.get(g) {
            Some(pb) => {
                let fit = choose_transform(&pa.values, &pb.values)?;
                total += if fit.is_feasible() { fit.complexity } else { penalty };
                fits.insert(g.clone(), fit);
            }
            None => missing.push(g.clone()),
        }
    }
    missing.extend(b.points.keys().filter(|g| !a.points.contains_key(*g)).cloned());
    missing.sort();
    if fits.is_empty() {
        return Err(TransformError::NoOverlap(a.version_id.clone(), b.version_id.clone()));
    }
    total += penalty * missing.len() as f64;
    let fit_count = fits.len();
    Ok(PairTransforms {
        from_version: a.version_id.clone(),
        to_version: b.version_id.clone(),
        fits,
        missing,
        total_complexity: total,
        fit_count,
    })
}

/// Summed per-group Frobenius distance between two pair fits; groups only one
/// side has count `penalty` each.
pub fn pair_distance(x: &PairTransforms, y: &PairTransforms, penalty: f64) -> f64 {
    let mut total = 0.0;
    for (g, fx) in &x.fits {
        total += match y.fits.get(g) {
            Some(fy) => frobenius_distance(&fx.delta, &fy.delta).unwrap_or(penalty),
            None => penalty,
        };
    }
    total + penalty * y.fits.keys().filter(|g| !x.fits.contains_key(*g)).count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::AttributeVector;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn identity_fit() {
        let f = fit_linear(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(f.delta, Matrix::identity(2));
        assert_eq!(f.complexity, 0.0);
    }

    #[test]
    fn stretch_fit() {
        let f = fit_linear(&[1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(f.delta, Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(f.delta.mul_vec(&[1.0, 0.0]), vec![2.0, 0.0]);
        assert!((f.complexity - 1.0).abs() < TOL);
    }

    #[test]
    fn degenerate_source() {
        assert!(!fit_linear(&[0.0, 0.0], &[1.0, 2.0]).unwrap().is_feasible());
        assert!(!fit_quadratic(&[0.0, 0.0], &[1.0, 2.0]).unwrap().is_feasible());
        assert!(!choose_transform(&[0.0, 0.0], &[1.0, 2.0]).unwrap().is_feasible());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(fit_linear(&[1.0], &[1.0, 2.0]), Err(TransformError::Dimension { .. })));
    }

    #[test]
    fn quadratic_examples() {
        let f = fit_quadratic(&[0.6, 0.8], &[1.0, 0.0]).unwrap();
        assert!((f.delta.get(0, 0) - 1.0).abs() < TOL);
        assert!(f.complexity.abs() < TOL);
        let f = fit_quadratic(&[1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(f.delta, Matrix::scaled_identity(2, 4.0));
        assert!((f.complexity - 3.0 * 2f64.sqrt()).abs() < TOL);
    }

    #[test]
    fn choice_examples() {
        let same = choose_transform(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(same.kind, TransformKind::Linear);
        let rot = choose_transform(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(rot.kind, TransformKind::Quadratic);
        assert!(rot.complexity.abs() < TOL);
        // Linear alternative: ‖(-1, 1)‖ / ‖(1, 0)‖ = √2.
        assert!((fit_linear(&[1.0, 0.0], &[0.0, 1.0]).unwrap().complexity - 2f64.sqrt()).abs() < TOL);
        assert_eq!(choose_transform(&[1.0, 0.0], &[2.0, 0.0]).unwrap().kind, TransformKind::Linear);
    }

    #[test]
    fn frobenius_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(frobenius_distance(&i2, &i2).unwrap(), 0.0);
        assert!((frobenius_distance(&i2, &Matrix::zeros(2, 2)).unwrap() - 2f64.sqrt()).abs() < TOL);
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.0]]);
        assert_eq!(frobenius_distance(&a, &b).unwrap(), 4.0);
        assert!(frobenius_distance(&a, &Matrix::zeros(3, 2)).is_err());
    }

    /// Trace-based oracle, spelled out the long way.
    fn frobenius_by_trace(a: &Matrix, b: &Matrix) -> f64 {
        let n = a.rows;
        let m = a.cols;
        let d: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
        let mut trace = 0.0;
        for i in 0..n {
            for k in 0..m {
                trace += d[i * m + k] * d[i * m + k];
            }
        }
        trace.sqrt()
    }

    fn fit_of(delta: Matrix) -> TransformFit {
        TransformFit { kind: TransformKind::Linear, delta, residual: 0.0, complexity: 0.0 }
    }

    #[test]
    fn neighbor_ranking() {
        let target = fit_of(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let far = fit_of(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.0]]));
        let mid = fit_of(Matrix::from_rows(&[vec![2.0, 2.0], vec![3.0, 5.0]]));
        let pool = vec![far, mid, target.clone()];
        let ranked = nearest_neighbors(&target, &pool, 3).unwrap();
        assert_eq!(ranked.iter().map(|r| r.0).collect::<Vec<_>>(), vec![2, 1, 0]);
        assert!((ranked[1].1 - 2f64.sqrt()).abs() < TOL);
        assert_eq!(ranked[2].1, 4.0);
        assert_eq!(nearest_neighbors(&target, &pool, 1).unwrap().len(), 1);
        assert!(nearest_neighbors(&target, &[], 2).unwrap().is_empty());
    }

    fn cluster(id: &str, points: &[(&str, Vec<f64>)]) -> Cluster {
        Cluster {
            version_id: id.into(),
            points: points
                .iter()
                .map(|(g, v)| (g.to_string(), AttributeVector { version_id: id.into(), group_id: g.to_string(), values: v.clone() }))
                .collect(),
            t_upload: 0.0,
        }
    }

    #[test]
    fn pair_examples() {
        let a = cluster("a", &[("g1", vec![1.0, 0.0]), ("g2", vec![0.5, 0.5])]);
        assert_eq!(pair_transforms(&a, &a, 1.0).unwrap().total_complexity, 0.0);
        let b = cluster("b", &[("g1", vec![2.0, 0.0]), ("g2", vec![0.5, 0.5])]);
        let p = pair_transforms(&a, &b, 1.0).unwrap();
        assert!((p.total_complexity - 1.0).abs() < TOL);
        assert_eq!(p.fit_count, 2);

        let c = cluster("c", &[("g1", vec![1.0]), ("g2", vec![1.0]), ("g3", vec![1.0]), ("g4", vec![1.0])]);
        let d = cluster("d", &[("g1", vec![1.0]), ("g2", vec![1.0]), ("g3", vec![1.0])]);
        let p = pair_transforms(&c, &d, 1.0).unwrap();
        assert_eq!(p.total_complexity, 1.0);
        assert_eq!(p.missing, vec!["g4".to_string()]);
        assert_eq!(p.kind_per_group()["g4"], GroupEdgeKind::Missing);

        let e = cluster("e", &[("z", vec![1.0])]);
        assert!(matches!(pair_transforms(&c, &e, 1.0), Err(TransformError::NoOverlap(..))));
    }

    fn vecs(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (proptest::collection::vec(-1.0f64..1.0, d), proptest::collection::vec(-1.0f64..1.0, d))
    }

    proptest! {
        #[test]
        fn linear_fit_maps_source_to_target((a, b) in (1usize..8).prop_flat_map(vecs)) {
            prop_assume!(norm(&a) > 1e-3);
            let f = fit_linear(&a, &b).unwrap();
            let r = norm(&f.delta.mul_vec(&a).iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
            prop_assert!(r <= 1e-9);
            let id_dist = frobenius_distance(&f.delta, &Matrix::identity(a.len())).unwrap();
            prop_assert!((id_dist - f.complexity).abs() <= 1e-9);
        }

        #[test]
        fn quadratic_fit_matches_forms((a, b) in (1usize..8).prop_flat_map(vecs)) {
            prop_assume!(norm(&a) > 1e-3);
            let f = fit_quadratic(&a, &b).unwrap();
            let form = dot(&a, &f.delta.mul_vec(&a));
            prop_assert!((form - dot(&b, &b)).abs() <= 1e-9);
        }

        #[test]
        fn self_fit_is_free(a in proptest::collection::vec(0.01f64..1.0, 1..8)) {
            prop_assert!(fit_linear(&a, &a).unwrap().complexity.abs() <= 1e-12);
            prop_assert!(fit_quadratic(&a, &a).unwrap().complexity.abs() <= 1e-12);
        }

        #[test]
        fn choice_is_no_worse((a, b) in (1usize..6).prop_flat_map(vecs)) {
            prop_assume!(norm(&a) > 1e-3);
            let c = choose_transform(&a, &b).unwrap().complexity;
            let l = fit_linear(&a, &b).unwrap().complexity;
            let q = fit_quadratic(&a, &b).unwrap().complexity;
            prop_assert!(c <= l.min(q));
        }

        #[test]
        fn frobenius_agrees_with_trace(
            xs in proptest::collection::vec(-5.0f64..5.0, 9),
            ys in proptest::collection::vec(-5.0f64..5.0, 9),
        ) {
            let a = Matrix { rows: 3, cols: 3, data: xs };
            let b = Matrix { rows: 3, cols: 3, data: ys };
            prop_assert!((frobenius_distance(&a, &b).unwrap() - frobenius_by_trace(&a, &b)).abs() <= 1e-9);
            prop_assert_eq!(frobenius_distance(&a, &b).unwrap(), frobenius_distance(&b, &a).unwrap());
        }
    }
}
