//! Landmark selection and the landmarked embedding.
//!
//! A point x maps to its vector of similarities against d sampled landmarks,
//! optionally scaled by 1/sqrt(d). Dense L2-constrained solvers expect the
//! scaled form; the sparse L1-geometry solver expects the unscaled form.
//!
//! Similarity values are used raw, never rescaled into [-1, 1]; the norm
//! bounds of the downstream solvers absorb the kernel's scale. More
//! landmarks shrink the embedding's approximation error, at linear cost per
//! prediction; callers pick the count explicitly.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::similarity::SimilaritySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide each coordinate by sqrt(d); embeddings of a bounded similarity
    /// land in the unit L2 ball.
    Scaled,
    /// Raw similarity rows; coordinates of a bounded similarity stay in [-1, 1].
    Unscaled,
}

impl Normalization {
    pub fn name(&self) -> &'static str {
        match self {
            Normalization::Scaled => "scaled",
            Normalization::Unscaled => "unscaled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scaled" => Ok(Normalization::Scaled),
            "unscaled" => Ok(Normalization::Unscaled),
            other => Err(Error::Config(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Whether landmarks came from a separate unlabeled pool or were reused from
/// the training set. Metadata only; the caller decides what to train on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LandmarkMode {
    #[default]
    UnlabeledPool,
    DoubleDip,
}

/// A fitted landmark set plus the similarity it embeds with.
#[derive(Debug, Clone)]
pub struct Embedder {
    spec: SimilaritySpec,
    landmarks: Vec<Vec<f64>>,
    normalization: Normalization,
    mode: LandmarkMode,
}

impl Embedder {
    pub fn new(spec: SimilaritySpec, landmarks: Vec<Vec<f64>>, normalization: Normalization) -> Result<Self> {
        if landmarks.is_empty() {
            return Err(Error::Data("embedder needs at least one landmark".into()));
        }
        Ok(Embedder { spec, landmarks, normalization, mode: LandmarkMode::UnlabeledPool })
    }

    /// Samples `d` landmarks from `pool`, uniformly without replacement,
    /// deterministically for a given seed. For a fixed seed the selection for
    /// a smaller `d` is a prefix of the selection for a larger one.
    pub fn select_landmarks(
        spec: SimilaritySpec,
        pool: &[Vec<f64>],
        d: usize,
        mode: LandmarkMode,
        normalization: Normalization,
        seed: u64,
    ) -> Result<Self> {
        let idx = sample_landmark_indices(pool.len(), d, seed)?;
        let landmarks = idx.into_iter().map(|i| pool[i].clone()).collect();
        let mut e = Embedder::new(spec, landmarks, normalization)?;
        e.mode = mode;
        Ok(e)
    }

    pub fn d(&self) -> usize {
        self.landmarks.len()
    }

    pub fn spec(&self) -> &SimilaritySpec {
        &self.spec
    }

    pub fn landmarks(&self) -> &[Vec<f64>] {
        &self.landmarks
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn mode(&self) -> LandmarkMode {
        self.mode
    }

    /// Same landmarks and similarity under a different normalization.
    pub fn with_normalization(&self, normalization: Normalization) -> Embedder {
        Embedder { normalization, ..self.clone() }
    }

    /// Records where the landmarks came from.
    pub fn with_mode(mut self, mode: LandmarkMode) -> Embedder {
        self.mode = mode;
        self
    }

    /// The landmarked vector of `x`: its similarity row, scaled when configured.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut row = self.spec.similarity_row(x, &self.landmarks)?;
        if self.normalization == Normalization::Scaled {
            let f = 1.0 / (self.d() as f64).sqrt();
            for v in &mut row {
                *v *= f;
            }
        }
        Ok(row)
    }

    /// Embeds every row; parallel over rows, output order matches input.
    pub fn embed_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.par_iter().map(|x| self.embed(x)).collect()
    }
}

/// Prefix-stable sampling without replacement: the first `d` draws of a
/// Fisher-Yates pass over the pool indices.
pub fn sample_landmark_indices(pool_size: usize, d: usize, seed: u64) -> Result<Vec<usize>> {
    if pool_size == 0 {
        return Err(Error::Data("landmark pool is empty".into()));
    }
    if d == 0 {
        return Err(Error::Config("landmark count must be at least 1".into()));
    }
    if d > pool_size {
        return Err(Error::Data(format!("cannot sample {d} landmarks from a pool of {pool_size}")));
    }
    let mut idx: Vec<usize> = (0..pool_size).collect();
    let mut rng = crate::data::rng(seed);
    for i in 0..d {
        let j = rng.gen_range(i..pool_size);
        idx.swap(i, j);
    }
    idx.truncate(d);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pool(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = crate::data::rng(seed);
        (0..n).map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn exhaustive_selection_and_determinism() {
        let p = pool(5, 2, 1);
        let e = Embedder::select_landmarks(
            SimilaritySpec::Linear,
            &p,
            5,
            LandmarkMode::UnlabeledPool,
            Normalization::Unscaled,
            7,
        )
        .unwrap();
        assert_eq!(e.d(), 5);
        let mut sorted = e.landmarks().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expect = p.clone();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, expect);

        let e2 = Embedder::select_landmarks(
            SimilaritySpec::Linear,
            &p,
            5,
            LandmarkMode::UnlabeledPool,
            Normalization::Unscaled,
            7,
        )
        .unwrap();
        assert_eq!(e.landmarks(), e2.landmarks());
    }

    #[test]
    fn landmark_mode_is_recorded() {
        let p = pool(4, 2, 2);
        let e = Embedder::select_landmarks(
            SimilaritySpec::Linear,
            &p,
            2,
            LandmarkMode::DoubleDip,
            Normalization::Scaled,
            1,
        )
        .unwrap();
        assert_eq!(e.mode(), LandmarkMode::DoubleDip);
        let e = Embedder::new(SimilaritySpec::Linear, p, Normalization::Scaled).unwrap();
        assert_eq!(e.mode(), LandmarkMode::UnlabeledPool);
        assert_eq!(e.with_mode(LandmarkMode::DoubleDip).mode(), LandmarkMode::DoubleDip);
    }

    #[test]
    fn sampled_indices_are_distinct() {
        let idx = sample_landmark_indices(1000, 50, 3).unwrap();
        assert_eq!(idx.len(), 50);
        let mut uniq = idx.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 50);
    }

    #[test]
    fn smaller_selection_is_prefix_of_larger() {
        let small = sample_landmark_indices(200, 20, 11).unwrap();
        let large = sample_landmark_indices(200, 50, 11).unwrap();
        assert_eq!(small, large[..20]);
    }

    #[test]
    fn selection_errors() {
        assert!(sample_landmark_indices(3, 4, 0).is_err());
        assert!(sample_landmark_indices(0, 1, 0).is_err());
        assert!(sample_landmark_indices(3, 0, 0).is_err());
    }

    #[test]
    fn scaled_embedding_examples() {
        // all similarities equal 1 when sigma-scaled distance is zero
        let landmarks = vec![vec![0.0, 0.0]; 4];
        let e = Embedder::new(
            SimilaritySpec::gaussian(1.0).unwrap(),
            landmarks,
            Normalization::Scaled,
        )
        .unwrap();
        assert_eq!(e.embed(&[0.0, 0.0]).unwrap(), vec![0.5; 4]);

        let single = Embedder::new(SimilaritySpec::Manhattan, vec![vec![1.0]], Normalization::Unscaled).unwrap();
        assert_eq!(single.embed(&[3.0]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn scaled_is_unscaled_over_sqrt_d() {
        let p = pool(8, 3, 21);
        let x = vec![0.3, -0.2, 0.9];
        let unscaled = Embedder::new(SimilaritySpec::Euclidean, p.clone(), Normalization::Unscaled).unwrap();
        let scaled = unscaled.with_normalization(Normalization::Scaled);
        let u = unscaled.embed(&x).unwrap();
        let s = scaled.embed(&x).unwrap();
        let f = (8.0f64).sqrt();
        for (a, b) in u.iter().zip(&s) {
            assert!((a / f - b).abs() < 1e-15);
        }
    }

    #[test]
    fn embed_all_matches_per_row() {
        let p = pool(6, 2, 31);
        let xs = pool(9, 2, 32);
        let e = Embedder::new(SimilaritySpec::gaussian(0.7).unwrap(), p, Normalization::Scaled).unwrap();
        let all = e.embed_all(&xs).unwrap();
        assert_eq!(all.len(), 9);
        for (x, row) in xs.iter().zip(&all) {
            assert_eq!(row, &e.embed(x).unwrap());
        }
        assert!(e.embed_all(&[]).unwrap().is_empty());
    }

    #[test]
    fn bounded_similarity_keeps_embeddings_bounded() {
        let p = pool(16, 3, 41);
        let xs = pool(50, 3, 42);
        let e = Embedder::new(SimilaritySpec::gaussian(0.5).unwrap(), p, Normalization::Scaled).unwrap();
        for x in &xs {
            let row = e.embed(x).unwrap();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1.0 + 1e-12);
        }
        let u = e.with_normalization(Normalization::Unscaled);
        for x in &xs {
            let row = u.embed(x).unwrap();
            assert!(row.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }
}
