use crate::composable::{BooleanLinearSketchMap, BottomKSketchMap, KPartitionSketchMap, SampleSketchMap};
use crate::error::Result;
use crate::linear::{Field, Fp, Matrix};
use crate::model::{KeySet, ThresholdPair};
use crate::stats::occupancy_mle;
use crate::system::{FpView, QueryResponder};

/// Point estimate of `|U ∪ M|` from a sketch.
pub trait CardinalityEstimator {
    type Sketch;

    fn estimate(&self, sketch: &Self::Sketch) -> f64;
}

impl CardinalityEstimator for SampleSketchMap {
    type Sketch = KeySet;

    fn estimate(&self, sketch: &KeySet) -> f64 {
        SampleSketchMap::estimate(self, sketch)
    }
}

impl CardinalityEstimator for BottomKSketchMap {
    type Sketch = Vec<u32>;

    fn estimate(&self, sketch: &Vec<u32>) -> f64 {
        BottomKSketchMap::estimate(self, sketch)
    }
}

impl CardinalityEstimator for KPartitionSketchMap {
    type Sketch = Vec<u32>;

    fn estimate(&self, sketch: &Vec<u32>) -> f64 {
        KPartitionSketchMap::estimate(self, sketch)
    }
}

impl CardinalityEstimator for BooleanLinearSketchMap {
    type Sketch = u64;

    fn estimate(&self, sketch: &u64) -> f64 {
        BooleanLinearSketchMap::estimate(self, *sketch)
    }
}

/// Occupancy estimate for an `F_p` sketch: row `j` is taken to stay zero with
/// probability `(1 - w_j (p-1) / (p n))^m`, ignoring cancellations.
#[derive(Debug, Clone)]
pub struct LinearOccupancy {
    miss: Vec<f64>,
    cap: f64,
}

impl LinearOccupancy {
    pub fn fp(matrix: &Matrix<Fp>) -> Self {
        let f = matrix.field();
        let n = matrix.n() as f64;
        let hit = (f.p() - 1) as f64 / f.p() as f64;
        let miss = matrix
            .rows()
            .iter()
            .map(|row| 1.0 - row.iter().filter(|a| !f.is_zero(a)).count() as f64 * hit / n)
            .collect();
        Self { miss, cap: n }
    }
}

impl CardinalityEstimator for LinearOccupancy {
    type Sketch = FpView;

    fn estimate(&self, view: &FpView) -> f64 {
        let lit: Vec<bool> = view.sketch.iter().map(|&y| y != 0).collect();
        occupancy_mle(&self.miss, &lit, self.cap)
    }
}

/// Answers 1 iff the estimate reaches the cut, `sqrt(A B)` by default.
#[derive(Debug, Clone)]
pub struct ThresholdResponder<E> {
    estimator: E,
    cut: f64,
}

impl<E> ThresholdResponder<E> {
    pub fn new(estimator: E, thresholds: &ThresholdPair) -> Self {
        Self::with_cut(estimator, thresholds.geometric_mid())
    }

    pub fn with_cut(estimator: E, cut: f64) -> Self {
        Self { estimator, cut }
    }

    pub fn cut(&self) -> f64 {
        self.cut
    }

    pub fn estimator(&self) -> &E {
        &self.estimator
    }
}

impl<E: CardinalityEstimator> QueryResponder<E::Sketch> for ThresholdResponder<E> {
    fn respond(&mut self, view: &E::Sketch, _round: u64) -> Result<bool> {
        Ok(self.estimator.estimate(view) >= self.cut)
    }
}
