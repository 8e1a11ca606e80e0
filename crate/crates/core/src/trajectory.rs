//! Uniform-grid trajectories, sub-sampling schemes and strided views.
//!
//! Sample `n` (1-based) of a grid holds the process value at time `n * delta`.
//! Storage is row-major: the `r` coordinates of one time point are contiguous.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled finite realization of an `r`-dimensional process.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    dim: usize,
    delta: f64,
    data: Vec<f64>,
}

impl TrajectoryGrid {
    /// Builds a grid from row-major data, checking every invariant.
    pub fn new(dim: usize, delta: f64, data: Vec<f64>) -> Result<Self> {
        let grid = Self::from_raw(dim, delta, data)?;
        match validate_grid(&grid) {
            GridValidation::Valid => Ok(grid),
            v => Err(Error::InvalidGrid(v.to_string())),
        }
    }

    /// Scalar convenience constructor.
    pub fn scalar(delta: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(1, delta, values)
    }

    /// Builds a grid without the finiteness/positivity checks; only the shape is
    /// enforced. Use [`validate_grid`] to inspect the result.
    pub fn from_raw(dim: usize, delta: f64, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dim must be at least 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidGrid(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, delta, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of time points `L`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Coordinates of the sample at 0-based index `i` (time `(i + 1) * delta`).
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Values of coordinate `c` over time.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// View over every sample at the fine step.
    pub fn view(&self) -> SampleView<'_> {
        SampleView {
            data: &self.data,
            dim: self.dim,
            start: 0,
            stride: 1,
            len: self.len(),
        }
    }

    /// Drops the first `count` samples (used to align observables that need a
    /// warm-up window with the underlying path).
    pub fn skip(&self, count: usize) -> Result<Self> {
        if count >= self.len() {
            return Err(Error::InsufficientData {
                required: count + 1,
                available: self.len(),
            });
        }
        Ok(Self {
            dim: self.dim,
            delta: self.delta,
            data: self.data[count * self.dim..].to_vec(),
        })
    }

    /// Keeps the first `count` samples.
    pub fn truncate(&mut self, count: usize) {
        self.data.truncate(count * self.dim);
    }
}

/// Result of [`validate_grid`].
#[derive(Debug, Clone, PartialEq)]
pub enum GridValidation {
    Valid,
    NonPositiveDelta(f64),
    Empty,
    NonFinite { index: usize, coordinate: usize },
}

impl GridValidation {
    pub fn is_valid(&self) -> bool {
        matches!(self, GridValidation::Valid)
    }
}

impl fmt::Display for GridValidation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValidation::Valid => write!(f, "valid"),
            GridValidation::NonPositiveDelta(d) => write!(f, "delta must be positive, got {d}"),
            GridValidation::Empty => write!(f, "grid holds no samples"),
            GridValidation::NonFinite { index, coordinate } => write!(
                f,
                "non-finite value at sample {index} (1-based), coordinate {coordinate}"
            ),
        }
    }
}

/// Checks the grid invariants and reports the first violation.
pub fn validate_grid(grid: &TrajectoryGrid) -> GridValidation {
    if !(grid.delta > 0.0 && grid.delta.is_finite()) {
        return GridValidation::NonPositiveDelta(grid.delta);
    }
    if grid.is_empty() {
        return GridValidation::Empty;
    }
    match grid.data.iter().position(|v| !v.is_finite()) {
        Some(pos) => GridValidation::NonFinite {
            index: pos / grid.dim + 1,
            coordinate: pos % grid.dim,
        },
        None => GridValidation::Valid,
    }
}

/// A sub-sampling scheme `(N, Delta)` bound to a fine step through its stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsamplingScheme {
    pub n_obs: usize,
    pub stride: usize,
    pub big_delta: f64,
}

impl SubsamplingScheme {
    /// Scheme with `big_delta = stride * fine_delta`.
    pub fn new(n_obs: usize, stride: usize, fine_delta: f64) -> Result<Self> {
        if n_obs == 0 || stride == 0 {
            return Err(Error::ParameterDomain(
                "n_obs and stride must be positive".into(),
            ));
        }
        if !(fine_delta > 0.0 && fine_delta.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "fine delta must be positive and finite, got {fine_delta}"
            )));
        }
        Ok(Self {
            n_obs,
            stride,
            big_delta: stride as f64 * fine_delta,
        })
    }

    /// Scheme whose fine step equals `big_delta` (stride 1); rebind it to a
    /// concrete grid with [`SubsamplingScheme::bind`].
    pub fn unbound(n_obs: usize, big_delta: f64) -> Result<Self> {
        Self::new(n_obs, 1, big_delta)
    }

    /// Step of the grid this scheme is bound to.
    pub fn fine_delta(&self) -> f64 {
        self.big_delta / self.stride as f64
    }

    /// Rounds `big_delta / fine_delta` to the nearest positive integer stride and
    /// recomputes `big_delta` on that grid.
    pub fn bind(&self, fine_delta: f64) -> Result<Self> {
        if !(fine_delta > 0.0 && fine_delta.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "fine delta must be positive and finite, got {fine_delta}"
            )));
        }
        let stride = ((self.big_delta / fine_delta).round_ties_even() as usize).max(1);
        Self::new(self.n_obs, stride, fine_delta)
    }

    /// Same stride and step with a different observation count.
    pub fn with_n_obs(&self, n_obs: usize) -> Self {
        Self { n_obs, ..*self }
    }

    /// Observational time span `S = N * Delta`.
    pub fn span(&self) -> f64 {
        self.n_obs as f64 * self.big_delta
    }

    pub fn is_valid(&self) -> bool {
        self.n_obs > 0 && self.stride > 0 && self.big_delta > 0.0 && self.big_delta.is_finite()
    }
}

/// Borrowed strided sequence of `r`-vectors.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    data: &'a [f64],
    dim: usize,
    start: usize,
    stride: usize,
    len: usize,
}

impl<'a> SampleView<'a> {
    /// Contiguous row-major data of `data.len() / dim` samples.
    pub fn contiguous(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && data.len() % dim == 0, "ragged sample data");
        Self {
            data,
            dim,
            start: 0,
            stride: 1,
            len: data.len() / dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sample at 0-based position `i` of the view.
    #[inline]
    pub fn get(&self, i: usize) -> &'a [f64] {
        debug_assert!(i < self.len);
        let row = self.start + i * self.stride;
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Scalar value at position `i`, coordinate `c`.
    #[inline]
    pub fn value(&self, i: usize, c: usize) -> f64 {
        self.data[(self.start + i * self.stride) * self.dim + c]
    }

    /// Sub-view of every `stride`-th sample starting with the `stride`-th one.
    pub fn strided(&self, stride: usize, offset: usize, count: usize) -> Result<SampleView<'a>> {
        if stride == 0 {
            return Err(Error::ParameterDomain("stride must be positive".into()));
        }
        let required = offset + count * stride;
        if required > self.len {
            return Err(Error::InsufficientData {
                required,
                available: self.len,
            });
        }
        Ok(SampleView {
            data: self.data,
            dim: self.dim,
            start: self.start + (offset + stride - 1) * self.stride,
            stride: self.stride * stride,
            len: count,
        })
    }

    /// First `count` samples.
    pub fn head(&self, count: usize) -> Result<SampleView<'a>> {
        if count > self.len {
            return Err(Error::InsufficientData {
                required: count,
                available: self.len,
            });
        }
        Ok(SampleView { len: count, ..*self })
    }

    pub fn to_vec(&self) -> Vec<Vec<f64>> {
        (0..self.len).map(|i| self.get(i).to_vec()).collect()
    }
}

/// Samples at indices `offset + n * stride`, `n = 1..=N` (1-based), without copying.
pub fn subsample_view<'a>(
    grid: &'a TrajectoryGrid,
    scheme: &SubsamplingScheme,
    offset: usize,
) -> Result<SampleView<'a>> {
    let implied = scheme.stride as f64 * grid.delta;
    if (scheme.big_delta - implied).abs() > 1e-9 * implied {
        return Err(Error::SchemeGridMismatch(format!(
            "Delta = {} but stride {} * delta {} = {implied}",
            scheme.big_delta, scheme.stride, grid.delta
        )));
    }
    grid.view().strided(scheme.stride, offset, scheme.n_obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> TrajectoryGrid {
        TrajectoryGrid::scalar(0.1, (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    fn values(v: &SampleView) -> Vec<f64> {
        (0..v.len()).map(|i| v.value(i, 0)).collect()
    }

    #[test]
    fn stride_two_picks_even_indices() {
        let g = ramp(10);
        let s = SubsamplingScheme::new(5, 2, 0.1).unwrap();
        let v = subsample_view(&g, &s, 0).unwrap();
        assert_eq!(values(&v), vec![2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn stride_one_is_identity() {
        let g = ramp(10);
        let s = SubsamplingScheme::new(10, 1, 0.1).unwrap();
        let v = subsample_view(&g, &s, 0).unwrap();
        assert_eq!(values(&v), g.coordinate(0));
    }

    #[test]
    fn too_few_samples() {
        let g = ramp(10);
        let s = SubsamplingScheme::new(4, 3, 0.1).unwrap();
        match subsample_view(&g, &s, 0) {
            Err(Error::InsufficientData { required, available }) => {
                assert_eq!((required, available), (12, 10))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn offset_shifts_the_window() {
        let g = ramp(10);
        let s = SubsamplingScheme::new(3, 3, 0.1).unwrap();
        let v = subsample_view(&g, &s, 1).unwrap();
        assert_eq!(values(&v), vec![4.0, 7.0, 10.0]);
    }

    #[test]
    fn mismatched_delta_rejected() {
        let g = ramp(10);
        let s = SubsamplingScheme::new(2, 2, 0.3).unwrap();
        assert!(matches!(
            subsample_view(&g, &s, 0),
            Err(Error::SchemeGridMismatch(_))
        ));
    }

    #[test]
    fn composition_of_strides() {
        let g = ramp(60);
        let a = g.view().strided(2, 0, 30).unwrap();
        let ab = a.strided(3, 0, 10).unwrap();
        let direct = g.view().strided(6, 0, 10).unwrap();
        assert_eq!(values(&ab), values(&direct));
    }

    #[test]
    fn validation_reports_first_offender() {
        assert!(validate_grid(&ramp(3)).is_valid());
        let g = TrajectoryGrid::from_raw(2, 1.0, vec![0.0, 1.0, 2.0, f64::NAN, f64::INFINITY, 0.0])
            .unwrap();
        assert_eq!(
            validate_grid(&g),
            GridValidation::NonFinite {
                index: 2,
                coordinate: 1
            }
        );
        let g = TrajectoryGrid::from_raw(1, 0.0, vec![1.0]).unwrap();
        assert_eq!(validate_grid(&g), GridValidation::NonPositiveDelta(0.0));
        assert!(TrajectoryGrid::scalar(0.0, vec![1.0]).is_err());
    }

    #[test]
    fn bind_rounds_stride() {
        let s = SubsamplingScheme::unbound(100, 0.1).unwrap();
        let b = s.bind(0.03).unwrap();
        assert_eq!(b.stride, 3);
        assert!((b.big_delta - 0.09).abs() < 1e-15);
        let b = s.bind(1.0).unwrap();
        assert_eq!(b.stride, 1);
    }
}
