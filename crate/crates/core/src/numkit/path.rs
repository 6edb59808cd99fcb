use crate::error::{Error, Result};

/// Values sampled on a strictly increasing grid, anchored at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath<T> {
    grid: Vec<f64>,
    values: Vec<T>,
    x0: f64,
}

impl<T> SampledPath<T> {
    pub fn new(grid: Vec<f64>, values: Vec<T>, x0: f64) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::domain("a sampled path needs at least two abscissae"));
        }
        if grid.len() != values.len() {
            return Err(Error::domain(format!(
                "grid has {} abscissae but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("grid must be strictly increasing"));
        }
        Ok(Self { grid, values, x0 })
    }

    /// Samples `f` on `n_cells + 1` uniform points spanning `[start, end]`.
    pub fn sample(start: f64, end: f64, n_cells: usize, f: impl FnMut(f64) -> T) -> Result<Self> {
        let grid = uniform_grid(start, end, n_cells)?;
        let values = grid.iter().copied().map(f).collect();
        Self::new(grid, values, start)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Mean spacing; the exact spacing for uniform grids.
    pub fn step(&self) -> f64 {
        (self.end() - self.start()) / (self.len() - 1) as f64
    }

    /// Whether the grid is uniform to `rel_tol` relative spacing.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let h = self.step();
        self.grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= rel_tol * h)
    }

    /// Index of the grid point within `1e-9` of a spacing from `x`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let h = self.step();
        let k = ((x - self.start()) / h).round();
        if k < 0.0 || k as usize >= self.len() {
            return None;
        }
        let k = k as usize;
        ((self.grid[k] - x).abs() <= 1e-9 * h).then_some(k)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> SampledPath<U> {
        SampledPath {
            grid: self.grid.clone(),
            values: self.values.iter().map(f).collect(),
            x0: self.x0,
        }
    }

    /// Pointwise combination with another path on the same grid.
    pub fn zip_with<U, V>(
        &self,
        other: &SampledPath<U>,
        mut f: impl FnMut(&T, &U) -> V,
    ) -> Result<SampledPath<V>> {
        if !self.same_grid(other) {
            return Err(Error::domain("paths are sampled on different grids"));
        }
        Ok(SampledPath {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
            x0: self.x0,
        })
    }

    pub fn same_grid<U>(&self, other: &SampledPath<U>) -> bool {
        self.len() == other.len()
            && self
                .grid
                .iter()
                .zip(&other.grid)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.grid.iter().copied().zip(&self.values)
    }
}

impl<T: Clone> SampledPath<T> {
    /// Sub-path on the index range `[first, last]` (inclusive), re-anchored
    /// at its first abscissa.
    pub fn window(&self, first: usize, last: usize) -> Result<Self> {
        if last >= self.len() || last <= first {
            return Err(Error::domain(format!(
                "window [{first}, {last}] invalid for a path of {} samples",
                self.len()
            )));
        }
        Ok(Self {
            grid: self.grid[first..=last].to_vec(),
            values: self.values[first..=last].to_vec(),
            x0: self.grid[first],
        })
    }
}

/// `n_cells + 1` uniform abscissae from `start` to `end`, both endpoints exact.
pub fn uniform_grid(start: f64, end: f64, n_cells: usize) -> Result<Vec<f64>> {
    if n_cells == 0 || !(end > start) || !start.is_finite() || !end.is_finite() {
        return Err(Error::domain(format!(
            "cannot build a uniform grid on [{start}, {end}] with {n_cells} cells"
        )));
    }
    let h = (end - start) / n_cells as f64;
    let mut grid: Vec<f64> = (0..=n_cells).map(|k| start + k as f64 * h).collect();
    grid[n_cells] = end;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_or_unsorted_grids() {
        assert!(SampledPath::new(vec![0.0], vec![1.0], 0.0).is_err());
        assert!(SampledPath::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).is_err());
        assert!(SampledPath::new(vec![0.0, 1.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn uniform_sampler_is_uniform() {
        let p = SampledPath::sample(0.0, std::f64::consts::TAU, 2048, |x| x).unwrap();
        assert_eq!(p.len(), 2049);
        assert!(p.is_uniform(1e-12));
        assert_eq!(p.end(), std::f64::consts::TAU);
        assert_eq!(p.index_of(p.grid()[1024]), Some(1024));
        assert_eq!(p.index_of(0.5 * (p.grid()[3] + p.grid()[4])), None);
    }
}
