//! Sampled scalar, vector and symmetric-tensor fields on a [`HalfSpaceGrid`].

use ndarray::{Array2, Array3, Zip};

use crate::error::{Error, Result};
use crate::grid::{HalfSpaceGrid, TimeGrid};

fn check_finite(data: &Array3<f64>, what: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_shape(grid: &HalfSpaceGrid, data: &Array3<f64>) -> Result<()> {
    if data.dim() != grid.shape() {
        return Err(Error::GridMismatch(format!(
            "array shape {:?} does not match grid shape {:?}",
            data.dim(),
            grid.shape()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: HalfSpaceGrid,
    data: Array3<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &HalfSpaceGrid) -> Self {
        Self { grid: *grid, data: Array3::zeros(grid.shape()) }
    }

    pub fn from_array(grid: &HalfSpaceGrid, data: Array3<f64>) -> Result<Self> {
        check_shape(grid, &data)?;
        check_finite(&data, "scalar field construction")?;
        Ok(Self { grid: *grid, data })
    }

    /// Samples `f(x_1, x_2, x_n)` at every node (`x_2 = 0` in 2D).
    pub fn from_fn(grid: &HalfSpaceGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = Array3::from_shape_fn(grid.shape(), |(i, j, k)| f(grid.point(i, j, k)));
        Self { grid: *grid, data }
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }
    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }
    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid, data: &self.data * a }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        let mut data = self.data.clone();
        data.scaled_add(a, &other.data);
        Ok(Self { grid: self.grid, data })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: HalfSpaceGrid,
    comps: Vec<Array3<f64>>,
}

impl VectorField {
    pub fn zeros(grid: &HalfSpaceGrid) -> Self {
        Self { grid: *grid, comps: (0..grid.dim()).map(|_| Array3::zeros(grid.shape())).collect() }
    }

    pub fn from_components(grid: &HalfSpaceGrid, comps: Vec<Array3<f64>>) -> Result<Self> {
        if comps.len() != grid.dim() {
            return Err(Error::Dimension { expected: grid.dim(), found: comps.len() });
        }
        for c in &comps {
            check_shape(grid, c)?;
            check_finite(c, "vector field construction")?;
        }
        Ok(Self { grid: *grid, comps })
    }

    pub fn from_scalars(comps: Vec<ScalarField>) -> Result<Self> {
        let grid = *comps
            .first()
            .ok_or_else(|| Error::InvalidInput("no components".into()))?
            .grid();
        for c in &comps {
            grid.same_as(c.grid())?;
        }
        Self::from_components(&grid, comps.into_iter().map(ScalarField::into_data).collect())
    }

    pub fn from_fn(grid: &HalfSpaceGrid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = grid.dim();
        let mut comps: Vec<Array3<f64>> = (0..n).map(|_| Array3::zeros(grid.shape())).collect();
        let (a, b, c) = grid.shape();
        for i in 0..a {
            for j in 0..b {
                for k in 0..c {
                    let v = f(grid.point(i, j, k));
                    // 2D fields use slots 0 (tangential) and 2 (normal).
                    if n == 2 {
                        comps[0][[i, j, k]] = v[0];
                        comps[1][[i, j, k]] = v[2];
                    } else {
                        for (m, comp) in comps.iter_mut().enumerate() {
                            comp[[i, j, k]] = v[m];
                        }
                    }
                }
            }
        }
        Self { grid: *grid, comps }
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.comps.len()
    }
    pub fn comp(&self, m: usize) -> &Array3<f64> {
        &self.comps[m]
    }
    pub fn comp_mut(&mut self, m: usize) -> &mut Array3<f64> {
        &mut self.comps[m]
    }
    pub fn comps(&self) -> &[Array3<f64>] {
        &self.comps
    }
    /// Normal component `u_n`.
    pub fn normal(&self) -> &Array3<f64> {
        &self.comps[self.comps.len() - 1]
    }
    pub fn component(&self, m: usize) -> ScalarField {
        ScalarField { grid: self.grid, data: self.comps[m].clone() }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid, comps: self.comps.iter().map(|c| c * a).collect() }
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| {
                let mut z = x.clone();
                z.scaled_add(a, y);
                z
            })
            .collect();
        Ok(Self { grid: self.grid, comps })
    }

    pub fn add_assign_scaled(&mut self, a: f64, other: &Self) {
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            x.scaled_add(a, y);
        }
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Array3<f64> {
        let mut out = Array3::<f64>::zeros(self.grid.shape());
        for c in &self.comps {
            Zip::from(&mut out).and(c).for_each(|o, &v| *o += v * v);
        }
        out.mapv_inplace(f64::sqrt);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Outer product `u (x) u`, a symmetric tensor field.
    pub fn outer_self(&self) -> SymTensorField {
        let n = self.dim();
        let mut t = SymTensorField::zeros(&self.grid);
        for k in 0..n {
            for l in k..n {
                let mut prod = self.comps[k].clone();
                prod *= &self.comps[l];
                *t.get_mut(k, l) = prod;
            }
        }
        t
    }

    /// Symmetrized outer product `(a (x) b + b (x) a) / 2`.
    pub fn outer_sym(a: &Self, b: &Self) -> Result<SymTensorField> {
        a.grid.same_as(&b.grid)?;
        let n = a.dim();
        let mut t = SymTensorField::zeros(&a.grid);
        for k in 0..n {
            for l in k..n {
                let mut prod = &a.comps[k] * &b.comps[l];
                prod += &(&b.comps[k] * &a.comps[l]);
                prod *= 0.5;
                *t.get_mut(k, l) = prod;
            }
        }
        Ok(t)
    }
}

/// Symmetric `n x n` tensor field; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: HalfSpaceGrid,
    upper: Vec<Array3<f64>>,
}

fn tri_index(n: usize, k: usize, l: usize) -> usize {
    let (a, b) = if k <= l { (k, l) } else { (l, k) };
    a * n - a * (a + 1) / 2 + b
}

impl SymTensorField {
    pub fn zeros(grid: &HalfSpaceGrid) -> Self {
        let n = grid.dim();
        Self {
            grid: *grid,
            upper: (0..n * (n + 1) / 2).map(|_| Array3::zeros(grid.shape())).collect(),
        }
    }

    /// Builds a tensor from full component arrays `comps[k][l]`; fails unless symmetric.
    pub fn from_full(grid: &HalfSpaceGrid, comps: Vec<Vec<Array3<f64>>>) -> Result<Self> {
        let n = grid.dim();
        if comps.len() != n || comps.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension { expected: n, found: comps.len() });
        }
        let mut asym = 0.0f64;
        let scale = comps
            .iter()
            .flatten()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            for l in 0..n {
                check_shape(grid, &comps[k][l])?;
                Zip::from(&comps[k][l]).and(&comps[l][k]).for_each(|a, b| {
                    asym = asym.max((a - b).abs());
                });
            }
        }
        if asym > 1e-12 * scale.max(1e-300) {
            return Err(Error::Asymmetric(asym));
        }
        let mut t = Self::zeros(grid);
        for k in 0..n {
            for l in k..n {
                *t.get_mut(k, l) = comps[k][l].clone();
            }
        }
        Ok(t)
    }

    /// Pure-trace tensor `delta_kl * phi`.
    pub fn isotropic(phi: &ScalarField) -> Self {
        let mut t = Self::zeros(phi.grid());
        for k in 0..phi.grid().dim() {
            *t.get_mut(k, k) = phi.data().clone();
        }
        t
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    /// Component `F_kl`; `get(k, l)` and `get(l, k)` return the same array.
    pub fn get(&self, k: usize, l: usize) -> &Array3<f64> {
        &self.upper[tri_index(self.dim(), k, l)]
    }
    pub fn get_mut(&mut self, k: usize, l: usize) -> &mut Array3<f64> {
        let n = self.dim();
        &mut self.upper[tri_index(n, k, l)]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid, upper: self.upper.iter().map(|c| c * a).collect() }
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        let upper = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(x, y)| {
                let mut z = x.clone();
                z.scaled_add(a, y);
                z
            })
            .collect();
        Ok(Self { grid: self.grid, upper })
    }

    /// Pointwise Frobenius magnitude (off-diagonal entries counted twice).
    pub fn magnitude(&self) -> Array3<f64> {
        let n = self.dim();
        let mut out = Array3::<f64>::zeros(self.grid.shape());
        for k in 0..n {
            for l in 0..n {
                Zip::from(&mut out).and(self.get(k, l)).for_each(|o, &v| *o += v * v);
            }
        }
        out.mapv_inplace(f64::sqrt);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Largest boundary-row magnitude.
    pub fn boundary_max(&self) -> f64 {
        let mag = self.magnitude();
        mag.index_axis(ndarray::Axis(2), 0).iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Sequence of velocity fields on a geometric time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: TimeGrid,
    fields: Vec<VectorField>,
}

impl Trajectory {
    pub fn new(times: TimeGrid, fields: Vec<VectorField>) -> Result<Self> {
        if fields.len() != times.len() {
            return Err(Error::InvalidInput(format!(
                "{} fields for {} sample times",
                fields.len(),
                times.len()
            )));
        }
        if let Some(first) = fields.first() {
            for f in &fields {
                first.grid().same_as(f.grid())?;
            }
        }
        Ok(Self { times, fields })
    }

    pub fn zeros(grid: &HalfSpaceGrid, times: TimeGrid) -> Self {
        Self { times, fields: (0..times.len()).map(|_| VectorField::zeros(grid)).collect() }
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.times
    }
    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }
    pub fn field(&self, k: usize) -> &VectorField {
        &self.fields[k]
    }
    pub fn grid(&self) -> &HalfSpaceGrid {
        self.fields[0].grid()
    }
    pub fn len(&self) -> usize {
        self.fields.len()
    }
    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(x, y)| x.axpy(a, y))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { times: self.times, fields })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { times: self.times, fields: self.fields.iter().map(|f| f.scaled(a)).collect() }
    }

    /// Velocity at an arbitrary time `tau`, interpolated linearly in `log t`
    /// between samples. Before `t_0` the field is interpolated linearly in `t`
    /// towards `start` (the initial datum); beyond the last sample it is held.
    pub fn at(&self, tau: f64, start: &VectorField) -> VectorField {
        let t0 = self.times.time(0);
        if tau <= 0.0 {
            return start.clone();
        }
        if tau < t0 {
            let w = tau / t0;
            return start.scaled(1.0 - w).axpy(w, &self.fields[0]).expect("same grid");
        }
        let last = self.fields.len() - 1;
        let pos = (tau / t0).ln() / self.times.ratio().ln();
        if pos >= last as f64 {
            return self.fields[last].clone();
        }
        let k = pos.floor() as usize;
        let w = pos - k as f64;
        if w < 1e-14 {
            return self.fields[k].clone();
        }
        self.fields[k].scaled(1.0 - w).axpy(w, &self.fields[k + 1]).expect("same grid")
    }
}

/// Boundary slice `f(x', 0)` of a scalar array, shaped `(N_tan, N_tan or 1)`.
pub fn wall_slice(data: &Array3<f64>) -> Array2<f64> {
    data.index_axis(ndarray::Axis(2), 0).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> HalfSpaceGrid {
        HalfSpaceGrid::new(3, 1.0, 8, 1.0, 8).unwrap()
    }

    #[test]
    fn symmetric_accessor() {
        let g = grid();
        let mut t = SymTensorField::zeros(&g);
        t.get_mut(2, 0).fill(3.0);
        assert_eq!(t.get(0, 2), t.get(2, 0));
        assert_eq!(t.get(0, 2)[[0, 0, 0]], 3.0);
    }

    #[test]
    fn from_full_rejects_asymmetry() {
        let g = grid();
        let z = || Array3::<f64>::zeros(g.shape());
        let mut comps = vec![vec![z(), z(), z()], vec![z(), z(), z()], vec![z(), z(), z()]];
        comps[0][1].fill(1.0);
        assert!(matches!(SymTensorField::from_full(&g, comps), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid();
        let mut a = Array3::<f64>::zeros(g.shape());
        a[[0, 0, 0]] = f64::NAN;
        assert!(ScalarField::from_array(&g, a).is_err());
    }
}
