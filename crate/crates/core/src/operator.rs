//! Divergence-form discretization
//! `H_h = D11^T W_alpha D11 + 2 D12^T W_beta D12 + D22^T W_gamma D22`
//! with two clamped boundary layers.

use nalgebra_sparse::{coo::CooMatrix, csc::CscMatrix, csr::CsrMatrix};
use num_complex::Complex64;

use crate::domain::Domain2D;
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::grid::GridFunction;

type C = Complex64;

/// One second-difference evaluation point: `coef * |sum_k w_k u(node_k)|^2`.
#[derive(Debug, Clone, Copy)]
pub struct Location {
    pub coef: C,
    pub nodes: [(usize, f64); 4],
    pub len: usize,
}

impl Location {
    #[inline]
    pub fn apply(&self, u: &[C]) -> C {
        let mut acc = C::new(0.0, 0.0);
        for &(k, w) in &self.nodes[..self.len] {
            acc += u[k] * w;
        }
        acc
    }
}

/// All `D11`, `D22` (node-centered) and `D12` (cell-centered) locations of the grid.
pub fn difference_locations(field: &CoefficientField, grid: &Domain2D) -> Result<Vec<Location>> {
    let (n1, n2) = (grid.n1, grid.n2);
    let (h1, h2) = (grid.h1(), grid.h2());
    let mut out = Vec::with_capacity(3 * n1 * n2);
    let idx = |i: usize, j: usize| grid.index(i, j);
    for j in 0..n2 {
        for i in 1..n1 - 1 {
            let c = field.coefs(grid.node(i, j))?;
            let w = 1.0 / (h1 * h1);
            out.push(Location {
                coef: c.alpha,
                nodes: [(idx(i - 1, j), w), (idx(i, j), -2.0 * w), (idx(i + 1, j), w), (0, 0.0)],
                len: 3,
            });
        }
    }
    for j in 1..n2 - 1 {
        for i in 0..n1 {
            let c = field.coefs(grid.node(i, j))?;
            let w = 1.0 / (h2 * h2);
            out.push(Location {
                coef: c.gamma,
                nodes: [(idx(i, j - 1), w), (idx(i, j), -2.0 * w), (idx(i, j + 1), w), (0, 0.0)],
                len: 3,
            });
        }
    }
    for j in 0..n2 - 1 {
        for i in 0..n1 - 1 {
            let p = grid.node(i, j);
            let c = field.coefs([p[0] + 0.5 * h1, p[1] + 0.5 * h2])?;
            let w = 1.0 / (h1 * h2);
            out.push(Location {
                coef: c.beta * 2.0,
                nodes: [
                    (idx(i, j), w),
                    (idx(i + 1, j), -w),
                    (idx(i, j + 1), -w),
                    (idx(i + 1, j + 1), w),
                ],
                len: 4,
            });
        }
    }
    Ok(out)
}

/// Sparse `H_h` over the unknowns `2 <= i <= n1-3`, `2 <= j <= n2-3`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub domain: Domain2D,
    pub matrix: CsrMatrix<C>,
    pub is_real: bool,
    pub field_name: String,
    ni1: usize,
    ni2: usize,
}

impl DiscreteOperator {
    pub fn unknowns(&self) -> usize {
        self.ni1 * self.ni2
    }

    /// Interior grid shape `(ni1, ni2)`.
    pub fn interior_shape(&self) -> (usize, usize) {
        (self.ni1, self.ni2)
    }

    pub fn unknown_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= 2 && j >= 2 && i < self.domain.n1 - 2 && j < self.domain.n2 - 2 {
            Some((j - 2) * self.ni1 + (i - 2))
        } else {
            None
        }
    }

    pub fn node_of(&self, k: usize) -> (usize, usize) {
        (k % self.ni1 + 2, k / self.ni1 + 2)
    }

    pub fn restrict(&self, u: &GridFunction) -> Result<Vec<C>> {
        if !u.domain.same_grid(&self.domain) {
            return Err(Error::GridMismatch("grid function and operator grids differ".into()));
        }
        Ok((0..self.unknowns())
            .map(|k| {
                let (i, j) = self.node_of(k);
                u.at(i, j)
            })
            .collect())
    }

    pub fn extend(&self, v: &[C]) -> GridFunction {
        let mut g = GridFunction::zeros(self.domain);
        for (k, &x) in v.iter().enumerate() {
            let (i, j) = self.node_of(k);
            g.values[self.domain.index(i, j)] = x;
        }
        g
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); v.len()];
        for (r, row) in self.matrix.row_iter().enumerate() {
            let mut acc = C::new(0.0, 0.0);
            for (&c, &x) in row.col_indices().iter().zip(row.values()) {
                acc += x * v[c];
            }
            out[r] = acc;
        }
        out
    }

    /// `cellarea * u^H H_h u` on the unknowns.
    pub fn quadratic(&self, v: &[C]) -> C {
        let hv = self.apply(v);
        let s: C = v.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
        s * self.domain.cell_area()
    }

    /// `||H - H^T||_F / ||H||_F`.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.matrix.transpose();
        let mut diff = 0.0;
        let mut norm = 0.0;
        for (a, b) in self.matrix.triplet_iter().zip(t.triplet_iter()) {
            debug_assert_eq!((a.0, a.1), (b.0, b.1));
            diff += (a.2 - b.2).norm_sqr();
            norm += a.2.norm_sqr();
        }
        (diff / norm.max(f64::MIN_POSITIVE)).sqrt()
    }

    /// Real part of the matrix; errors when imaginary entries are present.
    pub fn real_csc(&self) -> Result<CscMatrix<f64>> {
        if !self.is_real {
            return Err(Error::Parameter(
                "semigroup evolution supports real coefficients only".into(),
            ));
        }
        Ok(CscMatrix::from(&self.real_csr()))
    }

    pub fn real_csr(&self) -> CsrMatrix<f64> {
        let (offsets, cols, vals) = (
            self.matrix.row_offsets().to_vec(),
            self.matrix.col_indices().to_vec(),
            self.matrix.values().iter().map(|v| v.re).collect::<Vec<_>>(),
        );
        CsrMatrix::try_from_csr_data(self.matrix.nrows(), self.matrix.ncols(), offsets, cols, vals)
            .expect("same sparsity pattern")
    }

    /// Hermitian part `(H + H^H)/2`, real when the stencil weights are real.
    pub fn hermitian_part_real(&self) -> CsrMatrix<f64> {
        self.real_csr()
    }
}

pub fn assemble_operator(field: &CoefficientField, grid: &Domain2D) -> Result<DiscreteOperator> {
    if grid.n1 < 6 || grid.n2 < 6 {
        return Err(Error::Resolution(format!(
            "operator assembly needs at least 6 nodes per axis, got {} x {}",
            grid.n1, grid.n2
        )));
    }
    let locs = difference_locations(field, grid)?;
    let (ni1, ni2) = (grid.n1 - 4, grid.n2 - 4);
    let n = ni1 * ni2;
    let unknown = |k: usize| -> Option<usize> {
        let (i, j) = grid.coords(k);
        if i >= 2 && j >= 2 && i < grid.n1 - 2 && j < grid.n2 - 2 {
            Some((j - 2) * ni1 + (i - 2))
        } else {
            None
        }
    };
    let mut coo = CooMatrix::new(n, n);
    let mut is_real = true;
    for loc in &locs {
        let active: Vec<(usize, f64)> = loc.nodes[..loc.len]
            .iter()
            .filter_map(|&(k, w)| unknown(k).map(|u| (u, w)))
            .collect();
        if active.is_empty() {
            continue;
        }
        if loc.coef.im != 0.0 {
            is_real = false;
        }
        for &(a, wa) in &active {
            for &(b, wb) in &active {
                coo.push(a, b, loc.coef * (wa * wb));
            }
        }
    }
    Ok(DiscreteOperator {
        domain: *grid,
        matrix: CsrMatrix::from(&coo),
        is_real,
        field_name: field.source_name(),
        ni1,
        ni2,
    })
}
