//! Grid discretization of `psi(-Laplacian) + V` with exterior zero condition,
//! eigensolves, extremum location, torsion and heat kernels.
//!
//! The free operator is defined spectrally on an enlarged periodic box: its
//! eigenvectors are the box's discrete Fourier modes with eigenvalues
//! `psi(|xi|^2)`. The killed operator IS the principal submatrix of that
//! operator on the grid points interior to the domain; restricting (rather
//! than applying `psi` to a Dirichlet Laplacian) realizes the exterior
//! condition nonlocally, which is the correct construction for jump
//! generators. Periodization error decays with the embedding factor and is
//! monitored by doubling it; nonlocal symbols want generous factors.
//!
//! Whole-space problems use the same machinery with no restriction: the box
//! plays the role of a large torus and truncation is checked by doubling it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinSpec;
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};

/// Default cap on interior points (dense matrices are `N x N`).
pub const DEFAULT_INTERIOR_CAP: usize = 5000;
/// Cap on total grid points `n^d` entering the FFT.
pub const GRID_POINT_CAP: usize = 1 << 24;
/// Densest problem the full eigendecomposition paths accept.
pub const DENSE_CAP: usize = 600;
/// Relative residual contract for eigenpairs.
pub const EIG_RTOL: f64 = 1e-7;

fn interior_cap() -> usize {
    std::env::var("PSILAP_MAX_INTERIOR")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_INTERIOR_CAP)
}

/// A convex domain embedded in a periodic computational box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    pub domain: ConvexDomain,
    pub dim: usize,
    /// Grid points per axis (power of two).
    pub n_per_axis: usize,
    /// Lower corner of the cubic embedding box.
    pub box_lo: Vec<f64>,
    /// Side length of the embedding box.
    pub box_side: f64,
    /// Grid spacing `box_side / n_per_axis`.
    pub h: f64,
    /// Flat row-major indices of grid points strictly inside the domain,
    /// ascending (= lexicographic in the multi-index).
    pub interior: Vec<usize>,
    /// Whole-space mode: no restriction, every grid point participates.
    pub full_space: bool,
}

impl GridDomain {
    /// Embed `domain` in a cubic box of side `embed_factor * max extent`,
    /// centered on the domain's bounding box.
    pub fn new(domain: ConvexDomain, n_per_axis: usize, embed_factor: f64) -> Result<Self> {
        if !(embed_factor >= 1.0) {
            return Err(Error::ParameterDomain(format!(
                "embed factor must be >= 1, got {embed_factor}"
            )));
        }
        let (lo, hi) = domain.bounding_box();
        let extent = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| h - l)
            .fold(0.0_f64, f64::max);
        let side = embed_factor * extent;
        let box_lo: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| 0.5 * (l + h) - 0.5 * side)
            .collect();
        Self::in_box(domain, box_lo, side, n_per_axis, false)
    }

    /// Embed `domain` in an explicitly given box (shared-box constructions,
    /// e.g. domain-monotonicity checks).
    pub fn in_box(
        domain: ConvexDomain,
        box_lo: Vec<f64>,
        box_side: f64,
        n_per_axis: usize,
        full_space: bool,
    ) -> Result<Self> {
        let d = domain.dim();
        if !n_per_axis.is_power_of_two() || n_per_axis < 8 {
            return Err(Error::ParameterDomain(format!(
                "n_per_axis must be a power of two >= 8, got {n_per_axis}"
            )));
        }
        if box_lo.len() != d {
            return Err(Error::ParameterDomain(
                "box corner dimension mismatch".into(),
            ));
        }
        let total = n_per_axis.checked_pow(d as u32).filter(|&t| t <= GRID_POINT_CAP);
        let Some(total) = total else {
            return Err(Error::Capacity {
                what: "grid points",
                got: usize::MAX,
                cap: GRID_POINT_CAP,
            });
        };
        let h = box_side / n_per_axis as f64;
        let mut grid = GridDomain {
            domain,
            dim: d,
            n_per_axis,
            box_lo,
            box_side,
            h,
            interior: Vec::new(),
            full_space,
        };
        let mut x = vec![0.0; d];
        let mut interior = Vec::new();
        for flat in 0..total {
            grid.point_into(flat, &mut x);
            if full_space || grid.domain.contains(&x) {
                interior.push(flat);
            }
        }
        let cap = interior_cap();
        if interior.len() > cap {
            return Err(Error::Capacity {
                what: "interior points",
                got: interior.len(),
                cap,
            });
        }
        if interior.is_empty() {
            return Err(Error::ParameterDomain(
                "no grid points fall inside the domain; refine the grid".into(),
            ));
        }
        grid.interior = interior;
        Ok(grid)
    }

    /// Whole-space mode on the box `[-half_extent, half_extent]^d`: every
    /// grid point participates and nothing is killed.
    pub fn full_space(half_extent: f64, n_per_axis: usize, d: usize) -> Result<Self> {
        if !(half_extent > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "half extent must be > 0, got {half_extent}"
            )));
        }
        let domain = match d {
            1 => ConvexDomain::interval(-half_extent, half_extent)?,
            _ => ConvexDomain::boxed(vec![-half_extent; d], vec![half_extent; d])?,
        };
        Self::in_box(
            domain,
            vec![-half_extent; d],
            2.0 * half_extent,
            n_per_axis,
            true,
        )
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Multi-index of a flat row-major grid index.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim];
        let mut rem = flat;
        for k in (0..self.dim).rev() {
            idx[k] = rem % self.n_per_axis;
            rem /= self.n_per_axis;
        }
        idx
    }

    fn point_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for k in (0..self.dim).rev() {
            out[k] = self.box_lo[k] + (rem % self.n_per_axis) as f64 * self.h;
            rem /= self.n_per_axis;
        }
    }

    /// Coordinates of a flat grid index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.point_into(flat, &mut x);
        x
    }

    /// Coordinates of interior point `i` (row index in the matrix).
    pub fn interior_point(&self, i: usize) -> Vec<f64> {
        self.point(self.interior[i])
    }

    /// Index of the interior point nearest to `x` (panics off the empty set).
    pub fn nearest_interior(&self, x: &[f64]) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        let mut p = vec![0.0; self.dim];
        for (i, &flat) in self.interior.iter().enumerate() {
            self.point_into(flat, &mut p);
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best_d {
                best_d = d2;
                best = i;
            }
        }
        best
    }

    /// Distance from an interior point to the relevant boundary: the domain
    /// boundary for killed problems, the truncation box for whole-space mode.
    pub fn boundary_distance_of(&self, x: &[f64]) -> f64 {
        if self.full_space {
            x.iter()
                .zip(&self.box_lo)
                .map(|(xi, lo)| (xi - lo).min(lo + self.box_side - xi))
                .fold(f64::INFINITY, f64::min)
        } else {
            self.domain.boundary_distance(x)
        }
    }
}

/// Symmetric matrix of the killed (or whole-space) operator on grid points.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: GridDomain,
    pub spec: BernsteinSpec,
    pub matrix: DMatrix<f64>,
    /// Potential values on interior points, when one has been added.
    pub potential: Option<Vec<f64>>,
}

/// Inverse DFT along every axis of a row-major `n^d` array, in place.
fn ifft_nd(data: &mut [Complex<f64>], n: usize, d: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    let mut line = vec![Complex::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for chunk in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for j in 0..n {
                    line[j] = data[chunk + off + j * stride];
                }
                fft.process(&mut line);
                for j in 0..n {
                    data[chunk + off + j * stride] = line[j];
                }
            }
        }
    }
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Real translation kernel of the periodic multiplier operator, symmetrized
/// in every axis so the restricted matrix is exactly symmetric.
fn multiplier_kernel(spec: &BernsteinSpec, n: usize, d: usize, side: f64) -> Vec<f64> {
    let total = n.pow(d as u32);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut data = vec![Complex::new(0.0, 0.0); total];
    let mut idx = vec![0usize; d];
    for (flat, v) in data.iter_mut().enumerate() {
        let mut rem = flat;
        for k in (0..d).rev() {
            idx[k] = rem % n;
            rem /= n;
        }
        let mut xi2 = 0.0;
        for &i in &idx {
            let f = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            let xi = two_pi * f / side;
            xi2 += xi * xi;
        }
        *v = Complex::new(spec.eval(xi2), 0.0);
    }
    ifft_nd(&mut data, n, d);
    let g: Vec<f64> = data.iter().map(|c| c.re).collect();
    // Average g(j) with g(-j); the multiplier is even so they agree up to
    // roundoff, and exact evenness makes the restriction exactly symmetric.
    let mut sym = vec![0.0; total];
    for flat in 0..total {
        let mut rem = flat;
        let mut neg = 0usize;
        for k in 0..d {
            let divisor = n.pow((d - 1 - k) as u32);
            let i = rem / divisor;
            rem %= divisor;
            neg = neg * n + if i == 0 { 0 } else { n - i };
        }
        sym[flat] = 0.5 * (g[flat] + g[neg]);
    }
    sym
}

/// Assemble the killed operator: the principal submatrix, on interior points,
/// of the periodic Fourier-multiplier operator with symbol `psi(|xi|^2)`.
pub fn assemble_operator(grid: &GridDomain, spec: &BernsteinSpec) -> Result<DiscreteOperator> {
    spec.validate()?;
    let n = grid.n_per_axis;
    let d = grid.dim;
    let g = multiplier_kernel(spec, n, d, grid.box_side);
    let pts = grid.interior_count();
    let multis: Vec<Vec<usize>> = grid.interior.iter().map(|&f| grid.multi_index(f)).collect();
    let mut m = DMatrix::zeros(pts, pts);
    for a in 0..pts {
        for b in a..pts {
            let mut diff = 0usize;
            for k in 0..d {
                let di = (multis[a][k] + n - multis[b][k]) % n;
                diff = diff * n + di;
            }
            let val = g[diff];
            m[(a, b)] = val;
            m[(b, a)] = val;
        }
    }
    Ok(DiscreteOperator {
        grid: grid.clone(),
        spec: *spec,
        matrix: m,
        potential: None,
    })
}

/// Add a multiplication operator to the diagonal. Values must be finite on
/// every interior point (place singularities off-grid).
pub fn add_potential<V>(op: &DiscreteOperator, v: V) -> Result<DiscreteOperator>
where
    V: Fn(&[f64]) -> f64,
{
    let mut out = op.clone();
    let mut values = Vec::with_capacity(op.grid.interior_count());
    for i in 0..op.grid.interior_count() {
        let x = op.grid.interior_point(i);
        let val = v(&x);
        if !val.is_finite() {
            return Err(Error::SingularPotential(x));
        }
        out.matrix[(i, i)] += val;
        values.push(val);
    }
    out.potential = Some(match &op.potential {
        Some(old) => old.iter().zip(&values).map(|(a, b)| a + b).collect(),
        None => values,
    });
    Ok(out)
}

/// One eigenpair of the discrete operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Eigenfunction on interior points, normalized so `h^d * sum phi^2 = 1`.
    pub phi: Vec<f64>,
    /// 1-based position in the ascending spectrum.
    pub index: usize,
    /// Grid argmax of `|phi|` (ties resolved to the smallest lexicographic
    /// index; the count of exact ties is recorded).
    pub x_star: Vec<f64>,
    /// Distance from `x_star` to the relevant boundary.
    pub r_star: f64,
    pub residual: f64,
    pub argmax_ties: usize,
}

/// Eigensolver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    /// Dense below [`DENSE_CAP`], shift-invert Lanczos above.
    Auto,
    Dense,
    ShiftInvertLanczos,
}

/// Grid argmax of `|phi|` with deterministic tie-breaking.
pub fn locate_extremum_of(phi: &[f64], grid: &GridDomain) -> (Vec<f64>, f64, usize) {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    let mut ties = 0usize;
    for (i, &v) in phi.iter().enumerate() {
        let a = v.abs();
        if a > best_v {
            best_v = a;
            best = i;
            ties = 0;
        } else if a == best_v {
            ties += 1;
        }
    }
    let x = grid.interior_point(best);
    let r = grid.boundary_distance_of(&x);
    (x, r, ties)
}

/// Extremum location and boundary distance of an eigenpair (already cached on
/// the pair at eigensolve time; recomputed here from the raw vector).
pub fn locate_extremum(pair: &EigenPair, grid: &GridDomain) -> (Vec<f64>, f64) {
    let (x, r, _) = locate_extremum_of(&pair.phi, grid);
    (x, r)
}

/// Matrix norm proxy for residual contracts: max absolute row sum.
fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Compute the `k` smallest eigenpairs.
pub fn eigensolve(op: &DiscreteOperator, k: usize) -> Result<Vec<EigenPair>> {
    eigensolve_with(op, k, EigMethod::Auto)
}

/// Compute the `k` smallest eigenpairs with an explicit method choice.
pub fn eigensolve_with(op: &DiscreteOperator, k: usize, method: EigMethod) -> Result<Vec<EigenPair>> {
    let n = op.matrix.nrows();
    if k == 0 || k > 64 {
        return Err(Error::ParameterDomain(format!(
            "eigenpair count must be in 1..=64, got {k}"
        )));
    }
    if k > n {
        return Err(Error::ParameterDomain(format!(
            "asked for {k} eigenpairs of a {n}-point operator"
        )));
    }
    let method = match method {
        EigMethod::Auto if n <= DENSE_CAP => EigMethod::Dense,
        EigMethod::Auto => EigMethod::ShiftInvertLanczos,
        m => m,
    };
    let (values, vectors) = match method {
        EigMethod::Dense => dense_smallest(&op.matrix, k)?,
        EigMethod::ShiftInvertLanczos | EigMethod::Auto => lanczos_smallest(op, k)?,
    };
    let norm_a = inf_norm(&op.matrix);
    let hd = op.grid.h.powi(op.grid.dim as i32);
    let mut pairs = Vec::with_capacity(k);
    for (j, (&lambda, vec)) in values.iter().zip(vectors.iter()).enumerate() {
        let mut phi = vec.clone();
        // Residual against the raw vector.
        let v = DVector::from_column_slice(&phi);
        let resid = (&op.matrix * &v - lambda * &v).norm() / (norm_a * v.norm()).max(f64::MIN_POSITIVE);
        if resid > EIG_RTOL {
            return Err(Error::Numerical(format!(
                "eigenpair {} residual {resid:.3e} exceeds contract {EIG_RTOL:.1e}",
                j + 1
            )));
        }
        // L2 normalization with the grid measure, sign fixed at the argmax.
        let l2 = (phi.iter().map(|x| x * x).sum::<f64>() * hd).sqrt();
        for x in phi.iter_mut() {
            *x /= l2;
        }
        let (imax, _) = phi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        if phi[imax] < 0.0 {
            for x in phi.iter_mut() {
                *x = -*x;
            }
        }
        let (x_star, r_star, ties) = locate_extremum_of(&phi, &op.grid);
        pairs.push(EigenPair {
            lambda,
            phi,
            index: j + 1,
            x_star,
            r_star,
            residual: resid,
            argmax_ties: ties,
        });
    }
    Ok(pairs)
}

fn dense_smallest(m: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.nrows();
    if n > DENSE_CAP.max(1200) {
        return Err(Error::Capacity {
            what: "dense eigensolve size",
            got: n,
            cap: DENSE_CAP.max(1200),
        });
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .take(k)
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    Ok((values, vectors))
}

/// Shift-invert Lanczos with full reorthogonalization.
///
/// `B = A + sigma I` is positive definite for `sigma` beyond the most
/// negative potential value (the free part is positive semidefinite), so the
/// smallest eigenvalues of `A` are the largest of `B^{-1}`, which plain
/// Lanczos resolves quickly. Suited to simple spectra; clustered or multiple
/// eigenvalues belong on the dense path.
fn lanczos_smallest(op: &DiscreteOperator, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let a = &op.matrix;
    let n = a.nrows();
    let min_pot = op
        .potential
        .as_ref()
        .map(|p| p.iter().copied().fold(0.0_f64, f64::min))
        .unwrap_or(0.0);
    let sigma = 1.0 - min_pot.min(0.0);
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += sigma;
    }
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::Numerical("shifted operator is not positive definite".into()))?;

    let mut m_dim = (6 * k + 30).min(n);
    loop {
        // Deterministic pseudo-random start breaks grid symmetries.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_1A1C);
        let mut q0 = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        q0 /= q0.norm();
        let mut basis: Vec<DVector<f64>> = vec![q0];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for j in 0..m_dim {
            let w0 = chol.solve(&basis[j]);
            let mut w = w0.clone();
            // Full reorthogonalization, twice for numerical safety.
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w -= c * q;
                }
            }
            let alpha = basis[j].dot(&w0);
            alphas.push(alpha);
            let beta = w.norm();
            if beta < 1e-13 || j + 1 == m_dim {
                break;
            }
            betas.push(beta);
            basis.push(w / beta);
        }
        let mm = alphas.len();
        if mm < k {
            return Err(Error::Numerical(
                "Lanczos space collapsed before reaching the requested count".into(),
            ));
        }
        let mut t = DMatrix::zeros(mm, mm);
        for i in 0..mm {
            t[(i, i)] = alphas[i];
            if i + 1 < mm {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..mm).collect();
        // Largest of B^{-1} first.
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        let mut ok = true;
        let norm_a = inf_norm(a);
        for &j in order.iter().take(k) {
            let nu = eig.eigenvalues[j];
            if nu <= 0.0 {
                ok = false;
                break;
            }
            let lambda = 1.0 / nu - sigma;
            let s = eig.eigenvectors.column(j);
            let mut v = DVector::zeros(n);
            for (i, q) in basis.iter().enumerate().take(mm) {
                v += s[i] * q;
            }
            let resid = (a * &v - lambda * &v).norm() / (norm_a * v.norm()).max(f64::MIN_POSITIVE);
            if resid > EIG_RTOL {
                ok = false;
                break;
            }
            values.push(lambda);
            vectors.push(v.iter().copied().collect::<Vec<f64>>());
        }
        if ok {
            return Ok((values, vectors));
        }
        if m_dim >= n {
            return Err(Error::Numerical(format!(
                "Lanczos did not reach the residual contract {EIG_RTOL:.1e} even at full dimension"
            )));
        }
        m_dim = (2 * m_dim).min(n);
    }
}

/// Solve the torsion problem `A v = 1` for the free operator.
///
/// The solution is the discrete mean exit time profile; it must be strictly
/// positive on the interior, which is verified before returning.
pub fn torsion(op_free: &DiscreteOperator) -> Result<Vec<f64>> {
    if op_free.potential.is_some() {
        return Err(Error::Precondition(
            "torsion is defined for the free operator (no potential)".into(),
        ));
    }
    let n = op_free.matrix.nrows();
    let chol = op_free
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("killed operator is not positive definite".into()))?;
    let v = chol.solve(&DVector::from_element(n, 1.0));
    let min = v.min();
    if min <= 0.0 {
        return Err(Error::Numerical(format!(
            "torsion solve produced a non-positive value ({min:.3e})"
        )));
    }
    Ok(v.iter().copied().collect())
}

/// Discrete heat kernel `exp(-t A)` by full eigendecomposition.
///
/// Exact identity at `t = 0`. Entries are positive once `t` clears the
/// grid-scale transient (order `h^2` for the classical symbol); below that the
/// spectrally discretized kernel can undershoot zero at roundoff-adjacent
/// size, which is a discretization artifact, not an operator property.
pub fn heat_kernel(op: &DiscreteOperator, t: f64) -> Result<DMatrix<f64>> {
    let n = op.matrix.nrows();
    if n > DENSE_CAP {
        return Err(Error::Capacity {
            what: "heat kernel size",
            got: n,
            cap: DENSE_CAP,
        });
    }
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let eig = nalgebra::SymmetricEigen::new(op.matrix.clone());
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= (-t * eig.eigenvalues[j]).exp();
    }
    let kmat = &scaled * q.transpose();
    Ok(0.5 * (&kmat + kmat.transpose()))
}

/// Geometric-sequence extrapolation from eigenvalues at spacings
/// `(h, h/2, h/4)`; exact when the error decays like `C * rho^level`.
pub fn richardson(lams: [f64; 3]) -> f64 {
    let [a0, a1, a2] = lams;
    let denom = (a2 - a1) - (a1 - a0);
    if denom.abs() < 1e-300 {
        return a2;
    }
    a2 - (a2 - a1) * (a2 - a1) / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval_grid(n: usize, factor: f64) -> GridDomain {
        GridDomain::new(ConvexDomain::interval(-1.0, 1.0).unwrap(), n, factor).unwrap()
    }

    #[test]
    fn grid_validation() {
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        assert!(GridDomain::new(dom.clone(), 100, 4.0).is_err());
        assert!(GridDomain::new(dom.clone(), 256, 0.5).is_err());
        let g = GridDomain::new(dom, 256, 4.0).unwrap();
        assert_eq!(g.h, 8.0 / 256.0);
        // Interior points sit strictly inside.
        for i in 0..g.interior_count() {
            let x = g.interior_point(i);
            assert!(g.domain.boundary_distance(&x) > 0.0);
        }
    }

    #[test]
    fn capacity_cap_applies() {
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let err = GridDomain::new(dom, 16384, 1.0).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn linear_matrix_reproduces_dirichlet_spectrum() {
        let spec = BernsteinSpec::linear();
        let grid = interval_grid(1024, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let pairs = eigensolve(&op, 3).unwrap();
        for (k, pair) in pairs.iter().enumerate() {
            let exact = ((k + 1) as f64 * std::f64::consts::PI / 2.0).powi(2);
            let rel = (pair.lambda - exact).abs() / exact;
            assert!(rel < 0.01, "k={} rel={rel}", k + 1);
        }
    }

    #[test]
    fn matrix_is_symmetric_with_positive_diagonal() {
        for spec in [
            BernsteinSpec::linear(),
            BernsteinSpec::stable(1.0).unwrap(),
            BernsteinSpec::geometric_stable(2.0).unwrap(),
        ] {
            let grid = interval_grid(256, 4.0);
            let op = assemble_operator(&grid, &spec).unwrap();
            let m = &op.matrix;
            for i in 0..m.nrows() {
                assert!(m[(i, i)] > 0.0);
                for j in 0..i {
                    assert!((m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * m[(i, i)].abs());
                }
            }
        }
    }

    #[test]
    fn fractional_offdiagonal_matches_singular_kernel() {
        // Oracle: the half-exponent symbol in one dimension has jump kernel
        // 1/(pi x^2), so off-diagonal entries approach -h/(pi dx^2).
        let spec = BernsteinSpec::stable(1.0).unwrap();
        let grid = interval_grid(512, 16.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let h = grid.h;
        let a = 10usize;
        for sep in [8usize, 16, 32] {
            let b = a + sep;
            let dx = sep as f64 * h;
            let oracle = -h / (std::f64::consts::PI * dx * dx);
            let got = op.matrix[(a, b)];
            let rel = (got - oracle).abs() / oracle.abs();
            assert!(rel < 0.05, "sep={sep}: got {got}, oracle {oracle}, rel {rel}");
        }
    }

    #[test]
    fn potential_shift_moves_spectrum_exactly() {
        let spec = BernsteinSpec::stable(1.0).unwrap();
        let grid = interval_grid(256, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let base = eigensolve(&op, 2).unwrap();

        let unchanged = add_potential(&op, |_| 0.0).unwrap();
        assert_eq!(unchanged.matrix, op.matrix);

        let c = 0.7;
        let shifted = add_potential(&op, |_| c).unwrap();
        let moved = eigensolve(&shifted, 2).unwrap();
        for (p, q) in base.iter().zip(&moved) {
            assert!((q.lambda - p.lambda - c).abs() < 1e-9);
            // Same eigenvector under an identity shift.
            let dot: f64 = p.phi.iter().zip(&q.phi).map(|(a, b)| a * b).sum();
            let hd = grid.h;
            assert!((dot * hd - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn deeper_wells_lower_the_principal_eigenvalue() {
        let spec = BernsteinSpec::linear();
        let grid = interval_grid(256, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let well = |depth: f64| {
            move |x: &[f64]| if x[0].abs() < 0.5 { -depth } else { 0.0 }
        };
        let l1 = eigensolve(&add_potential(&op, well(1.0)).unwrap(), 1).unwrap()[0].lambda;
        let l2 = eigensolve(&add_potential(&op, well(2.0)).unwrap(), 1).unwrap()[0].lambda;
        let l0 = eigensolve(&op, 1).unwrap()[0].lambda;
        assert!(l1 < l0 && l2 < l1, "{l0} {l1} {l2}");
    }

    #[test]
    fn singular_potential_on_grid_is_reported() {
        let spec = BernsteinSpec::linear();
        let grid = interval_grid(64, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let origin_is_on_grid = (0..grid.interior_count())
            .any(|i| grid.interior_point(i)[0] == 0.0);
        assert!(origin_is_on_grid);
        let err = add_potential(&op, |x| 1.0 / x[0].abs()).unwrap_err();
        assert!(matches!(err, Error::SingularPotential(_)));
    }

    #[test]
    fn principal_eigenfunction_has_positive_version() {
        for spec in [
            BernsteinSpec::linear(),
            BernsteinSpec::stable(1.0).unwrap(),
            BernsteinSpec::log_damped(2.0, 1.0).unwrap(),
        ] {
            let grid = interval_grid(512, 4.0);
            let op = assemble_operator(&grid, &spec).unwrap();
            let p = &eigensolve(&op, 1).unwrap()[0];
            let min = p.phi.iter().copied().fold(f64::INFINITY, f64::min);
            let max = p.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(min / max > -1e-8, "min/max = {}", min / max);
            // Normalization h * sum phi^2 = 1.
            let l2: f64 = p.phi.iter().map(|v| v * v).sum::<f64>() * grid.h;
            assert!((l2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let spec = BernsteinSpec::stable(1.3).unwrap();
        let grid = interval_grid(1024, 4.0); // 255 interior points
        let op = assemble_operator(&grid, &spec).unwrap();
        let dense = eigensolve_with(&op, 4, EigMethod::Dense).unwrap();
        let lcz = eigensolve_with(&op, 4, EigMethod::ShiftInvertLanczos).unwrap();
        for (a, b) in dense.iter().zip(&lcz) {
            assert!((a.lambda - b.lambda).abs() < 1e-8 * a.lambda.max(1.0));
        }
    }

    #[test]
    fn lanczos_handles_indefinite_wells() {
        let spec = BernsteinSpec::linear();
        let grid = GridDomain::full_space(4.0, 256, 1).unwrap();
        let op = assemble_operator(&grid, &spec).unwrap();
        let well = add_potential(&op, |x: &[f64]| if x[0].abs() < 1.0 { -10.0 } else { 0.0 }).unwrap();
        let dense = eigensolve_with(&well, 2, EigMethod::Dense).unwrap();
        let lcz = eigensolve_with(&well, 2, EigMethod::ShiftInvertLanczos).unwrap();
        assert!(dense[0].lambda < 0.0);
        for (a, b) in dense.iter().zip(&lcz) {
            assert!((a.lambda - b.lambda).abs() < 1e-7 * a.lambda.abs().max(1.0));
        }
    }

    #[test]
    fn extremum_location_and_ties() {
        let spec = BernsteinSpec::linear();
        let grid = interval_grid(512, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let pairs = eigensolve(&op, 2).unwrap();
        // Symmetric domain: the ground state peaks at the center.
        assert!(pairs[0].x_star[0].abs() <= grid.h + 1e-12);
        assert!((pairs[0].r_star - (1.0 - pairs[0].x_star[0].abs())).abs() < 1e-12);
        // Second mode peaks near +-1/2.
        assert!(
            (pairs[1].x_star[0].abs() - 0.5).abs() <= 2.0 * grid.h,
            "x2* = {:?}",
            pairs[1].x_star
        );

        // Deterministic tie-break: first (lexicographically smallest) index.
        let phi = vec![0.5, -2.0, 1.0, 2.0, 0.1];
        let (x, _, ties) = locate_extremum_of(&phi, &grid);
        assert_eq!(ties, 1);
        assert_eq!(x, grid.interior_point(1));
    }

    #[test]
    fn torsion_matches_parabola_for_linear() {
        let spec = BernsteinSpec::linear();
        let grid = interval_grid(2048, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let v = torsion(&op).unwrap();
        let i0 = grid.nearest_interior(&[0.0]);
        assert!((v[i0] - 0.5).abs() < 0.005 * 0.5, "v(0) = {}", v[i0]);
        // Profile check at x = 0.6: (1 - 0.36)/2 = 0.32.
        let i6 = grid.nearest_interior(&[0.6]);
        assert!((v[i6] - 0.32).abs() < 0.01);
        // Argmax at the center for a symmetric domain.
        let (imax, _) = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(grid.interior_point(imax)[0].abs() <= grid.h);
        assert!(torsion(&add_potential(&op, |_| 1.0).unwrap()).is_err());
    }

    #[test]
    fn torsion_center_value_matches_exit_time_oracle_for_cauchy() {
        // E^0[tau] = 1 for the half-exponent symbol on (-1,1); generous
        // embedding keeps the wrap-around error small.
        let spec = BernsteinSpec::stable(1.0).unwrap();
        let dom = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let grid = GridDomain::new(dom, 8192, 16.0).unwrap();
        let op = assemble_operator(&grid, &spec).unwrap();
        let v = torsion(&op).unwrap();
        let i0 = grid.nearest_interior(&[0.0]);
        assert!((v[i0] - 1.0).abs() < 0.02, "v(0) = {}", v[i0]);
    }

    #[test]
    fn heat_kernel_identities() {
        let spec = BernsteinSpec::stable(1.0).unwrap();
        let grid = interval_grid(512, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let n = op.matrix.nrows();

        let k0 = heat_kernel(&op, 0.0).unwrap();
        assert_eq!(k0, DMatrix::identity(n, n));

        let k1 = heat_kernel(&op, 0.3).unwrap();
        let k2 = heat_kernel(&op, 0.45).unwrap();
        let k3 = heat_kernel(&op, 0.75).unwrap();
        // Symmetry to 1e-10.
        for i in 0..n {
            for j in 0..i {
                assert!((k1[(i, j)] - k1[(j, i)]).abs() < 1e-10);
            }
        }
        // Semigroup law to 1e-8.
        let prod = &k1 * &k2;
        let err = (&prod - &k3).abs().max();
        assert!(err < 1e-8, "semigroup defect {err}");
        // Positivity at a time scale above the grid transient.
        assert!(k1.min() >= -1e-10, "min entry {}", k1.min());
    }

    #[test]
    fn spectrum_is_positive_definite_for_nonnegative_potentials() {
        let spec = BernsteinSpec::geometric_stable(2.0).unwrap();
        let grid = interval_grid(256, 4.0);
        let op = assemble_operator(&grid, &spec).unwrap();
        let with_v = add_potential(&op, |x: &[f64]| x[0] * x[0]).unwrap();
        let pairs = eigensolve(&with_v, 1).unwrap();
        assert!(pairs[0].lambda > 0.0);
    }

    #[test]
    fn domain_monotonicity_on_shared_box() {
        let spec = BernsteinSpec::stable(1.0).unwrap();
        let small = ConvexDomain::interval(-0.5, 0.5).unwrap();
        let big = ConvexDomain::interval(-1.0, 1.0).unwrap();
        let lo = vec![-4.0];
        let g_small = GridDomain::in_box(small, lo.clone(), 8.0, 512, false).unwrap();
        let g_big = GridDomain::in_box(big, lo, 8.0, 512, false).unwrap();
        let l_small = eigensolve(&assemble_operator(&g_small, &spec).unwrap(), 1).unwrap()[0].lambda;
        let l_big = eigensolve(&assemble_operator(&g_big, &spec).unwrap(), 1).unwrap()[0].lambda;
        assert!(l_small >= l_big, "{l_small} < {l_big}");
    }

    #[test]
    fn eigenvalue_sandwich_against_classical_spectrum() {
        // lambda_1(psi) <= psi(lambda_1 classical) on the same pipeline.
        for spec in [
            BernsteinSpec::stable(1.0).unwrap(),
            BernsteinSpec::geometric_stable(2.0).unwrap(),
        ] {
            let grid = interval_grid(512, 4.0);
            let lam = eigensolve(&assemble_operator(&grid, &spec).unwrap(), 1).unwrap()[0].lambda;
            let lam_lap =
                eigensolve(&assemble_operator(&grid, &BernsteinSpec::linear()).unwrap(), 1)
                    .unwrap()[0]
                    .lambda;
            assert!(lam <= spec.eval(lam_lap) + 1e-9, "{lam} vs {}", spec.eval(lam_lap));
        }
    }

    #[test]
    fn richardson_hits_classical_interval_eigenvalue() {
        let spec = BernsteinSpec::linear();
        let mut lams = [0.0; 3];
        for (i, n) in [512usize, 1024, 2048].into_iter().enumerate() {
            let grid = interval_grid(n, 4.0);
            let op = assemble_operator(&grid, &spec).unwrap();
            lams[i] = eigensolve(&op, 1).unwrap()[0].lambda;
        }
        assert!(lams[0] > lams[1] && lams[1] > lams[2], "monotone-ish: {lams:?}");
        let extr = richardson(lams);
        let exact = std::f64::consts::PI.powi(2) / 4.0;
        assert!(
            (extr - exact).abs() < 1e-3 * exact,
            "extrapolated {extr} vs {exact}"
        );
    }

    #[test]
    fn two_dimensional_ball_spectrum() {
        // Classical unit disk: lambda_1 = j_{0,1}^2 ~ 5.7832, with a doubly
        // degenerate second pair; dense path resolves the multiplicity.
        let dom = ConvexDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let grid = GridDomain::new(dom, 128, 4.0).unwrap();
        let op = assemble_operator(&grid, &BernsteinSpec::linear()).unwrap();
        let pairs = eigensolve(&op, 3).unwrap();
        let j01sq = 5.783185962946785;
        assert!(
            (pairs[0].lambda - j01sq).abs() < 0.05 * j01sq,
            "lambda1 = {}",
            pairs[0].lambda
        );
        // Degenerate pair split only by grid anisotropy.
        let gap = (pairs[2].lambda - pairs[1].lambda).abs() / pairs[1].lambda;
        assert!(gap < 0.02, "degenerate split {gap}");
        // Ground state peaks at the center.
        let r = (pairs[0].x_star[0].powi(2) + pairs[0].x_star[1].powi(2)).sqrt();
        assert!(r <= grid.h * 1.5, "x* = {:?}", pairs[0].x_star);
    }

    #[test]
    fn full_space_well_localizes() {
        let spec = BernsteinSpec::linear();
        let grid = GridDomain::full_space(8.0, 512, 1).unwrap();
        let op = assemble_operator(&grid, &spec).unwrap();
        let wellop =
            add_potential(&op, |x: &[f64]| if x[0].abs() < 1.0 { -10.0 } else { 0.0 }).unwrap();
        let pairs = eigensolve(&wellop, 1).unwrap();
        assert!(pairs[0].lambda < 0.0);
        assert!(pairs[0].x_star[0].abs() <= grid.h);
    }
}
