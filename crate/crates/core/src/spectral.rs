//! Trigonometric tensor-product function spaces.
//!
//! The solver works on boxes in one or two dimensions with homogeneous
//! Dirichlet (sine modes) or Neumann (cosine modes, constant included)
//! boundary conditions. A `Basis` bundles, per unknown, the mode set up to a
//! cutoff `m` per axis, a dealiased uniform quadrature grid, and precomputed
//! node tables, so that transforms between coefficient and grid
//! representations are plain matrix passes.
//!
//! Norm conventions:
//!   H    = l2 of coefficients (the modes are L2-orthonormal)
//!   V1   = Sobolev norm via mode multipliers (1 + lambda)^s, s per unknown
//!          (s = 1 for H1, s = 2 for the fourth-order model, s = 0 for L2
//!          components of systems)
//!   V2   = L^p quadrature norm, exponent per unknown
//!   V    = V1-norm + V2-norm
//!
//! Modes are ordered by shell max(n1, n2), so the modes of cutoff m' <= m are
//! exactly a prefix of the coefficient block and projection is truncation.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// Box domain with one boundary condition per unknown. Scalar equations have
/// a single entry in `bcs`; the FitzHugh–Nagumo system has two.
#[derive(Clone, Debug)]
pub struct Domain {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub bcs: Vec<Bc>,
}

impl Domain {
    pub fn new(lengths: Vec<f64>, bcs: Vec<Bc>) -> Result<Self> {
        let dim = lengths.len();
        if dim == 0 || dim > 2 {
            return Err(Error::Config(format!("dimension {dim} not supported (d must be 1 or 2)")));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Config("side lengths must be strictly positive".into()));
        }
        if bcs.is_empty() {
            return Err(Error::Config("at least one unknown required".into()));
        }
        Ok(Domain { dim, lengths, bcs })
    }

    pub fn interval(length: f64, bc: Bc) -> Result<Self> {
        Domain::new(vec![length], vec![bc])
    }

    pub fn square(length: f64, bc: Bc) -> Result<Self> {
        Domain::new(vec![length, length], vec![bc])
    }

    pub fn unknowns(&self) -> usize {
        self.bcs.len()
    }
}

/// One normalized 1D basis function sampled on the axis quadrature nodes;
/// the table position encodes the mode number (Dirichlet: 1..=m, Neumann:
/// 0..=m, see `idx`).
struct AxisFunc {
    /// Spatial frequency n*pi/L; the 1D Laplacian eigenvalue is freq^2.
    freq: f64,
    vals: Vec<f64>,
    dvals: Vec<f64>,
}

struct AxisBasis {
    bc: Bc,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    funcs: Vec<AxisFunc>,
}

impl AxisBasis {
    fn build(bc: Bc, length: f64, m: usize, nq: usize) -> AxisBasis {
        let h = length / nq as f64;
        let nodes: Vec<f64> = (0..=nq).map(|j| j as f64 * h).collect();
        let mut weights = vec![h; nq + 1];
        weights[0] = 0.5 * h;
        weights[nq] = 0.5 * h;

        let norm_osc = (2.0 / length).sqrt();
        let mode_numbers: Vec<usize> = match bc {
            Bc::Dirichlet => (1..=m).collect(),
            Bc::Neumann => (0..=m).collect(),
        };
        let funcs = mode_numbers
            .into_iter()
            .map(|n| {
                let freq = n as f64 * std::f64::consts::PI / length;
                let (vals, dvals) = match (bc, n) {
                    (Bc::Neumann, 0) => {
                        let c = (1.0 / length).sqrt();
                        (vec![c; nq + 1], vec![0.0; nq + 1])
                    }
                    (Bc::Dirichlet, _) => (
                        nodes.iter().map(|&x| norm_osc * (freq * x).sin()).collect(),
                        nodes.iter().map(|&x| norm_osc * freq * (freq * x).cos()).collect(),
                    ),
                    (Bc::Neumann, _) => (
                        nodes.iter().map(|&x| norm_osc * (freq * x).cos()).collect(),
                        nodes.iter().map(|&x| -norm_osc * freq * (freq * x).sin()).collect(),
                    ),
                };
                AxisFunc { freq, vals, dvals }
            })
            .collect();
        AxisBasis { bc, nodes, weights, funcs }
    }

    /// Table index of mode number n.
    fn idx(&self, n: usize) -> usize {
        match self.bc {
            Bc::Dirichlet => n - 1,
            Bc::Neumann => n,
        }
    }

    /// Quadrature value of int |f_n|^p over the axis.
    fn lp_integral(&self, n: usize, p: f64) -> f64 {
        let f = &self.funcs[self.idx(n)];
        self.weights
            .iter()
            .zip(&f.vals)
            .map(|(&w, &v)| w * v.abs().powf(p))
            .sum()
    }
}

/// Basis block for one unknown of the (possibly product-space) equation.
pub struct Component {
    axes: Vec<AxisBasis>,
    /// Modes (n1, n2) sorted by shell max(n1, n2); n2 is unused in 1D.
    modes: Vec<(usize, usize)>,
    /// Laplacian eigenvalue sum_i (n_i pi / L_i)^2 per mode.
    lambda: Vec<f64>,
    /// V1 multiplier order s: ||v||_V1^2 = sum (1 + lambda)^s c^2.
    pub sobolev: u32,
    /// L^p exponent of this unknown's V2 norm.
    pub v2_p: f64,
}

impl Component {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lambda(&self, j: usize) -> f64 {
        self.lambda[j]
    }

    pub fn modes(&self) -> &[(usize, usize)] {
        &self.modes
    }

    /// Number of leading modes with shell <= cut.
    fn block_len(&self, cut: usize, dim: usize) -> usize {
        let per_axis = match self.axes[0].bc {
            Bc::Dirichlet => cut,
            Bc::Neumann => cut + 1,
        };
        if dim == 1 {
            per_axis
        } else {
            per_axis * per_axis
        }
    }
}

pub struct Basis {
    pub domain: Domain,
    pub m: usize,
    pub p: f64,
    pub nq: usize,
    components: Vec<Component>,
    offsets: Vec<usize>,
    total: usize,
    /// Tensor-product quadrature weights over the flattened grid.
    qweights: Vec<f64>,
}

/// Dealiased quadrature resolution: enough subintervals that products of
/// degree p in modes up to m are integrated exactly against retained modes.
fn quad_subintervals(m: usize, p: f64) -> usize {
    let dealias = ((p / 2.0 + 1.0) * m as f64).ceil() as usize;
    (2 * m).max(dealias)
}

pub fn make_basis(domain: &Domain, m: usize, p: f64) -> Result<Arc<Basis>> {
    if m < 1 {
        return Err(Error::Config(format!("cutoff m = {m} must be >= 1")));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Config(format!("exponent p = {p} must be >= 2")));
    }
    let nq = quad_subintervals(m, p);

    let mut components = Vec::with_capacity(domain.unknowns());
    for &bc in &domain.bcs {
        let axes: Vec<AxisBasis> = domain
            .lengths
            .iter()
            .map(|&len| AxisBasis::build(bc, len, m, nq))
            .collect();
        let range: Vec<usize> = match bc {
            Bc::Dirichlet => (1..=m).collect(),
            Bc::Neumann => (0..=m).collect(),
        };
        let mut modes: Vec<(usize, usize)> = if domain.dim == 1 {
            range.iter().map(|&n| (n, 0)).collect()
        } else {
            let mut v = Vec::with_capacity(range.len() * range.len());
            for &n1 in &range {
                for &n2 in &range {
                    v.push((n1, n2));
                }
            }
            v
        };
        modes.sort_by_key(|&(n1, n2)| (n1.max(n2), n1, n2));
        let lambda: Vec<f64> = modes
            .iter()
            .map(|&(n1, n2)| {
                let mut l = axes[0].funcs[axes[0].idx(n1)].freq.powi(2);
                if domain.dim == 2 {
                    l += axes[1].funcs[axes[1].idx(n2)].freq.powi(2);
                }
                l
            })
            .collect();
        components.push(Component { axes, modes, lambda, sobolev: 1, v2_p: p });
    }

    let mut offsets = Vec::with_capacity(components.len() + 1);
    let mut total = 0;
    for c in &components {
        offsets.push(total);
        total += c.len();
    }
    offsets.push(total);

    let qweights = if domain.dim == 1 {
        components[0].axes[0].weights.clone()
    } else {
        let wx = &components[0].axes[0].weights;
        let wy = &components[0].axes[1].weights;
        let mut w = Vec::with_capacity(wx.len() * wy.len());
        for &a in wx {
            for &b in wy {
                w.push(a * b);
            }
        }
        w
    };

    Ok(Arc::new(Basis {
        domain: domain.clone(),
        m,
        p,
        nq,
        components,
        offsets,
        total,
        qweights,
    }))
}

impl Basis {
    pub fn total_modes(&self) -> usize {
        self.total
    }

    pub fn component(&self, c: usize) -> &Component {
        &self.components[c]
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component_range(&self, c: usize) -> std::ops::Range<usize> {
        self.offsets[c]..self.offsets[c + 1]
    }

    pub fn grid_len(&self) -> usize {
        self.qweights.len()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.qweights
    }

    /// Grid nodes of axis `ax` (both axes share the subinterval count).
    pub fn axis_nodes(&self, ax: usize) -> &[f64] {
        &self.components[0].axes[ax].nodes
    }

    /// Adjust the function-space structure of one unknown (used by system
    /// models whose components live in different spaces).
    pub(crate) fn set_component_structure(self: &mut Arc<Self>, c: usize, sobolev: u32, v2_p: f64) {
        let basis = Arc::get_mut(self).expect("structure fixed before the basis is shared");
        basis.components[c].sobolev = sobolev;
        basis.components[c].v2_p = v2_p;
    }

    /// Number of modes with shell <= cut in component `c`.
    pub fn block_len(&self, c: usize, cut: usize) -> usize {
        self.components[c].block_len(cut, self.domain.dim)
    }

    pub fn same_layout(&self, other: &Basis) -> bool {
        self.m == other.m
            && self.nq == other.nq
            && self.total == other.total
            && self.domain.dim == other.domain.dim
            && self.domain.bcs == other.domain.bcs
            && self.domain.lengths == other.domain.lengths
    }

    /// Evaluate one component's coefficient block on the grid.
    pub fn component_to_grid(&self, c: usize, coeffs: &[f64]) -> Vec<f64> {
        let comp = &self.components[c];
        debug_assert_eq!(coeffs.len(), comp.len());
        let nx = comp.axes[0].nodes.len();
        if self.domain.dim == 1 {
            let mut g = vec![0.0; nx];
            for (j, &(n1, _)) in comp.modes.iter().enumerate() {
                let cj = coeffs[j];
                if cj == 0.0 {
                    continue;
                }
                let vals = &comp.axes[0].funcs[comp.axes[0].idx(n1)].vals;
                for (gi, &v) in g.iter_mut().zip(vals) {
                    *gi += cj * v;
                }
            }
            g
        } else {
            let ny = comp.axes[1].nodes.len();
            let fx = comp.axes[0].funcs.len();
            // tmp[i1][iy] = sum_{n2} c_{n1 n2} f_{n2}(y_iy)
            let mut tmp = vec![0.0; fx * ny];
            for (j, &(n1, n2)) in comp.modes.iter().enumerate() {
                let cj = coeffs[j];
                if cj == 0.0 {
                    continue;
                }
                let i1 = comp.axes[0].idx(n1);
                let vy = &comp.axes[1].funcs[comp.axes[1].idx(n2)].vals;
                let row = &mut tmp[i1 * ny..(i1 + 1) * ny];
                for (t, &v) in row.iter_mut().zip(vy) {
                    *t += cj * v;
                }
            }
            let mut g = vec![0.0; nx * ny];
            for i1 in 0..fx {
                let vx = &comp.axes[0].funcs[i1].vals;
                let row = &tmp[i1 * ny..(i1 + 1) * ny];
                for ix in 0..nx {
                    let a = vx[ix];
                    if a == 0.0 {
                        continue;
                    }
                    let out = &mut g[ix * ny..(ix + 1) * ny];
                    for (o, &t) in out.iter_mut().zip(row) {
                        *o += a * t;
                    }
                }
            }
            g
        }
    }

    /// Quadrature pairings <g, phi_j> of grid values against one component's
    /// modes. For g in the span this inverts `component_to_grid` exactly.
    pub fn grid_to_component(&self, c: usize, grid: &[f64]) -> Result<Vec<f64>> {
        let comp = &self.components[c];
        let nx = comp.axes[0].nodes.len();
        if self.domain.dim == 1 {
            if grid.len() != nx {
                return Err(Error::GridSize { expected: nx, got: grid.len() });
            }
            let w = &comp.axes[0].weights;
            let mut coeffs = vec![0.0; comp.len()];
            for (j, &(n1, _)) in comp.modes.iter().enumerate() {
                let vals = &comp.axes[0].funcs[comp.axes[0].idx(n1)].vals;
                let mut s = 0.0;
                for i in 0..nx {
                    s += w[i] * grid[i] * vals[i];
                }
                coeffs[j] = s;
            }
            Ok(coeffs)
        } else {
            let ny = comp.axes[1].nodes.len();
            if grid.len() != nx * ny {
                return Err(Error::GridSize { expected: nx * ny, got: grid.len() });
            }
            let wx = &comp.axes[0].weights;
            let wy = &comp.axes[1].weights;
            let fy = comp.axes[1].funcs.len();
            // h[i2][ix] = sum_iy wy g(ix, iy) f_{n2}(y_iy)
            let mut h = vec![0.0; fy * nx];
            for i2 in 0..fy {
                let vy = &comp.axes[1].funcs[i2].vals;
                let hrow = &mut h[i2 * nx..(i2 + 1) * nx];
                for ix in 0..nx {
                    let grow = &grid[ix * ny..(ix + 1) * ny];
                    let mut s = 0.0;
                    for iy in 0..ny {
                        s += wy[iy] * grow[iy] * vy[iy];
                    }
                    hrow[ix] = s;
                }
            }
            let mut coeffs = vec![0.0; comp.len()];
            for (j, &(n1, n2)) in comp.modes.iter().enumerate() {
                let vx = &comp.axes[0].funcs[comp.axes[0].idx(n1)].vals;
                let hrow = &h[comp.axes[1].idx(n2) * nx..(comp.axes[1].idx(n2) + 1) * nx];
                let mut s = 0.0;
                for ix in 0..nx {
                    s += wx[ix] * vx[ix] * hrow[ix];
                }
                coeffs[j] = s;
            }
            Ok(coeffs)
        }
    }

    /// Gradient of one component on the grid, one array per axis.
    pub fn component_gradient(&self, c: usize, coeffs: &[f64]) -> Vec<Vec<f64>> {
        let comp = &self.components[c];
        let nx = comp.axes[0].nodes.len();
        let mut out = Vec::with_capacity(self.domain.dim);
        for ax in 0..self.domain.dim {
            let mut g = vec![0.0; self.grid_len()];
            if self.domain.dim == 1 {
                for (j, &(n1, _)) in comp.modes.iter().enumerate() {
                    let cj = coeffs[j];
                    if cj == 0.0 {
                        continue;
                    }
                    let dv = &comp.axes[0].funcs[comp.axes[0].idx(n1)].dvals;
                    for (gi, &v) in g.iter_mut().zip(dv) {
                        *gi += cj * v;
                    }
                }
            } else {
                let ny = comp.axes[1].nodes.len();
                for (j, &(n1, n2)) in comp.modes.iter().enumerate() {
                    let cj = coeffs[j];
                    if cj == 0.0 {
                        continue;
                    }
                    let fx = &comp.axes[0].funcs[comp.axes[0].idx(n1)];
                    let fyv = &comp.axes[1].funcs[comp.axes[1].idx(n2)];
                    let (ax_vals, ay_vals) = if ax == 0 {
                        (&fx.dvals, &fyv.vals)
                    } else {
                        (&fx.vals, &fyv.dvals)
                    };
                    for ix in 0..nx {
                        let a = cj * ax_vals[ix];
                        if a == 0.0 {
                            continue;
                        }
                        let row = &mut g[ix * ny..(ix + 1) * ny];
                        for (o, &b) in row.iter_mut().zip(ay_vals) {
                            *o += a * b;
                        }
                    }
                }
            }
            out.push(g);
        }
        out
    }

    /// Dual pairing of a grid-valued functional against -d(phi_j)/dx_ax,
    /// the weak divergence form used by flux operators.
    pub fn grid_to_component_grad(&self, c: usize, ax: usize, grid: &[f64]) -> Vec<f64> {
        let comp = &self.components[c];
        let nx = comp.axes[0].nodes.len();
        let mut coeffs = vec![0.0; comp.len()];
        if self.domain.dim == 1 {
            let w = &comp.axes[0].weights;
            for (j, &(n1, _)) in comp.modes.iter().enumerate() {
                let dv = &comp.axes[0].funcs[comp.axes[0].idx(n1)].dvals;
                let mut s = 0.0;
                for i in 0..nx {
                    s += w[i] * grid[i] * dv[i];
                }
                coeffs[j] = -s;
            }
        } else {
            let ny = comp.axes[1].nodes.len();
            let wx = &comp.axes[0].weights;
            let wy = &comp.axes[1].weights;
            for (j, &(n1, n2)) in comp.modes.iter().enumerate() {
                let fx = &comp.axes[0].funcs[comp.axes[0].idx(n1)];
                let fyv = &comp.axes[1].funcs[comp.axes[1].idx(n2)];
                let (ax_vals, ay_vals) = if ax == 0 {
                    (&fx.dvals, &fyv.vals)
                } else {
                    (&fx.vals, &fyv.dvals)
                };
                let mut s = 0.0;
                for ix in 0..nx {
                    let row = &grid[ix * ny..(ix + 1) * ny];
                    let mut t = 0.0;
                    for iy in 0..ny {
                        t += wy[iy] * row[iy] * ay_vals[iy];
                    }
                    s += wx[ix] * ax_vals[ix] * t;
                }
                coeffs[j] = -s;
            }
        }
        coeffs
    }

    /// Per-axis L^p integral of the normalized axis mode `n` (factorization
    /// used by the Galerkin constant).
    fn axis_lp(&self, c: usize, ax: usize, n: usize, p: f64) -> f64 {
        self.components[c].axes[ax].lp_integral(n, p)
    }

    fn mode_lp_norm(&self, c: usize, j: usize, p: f64) -> f64 {
        let comp = &self.components[c];
        let (n1, n2) = comp.modes[j];
        let mut integral = self.axis_lp(c, 0, n1, p);
        if self.domain.dim == 2 {
            integral *= self.axis_lp(c, 1, n2, p);
        }
        integral.powf(1.0 / p)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Space {
    H,
    V1,
    V2,
    V,
}

/// Element of the Galerkin space: coefficient blocks, one per unknown.
#[derive(Clone)]
pub struct SpectralField {
    pub basis: Arc<Basis>,
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        SpectralField { basis: Arc::clone(basis), coeffs: vec![0.0; basis.total_modes()] }
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.total_modes() {
            return Err(Error::BasisMismatch);
        }
        Ok(SpectralField { basis: Arc::clone(basis), coeffs })
    }

    /// Unit coefficient on mode `j` of component `c`.
    pub fn unit_mode(basis: &Arc<Basis>, c: usize, j: usize) -> Result<Self> {
        if j >= basis.component(c).len() {
            return Err(Error::ModeOutOfRange { j, limit: basis.component(c).len() });
        }
        let mut f = SpectralField::zeros(basis);
        let off = basis.component_range(c).start;
        f.coeffs[off + j] = 1.0;
        Ok(f)
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.coeffs[self.basis.component_range(c)]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let r = self.basis.component_range(c);
        &mut self.coeffs[r]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    /// self += a * other (coefficientwise).
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert!(self.basis.same_layout(&other.basis));
        for (s, &o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        debug_assert!(self.basis.same_layout(&other.basis));
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn norm_h_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn to_physical(&self) -> PhysicalField {
        let comps = (0..self.basis.n_components())
            .map(|c| self.basis.component_to_grid(c, self.component(c)))
            .collect();
        PhysicalField { basis: Arc::clone(&self.basis), comps }
    }

    /// Galerkin projection onto the cutoff-`cut` block: coefficients beyond
    /// the block are zeroed, the basis is retained.
    pub fn project(&self, cut: usize) -> Result<SpectralField> {
        if cut > self.basis.m {
            return Err(Error::CutoffOutOfRange { m: cut, limit: self.basis.m });
        }
        let mut out = self.clone();
        for c in 0..self.basis.n_components() {
            let keep = self.basis.block_len(c, cut);
            for x in out.component_mut(c).iter_mut().skip(keep) {
                *x = 0.0;
            }
        }
        Ok(out)
    }

    pub fn norm(&self, space: Space) -> f64 {
        match space {
            Space::H => self.norm_h_sq().sqrt(),
            Space::V1 => {
                let mut s = 0.0;
                for c in 0..self.basis.n_components() {
                    let comp = self.basis.component(c);
                    let block = self.component(c);
                    for (j, &x) in block.iter().enumerate() {
                        s += (1.0 + comp.lambda(j)).powi(comp.sobolev as i32) * x * x;
                    }
                }
                s.sqrt()
            }
            Space::V2 => self.to_physical().lp_norm_sum(),
            Space::V => self.norm(Space::V1) + self.norm(Space::V2),
        }
    }
}

/// Nodal values on the quadrature grid, one array per unknown.
pub struct PhysicalField {
    pub basis: Arc<Basis>,
    pub comps: Vec<Vec<f64>>,
}

impl PhysicalField {
    pub fn to_spectral(&self) -> Result<SpectralField> {
        let mut coeffs = Vec::with_capacity(self.basis.total_modes());
        for (c, grid) in self.comps.iter().enumerate() {
            coeffs.extend(self.basis.grid_to_component(c, grid)?);
        }
        SpectralField::from_coeffs(&self.basis, coeffs)
    }

    /// Sum over unknowns of the component L^p norms (each with its own p).
    fn lp_norm_sum(&self) -> f64 {
        let w = self.basis.quad_weights();
        let mut total = 0.0;
        for (c, grid) in self.comps.iter().enumerate() {
            let p = self.basis.component(c).v2_p;
            let s: f64 = w.iter().zip(grid).map(|(&wi, &g)| wi * g.abs().powf(p)).sum();
            total += s.powf(1.0 / p);
        }
        total
    }
}

/// Functional on the Galerkin space: pairings f_j = <f, phi_j> for every
/// retained mode, plus (when the functional came from a pointwise
/// nonlinearity) its raw grid values so dual L^{p*} norms see the function
/// rather than its truncation.
#[derive(Clone)]
pub struct DualField {
    pub basis: Arc<Basis>,
    pub coeffs: Vec<f64>,
    pub grid: Option<Vec<Vec<f64>>>,
}

impl DualField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        DualField { basis: Arc::clone(basis), coeffs: vec![0.0; basis.total_modes()], grid: None }
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.coeffs[self.basis.component_range(c)]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
        if let Some(grids) = &mut self.grid {
            for g in grids {
                for x in g {
                    *x *= a;
                }
            }
        }
    }

    /// Riesz identification of the truncated functional: Pi_cut f as an
    /// element of the Galerkin space.
    pub fn project(&self, cut: usize) -> Result<SpectralField> {
        if cut > self.basis.m {
            return Err(Error::CutoffOutOfRange { m: cut, limit: self.basis.m });
        }
        let mut f = SpectralField::from_coeffs(&self.basis, self.coeffs.clone())?;
        for c in 0..self.basis.n_components() {
            let keep = self.basis.block_len(c, cut);
            for x in f.component_mut(c).iter_mut().skip(keep) {
                *x = 0.0;
            }
        }
        Ok(f)
    }

    /// l2 norm of the first cut-block of dual coefficients, |Pi_cut f| in H.
    pub fn projected_h_norm(&self, cut: usize) -> f64 {
        let mut s = 0.0;
        for c in 0..self.basis.n_components() {
            let keep = self.basis.block_len(c, cut.min(self.basis.m));
            for &x in self.component(c).iter().take(keep) {
                s += x * x;
            }
        }
        s.sqrt()
    }

    /// Dual V1 norm via mode multipliers (1 + lambda)^{-s}.
    pub fn v1_dual_norm(&self) -> f64 {
        let mut s = 0.0;
        for c in 0..self.basis.n_components() {
            let comp = self.basis.component(c);
            for (j, &x) in self.component(c).iter().enumerate() {
                s += x * x / (1.0 + comp.lambda(j)).powi(comp.sobolev as i32);
            }
        }
        s.sqrt()
    }

    /// Dual V2 norm: sum over unknowns of L^{p*} quadrature norms, p* the
    /// conjugate exponent. Uses the stored grid values when present (the
    /// dual norm of a pointwise functional is pointwise); otherwise the
    /// coefficient expansion.
    pub fn v2_dual_norm(&self) -> f64 {
        let w = self.basis.quad_weights();
        let mut total = 0.0;
        for c in 0..self.basis.n_components() {
            let p = self.basis.component(c).v2_p;
            let ps = p / (p - 1.0);
            let owned;
            let grid: &[f64] = match &self.grid {
                Some(gs) => &gs[c],
                None => {
                    owned = self.basis.component_to_grid(c, self.component(c));
                    &owned
                }
            };
            let s: f64 = w.iter().zip(grid).map(|(&wi, &g)| wi * g.abs().powf(ps)).sum();
            total += s.powf(1.0 / ps);
        }
        total
    }
}

/// <f, v> for v in the Galerkin span: the coefficient pairing is exact.
pub fn dual_pair(f: &DualField, v: &SpectralField) -> f64 {
    debug_assert!(f.basis.same_layout(&v.basis));
    f.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a * b).sum()
}

/// Embed a coarse-basis field into a finer basis over the same domain. Mode
/// shells are nested, so the coarse coefficient block is a prefix of the
/// fine one.
pub fn embed(field: &SpectralField, fine: &Arc<Basis>) -> Result<SpectralField> {
    let coarse = &field.basis;
    if coarse.m > fine.m
        || coarse.domain.dim != fine.domain.dim
        || coarse.domain.bcs != fine.domain.bcs
        || coarse.domain.lengths != fine.domain.lengths
    {
        return Err(Error::BasisMismatch);
    }
    let mut out = SpectralField::zeros(fine);
    for c in 0..fine.n_components() {
        let src = field.component(c);
        let dst_off = fine.component_range(c).start;
        debug_assert_eq!(
            coarse.component(c).modes(),
            &fine.component(c).modes()[..src.len()],
            "shell ordering must nest"
        );
        out.coeffs[dst_off..dst_off + src.len()].copy_from_slice(src);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct GalerkinConstant {
    /// Literal definition: sum over the cut-block of (V1-norm + V2-norm)^2
    /// per basis function, quadrature-evaluated.
    pub exact: f64,
    /// The displayed closed form: mode count times
    /// (||phi_low||_{L2}^2 + ||grad phi_low||_{L2}^2 + ||phi_low||_{L^p}^{2/p})
    /// evaluated at the lowest mode. The two disagree; both are reported so
    /// schedules can couple to either.
    pub paper_form: f64,
}

pub fn galerkin_constant(basis: &Basis, cut: usize, p: f64) -> Result<GalerkinConstant> {
    if cut > basis.m {
        return Err(Error::CutoffOutOfRange { m: cut, limit: basis.m });
    }
    let mut exact = 0.0;
    let mut paper_form = 0.0;
    for c in 0..basis.n_components() {
        let comp = basis.component(c);
        let pc = if comp.v2_p == basis.p { p } else { comp.v2_p };
        let block = basis.block_len(c, cut);
        for j in 0..block {
            let v1 = (1.0 + comp.lambda(j)).powi(comp.sobolev as i32).sqrt();
            let v2 = basis.mode_lp_norm(c, j, pc);
            exact += (v1 + v2) * (v1 + v2);
        }
        let lam_low = comp.lambda(0);
        let c_p = basis.mode_lp_norm(c, 0, pc).powf(2.0 / pc);
        paper_form += block as f64 * (1.0 + lam_low + c_p);
    }
    Ok(GalerkinConstant { exact, paper_form })
}
