//! Oscillatory Dirichlet energies `F_eps(v) = int <A(x, x/eps) grad v, grad v>` on the
//! unit cube, their discrete minimizers, and the cut-off corrector recovery sequence.

use alloc::vec;
use alloc::vec::Vec;

use crate::cell::{CellOptions, CellProblem};
use crate::error::{invalid, Error, Result};
use crate::grid::{FaceField, Grid};
use crate::linalg::{cg, CgOptions};
use crate::media::{periodic_average, Medium, QuadratureOptions};
use crate::tensor::Tensor;

/// Continuous piecewise-affine data `alpha_j + <p_j, x>` on a partition of `[0, 1]^dim`
/// into `pieces^dim` equal cubes, numbered `i + pieces * j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffine {
    pub dim: usize,
    pub pieces: usize,
    pub slopes: Vec<[f64; 2]>,
    pub offsets: Vec<f64>,
}

impl PiecewiseAffine {
    pub fn new(dim: usize, pieces: usize, slopes: Vec<[f64; 2]>, offsets: Vec<f64>) -> Result<Self> {
        if !(dim == 1 || dim == 2) || pieces == 0 {
            return Err(invalid!("need dim in {{1, 2}} and at least one piece"));
        }
        let count = pieces.pow(dim as u32);
        if slopes.len() != count || offsets.len() != count {
            return Err(invalid!("expected {count} slopes and offsets"));
        }
        let data = PiecewiseAffine {
            dim,
            pieces,
            slopes,
            offsets,
        };
        data.check_continuity()?;
        Ok(data)
    }

    pub fn affine(dim: usize, p: [f64; 2], alpha: f64) -> Self {
        PiecewiseAffine {
            dim,
            pieces: 1,
            slopes: vec![p],
            offsets: vec![alpha],
        }
    }

    /// The tent `min(x, 1 - x)` along the first axis.
    pub fn tent(dim: usize) -> Self {
        let (slopes, offsets) = if dim == 1 {
            (vec![[1.0, 0.0], [-1.0, 0.0]], vec![0.0, 1.0])
        } else {
            (
                vec![[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]],
                vec![0.0, 1.0, 0.0, 1.0],
            )
        };
        PiecewiseAffine {
            dim,
            pieces: 2,
            slopes,
            offsets,
        }
    }

    pub fn side(&self) -> f64 {
        1.0 / self.pieces as f64
    }

    pub fn count(&self) -> usize {
        self.slopes.len()
    }

    /// Piece containing `x`; points on a shared face go to the upper piece.
    pub fn piece(&self, x: [f64; 2]) -> usize {
        let k = |t: f64| ((t * self.pieces as f64) as usize).min(self.pieces - 1);
        if self.dim == 1 {
            k(x[0])
        } else {
            k(x[0]) + self.pieces * k(x[1])
        }
    }

    pub fn eval_piece(&self, j: usize, x: [f64; 2]) -> f64 {
        let p = self.slopes[j];
        self.offsets[j] + (0..self.dim).map(|a| p[a] * x[a]).sum::<f64>()
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.eval_piece(self.piece(x), x)
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.slopes[self.piece(x)]
    }

    /// Distance from `x` to the boundary of its piece.
    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        let s = self.side();
        (0..self.dim)
            .map(|a| {
                let lo = libm::floor(x[a] / s).min(self.pieces as f64 - 1.0) * s;
                (x[a] - lo).min(lo + s - x[a])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Equal traces on opposite faces of the unit cube, so the data lives on the torus.
    pub fn is_periodic(&self) -> bool {
        let samples = [0.0, 0.3, 0.7, 1.0];
        (0..self.dim).all(|a| {
            samples.iter().all(|t| {
                let (mut lo, mut hi) = ([*t, *t], [*t, *t]);
                lo[a] = 0.0;
                hi[a] = 1.0;
                if self.dim == 1 {
                    lo[1] = 0.0;
                    hi[1] = 0.0;
                }
                libm::fabs(self.eval(lo) - self.eval(hi)) <= 1e-12
            })
        })
    }

    pub fn max_slope(&self) -> f64 {
        self.slopes
            .iter()
            .map(|p| norm(*p, self.dim))
            .fold(0.0, f64::max)
    }

    fn check_continuity(&self) -> Result<()> {
        let s = self.side();
        let n = self.pieces;
        let samples = [0.0, 0.25, 0.5, 0.75, 1.0];
        for j in 0..self.count() {
            let (i0, i1) = (j % n, j / n);
            for a in 0..self.dim {
                let idx = if a == 0 { i0 } else { i1 };
                if idx + 1 == n {
                    continue;
                }
                let k = if a == 0 { j + 1 } else { j + n };
                for t in samples {
                    let mut x = [(i0 as f64 + t) * s, (i1 as f64 + t) * s];
                    x[a] = (idx + 1) as f64 * s;
                    let jump = self.eval_piece(j, x) - self.eval_piece(k, x);
                    if libm::fabs(jump) > 1e-12 {
                        return Err(invalid!("data jumps by {jump} across the face between pieces {j} and {k}"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn norm(p: [f64; 2], dim: usize) -> f64 {
    libm::sqrt((0..dim).map(|a| p[a] * p[a]).sum())
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryData {
    /// Prescribed values on the boundary of `[0, 1]^dim`.
    Dirichlet(PiecewiseAffine),
    /// `v = <p, x> + u` with `u` periodic on the unit torus.
    PeriodicAffine([f64; 2]),
}

/// `min F(v)` over the lattice `cells^dim` with the diagonal weight `A` evaluated at
/// edge midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletProblem<W> {
    pub dim: usize,
    pub cells: usize,
    pub weight: W,
    pub data: BoundaryData,
    pub cg: CgOptions,
}

impl<W: Fn([f64; 2]) -> Result<[f64; 2]>> DirichletProblem<W> {
    pub fn new(dim: usize, cells: usize, weight: W, data: BoundaryData) -> Result<Self> {
        if !(dim == 1 || dim == 2) || cells < 2 {
            return Err(invalid!("need dim in {{1, 2}} and at least two cells"));
        }
        if let BoundaryData::Dirichlet(d) = &data {
            if d.dim != dim {
                return Err(invalid!("boundary data has dim {} but the problem has {dim}", d.dim));
            }
        }
        Ok(DirichletProblem {
            dim,
            cells,
            weight,
            data,
            cg: CgOptions {
                rtol: 1e-13,
                max_iter: 200_000,
                mean_zero: false,
            },
        })
    }
}

/// Nodal values and energy of the discrete minimizer. Dirichlet problems use the
/// `(cells + 1)^dim` vertices, periodic-affine ones the `cells^dim` cell centres
/// (values of `u`, without the affine part).
#[derive(Clone, Debug, PartialEq)]
pub struct Minimizer {
    pub values: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
}

struct Edge {
    i: usize,
    j: usize,
    c: f64,
    shift: f64,
}

fn edges<W: Fn([f64; 2]) -> Result<[f64; 2]>>(p: &DirichletProblem<W>) -> Result<(usize, Vec<Edge>)> {
    let n = p.cells;
    let h = 1.0 / n as f64;
    let scale = if p.dim == 1 { 1.0 / h } else { 1.0 };
    let mut out = Vec::new();
    let check = |a: [f64; 2], x: [f64; 2]| -> Result<[f64; 2]> {
        for (k, v) in a.iter().enumerate().take(p.dim) {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::Bounds(alloc::format!("weight A_{k} = {v} at {x:?} is not positive")));
            }
        }
        Ok(a)
    };
    match &p.data {
        BoundaryData::Dirichlet(_) => {
            let m = n + 1;
            let nodes = m.pow(p.dim as u32);
            let idx = |i: usize, j: usize| i + m * j;
            let rows = if p.dim == 1 { 1 } else { m };
            for j in 0..rows {
                for i in 0..m {
                    for a in 0..p.dim {
                        let (ti, tj) = if a == 0 { (i + 1, j) } else { (i, j + 1) };
                        if ti >= m || (p.dim == 2 && tj >= m) {
                            continue;
                        }
                        let mut x = [i as f64 * h, j as f64 * h];
                        x[a] += 0.5 * h;
                        if p.dim == 1 {
                            x[1] = 0.0;
                        }
                        let w = check((p.weight)(x)?, x)?[a];
                        let across = if a == 0 { j } else { i };
                        let half = p.dim == 2 && (across == 0 || across == n);
                        let c = w * scale * if half { 0.5 } else { 1.0 };
                        out.push(Edge {
                            i: idx(i, j),
                            j: idx(ti, tj),
                            c,
                            shift: 0.0,
                        });
                    }
                }
            }
            Ok((nodes, out))
        }
        BoundaryData::PeriodicAffine(slope) => {
            let grid = Grid::new(p.dim, n)?;
            for c in 0..grid.len() {
                for a in 0..p.dim {
                    let x = grid.face_point(c, a);
                    let w = check((p.weight)(x)?, x)?[a];
                    out.push(Edge {
                        i: c,
                        j: grid.up(c, a),
                        c: w * scale,
                        shift: slope[a] * h,
                    });
                }
            }
            Ok((grid.len(), out))
        }
    }
}

fn edge_energy(edges: &[Edge], v: &[f64]) -> f64 {
    edges
        .iter()
        .map(|e| {
            let d = v[e.j] - v[e.i] + e.shift;
            e.c * d * d
        })
        .sum()
}

/// Half the gradient of the edge energy with the shifts dropped, restricted by `free`.
fn apply_laplacian(edges: &[Edge], free: Option<&[bool]>, v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for e in edges {
        let d = e.c * (v[e.i] - v[e.j]);
        out[e.i] += d;
        out[e.j] -= d;
    }
    if let Some(f) = free {
        out.iter_mut().zip(f).filter(|(_, f)| !**f).for_each(|(o, _)| *o = 0.0);
    }
}

pub fn minimize_dirichlet<W: Fn([f64; 2]) -> Result<[f64; 2]>>(problem: &DirichletProblem<W>) -> Result<Minimizer> {
    let (nodes, edges) = edges(problem)?;
    let mut diag = vec![0.0; nodes];
    for e in &edges {
        diag[e.i] += e.c;
        diag[e.j] += e.c;
    }
    match &problem.data {
        BoundaryData::Dirichlet(data) => {
            let m = problem.cells + 1;
            let h = 1.0 / problem.cells as f64;
            let mut free = vec![true; nodes];
            let mut v = vec![0.0; nodes];
            for (k, val) in v.iter_mut().enumerate() {
                let (i, j) = (k % m, k / m);
                let x = [i as f64 * h, if problem.dim == 2 { j as f64 * h } else { 0.0 }];
                let on_boundary = i == 0 || i == m - 1 || (problem.dim == 2 && (j == 0 || j == m - 1));
                if on_boundary {
                    free[k] = false;
                    *val = data.eval(x);
                }
            }
            let mut rhs = vec![0.0; nodes];
            apply_laplacian(&edges, Some(&free), &v, &mut rhs);
            rhs.iter_mut().for_each(|r| *r = -*r);
            diag.iter_mut().zip(&free).filter(|(_, f)| !**f).for_each(|(d, _)| *d = 1.0);
            let mut u = vec![0.0; nodes];
            let report = cg(
                |x, out| apply_laplacian(&edges, Some(&free), x, out),
                &rhs,
                Some(&diag),
                &mut u,
                problem.cg,
            )?;
            v.iter_mut().zip(&u).zip(&free).filter(|(_, f)| **f).for_each(|((v, u), _)| *v = *u);
            Ok(Minimizer {
                energy: edge_energy(&edges, &v),
                values: v,
                iterations: report.iterations,
            })
        }
        BoundaryData::PeriodicAffine(_) => {
            let mut rhs = vec![0.0; nodes];
            for e in &edges {
                rhs[e.i] += e.c * e.shift;
                rhs[e.j] -= e.c * e.shift;
            }
            let mut u = vec![0.0; nodes];
            let opts = CgOptions {
                mean_zero: true,
                ..problem.cg
            };
            let report = cg(|x, out| apply_laplacian(&edges, None, x, out), &rhs, Some(&diag), &mut u, opts)?;
            Ok(Minimizer {
                energy: edge_energy(&edges, &u),
                values: u,
                iterations: report.iterations,
            })
        }
    }
}

/// `S(t) = 6t^5 - 15t^4 + 10t^3` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Cut-off `eta = S((dist - d1 eps) / ((d2 - d1) eps))` with `dist` the distance to the
/// boundary of the piece: zero within `d1 eps` of the boundary, one beyond `d2 eps`.
pub fn cutoff(dist: f64, eps: f64, d1: f64, d2: f64) -> f64 {
    smoothstep((dist - d1 * eps) / ((d2 - d1) * eps))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryOptions {
    pub d1: f64,
    pub d2: f64,
    pub cell: CellOptions,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            d1: 2.0,
            d2: 4.0,
            cell: CellOptions {
                ycells: 32,
                ..CellOptions::default()
            },
        }
    }
}

/// `xi_eps = alpha_j + <p_j, x> + eps eta_j |p_j| w_j(x / eps)` sampled at the cell
/// centres of the torus grid with spacing `eps / ycells`, so that `x / eps` falls on
/// the nodes of the cell problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoverySequence {
    pub eps: f64,
    pub d1: f64,
    pub d2: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
    /// `A(x/eps)` on the faces of `grid`.
    pub weight: FaceField,
    /// Per-piece weights `f_bar_j`.
    pub fbar: Vec<f64>,
    /// Discrete `A_bar`, consistent with the cell grid.
    pub abar: Tensor,
}

/// Correctors and weights shared by every `eps` of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct CellData {
    pub problem: CellProblem,
    pub correctors: Vec<Vec<f64>>,
    pub abar: Tensor,
}

impl CellData {
    pub fn new(medium: &Medium, opts: CellOptions) -> Result<Self> {
        if medium.depends_on_slow() {
            return Err(Error::Unsupported(
                "recovery sequences need a medium without slow dependence".into(),
            ));
        }
        let problem = CellProblem::at(medium, [0.0; 2], opts)?;
        let correctors = problem.correctors()?;
        let (d, g) = problem.tensors(&correctors);
        Ok(CellData {
            abar: d.add(&g),
            problem,
            correctors,
        })
    }

    /// Corrector for the direction of `p`, scaled by `|p|`: `|p| w_hat = sum p_i w_i`.
    pub fn directional(&self, p: [f64; 2]) -> Vec<f64> {
        let n = self.problem.grid.len();
        (0..n)
            .map(|c| self.correctors.iter().enumerate().map(|(i, w)| p[i] * w[c]).sum())
            .collect()
    }
}

/// Averages of `f` over each piece (midpoint rule on `points` nodes per piece and axis).
pub fn piece_averages(data: &PiecewiseAffine, points: usize, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let s = data.side();
    let n = data.pieces;
    let rows = if data.dim == 2 { points } else { 1 };
    (0..data.count())
        .map(|j| {
            let (i0, i1) = (j % n, j / n);
            let mut acc = 0.0;
            for b in 0..rows {
                for a in 0..points {
                    let x0 = (i0 as f64 + (a as f64 + 0.5) / points as f64) * s;
                    let x1 = if data.dim == 2 {
                        (i1 as f64 + (b as f64 + 0.5) / points as f64) * s
                    } else {
                        0.0
                    };
                    acc += f([x0, x1]);
                }
            }
            acc / (points * rows) as f64
        })
        .collect()
}

pub fn build_recovery(
    data: &PiecewiseAffine,
    cells: &CellData,
    eps: f64,
    d1: f64,
    d2: f64,
    fbar: Option<Vec<f64>>,
) -> Result<RecoverySequence> {
    if !(0.0 < d1 && d1 < d2) {
        return Err(invalid!("need 0 < d1 < d2, got d1 = {d1}, d2 = {d2}"));
    }
    let dim = data.dim;
    if dim != cells.problem.grid.dim() {
        return Err(invalid!("data and cell problem dimensions differ"));
    }
    if !(d2 * eps < 0.25 * data.side()) {
        return Err(invalid!(
            "partition too fine for eps = {eps}: need d2 eps < {} (half the inradius)",
            0.25 * data.side()
        ));
    }
    let m = libm::round(1.0 / eps);
    if !(eps > 0.0 && libm::fabs(1.0 / eps - m) <= 1e-9 * m) || (m as usize) % data.pieces != 0 {
        return Err(invalid!("1/eps must be an integer multiple of the piece count, got eps = {eps}"));
    }
    if !data.is_periodic() {
        return Err(invalid!("recovery sequences live on the torus; the data must be periodic"));
    }
    let fbar = fbar.unwrap_or_else(|| vec![1.0; data.count()]);
    if fbar.len() != data.count() || fbar.iter().any(|f| !(*f > 0.0)) {
        return Err(invalid!("need one positive weight per piece"));
    }
    let ygrid = cells.problem.grid;
    let ny = ygrid.cells_per_axis();
    let grid = Grid::new(dim, m as usize * ny)?;
    let fast = |c: usize| {
        let [i, j] = grid.coords(c);
        ygrid.index(i % ny, if dim == 2 { j % ny } else { 0 })
    };
    let w: Vec<Vec<f64>> = data.slopes.iter().map(|p| cells.directional(*p)).collect();
    let values = (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            let j = data.piece(x);
            let eta = cutoff(data.boundary_distance(x), eps, d1, d2);
            data.eval_piece(j, x) + eps * eta * w[j][fast(c)]
        })
        .collect();
    let weight = FaceField {
        axes: (0..dim)
            .map(|a| (0..grid.len()).map(|c| cells.problem.conductance.axes[a][fast(c)]).collect())
            .collect(),
    };
    Ok(RecoverySequence {
        eps,
        d1,
        d2,
        grid,
        values,
        weight,
        fbar,
        abar: cells.abar,
    })
}

impl RecoverySequence {
    fn face_fbar(&self, data: &PiecewiseAffine) -> FaceField {
        FaceField::from_fn(&self.grid, |a, c| self.fbar[data.piece(self.grid.center(c))] * self.weight.axes[a][c])
    }

    /// `F_eps(xi_eps)` with weight `A_eps f_bar`.
    pub fn energy(&self, data: &PiecewiseAffine) -> f64 {
        self.grid.dirichlet_form(&self.face_fbar(data), &self.values)
    }

    /// `F(xi) = sum_j f_bar_j <A_bar p_j, p_j> |C_j|`.
    pub fn limit_energy(&self, data: &PiecewiseAffine) -> f64 {
        let vol = libm::pow(data.side(), data.dim as f64);
        data.slopes
            .iter()
            .zip(&self.fbar)
            .map(|(p, f)| f * self.abar.quad(*p) * vol)
            .sum()
    }

    /// `||xi_eps - xi||_{L^2}` at the sample points.
    pub fn l2_deviation(&self, data: &PiecewiseAffine) -> f64 {
        let diff: Vec<f64> = (0..self.grid.len())
            .map(|c| self.values[c] - data.eval(self.grid.center(c)))
            .collect();
        libm::sqrt(self.grid.inner(&diff, &diff))
    }

    /// `max |grad_h xi_eps| / max |grad xi|` over the faces.
    pub fn gradient_constant(&self, data: &PiecewiseAffine) -> f64 {
        let g = self.grid.gradient(&self.values);
        let max = g
            .axes
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        max / data.max_slope()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryRow {
    pub eps: f64,
    pub f_eps: f64,
    pub f_limit: f64,
    pub error: f64,
    pub l2: f64,
    pub gradient_constant: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
    pub error_decreasing: bool,
    pub constant_nonincreasing: bool,
}

/// Recovery sequences over an `eps` sweep (strictly decreasing).
pub fn recovery_sweep(
    data: &PiecewiseAffine,
    medium: &Medium,
    eps: &[f64],
    opts: RecoveryOptions,
    fbar: Option<Vec<f64>>,
) -> Result<RecoveryReport> {
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid!("eps values must be strictly decreasing"));
    }
    let cells = CellData::new(medium, opts.cell)?;
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let r = build_recovery(data, &cells, e, opts.d1, opts.d2, fbar.clone())?;
        let f_eps = r.energy(data);
        let f_limit = r.limit_energy(data);
        rows.push(RecoveryRow {
            eps: e,
            f_eps,
            f_limit,
            error: libm::fabs(f_eps - f_limit),
            l2: r.l2_deviation(data),
            gradient_constant: r.gradient_constant(data),
        });
    }
    let error_decreasing = rows.windows(2).all(|w| w[1].error < w[0].error);
    let constant_nonincreasing = rows
        .windows(2)
        .all(|w| w[1].gradient_constant <= w[0].gradient_constant * (1.0 + 1e-9));
    Ok(RecoveryReport {
        rows,
        error_decreasing,
        constant_nonincreasing,
    })
}

/// A field `v_eps` at the cell centres of a torus grid with `cells` per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsField {
    pub eps: f64,
    pub cells: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiminfRow {
    pub eps: f64,
    pub f_eps: f64,
    /// `max(0, F(v) - F_eps(v_eps))`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiminfReport {
    pub f_limit: f64,
    pub rows: Vec<LiminfRow>,
    pub passed: bool,
}

/// Compares `F_eps(v_eps)` (weight `pi B^{-1}` sampled as in the flow solver) with
/// `F(v) = int <A_bar grad v, grad v>` from the limit gradient, and checks that the
/// deficit `delta(eps)` is nonincreasing along the sequence.
pub fn gamma_liminf_check(
    medium: &Medium,
    fields: &[EpsField],
    limit_gradient: impl Fn([f64; 2]) -> [f64; 2],
    opts: CellOptions,
    tol: f64,
) -> Result<LiminfReport> {
    if medium.depends_on_slow() {
        return Err(Error::Unsupported("the liminf check needs a medium without slow dependence".into()));
    }
    let abar = {
        let cp = CellProblem::at(medium, [0.0; 2], opts)?;
        let w = cp.correctors()?;
        let (d, g) = cp.tensors(&w);
        d.add(&g)
    };
    let quad = QuadratureOptions {
        start: Some(256),
        ..opts.quadrature
    };
    let f_limit = periodic_average(medium.dim, quad, |x| Ok(abar.quad(limit_gradient(x))))?;
    let mut rows = Vec::with_capacity(fields.len());
    for f in fields {
        let s = crate::media::sample_medium(medium, f.eps, f.cells)?;
        if f.values.len() != s.grid.len() {
            return Err(invalid!("field has {} values, grid has {}", f.values.len(), s.grid.len()));
        }
        let f_eps = s.grid.dirichlet_form(&s.conductance, &f.values);
        rows.push(LiminfRow {
            eps: f.eps,
            f_eps,
            delta: (f_limit - f_eps).max(0.0),
        });
    }
    let passed = rows.windows(2).all(|w| w[1].delta <= w[0].delta + tol);
    Ok(LiminfReport { f_limit, rows, passed })
}
