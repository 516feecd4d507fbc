//! Distances induced by the oscillating mobility: the `eps`-metric `d_eps`, its
//! Gromov-Hausdorff limit, the flow-induced `d_bar`, one-dimensional Wasserstein
//! distances, and lattice geodesics for the checkerboard medium.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::cell::{effective_at, CellOptions};
use crate::error::{invalid, Error, Result};
use crate::media::{frac, periodic_average, Medium, Mobility, MobilityFamily, QuadratureOptions};
use crate::tensor::Tensor;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn gauss(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * f(m + r * x))
        .sum::<f64>()
        * r
}

/// `Phi_1(y) = int_0^y sqrt(b(s)) ds` on one period, tabulated at panel ends.
#[derive(Clone, Debug, PartialEq)]
pub struct Antiderivative {
    mobility: Mobility,
    panels: usize,
    table: Vec<f64>,
}

impl Antiderivative {
    pub fn new(mobility: &Mobility) -> Result<Self> {
        if mobility.dim != 1 {
            return Err(invalid!("the eps-metric is one-dimensional"));
        }
        let panels = match &mobility.family {
            MobilityFamily::Layered(v) => v.len(),
            _ => 2048,
        };
        let mut table = vec![0.0; panels + 1];
        let mut err = None;
        for k in 0..panels {
            let (a, b) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
            table[k + 1] = table[k] + gauss(a, b, |s| sqrt_b(mobility, s, &mut err));
        }
        if let Some(e) = err {
            return Err(e);
        }
        Ok(Antiderivative {
            mobility: mobility.clone(),
            panels,
            table,
        })
    }

    /// `int_0^1 sqrt(b)`, i.e. `C_bar^{1/2}`.
    pub fn period(&self) -> f64 {
        self.table[self.panels]
    }

    /// `Phi_1(y)` for `y` in `[0, 1]`.
    pub fn phi1(&self, y: f64) -> f64 {
        let pos = y * self.panels as f64;
        let k = (libm::floor(pos) as usize).min(self.panels - 1);
        let a = k as f64 / self.panels as f64;
        if y <= a {
            return self.table[k];
        }
        let mut err = None;
        let part = match &self.mobility.family {
            MobilityFamily::Layered(v) => libm::sqrt(v[k]) * (y - a),
            _ => gauss(a, y, |s| sqrt_b(&self.mobility, s, &mut err)),
        };
        self.table[k] + part
    }

    /// `Phi_eps(x) = int_0^x sqrt(b(z / eps)) dz`.
    pub fn phi_eps(&self, x: f64, eps: f64) -> f64 {
        let z = x / eps;
        let whole = libm::floor(z);
        eps * (whole * self.period() + self.phi1(z - whole))
    }
}

fn sqrt_b(m: &Mobility, s: f64, err: &mut Option<Error>) -> f64 {
    match m.scalar_at([frac(s), 0.0]) {
        Ok(b) => libm::sqrt(b),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Line,
    Torus,
}

/// `d_eps(x, y) = |int_x^y sqrt(B_eps)|` on the line, or the shorter arc on the torus.
pub fn d_eps_1d(phi: &Antiderivative, eps: f64, x: f64, y: f64, topology: Topology) -> f64 {
    let d = libm::fabs(phi.phi_eps(y, eps) - phi.phi_eps(x, eps));
    match topology {
        Topology::Line => d,
        Topology::Torus => {
            let total = phi.phi_eps(1.0, eps);
            d.min(total - d)
        }
    }
}

/// `C_bar = (int_0^1 sqrt(b))^2` by periodic quadrature.
pub fn d_gh_coefficient(mobility: &Mobility, quad: QuadratureOptions) -> Result<f64> {
    if mobility.dim != 1 {
        return Err(invalid!("the Gromov-Hausdorff coefficient is one-dimensional"));
    }
    let s = periodic_average(1, quad, |y| Ok(libm::sqrt(mobility.scalar_at(y)?)))?;
    Ok(s * s)
}

/// `d_bar(x, y) = <B_bar (y - x), y - x>^{1/2}`.
pub fn d_bar(bbar: &Tensor, x: [f64; 2], y: [f64; 2]) -> f64 {
    libm::sqrt(bbar.quad([y[0] - x[0], y[1] - x[1]]))
}

/// The isometry onto the Euclidean line used by each transport cost.
#[derive(Clone, Copy, Debug)]
pub enum Cost<'a> {
    Euclidean,
    Eps { phi: &'a Antiderivative, eps: f64 },
    /// `sqrt(C_bar) x`.
    Gh { cbar: f64 },
    /// `sqrt(B_bar) x`.
    Bar { bbar: f64 },
}

impl Cost<'_> {
    pub fn map(&self, x: f64) -> f64 {
        match self {
            Cost::Euclidean => x,
            Cost::Eps { phi, eps } => phi.phi_eps(x, *eps),
            Cost::Gh { cbar } => libm::sqrt(*cbar) * x,
            Cost::Bar { bbar } => libm::sqrt(*bbar) * x,
        }
    }
}

fn cdf(rho: &[f64]) -> Result<Vec<f64>> {
    let h = 1.0 / rho.len() as f64;
    let mut out = Vec::with_capacity(rho.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for r in rho {
        if !(*r >= 0.0) {
            return Err(invalid!("densities must be nonnegative"));
        }
        acc += r * h;
        out.push(acc);
    }
    if libm::fabs(acc - 1.0) > 1e-9 {
        return Err(invalid!("density is not normalized: mass {acc}"));
    }
    for v in out.iter_mut() {
        *v /= acc;
    }
    Ok(out)
}

/// Left-continuous quantile of a piecewise-constant density at `u` within cell `k`.
fn quantile(rho: &[f64], f: &[f64], k: usize, u: f64) -> f64 {
    let h = 1.0 / rho.len() as f64;
    let x = k as f64 * h + (u - f[k]) * h / (f[k + 1] - f[k]);
    x.min((k + 1) as f64 * h)
}

/// Squared 1D Wasserstein distance on the line `[0, 1]` for densities given by cell
/// averages on a uniform grid: `int_0^1 (Phi(Q0(u)) - Phi(Q1(u)))^2 du` via the
/// monotone rearrangement.
pub fn wasserstein_1d_squared(rho0: &[f64], rho1: &[f64], cost: Cost<'_>) -> Result<f64> {
    let f0 = cdf(rho0)?;
    let f1 = cdf(rho1)?;
    let (n0, n1) = (rho0.len(), rho1.len());
    let next = |rho: &[f64], k: &mut usize, n: usize| {
        while *k < n && rho[*k] == 0.0 {
            *k += 1;
        }
    };
    let (mut i, mut j) = (0usize, 0usize);
    next(rho0, &mut i, n0);
    next(rho1, &mut j, n1);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < n0 && j < n1 {
        let end = f0[i + 1].min(f1[j + 1]);
        if end > u {
            total += gauss(u, end, |v| {
                let d = cost.map(quantile(rho0, &f0, i, v)) - cost.map(quantile(rho1, &f1, j, v));
                d * d
            });
            u = end;
        }
        if f0[i + 1] <= end {
            i += 1;
            next(rho0, &mut i, n0);
        }
        if f1[j + 1] <= end {
            j += 1;
            next(rho1, &mut j, n1);
        }
    }
    Ok(total)
}

pub fn wasserstein_1d(rho0: &[f64], rho1: &[f64], cost: Cost<'_>) -> Result<f64> {
    Ok(libm::sqrt(wasserstein_1d_squared(rho0, rho1, cost)?))
}

/// Lattice graph on `[0, 1]^2` for the checkerboard mobility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicGrid2D {
    pub eps: f64,
    /// Nodes per period along each axis (spacing `eps / per_period`, at least 8).
    pub per_period: usize,
    pub alpha: f64,
    pub beta: f64,
    pub source: [f64; 2],
    /// Adds diagonal interior edges (weight `sqrt(beta) sqrt(2) h`).
    pub diagonals: bool,
}

impl GeodesicGrid2D {
    pub fn new(eps: f64, per_period: usize, alpha: f64, beta: f64, source: [f64; 2]) -> Result<Self> {
        let m = libm::round(1.0 / eps);
        if !(eps > 0.0 && libm::fabs(1.0 / eps - m) <= 1e-9 * m) {
            return Err(invalid!("1/eps must be an integer, got eps = {eps}"));
        }
        if per_period < 8 {
            return Err(invalid!("node spacing must be at most eps/8"));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(invalid!("checkerboard values must be positive"));
        }
        Ok(GeodesicGrid2D {
            eps,
            per_period,
            alpha,
            beta,
            source,
            diagonals: false,
        })
    }

    pub fn nodes_per_axis(&self) -> usize {
        libm::round(1.0 / self.eps) as usize * self.per_period + 1
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.nodes_per_axis() - 1) as f64
    }

    fn snap(&self, p: [f64; 2]) -> Result<[usize; 2]> {
        let m = self.nodes_per_axis() - 1;
        let mut out = [0; 2];
        for a in 0..2 {
            if !(0.0..=1.0).contains(&p[a]) {
                return Err(invalid!("point {p:?} lies outside [0,1]^2"));
            }
            out[a] = libm::round(p[a] * m as f64) as usize;
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Dijkstra distance from the grid's source to `target`; skeleton edges (on the lines
/// `y_i` in `eps Z`) weigh `sqrt(alpha) h`, all others `sqrt(beta)` per unit length.
pub fn checkerboard_geodesic(g: &GeodesicGrid2D, target: [f64; 2]) -> Result<f64> {
    let n = g.nodes_per_axis();
    let h = g.spacing();
    let k = g.per_period;
    let s = g.snap(g.source)?;
    let t = g.snap(target)?;
    let (wa, wb) = (libm::sqrt(g.alpha) * h, libm::sqrt(g.beta) * h);
    let wd = libm::sqrt(g.beta) * libm::sqrt(2.0) * h;
    let idx = |i: usize, j: usize| i + n * j;
    let mut dist = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    dist[idx(s[0], s[1])] = 0.0;
    heap.push(Entry(0.0, idx(s[0], s[1])));
    let goal = idx(t[0], t[1]);
    while let Some(Entry(d, u)) = heap.pop() {
        if u == goal {
            return Ok(d);
        }
        if d > dist[u] {
            continue;
        }
        let (i, j) = (u % n, u / n);
        let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<Entry>| {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        };
        // horizontal edges lie on the skeleton when the row is a period line
        let hw = if j % k == 0 { wa } else { wb };
        let vw = if i % k == 0 { wa } else { wb };
        if i + 1 < n {
            relax(idx(i + 1, j), hw, &mut heap);
        }
        if i > 0 {
            relax(idx(i - 1, j), hw, &mut heap);
        }
        if j + 1 < n {
            relax(idx(i, j + 1), vw, &mut heap);
        }
        if j > 0 {
            relax(idx(i, j - 1), vw, &mut heap);
        }
        if g.diagonals {
            for (di, dj) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                    relax(idx(a as usize, b as usize), wd, &mut heap);
                }
            }
        }
    }
    Err(Error::Invariant("target unreachable in the lattice graph".into()))
}

/// Limit of the checkerboard geodesic distance, `sqrt(alpha) |y - x|_1`.
pub fn checkerboard_limit(alpha: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    libm::sqrt(alpha) * (libm::fabs(y[0] - x[0]) + libm::fabs(y[1] - x[1]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport1D {
    pub cbar: f64,
    /// `(x, B_bar(x))` at the requested slow points.
    pub bbar: Vec<(f64, f64)>,
    /// `min_x B_bar(x) - C_bar`.
    pub gap: f64,
    /// Whether `pi = c sqrt(B)` holds (to relative 1e-10) at every slow point.
    pub equality: bool,
    pub phi: Antiderivative,
}

/// Compares `C_bar` with the effective mobility `B_bar(x)` at the slow points `xs`.
pub fn gap_report(medium: &Medium, xs: &[f64], opts: CellOptions) -> Result<MetricReport1D> {
    if medium.dim != 1 {
        return Err(invalid!("the gap report is one-dimensional"));
    }
    if xs.is_empty() {
        return Err(invalid!("need at least one slow point"));
    }
    let phi = Antiderivative::new(&medium.mobility)?;
    let cbar = d_gh_coefficient(&medium.mobility, opts.quadrature)?;
    let mut bbar = Vec::with_capacity(xs.len());
    let mut equality = true;
    for &x in xs {
        let e = effective_at(medium, [x, 0.0], opts)?;
        let b = e.bbar.get(0, 0);
        if cbar > b * (1.0 + 1e-10) {
            return Err(Error::Invariant(alloc::format!(
                "C_bar = {cbar} exceeds B_bar = {b} at x = {x}"
            )));
        }
        bbar.push((x, b));
        let n = 4096;
        let ratios: Vec<f64> = (0..n)
            .map(|i| {
                let y = [(i as f64 + 0.5) / n as f64, 0.0];
                Ok(medium.pi_two_scale([x, 0.0], y)? / libm::sqrt(medium.mobility.scalar_at(y)?))
            })
            .collect::<Result<_>>()?;
        let mean = ratios.iter().sum::<f64>() / n as f64;
        let dev = ratios.iter().fold(0.0f64, |a, r| a.max(libm::fabs(r - mean)));
        equality &= dev / mean < 1e-10;
    }
    let gap = bbar.iter().map(|(_, b)| b - cbar).fold(f64::INFINITY, f64::min);
    Ok(MetricReport1D {
        cbar,
        bbar,
        gap,
        equality,
        phi,
    })
}
