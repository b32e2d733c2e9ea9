//! Structured simplicial meshes of an interval or a rectangle, the exact
//! boundary-distance function, and piecewise-linear scalar fields.
//!
//! Rectangles are split into two right triangles per cell. The diagonal of
//! each cell runs through the cell corner nearest to the domain centre, so
//! that every triangle touches at least one interior node (no triangle lies
//! entirely on the boundary, even in the corners).

use std::io::Write;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind<T> {
    Interval { length: T },
    Rectangle { width: T, height: T },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    #[serde(flatten)]
    pub kind: DomainKind<T>,
    /// Nodes per axis, boundary nodes included.
    pub resolution: usize,
}

impl<T: Real> Domain<T> {
    pub fn interval(length: T, resolution: usize) -> Self {
        Self {
            kind: DomainKind::Interval { length },
            resolution,
        }
    }

    pub fn rectangle(width: T, height: T, resolution: usize) -> Self {
        Self {
            kind: DomainKind::Rectangle { width, height },
            resolution,
        }
    }

    /// Unit interval with mesh width `1/cells`.
    pub fn unit_interval(cells: usize) -> Self {
        Self::interval(T::one(), cells + 1)
    }

    /// Unit square with `cells × cells` cells.
    pub fn unit_square(cells: usize) -> Self {
        Self::rectangle(T::one(), T::one(), cells + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 3 {
            return Err(Error::InvalidDomain(format!(
                "resolution must be at least 3, got {}",
                self.resolution
            )));
        }
        let ok = match self.kind {
            DomainKind::Interval { length } => length > T::zero() && length.is_finite(),
            DomainKind::Rectangle { width, height } => {
                width > T::zero() && height > T::zero() && width.is_finite() && height.is_finite()
            }
        };
        if !ok {
            return Err(Error::InvalidDomain("side lengths must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } => 1,
            DomainKind::Rectangle { .. } => 2,
        }
    }

    /// Exact distance from `x` to the boundary (zero outside the domain).
    pub fn distance(&self, x: [T; 2]) -> T {
        let d = match self.kind {
            DomainKind::Interval { length } => x[0].min(length - x[0]),
            DomainKind::Rectangle { width, height } => {
                x[0].min(width - x[0]).min(x[1]).min(height - x[1])
            }
        };
        d.max(T::zero())
    }
}

/// A segment (2 vertices) or triangle (3 vertices) with precomputed geometry.
#[derive(Clone, Debug)]
pub struct Element<T> {
    nodes: [usize; 3],
    nverts: usize,
    measure: T,
    basis_grads: [[T; 2]; 3],
    centroid: [T; 2],
    centroid_dist: T,
}

impl<T: Real> Element<T> {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.nverts]
    }

    /// Length or area.
    pub fn measure(&self) -> T {
        self.measure
    }

    /// Gradients of the local hat functions, one per vertex.
    pub fn basis_grads(&self) -> &[[T; 2]] {
        &self.basis_grads[..self.nverts]
    }

    pub fn centroid(&self) -> [T; 2] {
        self.centroid
    }

    /// Distance of the barycenter to the boundary; always positive.
    pub fn centroid_dist(&self) -> T {
        self.centroid_dist
    }

    /// Weight `|e| / #vertices` of the vertex quadrature on this element.
    pub fn vertex_weight(&self) -> T {
        self.measure / T::from_usize_lossy(self.nverts)
    }

    /// Gradient of the linear interpolant of `values` on this element.
    pub fn gradient_of(&self, values: &[T]) -> [T; 2] {
        let mut g = [T::zero(); 2];
        for (k, &n) in self.nodes().iter().enumerate() {
            g[0] += values[n] * self.basis_grads[k][0];
            g[1] += values[n] * self.basis_grads[k][1];
        }
        g
    }

    /// Mean of `values` over the vertices, i.e. the interpolant at the barycenter.
    pub fn centroid_value(&self, values: &[T]) -> T {
        let s: T = self.nodes().iter().map(|&n| values[n]).sum();
        s / T::from_usize_lossy(self.nverts)
    }
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    domain: Domain<T>,
    shape: (usize, usize),
    nodes: Vec<[T; 2]>,
    elements: Vec<Element<T>>,
    boundary: Vec<bool>,
    dist: Vec<T>,
    lumped: Vec<T>,
    interior: Vec<usize>,
}

pub fn build_mesh<T: Real>(domain: Domain<T>) -> Result<Mesh<T>> {
    Mesh::new(domain)
}

impl<T: Real> Mesh<T> {
    pub fn new(domain: Domain<T>) -> Result<Self> {
        domain.validate()?;
        let n = domain.resolution;
        let last = T::from_usize_lossy(n - 1);
        let frac = |i: usize| T::from_usize_lossy(i) / last;

        let (shape, nodes, boundary, elements) = match domain.kind {
            DomainKind::Interval { length } => {
                let nodes: Vec<[T; 2]> = (0..n).map(|i| [length * frac(i), T::zero()]).collect();
                let boundary = (0..n).map(|i| i == 0 || i == n - 1).collect();
                let elements = (0..n - 1)
                    .map(|i| segment(&domain, &nodes, i, i + 1))
                    .collect();
                ((n, 1), nodes, boundary, elements)
            }
            DomainKind::Rectangle { width, height } => {
                let idx = |i: usize, j: usize| j * n + i;
                let mut nodes = Vec::with_capacity(n * n);
                let mut boundary = Vec::with_capacity(n * n);
                for j in 0..n {
                    for i in 0..n {
                        nodes.push([width * frac(i), height * frac(j)]);
                        boundary.push(i == 0 || j == 0 || i == n - 1 || j == n - 1);
                    }
                }
                let mut elements = Vec::with_capacity(2 * (n - 1) * (n - 1));
                let half = (n - 1) as f64 / 2.0;
                for j in 0..n - 1 {
                    for i in 0..n - 1 {
                        let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                        // corner nearest to the centre is the upper-right one iff the
                        // cell lies in the lower-left quadrant, and so on
                        let right = (i as f64 + 0.5) < half;
                        let up = (j as f64 + 0.5) < half;
                        if right == up {
                            // diagonal a–c
                            elements.push(triangle(&domain, &nodes, [a, b, c]));
                            elements.push(triangle(&domain, &nodes, [a, c, d]));
                        } else {
                            // diagonal b–d
                            elements.push(triangle(&domain, &nodes, [a, b, d]));
                            elements.push(triangle(&domain, &nodes, [b, c, d]));
                        }
                    }
                }
                ((n, n), nodes, boundary, elements)
            }
        };

        let dist: Vec<T> = nodes
            .iter()
            .zip(&boundary)
            .map(|(x, &b)| if b { T::zero() } else { domain.distance(*x) })
            .collect();

        let mut lumped = vec![T::zero(); nodes.len()];
        for e in &elements {
            let w = e.vertex_weight();
            for &i in e.nodes() {
                lumped[i] += w;
            }
        }
        let interior = (0..nodes.len()).filter(|&i| !boundary[i]).collect();

        Ok(Self {
            domain,
            shape,
            nodes,
            elements,
            boundary,
            dist,
            lumped,
            interior,
        })
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Nodes per axis `(nx, ny)`; `ny == 1` in 1D.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// Interior node indices in increasing order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn dist(&self) -> &[T] {
        &self.dist
    }

    /// `∫ φ_i dx` for each hat function (row weights of the lumped mass).
    pub fn lumped_mass(&self) -> &[T] {
        &self.lumped
    }

    /// Largest element diameter along an axis.
    pub fn h(&self) -> T {
        let last = T::from_usize_lossy(self.domain.resolution - 1);
        match self.domain.kind {
            DomainKind::Interval { length } => length / last,
            DomainKind::Rectangle { width, height } => width.max(height) / last,
        }
    }

    /// Per-node vertex-quadrature integral of the weight `d(x)^exponent`,
    /// i.e. `Σ_{e∋i} d(b_e)^exponent |e|/k` with `b_e` the barycenter.
    /// The weight is only ever evaluated at barycenters, where `d > 0`.
    pub fn weight_integrals(&self, exponent: T) -> Vec<T> {
        let mut w = vec![T::zero(); self.num_nodes()];
        for e in &self.elements {
            let v = e.centroid_dist().powf(exponent) * e.vertex_weight();
            for &i in e.nodes() {
                w[i] += v;
            }
        }
        w
    }

    /// Node permutation sorting coordinates lexicographically (x, then y).
    pub fn lexicographic_order(&self) -> Vec<usize> {
        let (nx, ny) = self.shape;
        let mut order = Vec::with_capacity(self.num_nodes());
        for i in 0..nx {
            for j in 0..ny {
                order.push(j * nx + i);
            }
        }
        order
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_nodes() {
            return Err(Error::LengthMismatch {
                expected: self.num_nodes(),
                got: len,
            });
        }
        Ok(())
    }

    /// Writes `x[,y], d, <names...>` rows in lexicographic node order.
    pub fn write_csv<W: Write>(&self, out: W, columns: &[(&str, &[T])]) -> Result<()> {
        for (_, c) in columns {
            self.check_len(c.len())?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = vec!["x"];
        if self.dim() == 2 {
            header.push("y");
        }
        header.push("d");
        header.extend(columns.iter().map(|(n, _)| *n));
        w.write_record(&header)?;
        for i in self.lexicographic_order() {
            let mut row = vec![self.nodes[i][0].to_string()];
            if self.dim() == 2 {
                row.push(self.nodes[i][1].to_string());
            }
            row.push(self.dist[i].to_string());
            row.extend(columns.iter().map(|(_, c)| c[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn segment<T: Real>(domain: &Domain<T>, nodes: &[[T; 2]], a: usize, b: usize) -> Element<T> {
    let h = nodes[b][0] - nodes[a][0];
    let two = T::lit(2.0);
    let centroid = [(nodes[a][0] + nodes[b][0]) / two, T::zero()];
    Element {
        nodes: [a, b, usize::MAX],
        nverts: 2,
        measure: h,
        basis_grads: [
            [-T::one() / h, T::zero()],
            [T::one() / h, T::zero()],
            [T::zero(); 2],
        ],
        centroid,
        centroid_dist: domain.distance(centroid),
    }
}

fn triangle<T: Real>(domain: &Domain<T>, nodes: &[[T; 2]], v: [usize; 3]) -> Element<T> {
    let [p0, p1, p2] = [nodes[v[0]], nodes[v[1]], nodes[v[2]]];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = det.abs() / T::lit(2.0);
    // ∇λ_k = rot(opposite edge) / det
    let grad = |pa: [T; 2], pb: [T; 2]| [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det];
    let three = T::lit(3.0);
    let centroid = [
        (p0[0] + p1[0] + p2[0]) / three,
        (p0[1] + p1[1] + p2[1]) / three,
    ];
    Element {
        nodes: v,
        nverts: 3,
        measure: area,
        basis_grads: [grad(p1, p2), grad(p2, p0), grad(p0, p1)],
        centroid,
        centroid_dist: domain.distance(centroid),
    }
}

/// Nodal values of a piecewise-linear function.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct ScalarField<T> {
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(mesh: &Mesh<T>) -> Self {
        Self::new(vec![T::zero(); mesh.num_nodes()])
    }

    /// Interpolates `f` at the nodes.
    pub fn from_fn(mesh: &Mesh<T>, f: impl Fn([T; 2]) -> T) -> Self {
        Self::new(mesh.nodes().iter().map(|&x| f(x)).collect())
    }

    /// Interpolates `f` at interior nodes and sets boundary values to zero.
    pub fn from_fn_dirichlet(mesh: &Mesh<T>, f: impl Fn([T; 2]) -> T) -> Self {
        Self::new(
            mesh.nodes()
                .iter()
                .zip(mesh.boundary_mask())
                .map(|(&x, &b)| if b { T::zero() } else { f(x) })
                .collect(),
        )
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn scaled(&self, a: T) -> Self {
        Self::new(self.values.iter().map(|&v| a * v).collect())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T> Deref for ScalarField<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> DerefMut for ScalarField<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

impl<T> From<Vec<T>> for ScalarField<T> {
    fn from(values: Vec<T>) -> Self {
        Self { values }
    }
}

/// Piecewise-constant gradient, one vector per element.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField<T> {
    grads: Vec<[T; 2]>,
}

impl<T: Real> GradientField<T> {
    pub fn vectors(&self) -> &[[T; 2]] {
        &self.grads
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.grads.iter().map(|g| norm(*g)).collect()
    }

    /// `‖∇u‖∞` over elements.
    pub fn sup_norm(&self) -> T {
        self.grads.iter().fold(T::zero(), |m, g| m.max(norm(*g)))
    }

    /// Largest difference of element gradients.
    pub fn sup_diff(&self, other: &Self) -> T {
        self.grads
            .iter()
            .zip(&other.grads)
            .fold(T::zero(), |m, (a, b)| m.max(norm([a[0] - b[0], a[1] - b[1]])))
    }
}

#[inline]
pub fn norm<T: Real>(g: [T; 2]) -> T {
    g[0].hypot(g[1])
}

pub fn gradient<T: Real>(mesh: &Mesh<T>, u: &[T]) -> GradientField<T> {
    GradientField {
        grads: mesh.elements().iter().map(|e| e.gradient_of(u)).collect(),
    }
}

/// Extremes of `u/d` over interior nodes together with the nodes attaining them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioExtremes<T> {
    pub low: T,
    pub low_node: usize,
    pub high: T,
    pub high_node: usize,
}

pub fn ratio_extremes<T: Real>(mesh: &Mesh<T>, u: &[T]) -> Result<RatioExtremes<T>> {
    mesh.check_len(u.len())?;
    let mut it = mesh.interior().iter();
    let &first = it.next().ok_or(Error::EmptyInterior)?;
    let r0 = u[first] / mesh.dist()[first];
    let mut out = RatioExtremes {
        low: r0,
        low_node: first,
        high: r0,
        high_node: first,
    };
    for &i in it {
        let r = u[i] / mesh.dist()[i];
        if r < out.low {
            out.low = r;
            out.low_node = i;
        }
        if r > out.high {
            out.high = r;
            out.high_node = i;
        }
    }
    Ok(out)
}

/// `(min u/d, max u/d)` over interior nodes.
pub fn bound_ratios<T: Real>(mesh: &Mesh<T>, u: &[T]) -> Result<(T, T)> {
    let r = ratio_extremes(mesh, u)?;
    Ok((r.low, r.high))
}
