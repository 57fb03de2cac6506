//! Vertex-described polytopes with an exact boundary description in the plane
//! and in space.

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Facet hyperplane `<normal, x> = offset` with Euclidean unit normal.
#[derive(Clone, Debug)]
pub struct Facet {
    pub normal: Vector,
    pub offset: f64,
    /// Length (n = 2) or area (n = 3) of the facet.
    pub area: f64,
}

/// Boundary description of a full-dimensional polytope in dimension 2 or 3.
#[derive(Clone, Debug)]
pub struct Hull {
    /// Merged facets, coplanar boundary simplices combined.
    pub facets: Vec<Facet>,
    /// Boundary simplices as vertex indices: edges (n = 2, counter-clockwise)
    /// or outward-oriented triangles (n = 3).
    pub simplices: Vec<Vec<usize>>,
    /// Indices of the hull vertices; for n = 2 in counter-clockwise order.
    pub extreme: Vec<usize>,
    pub volume: f64,
}

#[derive(Clone, Debug)]
pub struct Polytope {
    vertices: Vec<Vector>,
    hull: Option<Hull>,
    centroid: Vector,
}

impl Polytope {
    pub fn new(vertices: Vec<Vector>) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::InvalidSpec("polytope without vertices".into()));
        };
        let dim = first.dim();
        if let Some(v) = vertices.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.dim(),
            });
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite vertex coordinate".into()));
        }
        let centroid = vertices
            .iter()
            .fold(Vector::zeros(dim), |acc, v| acc + *v)
            * (1.0 / vertices.len() as f64);
        let hull = match dim {
            2 => Some(hull2(&vertices)?),
            3 => Some(hull3(&vertices)?),
            _ => None,
        };
        Ok(Polytope {
            vertices,
            hull,
            centroid,
        })
    }

    /// Axis-parallel box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = lo.len();
        if hi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: hi.len(),
            });
        }
        let vertices = (0..1usize << dim)
            .map(|mask| {
                Vector::from_fn(dim, |i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
            })
            .collect();
        Polytope::new(vertices)
    }

    pub fn dim(&self) -> usize {
        self.centroid.dim()
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn hull(&self) -> Option<&Hull> {
        self.hull.as_ref()
    }

    pub fn centroid(&self) -> Vector {
        self.centroid
    }

    /// Index of a vertex maximizing `<v, dir>`; ties go to the lowest index.
    #[inline]
    pub fn support_index(&self, dir: &Vector) -> usize {
        let mut best = 0;
        let mut best_val = self.vertices[0].dot(dir);
        for (i, v) in self.vertices.iter().enumerate().skip(1) {
            let val = v.dot(dir);
            if val > best_val {
                best = i;
                best_val = val;
            }
        }
        best
    }

    pub fn support_value(&self, dir: &Vector) -> f64 {
        self.vertices[self.support_index(dir)].dot(dir)
    }

    pub fn support_point(&self, dir: &Vector) -> Vector {
        self.vertices[self.support_index(dir)]
    }

    /// `min_facet (offset - <normal, x>)`: the Euclidean depth of an interior
    /// point, negative outside. Only available with a hull.
    pub fn facet_margin(&self, x: &Vector) -> Option<f64> {
        let hull = self.hull.as_ref()?;
        Some(
            hull.facets
                .iter()
                .map(|f| f.offset - f.normal.dot(x))
                .fold(f64::INFINITY, f64::min),
        )
    }

    /// Exact Euclidean nearest point of the polytope to `x` (n = 2, 3).
    pub fn nearest_point(&self, x: &Vector) -> Option<Vector> {
        let hull = self.hull.as_ref()?;
        if self.facet_margin(x)? >= 0.0 {
            return Some(*x);
        }
        let mut best = *x;
        let mut best_d2 = f64::INFINITY;
        for s in &hull.simplices {
            let q = match s.len() {
                2 => closest_on_segment(x, &self.vertices[s[0]], &self.vertices[s[1]]),
                _ => closest_on_triangle(
                    x,
                    &self.vertices[s[0]],
                    &self.vertices[s[1]],
                    &self.vertices[s[2]],
                ),
            };
            let d2 = (*x - q).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = q;
            }
        }
        Some(best)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Polytope::new(self.vertices.iter().map(|v| *v * s).collect())
    }

    pub fn translated(&self, t: &Vector) -> Result<Self> {
        Polytope::new(self.vertices.iter().map(|v| *v + *t).collect())
    }
}

fn cross2(o: &Vector, a: &Vector, b: &Vector) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn cross3(a: &Vector, b: &Vector) -> Vector {
    Vector::from_slice(&[
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

fn point_scale(points: &[Vector]) -> f64 {
    let dim = points[0].dim();
    let mut s: f64 = 0.0;
    for i in 0..dim {
        let lo = points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
        s = s.max(hi - lo);
    }
    s.max(f64::MIN_POSITIVE)
}

/// Andrew's monotone chain; collinear boundary points are dropped.
fn hull2(points: &[Vector]) -> Result<Hull> {
    let eps = 1e-12 * point_scale(points).powi(2);
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
            .then(a.cmp(&b))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return Err(Error::InvalidSpec("polygon needs three distinct vertices".into()));
    }
    let mut chain: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = chain.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while chain.len() >= start + 2
                && cross2(
                    &points[chain[chain.len() - 2]],
                    &points[chain[chain.len() - 1]],
                    &points[i],
                ) <= eps
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain.pop();
    }
    if chain.len() < 3 {
        return Err(Error::InvalidSpec("polygon has empty interior".into()));
    }
    let m = chain.len();
    let mut facets = Vec::with_capacity(m);
    let mut simplices = Vec::with_capacity(m);
    let mut area = 0.0;
    for k in 0..m {
        let a = points[chain[k]];
        let b = points[chain[(k + 1) % m]];
        let e = b - a;
        let len = e.norm();
        let normal = Vector::from_slice(&[e[1] / len, -e[0] / len]);
        facets.push(Facet {
            normal,
            offset: normal.dot(&a),
            area: len,
        });
        simplices.push(vec![chain[k], chain[(k + 1) % m]]);
        area += a[0] * b[1] - a[1] * b[0];
    }
    Ok(Hull {
        facets,
        simplices,
        extreme: chain,
        volume: 0.5 * area,
    })
}

struct Face {
    v: [usize; 3],
    normal: Vector,
    offset: f64,
}

fn make_face(points: &[Vector], v: [usize; 3], interior: &Vector) -> Face {
    let (a, b, c) = (points[v[0]], points[v[1]], points[v[2]]);
    let n = cross3(&(b - a), &(c - a));
    let mut face = Face {
        v,
        normal: n.normalized().unwrap_or(n),
        offset: 0.0,
    };
    face.offset = face.normal.dot(&a);
    if face.normal.dot(interior) > face.offset {
        face.v.swap(1, 2);
        face.normal = -face.normal;
        face.offset = -face.offset;
    }
    face
}

/// Incremental hull; points are inserted in index order, so the result is
/// deterministic.
fn hull3(points: &[Vector]) -> Result<Hull> {
    let scale = point_scale(points);
    let eps = 1e-10 * scale;
    let degenerate = || Error::InvalidSpec("polytope has empty interior".into());

    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a][0].total_cmp(&points[b][0]))
        .unwrap();
    let i1 = (0..points.len())
        .max_by(|&a, &b| {
            points[a]
                .distance(&points[i0])
                .total_cmp(&points[b].distance(&points[i0]))
        })
        .unwrap();
    let line = points[i1] - points[i0];
    let off_line = |p: &Vector| cross3(&(*p - points[i0]), &line).norm() / line.norm();
    let i2 = (0..points.len())
        .max_by(|&a, &b| off_line(&points[a]).total_cmp(&off_line(&points[b])))
        .unwrap();
    if line.norm() <= eps || off_line(&points[i2]) <= eps {
        return Err(degenerate());
    }
    let pn = cross3(&line, &(points[i2] - points[i0])).normalized().unwrap();
    let off_plane = |p: &Vector| (*p - points[i0]).dot(&pn).abs();
    let i3 = (0..points.len())
        .max_by(|&a, &b| off_plane(&points[a]).total_cmp(&off_plane(&points[b])))
        .unwrap();
    if off_plane(&points[i3]) <= eps {
        return Err(degenerate());
    }
    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) * 0.25;
    let mut faces: Vec<Face> = [
        [i0, i1, i2],
        [i0, i1, i3],
        [i0, i2, i3],
        [i1, i2, i3],
    ]
    .into_iter()
    .map(|v| make_face(points, v, &interior))
    .collect();

    for (pi, p) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| f.normal.dot(p) - f.offset > eps)
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for k in 0..3 {
                edges.push((f.v[k], f.v[(k + 1) % 3]));
            }
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        let mut kept: Vec<Face> = faces
            .into_iter()
            .zip(visible)
            .filter(|(_, v)| !v)
            .map(|(f, _)| f)
            .collect();
        for (a, b) in horizon {
            kept.push(make_face(points, [a, b, pi], &interior));
        }
        faces = kept;
    }

    let mut facets: Vec<Facet> = Vec::new();
    let mut simplices = Vec::with_capacity(faces.len());
    let mut volume = 0.0;
    let mut extreme: Vec<usize> = Vec::new();
    for f in &faces {
        let (a, b, c) = (points[f.v[0]], points[f.v[1]], points[f.v[2]]);
        let area = 0.5 * cross3(&(b - a), &(c - a)).norm();
        volume += area * (f.offset - f.normal.dot(&interior)) / 3.0;
        simplices.push(f.v.to_vec());
        for &v in &f.v {
            if !extreme.contains(&v) {
                extreme.push(v);
            }
        }
        match facets.iter_mut().find(|g| {
            (g.normal - f.normal).norm() < 1e-9 && (g.offset - f.offset).abs() < 1e-9 * scale
        }) {
            Some(g) => g.area += area,
            None => facets.push(Facet {
                normal: f.normal,
                offset: f.offset,
                area,
            }),
        }
    }
    extreme.sort_unstable();
    Ok(Hull {
        facets,
        simplices,
        extreme,
        volume,
    })
}

pub(crate) fn closest_on_segment(x: &Vector, a: &Vector, b: &Vector) -> Vector {
    let e = *b - *a;
    let len2 = e.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((*x - *a).dot(&e) / len2).clamp(0.0, 1.0);
    a.axpy(t, &e)
}

/// Closest point of triangle `abc` to `p` (Voronoi-region walk).
pub(crate) fn closest_on_triangle(p: &Vector, a: &Vector, b: &Vector, c: &Vector) -> Vector {
    let ab = *b - *a;
    let ac = *c - *a;
    let ap = *p - *a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = *p - *b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a.axpy(d1 / (d1 - d3), &ab);
    }
    let cp = *p - *c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a.axpy(d2 / (d2 - d6), &ac);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b.axpy((d4 - d3) / ((d4 - d3) + (d5 - d6)), &(*c - *b));
    }
    let denom = 1.0 / (va + vb + vc);
    a.axpy(vb * denom, &ab).axpy(vc * denom, &ac)
}
