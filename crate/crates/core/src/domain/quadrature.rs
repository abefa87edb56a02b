//! Triangle quadrature built from collapsed Gauss–Legendre rules.

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(k: usize) -> Vec<(f64, f64)> {
    assert!(k >= 1);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        // Tricomi initial guess, refined by Newton on P_k.
        let mut x = ((4 * i + 3) as f64 * std::f64::consts::PI / (4 * k + 2) as f64).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Quadrature rule on a triangle: barycentric points with weights summing
/// to one (multiply by the cell area).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn with_degree(degree: usize) -> Self {
        // The collapsed map adds one power of the radial variable, so k
        // points per direction integrate total degree 2k − 2 exactly.
        let k = (degree + 3) / 2;
        let gl = gauss_legendre(k.max(1));
        let mut points = Vec::with_capacity(k * k);
        let mut weights = Vec::with_capacity(k * k);
        for &(u, wu) in &gl {
            for &(v, wv) in &gl {
                let x = u;
                let y = v * (1.0 - u);
                points.push([1.0 - x - y, x, y]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        Self {
            degree,
            points,
            weights,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}
