use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Symmetric 2×2 tensor stored by its three independent components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    /// Converts a full matrix, rejecting it unless it is symmetric up to a
    /// relative tolerance of 1e-12.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self> {
        let scale = m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
        if (m[0][1] - m[1][0]).abs() > 1e-12 * scale.max(1e-300) {
            return Err(Error::Contract(format!(
                "tensor is not symmetric: off-diagonal entries {} and {}",
                m[0][1], m[1][0]
            )));
        }
        Ok(Self::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]))
    }

    pub fn to_matrix(self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    /// Symmetric part of a velocity gradient `[[∂x u, ∂y u], [∂x v, ∂y v]]`.
    pub fn sym_grad(g: [[f64; 2]; 2]) -> Self {
        Self::new(g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1])
    }

    /// Frobenius inner product `A:B`.
    pub fn ddot(self, o: Sym2) -> f64 {
        self.xx * o.xx + 2.0 * self.xy * o.xy + self.yy * o.yy
    }

    pub fn norm_sq(self) -> f64 {
        self.ddot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }
}

impl std::ops::Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl std::ops::Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_symmetric_matrix() {
        assert!(matches!(
            Sym2::from_matrix([[1.0, 2.0], [0.0, 1.0]]),
            Err(Error::Contract(_))
        ));
        let s = Sym2::from_matrix([[1.0, 2.0], [2.0, 3.0]]).unwrap();
        assert_eq!(s, Sym2::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn frobenius_norm_counts_off_diagonal_twice() {
        let d = Sym2::new(1.0, 1.0, -1.0);
        assert_eq!(d.norm_sq(), 4.0);
    }
}
