//! Small fixed-size linear algebra: 2-vectors, 2x2 matrices, compensated sums.

pub type Vec2 = [f64; 2];

/// Dense 2x2 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn diagonal(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn scaled_identity(a: f64) -> Self {
        Mat2::diagonal(a, a)
    }

    pub fn transpose(&self) -> Self {
        Mat2([
            [self.0[0][0], self.0[1][0]],
            [self.0[0][1], self.0[1][1]],
        ])
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Quadratic form v . (A v).
    pub fn quad_form(&self, v: Vec2) -> f64 {
        let av = self.mul_vec(v);
        v[0] * av[0] + v[1] * av[1]
    }

    /// Smallest eigenvalue of the symmetric part (A + A^T)/2.
    pub fn sym_min_eigenvalue(&self) -> f64 {
        let a = self.0[0][0];
        let d = self.0[1][1];
        let b = 0.5 * (self.0[0][1] + self.0[1][0]);
        0.5 * ((a + d) - ((a - d) * (a - d) + 4.0 * b * b).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] - other.0[0][0], self.0[0][1] - other.0[0][1]],
            [self.0[1][0] - other.0[1][0], self.0[1][1] - other.0[1][1]],
        ])
    }
}

pub fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Fractional part {t} in [0, 1) (half-open convention t = [t] + {t}).
pub fn fract_unit(t: f64) -> f64 {
    let f = t - t.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Neumaier-compensated accumulator. Used wherever the artifact claims
/// exact discrete identities, so the claim is not eaten by summation order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
