use std::ops::Add;

/// Dense per-pixel displacement in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    pub height: usize,
    pub width: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl MotionField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.dx.iter().chain(&self.dy).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Add for &MotionField {
    type Output = MotionField;

    fn add(self, rhs: &MotionField) -> MotionField {
        assert_eq!((self.height, self.width), (rhs.height, rhs.width));
        MotionField {
            height: self.height,
            width: self.width,
            dx: self.dx.iter().zip(&rhs.dx).map(|(a, b)| a + b).collect(),
            dy: self.dy.iter().zip(&rhs.dy).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Antisymmetric depth profile: +1 on the superficial (top) row, -1 on the
/// deep (bottom) row, linear in between.
#[inline]
pub fn depth_profile(y: usize, h: usize) -> f64 {
    1.0 - 2.0 * y as f64 / (h - 1) as f64
}

/// Horizontal field `dx = alpha * s(y) + beta`, `dy = 0`.
///
/// `alpha` is the active shear (superficial layers one way, deep layers the
/// other); `beta` is the passive uniform translation.
pub fn motion_field(alpha: f64, beta: f64, h: usize, w: usize) -> MotionField {
    assert!(h >= 2 && w >= 2, "motion field needs at least 2x2 pixels");
    let mut dx = Vec::with_capacity(h * w);
    for y in 0..h {
        let v = alpha * depth_profile(y, h) + beta;
        dx.extend(std::iter::repeat(v).take(w));
    }
    MotionField {
        height: h,
        width: w,
        dx,
        dy: vec![0.0; h * w],
    }
}
