//! Fixed quadrature rules on the unit interval and the reference triangle.

/// 3-point Gauss–Legendre rule on [0, 1]: (abscissa, weight).
pub const EDGE_GAUSS: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Degree-2 exact 3-point rule on the triangle: barycentric coordinates and
/// weights relative to the triangle area.
pub const TRIANGLE_3: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];
