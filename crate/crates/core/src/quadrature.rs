//! Symmetric quadrature on the reference triangle and Gauss rules on edges.
//!
//! Triangle weights are normalized to sum to one, so an integral over a
//! physical element is `|K| * sum_q w_q g(x_q)`.

use std::sync::LazyLock;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Barycentric coordinates of the points.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    fn from_orbits(degree: usize, orbits: &[(f64, Orbit)]) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(w, orbit) in orbits {
            let pts: Vec<[f64; 3]> = match orbit {
                Orbit::Centroid => vec![[1.0 / 3.0; 3]],
                Orbit::Three(a) => {
                    let b = 0.5 * (1.0 - a);
                    vec![[a, b, b], [b, a, b], [b, b, a]]
                }
                Orbit::Six(a, b) => {
                    let c = 1.0 - a - b;
                    vec![
                        [a, b, c],
                        [a, c, b],
                        [b, a, c],
                        [b, c, a],
                        [c, a, b],
                        [c, b, a],
                    ]
                }
            };
            weights.extend(std::iter::repeat_n(w, pts.len()));
            points.extend(pts);
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }
}

#[derive(Clone, Copy, Debug)]
enum Orbit {
    Centroid,
    Three(f64),
    Six(f64, f64),
}

static DEGREE_4: LazyLock<QuadratureRule> = LazyLock::new(|| {
    QuadratureRule::from_orbits(
        4,
        &[
            (0.223381589678011, Orbit::Three(0.108103018168070)),
            (0.109951743655322, Orbit::Three(0.816847572980459)),
        ],
    )
});

static DEGREE_8: LazyLock<QuadratureRule> = LazyLock::new(|| {
    QuadratureRule::from_orbits(
        8,
        &[
            (0.144315607677787, Orbit::Centroid),
            (0.095091634267285, Orbit::Three(0.081414823414554)),
            (0.103217370534718, Orbit::Three(0.658861384496480)),
            (0.032458497623198, Orbit::Three(0.898905543365938)),
            (
                0.027230314174435,
                Orbit::Six(0.008394777409958, 0.263112829634638),
            ),
        ],
    )
});

/// 6-point rule, exact for polynomials of degree 4. Used for assembly.
pub fn triangle_degree4() -> &'static QuadratureRule {
    &DEGREE_4
}

/// 16-point rule, exact for polynomials of degree 8. Used for all L^p norms.
pub fn triangle_degree8() -> &'static QuadratureRule {
    &DEGREE_8
}

/// Five-point Gauss-Legendre rule on `[0, 1]`, exact to degree 9.
/// Returns `(t, w)` pairs with weights summing to one.
pub fn gauss_legendre5() -> [(f64, f64); 5] {
    const X: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
    const W: [f64; 3] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let node = |x: f64, w: f64| (0.5 * (1.0 + x), 0.5 * w);
    [
        node(-X[2], W[2]),
        node(-X[1], W[1]),
        node(X[0], W[0]),
        node(X[1], W[1]),
        node(X[2], W[2]),
    ]
}
