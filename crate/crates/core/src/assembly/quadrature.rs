//! Quadrature rules: a 6-point degree-4 triangle rule in barycentric
//! coordinates (weights sum to 1, multiply by the area) and 3-point
//! Gauss–Legendre on `[0, 1]` (weights sum to 1, multiply by the length).

const A: f64 = 0.445_948_490_915_965;
const WA: f64 = 0.223_381_589_678_011;
const B: f64 = 0.091_576_213_509_771;
const WB: f64 = 0.109_951_743_655_322;

/// `(barycentric point, weight)`
pub const TRIANGLE6: [([f64; 3], f64); 6] = [
    ([A, A, 1.0 - 2.0 * A], WA),
    ([A, 1.0 - 2.0 * A, A], WA),
    ([1.0 - 2.0 * A, A, A], WA),
    ([B, B, 1.0 - 2.0 * B], WB),
    ([B, 1.0 - 2.0 * B, B], WB),
    ([1.0 - 2.0 * B, B, B], WB),
];

const G: f64 = 0.387_298_334_620_741_7; // sqrt(3/5) / 2

/// `(parameter on [0, 1], weight)`
pub const GAUSS3: [(f64, f64); 3] = [
    (0.5 - G, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + G, 5.0 / 18.0),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        // Reference triangle (0,0),(1,0),(0,1): ∫ x^a y^b = a! b! / (a+b+2)!
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let approx: f64 = TRIANGLE6
                    .iter()
                    .map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32))
                    .sum();
                assert!((approx - exact).abs() < 1e-14, "x^{a} y^{b}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_exact_to_degree_five() {
        for k in 0..=5 {
            let approx: f64 = GAUSS3.iter().map(|(s, w)| w * s.powi(k)).sum();
            assert!((approx - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
