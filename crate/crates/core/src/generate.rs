//! Seeded random instance generators.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::instance::{Instance, InstanceError, Metric};
use crate::scalar::Scalar;

/// Side length of the square (and line) that generated points live in.
pub const WORLD: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    UniformSquare,
    Clustered,
    Line,
    MatrixRandom,
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform-square" => Ok(Kind::UniformSquare),
            "clustered" => Ok(Kind::Clustered),
            "line" => Ok(Kind::Line),
            "matrix-random" => Ok(Kind::MatrixRandom),
            _ => Err(format!("unknown instance kind `{s}`")),
        }
    }
}

/// Parameters of a generated instance.
#[derive(Clone, Copy, Debug)]
pub struct GenParams {
    pub kind: Kind,
    /// Client count.
    pub n: usize,
    /// Facility count.
    pub m: usize,
    pub k: usize,
    pub eta: usize,
    pub p: f64,
    pub seed: u64,
}

pub fn generate_instance<T: Scalar>(g: &GenParams) -> Result<Instance<T>, InstanceError> {
    if g.k.saturating_mul(g.eta) < g.n {
        return Err(InstanceError::Infeasible { k: g.k, eta: g.eta, demand: g.n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let p = T::lit(g.p);
    let lift = |v: Vec<[f64; 2]>| -> Vec<[T; 2]> { v.into_iter().map(|[x, y]| [T::lit(x), T::lit(y)]).collect() };
    match g.kind {
        Kind::UniformSquare => {
            let mut draw = |c: usize| -> Vec<[f64; 2]> {
                (0..c).map(|_| [rng.random_range(0.0..WORLD), rng.random_range(0.0..WORLD)]).collect()
            };
            let clients = draw(g.n);
            let facilities = draw(g.m);
            Instance::plane(&lift(clients), &lift(facilities), g.k, g.eta, p)
        }
        Kind::Line => {
            let mut draw = |c: usize| -> Vec<[f64; 2]> { (0..c).map(|_| [rng.random_range(0.0..WORLD), 0.0]).collect() };
            let clients = draw(g.n);
            let facilities = draw(g.m);
            Instance::plane(&lift(clients), &lift(facilities), g.k, g.eta, p)
        }
        Kind::Clustered => {
            let blobs: Vec<[f64; 2]> = (0..g.k)
                .map(|_| [rng.random_range(0.1 * WORLD..0.9 * WORLD), rng.random_range(0.1 * WORLD..0.9 * WORLD)])
                .collect();
            let noise = Normal::new(0.0, 0.05 * WORLD).expect("valid normal");
            let mut around = |i: usize| -> [f64; 2] {
                let b = blobs[i % blobs.len()];
                [b[0] + noise.sample(&mut rng), b[1] + noise.sample(&mut rng)]
            };
            let clients: Vec<[f64; 2]> = (0..g.n).map(&mut around).collect();
            let facilities: Vec<[f64; 2]> = (0..g.m).map(&mut around).collect();
            Instance::plane(&lift(clients), &lift(facilities), g.k, g.eta, p)
        }
        Kind::MatrixRandom => {
            let total = g.n + g.m;
            let mut d = vec![vec![0.0f64; total]; total];
            for i in 0..total {
                for j in i + 1..total {
                    let w = rng.random_range(1.0..10.0);
                    d[i][j] = w;
                    d[j][i] = w;
                }
            }
            // Shortest-path closure makes the matrix a metric.
            for via in 0..total {
                for i in 0..total {
                    for j in 0..total {
                        let alt = d[i][via] + d[via][j];
                        if alt < d[i][j] {
                            d[i][j] = alt;
                        }
                    }
                }
            }
            let matrix = d.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect();
            Instance::new(Metric::Matrix(matrix), (0..g.n).collect(), (g.n..total).collect(), g.k, g.eta, p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kind: Kind) -> GenParams {
        GenParams { kind, n: 4, m: 2, k: 2, eta: 2, p: 1.0, seed: 7 }
    }

    #[test]
    fn line_shape() {
        let inst: Instance<f64> = generate_instance(&params(Kind::Line)).unwrap();
        assert_eq!(inst.demand(), 4);
        assert_eq!(inst.facilities.len(), 2);
        for &c in &inst.clients {
            assert_eq!(inst.metric.coords(c).unwrap()[1], 0.0);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        for kind in [Kind::UniformSquare, Kind::Clustered, Kind::Line, Kind::MatrixRandom] {
            let a: Instance<f64> = generate_instance(&params(kind)).unwrap();
            let b: Instance<f64> = generate_instance(&params(kind)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn matrix_kind_is_metric() {
        let g = GenParams { n: 12, m: 6, k: 3, eta: 4, ..params(Kind::MatrixRandom) };
        let inst: Instance<f64> = generate_instance(&g).unwrap();
        assert!(inst.validate().is_ok());
    }

    #[test]
    fn infeasible_rejected() {
        let g = GenParams { k: 1, eta: 1, ..params(Kind::Line) };
        assert!(generate_instance::<f64>(&g).is_err());
    }
}
