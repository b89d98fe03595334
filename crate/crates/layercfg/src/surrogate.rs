//! Analytic stand-in environments for fast oracle testing of the controller:
//! the true best depth is known in closed form, so trained-controller
//! behavior can be checked against a brute-force argmin.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvResult, Environment, LayerCount};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateFamily {
    /// `loss(L) = c / L` — deeper is always better.
    MonotoneDecreasing,
    /// `loss(L) = (L - L*)^2 + b` — unique interior optimum.
    Unimodal,
    /// Unimodal plus seeded uniform noise of amplitude `eta`.
    NoisyUnimodal,
}

#[derive(Debug, Clone)]
pub struct SurrogateEnv {
    pub family: SurrogateFamily,
    pub c: f64,
    pub l_star: f64,
    pub b: f64,
    pub eta: f64,
    pub layer_max: u32,
    pub noise_seed: u64,
}

impl SurrogateEnv {
    pub fn monotone(c: f64, layer_max: u32) -> SurrogateEnv {
        SurrogateEnv {
            family: SurrogateFamily::MonotoneDecreasing,
            c,
            l_star: 0.0,
            b: 0.0,
            eta: 0.0,
            layer_max,
            noise_seed: 0,
        }
    }

    pub fn unimodal(l_star: f64, b: f64, layer_max: u32) -> SurrogateEnv {
        SurrogateEnv {
            family: SurrogateFamily::Unimodal,
            c: 0.0,
            l_star,
            b,
            eta: 0.0,
            layer_max,
            noise_seed: 0,
        }
    }

    pub fn noisy_unimodal(l_star: f64, b: f64, eta: f64, noise_seed: u64, layer_max: u32) -> SurrogateEnv {
        SurrogateEnv {
            family: SurrogateFamily::NoisyUnimodal,
            c: 0.0,
            l_star,
            b,
            eta,
            layer_max,
            noise_seed,
        }
    }

    pub fn loss(&self, layer: u32, nonce: u64) -> f64 {
        let l = layer as f64;
        match self.family {
            SurrogateFamily::MonotoneDecreasing => self.c / l,
            SurrogateFamily::Unimodal => (l - self.l_star).powi(2) + self.b,
            SurrogateFamily::NoisyUnimodal => {
                let base = (l - self.l_star).powi(2) + self.b;
                // noise is a pure function of (seed, layer, nonce)
                let s = seeding::combine(self.noise_seed, &[layer as u64, nonce]);
                let u = ChaCha8Rng::seed_from_u64(s).gen::<f64>();
                base + self.eta * (2.0 * u - 1.0)
            }
        }
    }

    /// Brute-force integer argmin over `[1, layer_max]`; ties break low.
    pub fn argmin(&self, nonce: u64) -> u32 {
        (1..=self.layer_max)
            .min_by(|&a, &b| {
                self.loss(a, nonce)
                    .partial_cmp(&self.loss(b, nonce))
                    .expect("surrogate losses are finite")
            })
            .expect("non-empty layer range")
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_max < 1 {
            return Err(Error::InvalidArgument("layer_max must be >= 1".into()));
        }
        for l in 1..=self.layer_max {
            if !self.loss(l, 0).is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "surrogate loss not finite at layer {l}"
                )));
            }
        }
        Ok(())
    }
}

impl Environment for SurrogateEnv {
    fn evaluate(&mut self, layer_count: LayerCount, nonce: u64) -> EnvResult {
        EnvResult {
            loss: self.loss(layer_count.get(), nonce),
            fault: false,
        }
    }

    fn layer_max(&self) -> u32 {
        self.layer_max
    }
}
