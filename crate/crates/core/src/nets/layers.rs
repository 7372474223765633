use crate::autodiff::{BoundParams, ParamId, ParamStore, Tape, Var};
use crate::error::Result;
use crate::nets::{init_bias, init_weight};
use rand::Rng;

/// Dense layer y = W x + b. Nonlinearities are applied by the caller.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub out_dim: usize,
    pub in_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        out_dim: usize,
        in_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = init_weight(store, format!("{prefix}/w"), out_dim, in_dim, rng)?;
        let b = init_bias(store, format!("{prefix}/b"), out_dim)?;
        Ok(Linear { w, b, out_dim, in_dim })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, x: Var) -> Result<Var> {
        let wx = tape.matvec(bound.var(self.w), x)?;
        tape.add(wx, bound.var(self.b))
    }

    pub fn forward_tanh(&self, tape: &mut Tape, bound: &BoundParams, x: Var) -> Result<Var> {
        let y = self.forward(tape, bound, x)?;
        tape.tanh(y)
    }
}

/// Standard-deviation head: a dense layer whose pre-activation is squashed
/// into (sigma_min, sigma_max) so emitted sigmas are always positive and
/// bounded. Networks never expose a raw sigma output.
#[derive(Clone, Copy, Debug)]
pub struct SigmaHead {
    pub lin: Linear,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl SigmaHead {
    /// Bias starts at zero, placing sigma at the midpoint of the band for
    /// zero pre-activation input.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        out_dim: usize,
        in_dim: usize,
        sigma_min: f64,
        sigma_max: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let lin = Linear::new(store, prefix, out_dim, in_dim, rng)?;
        Ok(SigmaHead { lin, sigma_min, sigma_max })
    }

    /// Like [`SigmaHead::new`] but with the bias set so that zero input maps
    /// to `sigma_init` exactly.
    pub fn with_initial_sigma(
        store: &mut ParamStore,
        prefix: &str,
        out_dim: usize,
        in_dim: usize,
        sigma_min: f64,
        sigma_max: f64,
        sigma_init: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let head = Self::new(store, prefix, out_dim, in_dim, sigma_min, sigma_max, rng)?;
        head.rebias(store, sigma_init);
        Ok(head)
    }

    /// Re-points the head so zero input emits `sigma_init`.
    pub fn rebias(&self, store: &mut ParamStore, sigma_init: f64) {
        let fraction = (sigma_init - self.sigma_min) / (self.sigma_max - self.sigma_min);
        debug_assert!(fraction > 0.0 && fraction < 1.0, "sigma_init outside the band");
        let bias = (fraction / (1.0 - fraction)).ln();
        for v in store.get_mut(self.lin.b).tensor.data_mut() {
            *v = bias;
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, x: Var) -> Result<Var> {
        let pre = self.lin.forward(tape, bound, x)?;
        let squashed = tape.sigmoid(pre)?;
        tape.affine(squashed, self.sigma_max - self.sigma_min, self.sigma_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "t", 40, 25, &mut rng).unwrap();
        let bound = 1.0 / 5.0;
        for v in store.get(lin.w).tensor.data() {
            assert!(v.abs() <= bound);
        }
        assert!(store.get(lin.b).tensor.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sigma_head_zero_input_hits_sigma_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let head = SigmaHead::with_initial_sigma(
            &mut store, "sig", 3, 4, 1e-3, 1.0, 0.3, &mut rng,
        )
        .unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let zero = tape.constant(Tensor::vector(vec![0.0; 4]).unwrap());
        let sigma = head.forward(&mut tape, &bound, zero).unwrap();
        for v in tape.value(sigma).data() {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_head_zero_bias_sits_at_band_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let head = SigmaHead::new(&mut store, "sig", 2, 3, 1e-3, 1.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let zero = tape.constant(Tensor::vector(vec![0.0; 3]).unwrap());
        let sigma = head.forward(&mut tape, &bound, zero).unwrap();
        let midpoint = 1e-3 + (1.0 - 1e-3) * 0.5;
        for v in tape.value(sigma).data() {
            assert!((v - midpoint).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_head_stays_inside_band_for_extreme_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let head = SigmaHead::new(&mut store, "sig", 2, 2, 1e-3, 1.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        for input in [[50.0, -50.0], [1e3, 1e3], [-1e3, 2.0]] {
            let x = tape.constant(Tensor::vector(input.to_vec()).unwrap());
            let sigma = head.forward(&mut tape, &bound, x).unwrap();
            for v in tape.value(sigma).data() {
                assert!(*v > 0.0 && *v >= 1e-3 && *v <= 1.0);
            }
        }
    }
}
