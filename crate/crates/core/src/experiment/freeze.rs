//! Turning a pretraining checkpoint into a frozen motor controller: the
//! high-level section is dropped, the low-level body becomes immutable,
//! and the action sigma head is re-initialized trainable so transfer can
//! re-learn how much action noise to keep.

use rand::Rng;

use crate::autodiff::{ParamStore, Shape, Tensor};
use crate::error::{Error, Result};
use crate::io::{crc32, Checkpoint};
use crate::nets::{Linear, LowLevelController, SigmaHead, CONTROL_DIM};

use super::pretrain::SIGMA_BOUNDS_KEY;

/// A pretrained low-level controller in its own parameter store: every
/// body weight frozen, the sigma head freshly initialized and trainable.
/// Transfer phases add their new networks to `store` around it.
#[derive(Clone, Debug)]
pub struct FrozenLowLevel {
    pub store: ParamStore,
    pub ll: LowLevelController,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Config fingerprint of the run that produced the source checkpoint.
    pub source_hash: u64,
}

pub fn extract_and_freeze(ck: &Checkpoint, rng: &mut impl Rng) -> Result<FrozenLowLevel> {
    let section = ck.section("ll/");
    if section.arrays.is_empty() {
        return Err(Error::Checkpoint {
            message: "no low-level section (ll/) in this checkpoint".into(),
        });
    }
    let mut store = section.to_store()?;
    let ll = wire_low_level(&store)?;
    let (sigma_min, sigma_max) = (ll.sigma.sigma_min, ll.sigma.sigma_max);

    store.set_trainable_prefix("ll/", false);
    reinit_sigma_head(&mut store, &ll, rng);

    Ok(FrozenLowLevel {
        store,
        ll,
        sigma_min,
        sigma_max,
        source_hash: ck.config_hash,
    })
}

/// Fresh fan-in-scaled weights and a zero bias for the sigma layer, left
/// trainable. Zero bias puts the emitted sigma at the midpoint of the
/// band for zero pre-activation input.
fn reinit_sigma_head(store: &mut ParamStore, ll: &LowLevelController, rng: &mut impl Rng) {
    let bound = 1.0 / (ll.hidden as f64).sqrt();
    let w = store.get_mut(ll.sigma.lin.w);
    for v in w.tensor.data_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    w.trainable = true;
    let b = store.get_mut(ll.sigma.lin.b);
    for v in b.tensor.data_mut() {
        *v = 0.0;
    }
    b.trainable = true;
}

/// Rebuilds the low-level controller's handles from a store holding its
/// `ll/` arrays, validating every shape against the layer wiring.
pub fn wire_low_level(store: &ParamStore) -> Result<LowLevelController> {
    let l1 = wire_linear(store, "ll/l1")?;
    let l2 = wire_linear(store, "ll/l2")?;
    let l3 = wire_linear(store, "ll/l3")?;
    let mu = wire_linear(store, "ll/mu")?;
    let sig = wire_linear(store, "ll/sigma")?;

    let hidden = l1.out_dim;
    let proprio_dim = l1.in_dim;
    let action_dim = mu.out_dim;
    let expectations = [
        (&l2, hidden, hidden, "ll/l2/w"),
        (&l3, hidden, hidden + CONTROL_DIM, "ll/l3/w"),
        (&mu, action_dim, hidden, "ll/mu/w"),
        (&sig, action_dim, hidden, "ll/sigma/w"),
    ];
    for (lin, out_dim, in_dim, name) in expectations {
        if lin.out_dim != out_dim || lin.in_dim != in_dim {
            return Err(Error::CheckpointShape {
                name: name.into(),
                got: format!("[{}, {}]", lin.out_dim, lin.in_dim),
                expected: format!("[{out_dim}, {in_dim}]"),
            });
        }
    }

    let (sigma_min, sigma_max) = sigma_bounds(store)?;
    Ok(LowLevelController {
        l1,
        l2,
        l3,
        mu,
        sigma: SigmaHead {
            lin: sig,
            sigma_min,
            sigma_max,
        },
        proprio_dim,
        hidden,
        action_dim,
    })
}

fn wire_linear(store: &ParamStore, prefix: &str) -> Result<Linear> {
    let missing = |name: String| Error::Checkpoint {
        message: format!("missing array {name}"),
    };
    let w = store
        .id_of(&format!("{prefix}/w"))
        .ok_or_else(|| missing(format!("{prefix}/w")))?;
    let b = store
        .id_of(&format!("{prefix}/b"))
        .ok_or_else(|| missing(format!("{prefix}/b")))?;
    match (store.get(w).tensor.shape(), store.get(b).tensor.shape()) {
        (Shape::Matrix(r, c), Shape::Vector(n)) if n == r => Ok(Linear {
            w,
            b,
            out_dim: r,
            in_dim: c,
        }),
        (ws, bs) => Err(Error::CheckpointShape {
            name: format!("{prefix}/w"),
            got: format!("{ws} with bias {bs}"),
            expected: "a matrix with a bias of matching height".into(),
        }),
    }
}

fn sigma_bounds(store: &ParamStore) -> Result<(f64, f64)> {
    let id = store.id_of(SIGMA_BOUNDS_KEY).ok_or_else(|| Error::Checkpoint {
        message: format!("missing array {SIGMA_BOUNDS_KEY}"),
    })?;
    let t = &store.get(id).tensor;
    match t.data() {
        [lo, hi] if *lo > 0.0 && hi > lo => Ok((*lo, *hi)),
        other => Err(Error::Checkpoint {
            message: format!("{SIGMA_BOUNDS_KEY} must hold [min, max] with 0 < min < max, got {other:?}"),
        }),
    }
}

/// Checks a wired controller against the swimmer it is about to drive.
/// `proprio_dim` is `None` for uses that replace the input layer.
pub(crate) fn check_body_fits(
    ll: &LowLevelController,
    proprio_dim: Option<usize>,
    action_dim: usize,
) -> Result<()> {
    if let Some(want) = proprio_dim {
        if ll.proprio_dim != want {
            return Err(Error::CheckpointShape {
                name: "ll/l1/w".into(),
                got: format!("input width {}", ll.proprio_dim),
                expected: format!("the {want} proprioceptive features of this swimmer"),
            });
        }
    }
    if ll.action_dim != action_dim {
        return Err(Error::CheckpointShape {
            name: "ll/mu/w".into(),
            got: format!("{} torque outputs", ll.action_dim),
            expected: format!("{action_dim} joints"),
        });
    }
    Ok(())
}

/// CRC over the little-endian bytes of every body array (everything
/// under `ll/` except the sigma layer), in store order. Transfer runs
/// hash this before and after training to prove the freeze held.
pub fn body_hash(store: &ParamStore) -> u64 {
    let mut bytes = Vec::new();
    for (_, e) in store.iter() {
        if e.name.starts_with("ll/") && !e.name.starts_with("ll/sigma/") {
            bytes.extend_from_slice(e.name.as_bytes());
            for v in e.tensor.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    crc32(&bytes) as u64
}
