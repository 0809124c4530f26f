//! Versioned binary parameter checkpoints.
//!
//! Layout after the common header (`GPCK`, version, kind): shape as three
//! `u32`, value scale, Adam `β1 β2 ε` and step count, then the parameter,
//! first-moment and second-moment vectors as length-prefixed `f64` arrays.
//! Values are widened to `f64` so an `f32` checkpoint round-trips exactly.

use std::path::Path;

use crate::env::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::adam::Adam;
use super::network::{ActorCritic, Shape};
use super::ppo::PolicyParams;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GPCK";
pub const CHECKPOINT_VERSION: u16 = 1;
const KIND_POLICY: u8 = 3;

fn widen<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.as_f64()).collect()
}

fn narrow<T: Scalar>(xs: Vec<f64>) -> Vec<T> {
    xs.into_iter().map(T::lit).collect()
}

pub fn encode<T: Scalar>(p: &PolicyParams<T>) -> Vec<u8> {
    let mut w = ByteWriter::with_header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, KIND_POLICY);
    let s = p.net.shape;
    w.u32(s.obs_dim as u32);
    w.u32(s.hidden as u32);
    w.u32(s.actions as u32);
    w.f64(p.net.value_scale.as_f64());
    w.f64(p.adam.beta1.as_f64());
    w.f64(p.adam.beta2.as_f64());
    w.f64(p.adam.eps.as_f64());
    w.u64(p.adam.step);
    w.f64s(&widen(&p.net.params));
    w.f64s(&widen(&p.adam.m));
    w.f64s(&widen(&p.adam.v));
    w.finish()
}

pub fn decode<T: Scalar>(buf: &[u8]) -> Result<PolicyParams<T>> {
    let mut r = ByteReader::open(buf, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, KIND_POLICY)?;
    let shape = Shape {
        obs_dim: r.u32()? as usize,
        hidden: r.u32()? as usize,
        actions: r.u32()? as usize,
    };
    let value_scale = T::lit(r.f64()?);
    let beta1 = T::lit(r.f64()?);
    let beta2 = T::lit(r.f64()?);
    let eps = T::lit(r.f64()?);
    let step = r.u64()?;
    let params: Vec<T> = narrow(r.f64s()?);
    let m: Vec<T> = narrow(r.f64s()?);
    let v: Vec<T> = narrow(r.f64s()?);
    r.finish()?;
    let n = shape.num_params();
    if params.len() != n || m.len() != n || v.len() != n {
        return Err(Error::decode(format!(
            "checkpoint holds {} parameters, shape needs {n}",
            params.len()
        )));
    }
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(Error::Numeric {
            what: "checkpoint parameter",
            index: i,
        });
    }
    Ok(PolicyParams {
        net: ActorCritic::from_params(shape, value_scale, params),
        adam: Adam {
            beta1,
            beta2,
            eps,
            step,
            m,
            v,
        },
    })
}

pub fn save<T: Scalar>(p: &PolicyParams<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode(p))?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<PolicyParams<T>> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::ppo::PpoConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = Shape {
            obs_dim: 5,
            hidden: 7,
            actions: 3,
        };
        let mut p = PolicyParams::<f32>::new(shape, &PpoConfig::default(), &mut rng);
        p.adam.step = 9;
        p.adam.m[2] = 0.125;
        let back: PolicyParams<f32> = decode(&encode(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn corrupt_records_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = Shape {
            obs_dim: 2,
            hidden: 2,
            actions: 2,
        };
        let p = PolicyParams::<f64>::new(shape, &PpoConfig::default(), &mut rng);
        let bytes = encode(&p);
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode::<f64>(&bad).is_err());
    }
}
