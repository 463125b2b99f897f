#![allow(dead_code)]

use std::collections::HashMap;

use candle_core::{DType, Device, Tensor};
use csmri_gan::params::ParamStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn randn(shape: &[usize], scale: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

pub fn to_vec(t: &Tensor) -> Vec<f64> {
    t.to_dtype(DType::F64).unwrap().flatten_all().unwrap().to_vec1().unwrap()
}

pub fn values(store: &ParamStore) -> HashMap<String, Vec<f64>> {
    store.params().iter().map(|p| (p.name.clone(), to_vec(p.var.as_tensor()))).collect()
}

pub fn trainable_values(store: &ParamStore) -> HashMap<String, Vec<f64>> {
    store.trainable_params().map(|p| (p.name.clone(), to_vec(p.var.as_tensor()))).collect()
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    to_vec(a).iter().zip(to_vec(b)).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Naive cross-correlation: `x [C, H, W]`, `w [O, C, k, k]`, zero padding.
pub fn naive_conv(x: &[f64], c: usize, h: usize, w: usize, weight: &[f64], o: usize, k: usize, pad: usize, stride: usize) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; o * oh * ow];
    for oc in 0..o {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for ic in 0..c {
                    for a in 0..k {
                        for b in 0..k {
                            let y = (i * stride + a) as i64 - pad as i64;
                            let xx = (j * stride + b) as i64 - pad as i64;
                            if y < 0 || xx < 0 || y >= h as i64 || xx >= w as i64 {
                                continue;
                            }
                            acc += x[(ic * h + y as usize) * w + xx as usize] * weight[((oc * c + ic) * k + a) * k + b];
                        }
                    }
                }
                out[(oc * oh + i) * ow + j] = acc;
            }
        }
    }
    (out, oh, ow)
}
