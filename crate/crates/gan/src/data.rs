//! Conversion between `SamplePair` arrays and batched tensors.

use candle_core::{Device, Tensor};
use csmri_core::SamplePair;
use ndarray::Array3;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

pub fn array_to_tensor(a: &Array3<f32>) -> Result<Tensor> {
    let a = a.as_standard_layout();
    let slice = a.as_slice().expect("standard layout is contiguous");
    Ok(Tensor::from_slice(slice, a.dim(), &Device::Cpu)?)
}

pub fn tensor_to_array(t: &Tensor) -> Result<Array3<f32>> {
    let (c, h, w) = t.dims3()?;
    let values: Vec<f32> = t.to_dtype(candle_core::DType::F32)?.flatten_all()?.to_vec1()?;
    Ok(Array3::from_shape_vec((c, h, w), values).expect("length matches dims"))
}

/// Stacks arrays of equal shape into `[B, C, N, N]`.
pub fn stack(arrays: &[&Array3<f32>]) -> Result<Tensor> {
    if arrays.is_empty() {
        return Err(Error::InvalidArgument("cannot stack an empty batch".into()));
    }
    let tensors = arrays.iter().map(|a| array_to_tensor(a)).collect::<Result<Vec<_>>>()?;
    Ok(Tensor::stack(&tensors, 0)?)
}

/// `[B, C, N, N]` to one array per batch element.
pub fn unstack(t: &Tensor) -> Result<Vec<Array3<f32>>> {
    let b = t.dims4()?.0;
    (0..b).map(|i| tensor_to_array(&t.get(i)?)).collect()
}

/// Input and target tensors of one mini-batch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub input: Tensor,
    pub target: Tensor,
}

/// A training set held as per-example tensors.
pub struct TensorDataset {
    inputs: Vec<Tensor>,
    targets: Vec<Tensor>,
}

impl TensorDataset {
    pub fn new(pairs: &[SamplePair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        let shape = pairs[0].input.dim();
        let mut inputs = Vec::with_capacity(pairs.len());
        let mut targets = Vec::with_capacity(pairs.len());
        for p in pairs {
            if p.input.dim() != shape || p.target.dim() != shape {
                return Err(Error::Shape(format!(
                    "pair {}: input {:?} and target {:?} differ from {shape:?}",
                    p.source_id,
                    p.input.dim(),
                    p.target.dim()
                )));
            }
            inputs.push(array_to_tensor(&p.input)?);
            targets.push(array_to_tensor(&p.target)?);
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.inputs[0].dims()[0]
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!("index {i} outside a set of {}", self.len())));
        }
        let pick = |v: &[Tensor]| -> Result<Tensor> {
            let sel: Vec<&Tensor> = indices.iter().map(|&i| &v[i]).collect();
            Ok(Tensor::stack(&sel, 0)?)
        };
        Ok(Batch { input: pick(&self.inputs)?, target: pick(&self.targets)? })
    }

    /// A batch of distinct examples when the set is large enough, otherwise
    /// drawn with replacement.
    pub fn sample<R: Rng>(&self, rng: &mut R, batch_size: usize) -> Result<Batch> {
        let n = self.len();
        let indices: Vec<usize> = if batch_size <= n {
            sample(rng, n, batch_size).into_vec()
        } else {
            (0..batch_size).map(|_| rng.random_range(0..n)).collect()
        };
        self.batch(&indices)
    }
}
