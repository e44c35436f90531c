use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::arch::{Architecture, LayerSpec, LATENT_DIM};
use super::net::*;
use crate::error::{Error, Result};
use crate::fieldsynth::{FieldImage, CHANNELS};
use crate::scalar::Real;

/// Convolutional autoencoder with a mirrored decoder. Parameters live in one
/// flat vector; layers index into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    arch: Architecture,
    input: Shape,
    ops: Vec<Op>,
    n_encoder: usize,
    params: Vec<T>,
    pub seed: u64,
    pub epochs_trained: usize,
}

/// Per-layer activations of one forward pass; `acts[i]` is the input of
/// layer `i`, the last entry the reconstruction.
pub(crate) struct Trace<T> {
    pub acts: Vec<Vec<T>>,
    pub argmax: Vec<Vec<u32>>,
}

fn compile(arch: &Architecture, input: Shape) -> Result<(Vec<Op>, usize, usize)> {
    let latent = arch
        .latent_dim()
        .ok_or_else(|| Error::Architecture("encoder must end in a dense latent layer".into()))?;
    if latent == 0 {
        return Err(Error::Architecture("latent layer needs at least one unit".into()));
    }
    let mut ops = Vec::new();
    let mut inputs = Vec::new();
    let mut shape = input;
    let mut n_params = 0usize;
    let push = |op: Op, ops: &mut Vec<Op>, n_params: &mut usize| {
        let count = op.param_count();
        let op = match op {
            Op::Conv { input, output, kernel, stride, .. } => Op::Conv {
                input,
                output,
                kernel,
                stride,
                w_off: *n_params,
                b_off: *n_params + count - output.c,
            },
            Op::Dense { inputs, outputs, .. } => Op::Dense {
                inputs,
                outputs,
                w_off: *n_params,
                b_off: *n_params + inputs * outputs,
            },
            other => other,
        };
        *n_params += count;
        ops.push(op);
    };
    for (i, layer) in arch.encoder.iter().enumerate() {
        inputs.push(shape);
        let op = match *layer {
            LayerSpec::Conv { filters, kernel, stride } => {
                if filters == 0 || stride == 0 || kernel == 0 || kernel % 2 == 0 {
                    return Err(Error::Architecture(format!(
                        "layer {i}: convolution needs filters, stride >= 1 and an odd kernel"
                    )));
                }
                if shape.h == 1 && shape.w == 1 && i > 0 {
                    return Err(Error::Architecture(format!("layer {i}: convolution after a dense layer")));
                }
                if kernel > shape.h || kernel > shape.w {
                    return Err(Error::Architecture(format!(
                        "layer {i}: kernel {kernel} exceeds input {}x{}",
                        shape.h, shape.w
                    )));
                }
                let pad = kernel / 2;
                let out = Shape::new(filters, (shape.h + 2 * pad - kernel) / stride + 1, (shape.w + 2 * pad - kernel) / stride + 1);
                let op = Op::Conv { input: shape, output: out, kernel, stride, w_off: 0, b_off: 0 };
                shape = out;
                op
            }
            LayerSpec::Pool { window } => {
                if window == 0 || window > shape.h || window > shape.w {
                    return Err(Error::Architecture(format!(
                        "layer {i}: pool window {window} does not fit {}x{}",
                        shape.h, shape.w
                    )));
                }
                let out = Shape::new(shape.c, shape.h / window, shape.w / window);
                let op = Op::Pool { input: shape, output: out, window };
                shape = out;
                op
            }
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(Error::Architecture(format!("layer {i}: dense layer needs units")));
                }
                let op = Op::Dense { inputs: shape.len(), outputs: units, w_off: 0, b_off: 0 };
                shape = Shape::flat(units);
                op
            }
            LayerSpec::Relu => Op::Relu { len: shape.len() },
        };
        push(op, &mut ops, &mut n_params);
    }
    let n_encoder = ops.len();

    // Mirror: walk the encoder backwards, activations after every
    // parametrised decoder layer except the last.
    let mut dec: Vec<Op> = Vec::new();
    for (layer, &s_in) in arch.encoder.iter().zip(&inputs).rev() {
        match *layer {
            LayerSpec::Relu => continue,
            LayerSpec::Dense { .. } => {
                dec.push(Op::Dense { inputs: shape.len(), outputs: s_in.len(), w_off: 0, b_off: 0 });
                shape = s_in;
            }
            LayerSpec::Pool { window } => {
                dec.push(Op::Upsample { input: shape, output: s_in, factor: window });
                shape = s_in;
            }
            LayerSpec::Conv { kernel, stride, .. } => {
                if stride > 1 {
                    let up = Shape::new(shape.c, s_in.h, s_in.w);
                    dec.push(Op::Upsample { input: shape, output: up, factor: stride });
                    shape = up;
                }
                let out = Shape::new(s_in.c, s_in.h, s_in.w);
                dec.push(Op::Conv { input: shape, output: out, kernel, stride: 1, w_off: 0, b_off: 0 });
                shape = out;
            }
        }
        dec.push(Op::Relu { len: shape.len() });
    }
    dec.pop();
    for op in dec {
        push(op, &mut ops, &mut n_params);
    }
    Ok((ops, n_encoder, n_params))
}

impl<T: Real> Autoencoder<T> {
    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`) drawn in
    /// layer order from `seed`; zero biases and a zero output layer.
    pub fn new(arch: Architecture, height: usize, width: usize, seed: u64) -> Result<Self> {
        Self::with_channels(arch, CHANNELS, height, width, seed)
    }

    pub fn with_channels(arch: Architecture, channels: usize, height: usize, width: usize, seed: u64) -> Result<Self> {
        let input = Shape::new(channels, height, width);
        if input.len() == 0 {
            return Err(Error::Architecture("input must be nonempty".into()));
        }
        let (ops, n_encoder, n_params) = compile(&arch, input)?;
        if arch.latent_dim() != Some(LATENT_DIM) {
            log::warn!(
                "latent width {} differs from the standard {LATENT_DIM}",
                arch.latent_dim().unwrap_or(0)
            );
        }
        let mut params = vec![T::zero(); n_params];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // The output layer starts at zero so the first reconstruction is the
        // zero image and training begins at unit loss on normalized inputs.
        let last = ops.len() - 1;
        for op in &ops[..last] {
            if let Some((w_off, n_w, _, _)) = op.param_blocks() {
                let limit = (6.0 / op.fan_in() as f64).sqrt();
                for p in &mut params[w_off..w_off + n_w] {
                    *p = T::lit(rng.gen_range(-limit..limit));
                }
            }
        }
        Ok(Self {
            arch,
            input,
            ops,
            n_encoder,
            params,
            seed,
            epochs_trained: 0,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    /// `(channels, height, width)`.
    pub fn input_shape(&self) -> (usize, usize, usize) {
        (self.input.c, self.input.h, self.input.w)
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.ops[self.n_encoder - 1].output_len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters given, model has {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub(crate) fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// SHA-256 over the parameters widened to little-endian f64.
    pub fn param_checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.params {
            h.update(p.to_f64_lossy().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn cast<U: Real>(&self) -> Autoencoder<U> {
        Autoencoder {
            arch: self.arch.clone(),
            input: self.input,
            ops: self.ops.clone(),
            n_encoder: self.n_encoder,
            params: crate::scalar::cast_slice(&self.params),
            seed: self.seed,
            epochs_trained: self.epochs_trained,
        }
    }

    /// Channel-major copy of an image, checked against the input shape.
    pub fn flatten<U: Real>(&self, image: &FieldImage<U>) -> Result<Vec<T>> {
        if (CHANNELS, image.height(), image.width()) != self.input_shape() {
            return Err(Error::Shape(format!(
                "image is {}x{}x{CHANNELS}, model expects {:?}",
                image.height(),
                image.width(),
                self.input_shape()
            )));
        }
        let (h, w) = image.shape();
        let mut out = vec![T::zero(); h * w * CHANNELS];
        for (px, v) in image.data().chunks_exact(CHANNELS).enumerate() {
            for c in 0..CHANNELS {
                out[c * h * w + px] = T::lit(v[c].to_f64_lossy());
            }
        }
        Ok(out)
    }

    fn run_op(&self, op: &Op, x: &[T], argmax: &mut Vec<u32>) -> Vec<T> {
        let p = &self.params;
        let mut y = vec![T::zero(); op.output_len()];
        match *op {
            Op::Conv { input, output, kernel, stride, w_off, b_off } => {
                conv_forward(x, p, input, output, kernel, stride, w_off, b_off, &mut y)
            }
            Op::Pool { input, output, window } => {
                argmax.resize(output.len(), 0);
                pool_forward(x, input, output, window, &mut y, argmax)
            }
            Op::Upsample { input, output, factor } => upsample_forward(x, input, output, factor, &mut y),
            Op::Dense { inputs, outputs, w_off, b_off } => dense_forward(x, p, inputs, outputs, w_off, b_off, &mut y),
            Op::Relu { .. } => {
                for (o, &v) in y.iter_mut().zip(x) {
                    *o = if v > T::zero() { v } else { T::zero() };
                }
            }
        }
        y
    }

    pub(crate) fn forward_range(&self, x: Vec<T>, ops: std::ops::Range<usize>) -> Trace<T> {
        let mut acts = vec![x];
        let mut argmax = Vec::with_capacity(ops.len());
        for op in &self.ops[ops] {
            let mut arg = Vec::new();
            let y = self.run_op(op, acts.last().unwrap(), &mut arg);
            acts.push(y);
            argmax.push(arg);
        }
        Trace { acts, argmax }
    }

    pub(crate) fn forward(&self, x: Vec<T>) -> Trace<T> {
        self.forward_range(x, 0..self.ops.len())
    }

    /// Backpropagates `dy`, the loss gradient at the reconstruction, adding
    /// parameter gradients into `grad`.
    pub(crate) fn backward(&self, trace: &Trace<T>, dy: Vec<T>, grad: &mut [T]) {
        let p = &self.params;
        let mut g = dy;
        for (i, op) in self.ops.iter().enumerate().rev() {
            let x = &trace.acts[i];
            let mut dx = vec![T::zero(); x.len()];
            match *op {
                Op::Conv { input, output, kernel, stride, w_off, b_off } => {
                    conv_backward(x, p, &g, input, output, kernel, stride, w_off, b_off, &mut dx, grad)
                }
                Op::Pool { .. } => pool_backward(&g, &trace.argmax[i], &mut dx),
                Op::Upsample { input, output, factor } => upsample_backward(&g, input, output, factor, &mut dx),
                Op::Dense { inputs, outputs, w_off, b_off } => {
                    dense_backward(x, p, &g, inputs, outputs, w_off, b_off, &mut dx, grad)
                }
                Op::Relu { .. } => {
                    for ((d, &v), &gv) in dx.iter_mut().zip(x).zip(&g) {
                        *d = if v > T::zero() { gv } else { T::zero() };
                    }
                }
            }
            g = dx;
        }
    }

    /// Mean squared reconstruction error of one flattened sample, and its
    /// gradient with respect to the reconstruction.
    pub(crate) fn sample_loss(&self, x: &[T], y: &[T]) -> (f64, Vec<T>) {
        let n = x.len() as f64;
        let scale = T::lit(2.0 / n);
        let mut loss = 0.0;
        let mut dy = Vec::with_capacity(x.len());
        for (&a, &b) in y.iter().zip(x) {
            let d = a - b;
            loss += d.to_f64_lossy() * d.to_f64_lossy();
            dy.push(scale * d);
        }
        (loss / n, dy)
    }

    /// Loss and parameter gradient for one flattened sample.
    pub(crate) fn loss_and_grad(&self, x: &[T]) -> (f64, Vec<T>) {
        let trace = self.forward(x.to_vec());
        let (loss, dy) = self.sample_loss(x, trace.acts.last().unwrap());
        let mut grad = vec![T::zero(); self.params.len()];
        self.backward(&trace, dy, &mut grad);
        (loss, grad)
    }

    pub(crate) fn flat_loss(&self, x: &[T]) -> f64 {
        let trace = self.forward(x.to_vec());
        self.sample_loss(x, trace.acts.last().unwrap()).0
    }

    pub(crate) fn encode_flat(&self, x: Vec<T>) -> Vec<f64> {
        let trace = self.forward_range(x, 0..self.n_encoder);
        trace.acts.last().unwrap().iter().map(|v| v.to_f64_lossy()).collect()
    }

    /// Latent coordinates of an image.
    pub fn encode<U: Real>(&self, image: &FieldImage<U>) -> Result<Vec<f64>> {
        Ok(self.encode_flat(self.flatten(image)?))
    }

    /// Decoded latent vector as an image.
    pub fn decode(&self, latent: &[f64]) -> Result<FieldImage<T>> {
        if latent.len() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "latent has {} coordinates, model uses {}",
                latent.len(),
                self.latent_dim()
            )));
        }
        let z: Vec<T> = latent.iter().map(|&v| T::lit(v)).collect();
        let trace = self.forward_range(z, self.n_encoder..self.ops.len());
        self.unflatten(trace.acts.last().unwrap())
    }

    fn unflatten(&self, y: &[T]) -> Result<FieldImage<T>> {
        let Shape { c, h, w } = self.input;
        if c != CHANNELS {
            return Err(Error::Shape(format!("model has {c} channels, images have {CHANNELS}")));
        }
        let mut data = vec![T::zero(); y.len()];
        for px in 0..h * w {
            for ch in 0..c {
                data[px * c + ch] = y[ch * h * w + px];
            }
        }
        FieldImage::from_vec(h, w, data)
    }

    pub fn reconstruct<U: Real>(&self, image: &FieldImage<U>) -> Result<FieldImage<T>> {
        let trace = self.forward(self.flatten(image)?);
        self.unflatten(trace.acts.last().unwrap())
    }

    /// Mean squared reconstruction error of one image.
    pub fn loss<U: Real>(&self, image: &FieldImage<U>) -> Result<f64> {
        Ok(self.flat_loss(&self.flatten(image)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let m = Autoencoder::<f32>::new(Architecture::default(), 56, 96, 1).unwrap();
        assert_eq!(m.latent_dim(), 4);
        let img = FieldImage::<f32>::zeros(56, 96);
        assert_eq!(m.encode(&img).unwrap().len(), 4);
        assert_eq!(m.reconstruct(&img).unwrap().shape(), (56, 96));
        let odd = Autoencoder::<f32>::new(Architecture::default(), 31, 29, 1).unwrap();
        assert_eq!(odd.reconstruct(&FieldImage::<f32>::zeros(31, 29)).unwrap().shape(), (31, 29));
        assert!(m.encode(&FieldImage::<f32>::zeros(56, 95)).is_err());
    }

    #[test]
    fn seeded_init() {
        let a = Autoencoder::<f32>::new(Architecture::default(), 16, 16, 7).unwrap();
        let b = Autoencoder::<f32>::new(Architecture::default(), 16, 16, 7).unwrap();
        let c = Autoencoder::<f32>::new(Architecture::default(), 16, 16, 8).unwrap();
        assert_eq!(a.param_checksum(), b.param_checksum());
        assert_ne!(a.param_checksum(), c.param_checksum());
        assert!(a.is_finite());
    }

    #[test]
    fn bad_architectures() {
        let big = Architecture::parse("conv:4:7:1,dense:4").unwrap();
        assert!(matches!(Autoencoder::<f64>::new(big, 5, 9, 0), Err(Error::Architecture(_))));
        let no_latent = Architecture::parse("conv:4:3:1,relu").unwrap();
        assert!(Autoencoder::<f64>::new(no_latent, 8, 8, 0).is_err());
        let even = Architecture::parse("conv:4:2:1,dense:4").unwrap();
        assert!(Autoencoder::<f64>::new(even, 8, 8, 0).is_err());
        let wide = Architecture::parse("conv:2:3:1,dense:6").unwrap();
        assert_eq!(Autoencoder::<f64>::new(wide, 8, 8, 0).unwrap().latent_dim(), 6);
    }

    #[test]
    fn zero_model_encodes_zero() {
        let mut m = Autoencoder::<f64>::new(Architecture::parse("dense:16,dense:4").unwrap(), 4, 4, 3).unwrap();
        let n = m.params().len();
        m.set_params(vec![0.0; n]).unwrap();
        assert_eq!(m.encode(&FieldImage::<f64>::zeros(4, 4)).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn encode_is_pure_and_decode_matches_reconstruct() {
        let m = Autoencoder::<f64>::new(Architecture::default(), 12, 12, 2).unwrap();
        let img = FieldImage::from_vec(12, 12, (0..432).map(|i| ((i * 37) % 11) as f64 * 0.1).collect()).unwrap();
        let z = m.encode(&img).unwrap();
        assert_eq!(z, m.encode(&img).unwrap());
        assert_eq!(m.decode(&z).unwrap(), m.reconstruct(&img).unwrap());
        let rec = m.reconstruct(&img).unwrap();
        let direct = rec.sub(&img).unwrap().data().iter().map(|d| d * d).sum::<f64>() / 432.0;
        assert!((m.loss(&img).unwrap() - direct).abs() < 1e-12);
    }
}
