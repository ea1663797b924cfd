use ndarray::{Array1, Array2};
use rand::RngCore;

use super::{fill_uniform, he_bound, sum_rows};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum LayerKind {
    Dense,
    /// Valid (unpadded) stride-1 convolution over a `in_channels x rows x cols` input.
    Conv {
        in_channels: usize,
        rows: usize,
        cols: usize,
        kernel: usize,
    },
}

/// Dense or convolutional layer. For convolutions `weight` is
/// `filters x (in_channels * k * k)` and the output is laid out channel-major.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layer {
    pub kind: LayerKind,
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub relu: bool,
    /// Weights are drawn from `U(-init_bound, init_bound)`.
    pub init_bound: f64,
}

pub(crate) struct LayerCache {
    /// Dense: the input batch. Conv: the im2col matrix.
    input: Array2<f64>,
    /// Post-activation output, used for the ReLU mask.
    output: Array2<f64>,
}

impl Layer {
    /// He-uniform weights scaled by `scale`, zero biases.
    pub fn he_uniform(
        kind: LayerKind,
        outputs: usize,
        fan_in: usize,
        relu: bool,
        scale: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        let mut layer = Self {
            kind,
            weight: Array2::zeros((outputs, fan_in)),
            bias: Array1::zeros(outputs),
            relu,
            init_bound: scale * he_bound(fan_in),
        };
        layer.reinit(rng);
        layer
    }

    pub fn reinit(&mut self, rng: &mut dyn RngCore) {
        fill_uniform(
            self.weight.as_slice_mut().expect("standard layout"),
            self.init_bound,
            rng,
        );
        self.bias.fill(0.0);
    }

    fn conv_geometry(&self) -> Option<(usize, usize, usize, usize, usize)> {
        match self.kind {
            LayerKind::Dense => None,
            LayerKind::Conv {
                in_channels,
                rows,
                cols,
                kernel,
            } => Some((
                in_channels,
                rows,
                cols,
                kernel,
                (rows + 1 - kernel) * (cols + 1 - kernel),
            )),
        }
    }

    pub fn forward(&self, x: &Array2<f64>, keep: bool) -> (Array2<f64>, Option<LayerCache>) {
        let batch = x.nrows();
        let (input, out) = match self.conv_geometry() {
            None => {
                let mut z = standard(x.dot(&self.weight.t()));
                z += &self.bias;
                self.activate(&mut z);
                (if keep { Some(x.clone()) } else { None }, z)
            }
            Some((c, h, w, k, positions)) => {
                let cols = im2col(x, c, h, w, k);
                let mut z = standard(cols.dot(&self.weight.t()));
                z += &self.bias;
                self.activate(&mut z);
                let out = positions_to_channels(&z, batch, positions, self.weight.nrows());
                (if keep { Some(cols) } else { None }, out)
            }
        };
        let cache = input.map(|input| LayerCache {
            input,
            output: out.clone(),
        });
        (out, cache)
    }

    fn activate(&self, z: &mut Array2<f64>) {
        if self.relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }

    /// Gradients of the weight, bias and (optionally) the layer input given
    /// the gradient of the post-activation output.
    pub fn backward(
        &self,
        cache: &LayerCache,
        mut d_out: Array2<f64>,
        want_input: bool,
    ) -> (Array2<f64>, Array1<f64>, Option<Array2<f64>>) {
        if self.relu {
            ndarray::Zip::from(&mut d_out)
                .and(&cache.output)
                .for_each(|d, &o| {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                });
        }
        match self.conv_geometry() {
            None => {
                let dw = standard(d_out.t().dot(&cache.input));
                let db = sum_rows(&d_out);
                let dx = want_input.then(|| standard(d_out.dot(&self.weight)));
                (dw, db, dx)
            }
            Some((c, h, w, k, positions)) => {
                let batch = d_out.nrows();
                let dz = channels_to_positions(&d_out, batch, positions, self.weight.nrows());
                let dw = standard(dz.t().dot(&cache.input));
                let db = sum_rows(&dz);
                let dx = want_input.then(|| col2im(&dz.dot(&self.weight), batch, c, h, w, k));
                (dw, db, dx)
            }
        }
    }
}

/// Row-major copy if `dot` handed back a column-major result.
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// `B x (c*h*w)` images to a `(B*oh*ow) x (c*k*k)` patch matrix.
fn im2col(x: &Array2<f64>, c: usize, h: usize, w: usize, k: usize) -> Array2<f64> {
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let batch = x.nrows();
    let width = c * k * k;
    let mut out = vec![0.0; batch * oh * ow * width];
    let src = x.as_slice().expect("standard layout");
    for b in 0..batch {
        let img = &src[b * c * h * w..(b + 1) * c * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((b * oh + oy) * ow + ox) * width;
                let dst = &mut out[row..row + width];
                let mut j = 0;
                for ch in 0..c {
                    for ky in 0..k {
                        let base = ch * h * w + (oy + ky) * w + ox;
                        dst[j..j + k].copy_from_slice(&img[base..base + k]);
                        j += k;
                    }
                }
            }
        }
    }
    Array2::from_shape_vec((batch * oh * ow, width), out).expect("im2col shape")
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto images.
fn col2im(cols: &Array2<f64>, batch: usize, c: usize, h: usize, w: usize, k: usize) -> Array2<f64> {
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let width = c * k * k;
    let mut out = Array2::zeros((batch, c * h * w));
    let src = cols.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let dst_all = out.as_slice_mut().expect("standard layout");
    for b in 0..batch {
        let img = &mut dst_all[b * c * h * w..(b + 1) * c * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((b * oh + oy) * ow + ox) * width;
                let patch = &src[row..row + width];
                let mut j = 0;
                for ch in 0..c {
                    for ky in 0..k {
                        let base = ch * h * w + (oy + ky) * w + ox;
                        for kx in 0..k {
                            img[base + kx] += patch[j + kx];
                        }
                        j += k;
                    }
                }
            }
        }
    }
    out
}

/// `(B*P) x F` to `B x (F*P)`.
fn positions_to_channels(
    z: &Array2<f64>,
    batch: usize,
    positions: usize,
    filters: usize,
) -> Array2<f64> {
    let src = z.as_slice().expect("standard layout");
    let mut out = vec![0.0; batch * filters * positions];
    for b in 0..batch {
        for p in 0..positions {
            let row = &src[(b * positions + p) * filters..(b * positions + p + 1) * filters];
            for (f, &v) in row.iter().enumerate() {
                out[(b * filters + f) * positions + p] = v;
            }
        }
    }
    Array2::from_shape_vec((batch, filters * positions), out).expect("layout shape")
}

/// `B x (F*P)` to `(B*P) x F`.
fn channels_to_positions(
    d: &Array2<f64>,
    batch: usize,
    positions: usize,
    filters: usize,
) -> Array2<f64> {
    let d = d.as_standard_layout();
    let src = d.as_slice().expect("standard layout");
    let mut out = vec![0.0; batch * filters * positions];
    for b in 0..batch {
        for f in 0..filters {
            for p in 0..positions {
                out[(b * positions + p) * filters + f] = src[(b * filters + f) * positions + p];
            }
        }
    }
    Array2::from_shape_vec((batch * positions, filters), out).expect("layout shape")
}
