use std::fmt;

use crate::error::{Error, Result};

/// Per-sample shape `height × width × channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape3 {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape3 {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c }
    }

    pub fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.h, self.w, self.c]
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}×{}", self.h, self.w, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    /// 'same'-padded, unit-stride convolution with `filters` kernels of `kh × kw`.
    Conv { filters: usize, kh: usize, kw: usize },
    BatchNorm,
    Relu,
    MaxPool { ph: usize, pw: usize },
    Dropout { rate: f32 },
    Dense { units: usize },
    /// Terminal softmax over the preceding dense layer.
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::BatchNorm => "batchnorm",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Softmax => "softmax",
        }
    }

    /// Output shape for input `x`, or an error if the layer cannot accept it.
    pub fn output_shape(&self, x: Shape3) -> Result<Shape3> {
        match *self {
            LayerSpec::Conv { filters, kh, kw } => {
                if filters == 0 || kh == 0 || kw == 0 {
                    return Err(Error::domain("convolution parameters must be positive"));
                }
                Ok(Shape3::new(x.h, x.w, filters))
            }
            LayerSpec::BatchNorm | LayerSpec::Relu => Ok(x),
            LayerSpec::MaxPool { ph, pw } => {
                if ph == 0 || pw == 0 {
                    return Err(Error::domain("pool size must be positive"));
                }
                if x.h % ph != 0 || x.w % pw != 0 {
                    return Err(Error::domain(format!("cannot pool {x} with {ph}×{pw} windows")));
                }
                Ok(Shape3::new(x.h / ph, x.w / pw, x.c))
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::domain(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(x)
            }
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(Error::domain("dense layer needs at least one unit"));
                }
                Ok(Shape3::new(1, 1, units))
            }
            LayerSpec::Softmax => Ok(x),
        }
    }
}

/// Input shape plus an ordered layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_shape: Shape3,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Shape3, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { input_shape, layers };
        spec.infer_shapes()?;
        Ok(spec)
    }

    /// Input shape of every layer followed by the network output shape
    /// (`layers.len() + 1` entries).
    pub fn infer_shapes(&self) -> Result<Vec<Shape3>> {
        if self.input_shape.is_empty() {
            return Err(Error::domain("empty input shape"));
        }
        let mut shapes = vec![self.input_shape];
        let mut cur = self.input_shape;
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, LayerSpec::Softmax) {
                let after_dense = i > 0 && matches!(self.layers[i - 1], LayerSpec::Dense { .. });
                if !after_dense || i + 1 != self.layers.len() {
                    return Err(Error::domain("softmax must be the last layer and follow a dense layer"));
                }
            }
            cur = layer
                .output_shape(cur)
                .map_err(|e| Error::domain(format!("layer {i} ({}): {e}", layer.name())))?;
            shapes.push(cur);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Shape3> {
        Ok(*self.infer_shapes()?.last().expect("non-empty"))
    }

    /// Number of output classes (units of the final dense layer).
    pub fn classes(&self) -> Result<usize> {
        let out = self.output_shape()?;
        Ok(out.len())
    }

    pub fn conv_depth(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count()
    }

    /// Trainable parameter count of layer `index`.
    pub fn layer_params(&self, index: usize) -> Result<usize> {
        let shapes = self.infer_shapes()?;
        let x = shapes[index];
        Ok(match self.layers[index] {
            LayerSpec::Conv { filters, kh, kw } => kh * kw * x.c * filters + filters,
            LayerSpec::BatchNorm => 2 * x.c,
            LayerSpec::Dense { units } => x.len() * units + units,
            _ => 0,
        })
    }
}
