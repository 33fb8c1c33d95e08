//! Model checkpoints: a self-describing text format.
//!
//! Layout (line-oriented, in this exact order):
//!
//! ```text
//! novaclass-ckpt-1
//! input_length=1024
//! feature_units=64
//! num_classes=5
//! dropout_rate=0.5
//! bn_eps=0.00001
//! bn_momentum=0.1
//! blocks=4
//! block=0,out_channels=16,kernel_len=64,stride=16,padding=same,pool_size=2,pool_stride=2,dropout_rate=0
//! ...
//! classes=class_0,class_1,...
//! tensor=conv0.kernels,shape=16x1x64,data=<comma-separated floats>
//! ...
//! ```
//!
//! Floats are printed shortest-round-trip, so `load(save(m)) == m` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{BatchNorm1DLayer, Conv1DLayer, DenseLayer, PaddingMode};
use crate::scalar::Real;
use crate::tensor::Tensor;
use crate::wdcnn::model::{ArchitectureConfig, ConvBlock, ConvBlockSpec, Model};

/// First line of every checkpoint file.
pub const CHECKPOINT_VERSION: &str = "novaclass-ckpt-1";

/// Writes the model to `path` in the checkpoint format above.
pub fn save_model<F: Real>(model: &Model<F>, path: &Path) -> Result<()> {
    for name in &model.class_names {
        if name.contains(',') || name.contains('\n') {
            return Err(Error::invalid_argument(format!(
                "class name {name:?} may not contain commas or newlines"
            )));
        }
    }
    let cfg = &model.config;
    let bn0 = &model.blocks[0].bn;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{CHECKPOINT_VERSION}")?;
    writeln!(out, "input_length={}", cfg.input_length)?;
    writeln!(out, "feature_units={}", cfg.feature_units)?;
    writeln!(out, "num_classes={}", cfg.num_classes)?;
    writeln!(out, "dropout_rate={}", cfg.dropout_rate)?;
    writeln!(out, "bn_eps={}", bn0.eps)?;
    writeln!(out, "bn_momentum={}", bn0.momentum)?;
    writeln!(out, "blocks={}", cfg.conv_blocks.len())?;
    for (i, b) in cfg.conv_blocks.iter().enumerate() {
        writeln!(
            out,
            "block={i},out_channels={},kernel_len={},stride={},padding={},pool_size={},pool_stride={},dropout_rate={}",
            b.out_channels,
            b.kernel_len,
            b.stride,
            match b.padding {
                PaddingMode::Same => "same",
                PaddingMode::Valid => "valid",
            },
            b.pool_size,
            b.pool_stride,
            b.dropout_rate
        )?;
    }
    writeln!(out, "classes={}", model.class_names.join(","))?;

    for (i, b) in model.blocks.iter().enumerate() {
        write_tensor(&mut out, &format!("conv{i}.kernels"), b.conv.kernels.shape(), b.conv.kernels.data())?;
        write_tensor(&mut out, &format!("conv{i}.bias"), &[b.conv.bias.len()], &b.conv.bias)?;
        write_tensor(&mut out, &format!("bn{i}.gamma"), &[b.bn.gamma.len()], &b.bn.gamma)?;
        write_tensor(&mut out, &format!("bn{i}.beta"), &[b.bn.beta.len()], &b.bn.beta)?;
        write_tensor(&mut out, &format!("bn{i}.running_mean"), &[b.bn.running_mean.len()], &b.bn.running_mean)?;
        write_tensor(&mut out, &format!("bn{i}.running_var"), &[b.bn.running_var.len()], &b.bn.running_var)?;
    }
    write_tensor(&mut out, "feature.weights", model.feature_layer.weights.shape(), model.feature_layer.weights.data())?;
    write_tensor(&mut out, "feature.bias", &[model.feature_layer.bias.len()], &model.feature_layer.bias)?;
    write_tensor(&mut out, "output.weights", model.output_layer.weights.shape(), model.output_layer.weights.data())?;
    write_tensor(&mut out, "output.bias", &[model.output_layer.bias.len()], &model.output_layer.bias)?;
    out.flush()?;
    Ok(())
}

fn write_tensor<F: Real, W: Write>(
    out: &mut W,
    name: &str,
    shape: &[usize],
    data: &[F],
) -> Result<()> {
    write!(out, "tensor={name},shape=")?;
    for (i, d) in shape.iter().enumerate() {
        if i > 0 {
            write!(out, "x")?;
        }
        write!(out, "{d}")?;
    }
    write!(out, ",data=")?;
    for (i, v) in data.iter().enumerate() {
        if i > 0 {
            write!(out, ",")?;
        }
        write!(out, "{v}")?;
    }
    writeln!(out)?;
    Ok(())
}

/// Reads a checkpoint written by [`save_model`].
pub fn load_model<F: Real>(path: &Path) -> Result<Model<F>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = LineSource::new(reader.lines());

    let version = lines.next_line()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(
            1,
            format!("unrecognized checkpoint version {version:?}"),
        ));
    }

    let input_length: usize = lines.keyed_int("input_length")?;
    let feature_units: usize = lines.keyed_int("feature_units")?;
    let num_classes: usize = lines.keyed_int("num_classes")?;
    let dropout_rate: f64 = lines.keyed_float("dropout_rate")?;
    let bn_eps: f64 = lines.keyed_float("bn_eps")?;
    let bn_momentum: f64 = lines.keyed_float("bn_momentum")?;
    let block_count: usize = lines.keyed_int("blocks")?;

    let mut conv_blocks = Vec::with_capacity(block_count);
    for i in 0..block_count {
        conv_blocks.push(lines.block_spec(i)?);
    }

    let classes_line = lines.next_line()?;
    let class_names: Vec<String> = classes_line
        .strip_prefix("classes=")
        .ok_or_else(|| lines.err("expected classes= line"))?
        .split(',')
        .map(str::to_owned)
        .collect();
    if class_names.len() != num_classes {
        return Err(lines.err(format!(
            "{} class names for {num_classes} classes",
            class_names.len()
        )));
    }

    let config = ArchitectureConfig {
        input_length,
        conv_blocks,
        feature_units,
        num_classes,
        dropout_rate,
    };
    config
        .validate()
        .map_err(|e| lines.err(format!("invalid architecture: {e}")))?;

    let mut blocks = Vec::with_capacity(block_count);
    let mut in_channels = 1usize;
    for (i, spec) in config.conv_blocks.iter().enumerate() {
        let kernels = lines.tensor::<F>(
            &format!("conv{i}.kernels"),
            &[spec.out_channels, in_channels, spec.kernel_len],
        )?;
        let bias = lines.tensor::<F>(&format!("conv{i}.bias"), &[spec.out_channels])?;
        let conv = Conv1DLayer::new(
            Tensor::new(
                vec![spec.out_channels, in_channels, spec.kernel_len],
                kernels,
            )
            .map_err(|e| lines.err(e.to_string()))?,
            bias,
            spec.stride,
            spec.padding,
        )
        .map_err(|e| lines.err(e.to_string()))?;

        let mut bn = BatchNorm1DLayer::<F>::new(spec.out_channels)
            .map_err(|e| lines.err(e.to_string()))?;
        bn.eps = F::of(bn_eps);
        bn.momentum = F::of(bn_momentum);
        bn.gamma = lines.tensor::<F>(&format!("bn{i}.gamma"), &[spec.out_channels])?;
        bn.beta = lines.tensor::<F>(&format!("bn{i}.beta"), &[spec.out_channels])?;
        bn.running_mean = lines.tensor::<F>(&format!("bn{i}.running_mean"), &[spec.out_channels])?;
        bn.running_var = lines.tensor::<F>(&format!("bn{i}.running_var"), &[spec.out_channels])?;

        blocks.push(ConvBlock {
            conv,
            bn,
            pool_size: spec.pool_size,
            pool_stride: spec.pool_stride,
            dropout_rate: spec.dropout_rate,
        });
        in_channels = spec.out_channels;
    }

    let flat = config.flattened_len().map_err(|e| lines.err(e.to_string()))?;
    let feature_weights = lines.tensor::<F>("feature.weights", &[feature_units, flat])?;
    let feature_bias = lines.tensor::<F>("feature.bias", &[feature_units])?;
    let output_weights = lines.tensor::<F>("output.weights", &[num_classes, feature_units])?;
    let output_bias = lines.tensor::<F>("output.bias", &[num_classes])?;

    if let Some(extra) = lines.try_next_line()? {
        return Err(lines.err(format!("unexpected trailing line {extra:?}")));
    }

    Ok(Model {
        config,
        blocks,
        feature_layer: DenseLayer::new(
            Tensor::new(vec![feature_units, flat], feature_weights)
                .map_err(|e| lines.err(e.to_string()))?,
            feature_bias,
        )
        .map_err(|e| lines.err(e.to_string()))?,
        output_layer: DenseLayer::new(
            Tensor::new(vec![num_classes, feature_units], output_weights)
                .map_err(|e| lines.err(e.to_string()))?,
            output_bias,
        )
        .map_err(|e| lines.err(e.to_string()))?,
        class_names,
    })
}

/// Line reader tracking 1-based line numbers for error reporting.
struct LineSource<I> {
    lines: I,
    current: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> LineSource<I> {
    fn new(lines: I) -> Self {
        LineSource { lines, current: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.current.max(1), message)
    }

    fn try_next_line(&mut self) -> Result<Option<String>> {
        match self.lines.next() {
            Some(line) => {
                self.current += 1;
                Ok(Some(line?))
            }
            None => Ok(None),
        }
    }

    fn next_line(&mut self) -> Result<String> {
        self.try_next_line()?.ok_or_else(|| {
            Error::parse(self.current + 1, "unexpected end of checkpoint")
        })
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(str::to_owned)
            .ok_or_else(|| self.err(format!("expected {key}=..., found {line:?}")))
    }

    fn keyed_int(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.err(format!("{key} is not an integer: {v:?}")))
    }

    fn keyed_float(&mut self, key: &str) -> Result<f64> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.err(format!("{key} is not a number: {v:?}")))
    }

    fn block_spec(&mut self, index: usize) -> Result<ConvBlockSpec> {
        let line = self.next_line()?;
        let mut fields = line.split(',');
        let mut want = |key: &str| -> Result<String> {
            let field = fields
                .next()
                .ok_or_else(|| Error::parse(self.current, format!("block line missing {key}")))?;
            field
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| {
                    Error::parse(self.current, format!("expected {key}=..., found {field:?}"))
                })
        };
        let idx: usize = want("block")?
            .parse()
            .map_err(|_| self.err("block index is not an integer"))?;
        if idx != index {
            return Err(self.err(format!("block {idx} out of order, expected {index}")));
        }
        let parse_usize = |s: String, this: &Self, key: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| this.err(format!("{key} is not an integer: {s:?}")))
        };
        let out_channels = parse_usize(want("out_channels")?, self, "out_channels")?;
        let kernel_len = parse_usize(want("kernel_len")?, self, "kernel_len")?;
        let stride = parse_usize(want("stride")?, self, "stride")?;
        let padding = match want("padding")?.as_str() {
            "same" => PaddingMode::Same,
            "valid" => PaddingMode::Valid,
            other => {
                return Err(self.err(format!("unknown padding mode {other:?}")));
            }
        };
        let pool_size = parse_usize(want("pool_size")?, self, "pool_size")?;
        let pool_stride = parse_usize(want("pool_stride")?, self, "pool_stride")?;
        let dropout_rate: f64 = want("dropout_rate")?
            .parse()
            .map_err(|_| self.err("dropout_rate is not a number"))?;
        Ok(ConvBlockSpec {
            out_channels,
            kernel_len,
            stride,
            padding,
            pool_size,
            pool_stride,
            dropout_rate,
        })
    }

    fn tensor<F: Real>(&mut self, name: &str, shape: &[usize]) -> Result<Vec<F>> {
        let line = self.next_line()?;
        let mut parts = line.splitn(3, ',');
        let name_part = parts
            .next()
            .and_then(|p| p.strip_prefix("tensor="))
            .ok_or_else(|| self.err("expected tensor= line"))?;
        if name_part != name {
            return Err(self.err(format!("tensor {name_part:?} out of order, expected {name:?}")));
        }
        let shape_part = parts
            .next()
            .and_then(|p| p.strip_prefix("shape="))
            .ok_or_else(|| self.err("tensor line missing shape="))?;
        let dims: Vec<usize> = shape_part
            .split('x')
            .map(|d| d.parse().map_err(|_| self.err(format!("bad dimension {d:?}"))))
            .collect::<Result<_>>()?;
        if dims != shape {
            return Err(self.err(format!(
                "tensor {name} has shape {dims:?}, expected {shape:?}"
            )));
        }
        let data_part = parts
            .next()
            .and_then(|p| p.strip_prefix("data="))
            .ok_or_else(|| self.err("tensor line missing data="))?;
        let expected: usize = shape.iter().product();
        let mut values = Vec::with_capacity(expected);
        for field in data_part.split(',') {
            let v = F::parse_str(field)
                .ok_or_else(|| self.err(format!("unparseable value {field:?} in {name}")))?;
            values.push(v);
        }
        if values.len() != expected {
            return Err(self.err(format!(
                "tensor {name} has {} values, expected {expected}",
                values.len()
            )));
        }
        Ok(values)
    }
}
