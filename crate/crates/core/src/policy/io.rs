//! Flat named-tensor container. One tensor per line:
//! `name<TAB>shape<TAB>values`, shape as `d0xd1x...`, values
//! space-separated in row-major order using Rust's shortest round-trip
//! float formatting, so write-then-read is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{Dense, HeadParams, PolicyParams, ReprParams};
use crate::error::{Error, Result};

const MAGIC: &str = "# mtil-tensors v1";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    pub tensors: Vec<NamedTensor>,
}

impl TensorFile {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        self.tensors.push(NamedTensor {
            name: name.into(),
            shape,
            values,
        });
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    fn require(&self, name: &str) -> Result<&NamedTensor> {
        self.get(name)
            .ok_or_else(|| Error::invalid(format!("tensor {name:?} missing")))
    }

    fn scalar(&self, name: &str) -> Result<f64> {
        let t = self.require(name)?;
        match t.values.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::invalid(format!("tensor {name:?} is not a scalar"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(MAGIC);
        out.push('\n');
        for t in &self.tensors {
            let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            write!(out, "{}\t{}\t", t.name, shape.join("x")).unwrap();
            for (i, v) in t.values.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first == MAGIC => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected {MAGIC:?}"),
                })
            }
        }
        let mut file = TensorFile::default();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let mut parts = line.splitn(3, '\t');
            let name = parts.next().unwrap_or_default();
            let shape_raw = parts.next().ok_or_else(|| err("missing shape".into()))?;
            let values_raw = parts.next().unwrap_or_default();
            let shape = shape_raw
                .split('x')
                .map(|d| d.parse::<usize>().map_err(|_| err(format!("bad shape {shape_raw:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let values = values_raw
                .split(' ')
                .filter(|v| !v.is_empty())
                .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad value {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if shape.iter().product::<usize>() != values.len() {
                return Err(err(format!(
                    "shape {shape_raw} does not match {} values",
                    values.len()
                )));
            }
            file.push(name, shape, values);
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

impl ReprParams {
    pub fn write_tensors(&self, prefix: &str, file: &mut TensorFile) {
        file.push(format!("{prefix}.c_phi"), vec![1], vec![self.c_phi]);
        for (l, layer) in self.layers.iter().enumerate() {
            file.push(
                format!("{prefix}.layer{l}.weight"),
                vec![layer.in_dim, layer.out_dim],
                layer.weight.clone(),
            );
            file.push(format!("{prefix}.layer{l}.bias"), vec![layer.out_dim], layer.bias.clone());
        }
    }

    pub fn read_tensors(prefix: &str, file: &TensorFile) -> Result<Self> {
        let c_phi = file.scalar(&format!("{prefix}.c_phi"))?;
        let mut layers = Vec::new();
        while let Some(w) = file.get(&format!("{prefix}.layer{}.weight", layers.len())) {
            let b = file.require(&format!("{prefix}.layer{}.bias", layers.len()))?;
            let (in_dim, out_dim) = match w.shape.as_slice() {
                [i, o] if b.shape == [*o] => (*i, *o),
                _ => return Err(Error::invalid(format!("layer {} has inconsistent shapes", layers.len()))),
            };
            if let Some(prev) = layers.last() {
                let prev: &Dense = prev;
                if prev.out_dim != in_dim {
                    return Err(Error::invalid("consecutive layers do not chain"));
                }
            }
            layers.push(Dense {
                in_dim,
                out_dim,
                weight: w.values.clone(),
                bias: b.values.clone(),
            });
        }
        if layers.is_empty() {
            return Err(Error::invalid(format!("no layers under prefix {prefix:?}")));
        }
        Ok(Self { layers, c_phi })
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let mut file = TensorFile::default();
        self.write_tensors("repr", &mut file);
        file
    }
}

impl HeadParams {
    pub fn write_tensors(&self, prefix: &str, file: &mut TensorFile) {
        file.push(format!("{prefix}.c_f"), vec![1], vec![self.c_f]);
        file.push(
            format!("{prefix}.weight"),
            vec![self.num_actions, self.in_dim],
            self.weight.clone(),
        );
    }

    pub fn read_tensors(prefix: &str, file: &TensorFile) -> Result<Self> {
        let c_f = file.scalar(&format!("{prefix}.c_f"))?;
        let w = file.require(&format!("{prefix}.weight"))?;
        match w.shape.as_slice() {
            [a, d] => Ok(Self {
                num_actions: *a,
                in_dim: *d,
                weight: w.values.clone(),
                c_f,
            }),
            _ => Err(Error::invalid(format!("{prefix}.weight must be a matrix"))),
        }
    }
}

impl PolicyParams {
    pub fn to_tensor_file(&self) -> TensorFile {
        let mut file = TensorFile::default();
        self.repr.write_tensors("repr", &mut file);
        self.head.write_tensors("head", &mut file);
        file
    }

    pub fn from_tensor_file(file: &TensorFile) -> Result<Self> {
        Self::new(
            ReprParams::read_tensors("repr", file)?,
            HeadParams::read_tensors("head", file)?,
        )
    }
}
