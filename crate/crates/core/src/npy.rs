//! NPY (format version 1.0) input and output for tensors.
//!
//! A [`ComplexTensor`] is stored as two files sharing a stem, `<stem>.re.npy`
//! and `<stem>.im.npy`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use npyz::WriterBuilder;

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Real, Tensor};

pub fn write_npy<T: Real, W: Write>(tensor: &Tensor<T>, out: W) -> std::io::Result<()> {
    let shape: Vec<u64> = tensor.shape().iter().map(|&n| n as u64).collect();
    let mut w = npyz::WriteOptions::new()
        .default_dtype()
        .shape(&shape)
        .writer(out)
        .begin_nd()?;
    w.extend(tensor.data().iter().copied())?;
    w.finish()
}

/// Reads a little-endian, C-ordered NPY array of `f32` or `f64` values,
/// converting to `T`.
pub fn read_npy<T: Real, R: Read>(input: R, origin: &Path) -> Result<Tensor<T>> {
    let npy = npyz::NpyFile::new(input).map_err(|e| Error::io(origin, e))?;
    if npy.order() != npyz::Order::C {
        return Err(Error::format(
            origin,
            "fortran-ordered arrays are not supported",
        ));
    }
    let shape: Vec<usize> = npy.shape().iter().map(|&n| n as usize).collect();
    let descr = match npy.dtype() {
        npyz::DType::Plain(ts) => ts.to_string(),
        other => {
            return Err(Error::format(
                origin,
                format!("unsupported dtype {other:?}"),
            ))
        }
    };
    let data: Vec<T> = match descr.as_str() {
        "<f8" => npy
            .into_vec::<f64>()
            .map_err(|e| Error::io(origin, e))?
            .into_iter()
            .map(T::cst)
            .collect(),
        "<f4" => npy
            .into_vec::<f32>()
            .map_err(|e| Error::io(origin, e))?
            .into_iter()
            .map(|v| T::cst(v as f64))
            .collect(),
        _ => return Err(Error::format(origin, format!("unsupported dtype {descr}"))),
    };
    Tensor::new(&shape, data).map_err(|e| Error::format(origin, e.to_string()))
}

pub fn save<T: Real>(tensor: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_npy(tensor, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_npy(BufReader::new(file), path)
}

fn plane_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let name = stem
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    (
        stem.with_file_name(format!("{name}.re.npy")),
        stem.with_file_name(format!("{name}.im.npy")),
    )
}

/// Writes `<stem>.re.npy` and `<stem>.im.npy`.
pub fn save_complex<T: Real>(tensor: &ComplexTensor<T>, stem: impl AsRef<Path>) -> Result<()> {
    let (re, im) = plane_paths(stem.as_ref());
    save(&tensor.re, re)?;
    save(&tensor.im, im)
}

pub fn load_complex<T: Real>(stem: impl AsRef<Path>) -> Result<ComplexTensor<T>> {
    let (re, im) = plane_paths(stem.as_ref());
    let t = ComplexTensor::new(load(&re)?, load(&im)?);
    t.map_err(|e| Error::format(re, e.to_string()))
}
