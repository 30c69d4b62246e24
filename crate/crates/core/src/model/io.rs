//! Model files are a single JSON object with the fields, in order,
//!
//! ```text
//! format, version, d_a, d_p, h_a, h_p, w_a, b_a, w_p, b_p, u, u0, v, v0
//! ```
//!
//! where `w_a` (`h_a x d_a`) and `w_p` (`h_p x d_p`) are flat row-major
//! arrays. Floats are written so that they read back bit-identical.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelDims, ModelParams};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "diffcoref-model";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    d_a: usize,
    d_p: usize,
    h_a: usize,
    h_p: usize,
    w_a: Vec<f64>,
    b_a: Vec<f64>,
    w_p: Vec<f64>,
    b_p: Vec<f64>,
    u: Vec<f64>,
    u0: f64,
    v: Vec<f64>,
    v0: f64,
}

pub fn write_model<W: Write>(params: &ModelParams, w: W) -> Result<()> {
    let d = params.dims();
    let file = ModelFile {
        format: FORMAT_TAG.into(),
        version: MODEL_FORMAT_VERSION,
        d_a: d.d_a,
        d_p: d.d_p,
        h_a: d.h_a,
        h_p: d.h_p,
        w_a: params.w_a().to_vec(),
        b_a: params.b_a().to_vec(),
        w_p: params.w_p().to_vec(),
        b_p: params.b_p().to_vec(),
        u: params.u().to_vec(),
        u0: params.u0(),
        v: params.v().to_vec(),
        v0: params.v0(),
    };
    let mut w = w;
    serde_json::to_writer(&mut w, &file).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<ModelParams> {
    let file: ModelFile =
        serde_json::from_reader(r).map_err(|e| Error::Format(format!("model file: {e}")))?;
    if file.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "model file: format tag {:?} is not {FORMAT_TAG:?}",
            file.format
        )));
    }
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model file: unsupported version {} (expected {MODEL_FORMAT_VERSION})",
            file.version
        )));
    }
    let dims = ModelDims {
        d_a: file.d_a,
        d_p: file.d_p,
        h_a: file.h_a,
        h_p: file.h_p,
    };
    let expected = [
        ("w_a", file.w_a.len(), dims.h_a * dims.d_a),
        ("b_a", file.b_a.len(), dims.h_a),
        ("w_p", file.w_p.len(), dims.h_p * dims.d_p),
        ("b_p", file.b_p.len(), dims.h_p),
        ("u", file.u.len(), dims.h_a + dims.h_p),
        ("v", file.v.len(), dims.h_a),
    ];
    for (name, got, want) in expected {
        if got != want {
            return Err(Error::Shape(format!(
                "model file: {name} has {got} entries, expected {want}"
            )));
        }
    }
    let mut data = Vec::with_capacity(dims.num_params());
    data.extend(file.w_a);
    data.extend(file.b_a);
    data.extend(file.w_p);
    data.extend(file.b_p);
    data.extend(file.u);
    data.push(file.u0);
    data.extend(file.v);
    data.push(file.v0);
    let params = ModelParams::from_flat(dims, data)?;
    if !params.is_finite() {
        return Err(Error::Format("model file: non-finite parameter".into()));
    }
    Ok(params)
}

pub fn save_model(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    write_model(params, BufWriter::new(fs::File::create(path)?))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    read_model(BufReader::new(fs::File::open(path)?))
}
