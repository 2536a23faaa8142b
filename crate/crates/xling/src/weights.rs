use std::collections::BTreeSet;
use std::path::Path;

use xling_core::acoustic::{ModelConfig, Weights};

use crate::error::{Context, Error, Result};
use crate::xlf::{self, Tensor};

/// One section per parameter, in visiting order.
pub fn to_tensors(w: &Weights) -> Vec<Tensor> {
    let mut out = Vec::new();
    w.for_each_param(|p| out.push(Tensor::new(p.name, p.shape, p.values.to_vec())));
    out
}

pub fn from_tensors(cfg: &ModelConfig, tensors: &[Tensor], origin: &Path) -> Result<Weights> {
    let mut w = Weights::zeroed(cfg).at(origin.display())?;
    let mut seen = BTreeSet::new();
    for t in tensors {
        if !seen.insert(t.name.as_str()) {
            return Err(Error::format(origin, format!("parameter {} appears twice", t.name)));
        }
        w.set_param(&t.name, &t.shape, &t.values).at(origin.display())?;
    }
    let mut missing = Vec::new();
    w.for_each_param(|p| {
        if !seen.contains(p.name.as_str()) {
            missing.push(p.name);
        }
    });
    if let Some(name) = missing.first() {
        return Err(Error::format(
            origin,
            format!("{} parameters missing, first is {name}", missing.len()),
        ));
    }
    Ok(w)
}

pub fn save(path: &Path, w: &Weights) -> Result<()> {
    xlf::write(path, &to_tensors(w))
}

pub fn load(path: &Path, cfg: &ModelConfig) -> Result<Weights> {
    from_tensors(cfg, &xlf::read(path)?, path)
}
