use super::FeatureTensor;
use crate::error::{Error, Result};

/// Channel shuffle: view the channels as a `(g, C/g)` grid, transpose it and
/// flatten. Output channel `k` is input channel `(k % g)·(C/g) + k / g`.
pub fn channel_shuffle(x: &FeatureTensor, groups: usize) -> Result<FeatureTensor> {
    let c = x.channels();
    if groups == 0 || !c.is_multiple_of(groups) {
        return Err(Error::invalid(format!("{c} channels cannot be split into {groups} groups")));
    }
    let per_group = c / groups;
    let mut out = FeatureTensor::zeros(c, x.height(), x.width());
    for k in 0..c {
        let src = (k % groups) * per_group + k / groups;
        out.channel_mut(k).copy_from_slice(x.channel(src));
    }
    Ok(out)
}
