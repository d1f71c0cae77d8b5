use super::FeatureTensor;
use crate::kernels::sobel;

/// Edge-enhanced feature map `F_e = x + x⋆G_x + x⋆G_y`, with the 3×3 Sobel
/// pair applied per channel under replicate padding.
pub fn sobel_edge_fuse(x: &FeatureTensor) -> FeatureTensor {
    let (c, h, w) = x.shape();
    let mut out = x.clone();
    for ch in 0..c {
        let (gx, gy) = sobel(x.channel(ch), h, w);
        for ((o, a), b) in out.channel_mut(ch).iter_mut().zip(&gx).zip(&gy) {
            *o += a + b;
        }
    }
    out
}
