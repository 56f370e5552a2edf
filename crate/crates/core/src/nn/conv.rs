//! Direct (im2col-free) grouped 2-D convolution, stride 1.
//!
//! Every inner loop runs along the contiguous time axis.

use super::layer::ConvSpec;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub groups: usize,
    pub pt: usize,
    pub pl: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(spec: &ConvSpec, n: usize, h: usize, w: usize) -> Self {
        let (pt, pb, pl, pr) = spec.pads();
        Self {
            n,
            cin: spec.in_channels,
            h,
            w,
            cout: spec.out_channels,
            kh: spec.kernel.0,
            kw: spec.kernel.1,
            groups: spec.groups,
            pt,
            pl,
            oh: h + pt + pb - spec.kernel.0 + 1,
            ow: w + pl + pr - spec.kernel.1 + 1,
        }
    }

    /// Output rows touched by kernel row `ky`.
    #[inline]
    fn oy_range(&self, ky: usize) -> std::ops::Range<usize> {
        let lo = self.pt.saturating_sub(ky);
        let hi = (self.h + self.pt).saturating_sub(ky).min(self.oh);
        lo..hi.max(lo)
    }

    /// Output columns touched by kernel column `kx`, plus the first input column.
    #[inline]
    fn ox_range(&self, kx: usize) -> (std::ops::Range<usize>, usize) {
        let lo = self.pl.saturating_sub(kx);
        let hi = (self.w + self.pl).saturating_sub(kx).min(self.ow);
        let hi = hi.max(lo);
        (lo..hi, lo + kx - self.pl)
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..n {
        s += a[j] * b[j];
    }
    s
}

pub(crate) fn forward(g: &ConvGeom, input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let cin_g = g.cin / g.groups;
    let cout_g = g.cout / g.groups;
    let (in_plane, out_plane) = (g.h * g.w, g.oh * g.ow);
    for b in 0..g.n {
        for oc in 0..g.cout {
            let grp = oc / cout_g;
            let o = &mut out[(b * g.cout + oc) * out_plane..][..out_plane];
            o.fill(bias.get(oc).copied().unwrap_or(0.0));
            for icg in 0..cin_g {
                let ic = grp * cin_g + icg;
                let x = &input[(b * g.cin + ic) * in_plane..][..in_plane];
                let wk = &weight[(oc * cin_g + icg) * g.kh * g.kw..][..g.kh * g.kw];
                for ky in 0..g.kh {
                    for oy in g.oy_range(ky) {
                        let iy = oy + ky - g.pt;
                        let x_row = &x[iy * g.w..(iy + 1) * g.w];
                        let o_row = &mut o[oy * g.ow..(oy + 1) * g.ow];
                        for kx in 0..g.kw {
                            let (ox, ix) = g.ox_range(kx);
                            let len = ox.len();
                            axpy(wk[ky * g.kw + kx], &x_row[ix..ix + len], &mut o_row[ox]);
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight/bias gradients and, when `din` is given, the input
/// gradient (which must be zeroed by the caller).
pub(crate) fn backward(
    g: &ConvGeom,
    input: &[f64],
    weight: &[f64],
    dout: &[f64],
    mut din: Option<&mut [f64]>,
    dweight: &mut [f64],
    dbias: &mut [f64],
) {
    let cin_g = g.cin / g.groups;
    let cout_g = g.cout / g.groups;
    let (in_plane, out_plane) = (g.h * g.w, g.oh * g.ow);
    for b in 0..g.n {
        for oc in 0..g.cout {
            let grp = oc / cout_g;
            let d = &dout[(b * g.cout + oc) * out_plane..][..out_plane];
            if let Some(db) = dbias.get_mut(oc) {
                *db += d.iter().sum::<f64>();
            }
            for icg in 0..cin_g {
                let ic = grp * cin_g + icg;
                let x = &input[(b * g.cin + ic) * in_plane..][..in_plane];
                let base = (oc * cin_g + icg) * g.kh * g.kw;
                for ky in 0..g.kh {
                    for oy in g.oy_range(ky) {
                        let iy = oy + ky - g.pt;
                        let d_row = &d[oy * g.ow..(oy + 1) * g.ow];
                        let x_row = &x[iy * g.w..(iy + 1) * g.w];
                        for kx in 0..g.kw {
                            let (ox, ix) = g.ox_range(kx);
                            let len = ox.len();
                            dweight[base + ky * g.kw + kx] +=
                                dot(&d_row[ox.clone()], &x_row[ix..ix + len]);
                        }
                        if let Some(din) = din.as_deref_mut() {
                            let di = &mut din[(b * g.cin + ic) * in_plane..][..in_plane];
                            let di_row = &mut di[iy * g.w..(iy + 1) * g.w];
                            for kx in 0..g.kw {
                                let (ox, ix) = g.ox_range(kx);
                                let len = ox.len();
                                axpy(weight[base + ky * g.kw + kx], &d_row[ox], &mut di_row[ix..ix + len]);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Padding;

    /// Textbook six-loop convolution with explicit zero padding.
    fn reference(spec: &ConvSpec, n: usize, h: usize, w: usize, x: &[f64], wt: &[f64]) -> Vec<f64> {
        let g = ConvGeom::new(spec, n, h, w);
        let (cin_g, cout_g) = (g.cin / g.groups, g.cout / g.groups);
        let mut out = vec![0.0; n * g.cout * g.oh * g.ow];
        for b in 0..n {
            for oc in 0..g.cout {
                for oy in 0..g.oh {
                    for ox in 0..g.ow {
                        let mut s = 0.0;
                        for icg in 0..cin_g {
                            let ic = (oc / cout_g) * cin_g + icg;
                            for ky in 0..g.kh {
                                for kx in 0..g.kw {
                                    let iy = oy as i64 + ky as i64 - g.pt as i64;
                                    let ix = ox as i64 + kx as i64 - g.pl as i64;
                                    if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                        continue;
                                    }
                                    s += wt[((oc * cin_g + icg) * g.kh + ky) * g.kw + kx]
                                        * x[((b * g.cin + ic) * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                        out[((b * g.cout + oc) * g.oh + oy) * g.ow + ox] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_reference_with_groups_and_padding() {
        for (groups, padding, kernel) in [
            (1, Padding::Valid, (2, 3)),
            (2, Padding::Valid, (3, 1)),
            (2, Padding::Same, (1, 4)),
            (1, Padding::Same, (3, 5)),
        ] {
            let spec = ConvSpec {
                in_channels: 4,
                out_channels: 6,
                kernel,
                groups,
                bias: false,
                padding,
            };
            let (n, h, w) = (2, 3, 7);
            let x: Vec<f64> = (0..n * 4 * h * w).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
            let wt: Vec<f64> = (0..6 * 4 / groups * kernel.0 * kernel.1)
                .map(|i| ((i * 13 % 7) as f64) * 0.25 - 0.5)
                .collect();
            let g = ConvGeom::new(&spec, n, h, w);
            let mut out = vec![0.0; n * 6 * g.oh * g.ow];
            forward(&g, &x, &wt, &[], &mut out);
            assert_eq!(out, reference(&spec, n, h, w, &x, &wt));
        }
    }
}
