use super::{PointCloud, SpatialIndex};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

const IDW_EPS: f64 = 1e-8;
const IDW_NEIGHBORS: usize = 3;

/// Upsample features onto `dst_pts` by inverse-distance weighting of the
/// three nearest source rows (`w = 1 / (d + 1e-8)`). A destination point that
/// coincides with a source point copies that row.
pub fn interpolate_features(
    src_pts: &PointCloud,
    src_feats: &FeatureMatrix,
    dst_pts: &PointCloud,
) -> Result<FeatureMatrix> {
    let index = SpatialIndex::build(src_pts);
    interpolate_with_index(&index, src_feats, dst_pts)
}

pub(crate) fn interpolate_with_index(
    index: &SpatialIndex,
    src_feats: &FeatureMatrix,
    dst_pts: &PointCloud,
) -> Result<FeatureMatrix> {
    if index.is_empty() {
        return Err(Error::Empty("interpolation source"));
    }
    if index.len() != src_feats.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} source points but {} feature rows",
            index.len(),
            src_feats.rows()
        )));
    }
    let dims = src_feats.dims();
    let mut out = FeatureMatrix::zeros(dst_pts.len(), dims);
    for (i, p) in dst_pts.iter().enumerate() {
        let nn = index.knn(p, IDW_NEIGHBORS)?;
        let row = out.row_mut(i);
        if nn[0].1 == 0.0 {
            row.copy_from_slice(src_feats.row(nn[0].0));
            continue;
        }
        let mut total = 0.0;
        for &(j, d) in &nn {
            let w = 1.0 / (d + IDW_EPS);
            total += w;
            for (o, v) in row.iter_mut().zip(src_feats.row(j)) {
                *o += w * v;
            }
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}
