use crate::global_loc::Keypoint;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatch {
    pub global_kp: Keypoint,
    pub local_kp: Keypoint,
    pub score: f64,
}

pub fn descriptor_distance(a: &Keypoint, b: &Keypoint) -> f64 {
    a.descriptor.iter().zip(&b.descriptor).map(|(x, y)| (x - y).abs()).sum()
}

/// Matches each local keypoint to at most one global keypoint of the same
/// kind with similar average DF. With several candidates the best is kept
/// only if `ratio · best < second`.
pub fn match_features(
    local: &[Keypoint],
    global: &[Keypoint],
    avg_df_threshold: f64,
    ratio: f64,
) -> Vec<FeatureMatch> {
    let mut out = Vec::new();
    for l in local {
        let mut best: Option<(usize, f64)> = None;
        let mut second = f64::INFINITY;
        let mut n = 0;
        for (j, g) in global.iter().enumerate() {
            if g.kind != l.kind || (g.avg_df - l.avg_df).abs() > avg_df_threshold {
                continue;
            }
            n += 1;
            let s = descriptor_distance(l, g);
            match best {
                Some((_, b)) if s >= b => second = second.min(s),
                _ => {
                    if let Some((_, b)) = best {
                        second = second.min(b);
                    }
                    best = Some((j, s));
                }
            }
        }
        let Some((j, s)) = best else { continue };
        if n == 1 || ratio * s < second {
            out.push(FeatureMatch {
                global_kp: global[j].clone(),
                local_kp: l.clone(),
                score: s,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::global_loc::{KeypointKind, DESCRIPTOR_BINS};

    fn kp(kind: KeypointKind, avg: f64, hot: usize) -> Keypoint {
        let mut descriptor = [0.0; DESCRIPTOR_BINS];
        descriptor[hot] = 1.0;
        Keypoint {
            position: Point2::new(hot as f64, 0.0),
            kind,
            dominant_orientation: 0.0,
            avg_df: avg,
            descriptor,
        }
    }

    #[test]
    fn identical_sets_self_match() {
        let set = vec![
            kp(KeypointKind::Maxima, 1.0, 0),
            kp(KeypointKind::Maxima, 1.0, 5),
            kp(KeypointKind::Saddle, 0.5, 2),
        ];
        let m = match_features(&set, &set, 0.3, 1.25);
        assert_eq!(m.len(), 3);
        for x in &m {
            assert_eq!(x.score, 0.0);
            assert_eq!(x.global_kp, x.local_kp);
        }
    }

    #[test]
    fn kind_gate() {
        let l = vec![kp(KeypointKind::Maxima, 1.0, 0)];
        let g = vec![kp(KeypointKind::Minima, 1.0, 0)];
        assert!(match_features(&l, &g, 0.3, 1.25).is_empty());
    }

    #[test]
    fn avg_df_gate() {
        let l = vec![kp(KeypointKind::Maxima, 1.0, 0)];
        let g = vec![kp(KeypointKind::Maxima, 1.5, 0)];
        assert!(match_features(&l, &g, 0.3, 1.25).is_empty());
    }

    #[test]
    fn ambiguous_twins_fail_ratio_test() {
        let l = vec![kp(KeypointKind::Maxima, 1.0, 0)];
        let mut a = kp(KeypointKind::Maxima, 1.0, 0);
        a.descriptor[0] = 0.9;
        a.descriptor[1] = 0.1;
        let mut b = a.clone();
        b.descriptor[0] = 0.89;
        b.descriptor[2] = 0.11;
        b.descriptor[1] = 0.0;
        assert!(match_features(&l, &[a.clone(), b], 0.3, 1.25).is_empty());
        // a clearly worse second candidate passes
        assert_eq!(match_features(&l, &[a, kp(KeypointKind::Maxima, 1.0, 7)], 0.3, 1.25).len(), 1);
    }
}
