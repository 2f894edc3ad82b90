// SPDX-License-Identifier: Apache-2.0

/// NLDM table indexed by input slew (rows, ns) and output load (columns, fF).
#[derive(Clone, Debug, PartialEq)]
pub struct LookupTable2D {
    pub slew_axis: Vec<f64>,
    pub load_axis: Vec<f64>,
    /// Row-major: `values[i * load_axis.len() + j]` is at (slew_axis[i], load_axis[j]).
    pub values: Vec<f64>,
}

impl LookupTable2D {
    pub fn scalar(v: f64) -> Self {
        LookupTable2D {
            slew_axis: vec![0.0],
            load_axis: vec![0.0],
            values: vec![v],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.load_axis.len() + j]
    }

    /// Bilinear interpolation, clamped to the table edges.
    pub fn lookup(&self, slew: f64, load: f64) -> f64 {
        let (i0, i1, ti) = bracket(&self.slew_axis, slew);
        let (j0, j1, tj) = bracket(&self.load_axis, load);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let lo = lerp(self.at(i0, j0), self.at(i0, j1), tj);
        let hi = lerp(self.at(i1, j0), self.at(i1, j1), tj);
        lerp(lo, hi, ti)
    }

    /// Element-wise maximum with `other`, resampling `other` onto this
    /// table's grid when the axes differ.
    pub fn max_with(&self, other: &LookupTable2D) -> LookupTable2D {
        let mut values = Vec::with_capacity(self.values.len());
        for (i, &s) in self.slew_axis.iter().enumerate() {
            for (j, &l) in self.load_axis.iter().enumerate() {
                let theirs = if self.slew_axis == other.slew_axis && self.load_axis == other.load_axis {
                    other.at(i, j)
                } else {
                    other.lookup(s, l)
                };
                values.push(self.at(i, j).max(theirs));
            }
        }
        LookupTable2D {
            slew_axis: self.slew_axis.clone(),
            load_axis: self.load_axis.clone(),
            values,
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Lower/upper grid indices around `x` and the interpolation weight.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= x).min(n - 1);
    let lo = hi - 1;
    (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corners() -> LookupTable2D {
        LookupTable2D {
            slew_axis: vec![0.01, 0.1],
            load_axis: vec![1.0, 10.0],
            values: vec![1.0, 2.0, 3.0, 4.0],
        }
    }

    #[test]
    fn midpoint_and_grid_points() {
        let t = corners();
        assert!((t.lookup(0.055, 5.5) - 2.5).abs() < 1e-12);
        assert_eq!(t.lookup(0.1, 1.0), 3.0);
        assert_eq!(t.lookup(0.01, 10.0), 2.0);
    }

    #[test]
    fn clamps_outside_range() {
        let t = corners();
        // load beyond max reduces to 1-D interpolation along slew on the last column
        let v = t.lookup(0.04, 50.0);
        let expect = 2.0 + (4.0 - 2.0) * (0.04 - 0.01) / (0.1 - 0.01);
        assert!((v - expect).abs() < 1e-12);
        assert_eq!(t.lookup(-1.0, -1.0), 1.0);
        assert_eq!(t.lookup(9.0, 99.0), 4.0);
    }

    #[test]
    fn scalar_table() {
        let t = LookupTable2D::scalar(0.07);
        assert_eq!(t.lookup(0.3, 12.0), 0.07);
    }

    fn monotone_table() -> impl Strategy<Value = LookupTable2D> {
        (1usize..5, 1usize..5).prop_flat_map(|(ns, nl)| {
            (
                prop::collection::vec(0.001f64..1.0, ns),
                prop::collection::vec(0.01f64..5.0, nl),
                prop::collection::vec(0.0f64..0.2, ns * nl),
            )
                .prop_map(move |(ds, dl, incs)| {
                    let slew_axis: Vec<f64> = ds.iter().scan(0.0, |a, d| { *a += d; Some(*a) }).collect();
                    let load_axis: Vec<f64> = dl.iter().scan(0.0, |a, d| { *a += d; Some(*a) }).collect();
                    // v[i][j] = sum of increments over the (i, j) prefix rectangle: monotone on both axes
                    let mut values = vec![0.0f64; ns * nl];
                    for i in 0..ns {
                        for j in 0..nl {
                            let up = if i > 0 { values[(i - 1) * nl + j] } else { 0.0 };
                            let left = if j > 0 { values[i * nl + j - 1] } else { 0.0 };
                            values[i * nl + j] = up.max(left) + incs[i * nl + j];
                        }
                    }
                    LookupTable2D { slew_axis, load_axis, values }
                })
        })
    }

    proptest! {
        #[test]
        fn interpolation_is_monotone(t in monotone_table(), s in 0.0f64..5.0, l in 0.0f64..25.0,
                                     ds in 0.0f64..1.0, dl in 0.0f64..5.0) {
            let base = t.lookup(s, l);
            prop_assert!(t.lookup(s + ds, l) >= base - 1e-12);
            prop_assert!(t.lookup(s, l + dl) >= base - 1e-12);
        }

        #[test]
        fn beyond_extremes_equals_extremes(t in monotone_table(), s in 0.0f64..5.0, l in 0.0f64..25.0) {
            let smax = *t.slew_axis.last().unwrap();
            let lmax = *t.load_axis.last().unwrap();
            prop_assert_eq!(t.lookup(smax + s, l), t.lookup(smax, l));
            prop_assert_eq!(t.lookup(s, lmax + l), t.lookup(s, lmax));
            prop_assert_eq!(t.lookup(-s, l), t.lookup(t.slew_axis[0], l));
        }
    }
}
