//! Axis-aligned boxes and set-to-set distances between them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Nonempty axis-aligned box `[lower, upper]`; degenerate axes are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(domain("box bounds must be nonempty and of equal length"));
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(domain(format!("empty or unbounded box on axis {j}: [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn point(x: Vec<f64>) -> Result<Self> {
        Self::new(x.clone(), x)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Euclidean projection, axis by axis.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = x[j].clamp(self.lower[j], self.upper[j]);
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out);
        out
    }

    /// Clamps `x` in place; returns whether any coordinate moved.
    pub fn clamp_in_place(&self, x: &mut [f64]) -> bool {
        let mut moved = false;
        for (j, v) in x.iter_mut().enumerate() {
            let c = v.clamp(self.lower[j], self.upper[j]);
            if c != *v {
                *v = c;
                moved = true;
            }
        }
        moved
    }

    /// Restriction to the coordinates in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> BoxSet {
        BoxSet {
            lower: self.lower[range.clone()].to_vec(),
            upper: self.upper[range].to_vec(),
        }
    }

    pub fn translated(&self, shift: &[f64]) -> BoxSet {
        BoxSet {
            lower: self.lower.iter().zip(shift).map(|(l, s)| l + s).collect(),
            upper: self.upper.iter().zip(shift).map(|(u, s)| u + s).collect(),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance_to_point(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| {
                let g = (l - v).max(v - u).max(0.0);
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetDistanceMode {
    /// Infimum of point distances.
    Minimal,
    /// Pompeiu-Hausdorff distance.
    Hausdorff,
}

/// Distance between two boxes of equal dimension.
pub fn set_distance(a: &BoxSet, b: &BoxSet, mode: SetDistanceMode) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(crate::Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    let axes = 0..a.dim();
    let sq: f64 = match mode {
        SetDistanceMode::Minimal => axes
            .map(|j| {
                let g = (b.lower[j] - a.upper[j]).max(a.lower[j] - b.upper[j]).max(0.0);
                g * g
            })
            .sum(),
        SetDistanceMode::Hausdorff => {
            // the squared point-to-box distance is a sum over axes, so each
            // directed supremum separates axis by axis
            let directed = |p: &BoxSet, q: &BoxSet| -> f64 {
                (0..p.dim())
                    .map(|j| {
                        let g = (q.lower[j] - p.lower[j]).max(p.upper[j] - q.upper[j]).max(0.0);
                        g * g
                    })
                    .sum()
            };
            directed(a, b).max(directed(b, a))
        }
    };
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(l: f64, u: f64) -> BoxSet {
        BoxSet::new(vec![l], vec![u]).unwrap()
    }

    #[test]
    fn identical_boxes() {
        let a = BoxSet::new(vec![0.0, -1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(set_distance(&a, &a, SetDistanceMode::Minimal).unwrap(), 0.0);
        assert_eq!(set_distance(&a, &a, SetDistanceMode::Hausdorff).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_intervals() {
        let (a, b) = (interval(0.0, 1.0), interval(2.0, 3.0));
        assert_eq!(set_distance(&a, &b, SetDistanceMode::Minimal).unwrap(), 1.0);
        assert_eq!(set_distance(&a, &b, SetDistanceMode::Hausdorff).unwrap(), 2.0);
    }

    #[test]
    fn overlapping_intervals_match_brute_force() {
        let (a, b) = (interval(0.0, 2.0), interval(1.0, 3.0));
        assert_eq!(set_distance(&a, &b, SetDistanceMode::Minimal).unwrap(), 0.0);
        assert_eq!(set_distance(&a, &b, SetDistanceMode::Hausdorff).unwrap(), 1.0);
        // grid oracle for the directed sup-inf distances
        let grid = |l: f64, u: f64| (0..=2000).map(move |j| l + (u - l) * j as f64 / 2000.0);
        let directed = |p: (f64, f64), q: (f64, f64)| {
            grid(p.0, p.1)
                .map(|x| grid(q.0, q.1).map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        let h = directed((0.0, 2.0), (1.0, 3.0)).max(directed((1.0, 3.0), (0.0, 2.0)));
        assert!((h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_box() {
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxSet::new(vec![], vec![]).is_err());
    }

    #[test]
    fn translation_distance_is_shift_norm() {
        let a = BoxSet::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = a.translated(&[0.3, -0.4]);
        let h = set_distance(&a, &b, SetDistanceMode::Hausdorff).unwrap();
        assert!((h - 0.5).abs() < 1e-15);
        assert_eq!(set_distance(&a, &b, SetDistanceMode::Minimal).unwrap(), 0.0);
    }

    #[test]
    fn projection_and_distance() {
        let a = BoxSet::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(a.project(&[2.0, -1.0]), vec![1.0, 0.0]);
        assert!((a.distance_to_point(&[4.0, 5.0]) - 5.0).abs() < 1e-15);
        assert_eq!(a.diameter(), std::f64::consts::SQRT_2);
    }
}
