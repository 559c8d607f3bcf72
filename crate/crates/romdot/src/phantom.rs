//! Piecewise-constant absorption images rasterized directly on the grid.
//!
//! They are deliberately not members of the level-set family, so a
//! reconstruction can only approximate them.

#[derive(Debug, Clone, PartialEq)]
pub enum Phantom {
    Disk { center: [f64; 2], radius: f64 },
    /// Ring between `inner` and `outer`.
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    /// Union of disks `(center, radius)`.
    Blobs(Vec<([f64; 2], f64)>),
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Phantom {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Phantom::Disk { radius, .. } if !(*radius > 0.0) => Err("phantom.radius must be positive".into()),
            Phantom::Annulus { inner, outer, .. } if !(*inner >= 0.0 && outer > inner) => {
                Err("annulus needs 0 ≤ phantom.inner_radius < phantom.radius".into())
            }
            Phantom::Blobs(b) if b.is_empty() => Err("phantom.blobs is empty".into()),
            Phantom::Blobs(b) if b.iter().any(|(_, r)| !(*r > 0.0)) => Err("blob radii must be positive".into()),
            _ => Ok(()),
        }
    }

    pub fn inside(&self, x: [f64; 2]) -> bool {
        match self {
            Phantom::Disk { center, radius } => dist(x, *center) < *radius,
            Phantom::Annulus { center, inner, outer } => {
                let d = dist(x, *center);
                d >= *inner && d < *outer
            }
            Phantom::Blobs(b) => b.iter().any(|(c, r)| dist(x, *c) < *r),
        }
    }

    /// Physical absorption at each point.
    pub fn rasterize(&self, points: &[[f64; 2]], mu_in: f64, mu_out: f64) -> Vec<f64> {
        points
            .iter()
            .map(|&x| if self.inside(x) { mu_in } else { mu_out })
            .collect()
    }
}
