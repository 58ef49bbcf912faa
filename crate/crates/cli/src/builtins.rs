//! Named analytic test fields.
//!
//! `converge` and `point` accept a field either as a fine-grid CSV or as one
//! of these builtins, so the CLI needs no expression parser. Each entry is a
//! plain function of the coordinates; the box it lives on is chosen at the
//! command line and defaults to the unit cube of the right dimension.

use monoreg::{Cuboid, Regularity, ScalarField};

pub struct Builtin {
    pub name: &'static str,
    pub dim: usize,
    pub regularity: Regularity,
    /// One-line formula for help and error text.
    pub blurb: &'static str,
    eval: fn(&[f64]) -> f64,
}

impl Builtin {
    pub fn field(&self, domain: Cuboid) -> ScalarField {
        ScalarField::new(domain, self.regularity, self.eval)
    }

    pub fn default_domain(&self) -> Cuboid {
        Cuboid::unit(self.dim)
    }

    #[cfg(test)]
    fn at(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

fn paraboloid1d(x: &[f64]) -> f64 {
    let t = x[0] - 0.5;
    t * t
}

fn monotone_plane(x: &[f64]) -> f64 {
    x[0] + x[1]
}

fn saddle(x: &[f64]) -> f64 {
    let u = x[0] - 0.5;
    let v = x[1] - 0.5;
    u * u - v * v
}

// Step mixtures exercise the Bounded (not Continuous) code paths: cell
// averages stay exact arithmetic means and the sup-norm estimator must cope
// with jumps.

fn steps1d(x: &[f64]) -> f64 {
    let mut v = 0.0;
    if x[0] >= 0.25 {
        v += 1.0;
    }
    if x[0] >= 0.5 {
        v -= 0.75;
    }
    if x[0] >= 0.75 {
        v += 0.5;
    }
    v
}

fn steps2d(x: &[f64]) -> f64 {
    let mut v = 0.0;
    if x[0] >= 0.5 {
        v += 1.0;
    }
    if x[1] >= 0.5 {
        v += 0.5;
    }
    if x[0] >= 0.25 && x[1] >= 0.75 {
        v -= 0.75;
    }
    v
}

pub static BUILTINS: &[Builtin] = &[
    Builtin {
        name: "paraboloid1d",
        dim: 1,
        regularity: Regularity::Continuous,
        blurb: "(x - 0.5)^2",
        eval: paraboloid1d,
    },
    Builtin {
        name: "monotone-plane",
        dim: 2,
        regularity: Regularity::Continuous,
        blurb: "x + y",
        eval: monotone_plane,
    },
    Builtin {
        name: "saddle",
        dim: 2,
        regularity: Regularity::Continuous,
        blurb: "(x - 0.5)^2 - (y - 0.5)^2",
        eval: saddle,
    },
    Builtin {
        name: "steps1d",
        dim: 1,
        regularity: Regularity::Bounded,
        blurb: "step mixture 1[x>=1/4] - 0.75*1[x>=1/2] + 0.5*1[x>=3/4]",
        eval: steps1d,
    },
    Builtin {
        name: "steps2d",
        dim: 2,
        regularity: Regularity::Bounded,
        blurb: "step mixture 1[x>=1/2] + 0.5*1[y>=1/2] - 0.75*1[x>=1/4, y>=3/4]",
        eval: steps2d,
    },
];

pub fn lookup(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_finds_every_registered_name() {
        for b in BUILTINS {
            assert!(std::ptr::eq(lookup(b.name).unwrap(), b));
        }
        assert!(lookup("frobnicate").is_none());
    }

    #[test]
    fn formulas_match_their_blurbs() {
        let p = lookup("paraboloid1d").unwrap();
        assert!((p.at(&[0.9]) - 0.16).abs() < 1e-15);
        assert_eq!(p.at(&[0.5]), 0.0);

        let plane = lookup("monotone-plane").unwrap();
        assert_eq!(plane.at(&[0.2, 0.3]), 0.5);

        let s = lookup("saddle").unwrap();
        assert_eq!(s.at(&[0.0, 0.5]), 0.25);
        assert_eq!(s.at(&[0.5, 0.0]), -0.25);
        assert_eq!(s.at(&[0.25, 0.75]), 0.0);

        let st = lookup("steps1d").unwrap();
        assert_eq!(st.at(&[0.1]), 0.0);
        assert_eq!(st.at(&[0.3]), 1.0);
        assert_eq!(st.at(&[0.6]), 0.25);
        assert_eq!(st.at(&[0.9]), 0.75);

        let st2 = lookup("steps2d").unwrap();
        assert_eq!(st2.at(&[0.0, 0.0]), 0.0);
        assert_eq!(st2.at(&[0.6, 0.6]), 1.5);
        assert_eq!(st2.at(&[0.3, 0.8]), -0.25);
    }

    #[test]
    fn fields_evaluate_on_their_default_boxes() {
        for b in BUILTINS {
            let domain = b.default_domain();
            assert_eq!(domain.dim(), b.dim);
            let f = b.field(domain.clone());
            let mid: Vec<f64> = (0..b.dim).map(|_| 0.5).collect();
            assert!(f.eval(&mid).is_finite());
        }
    }
}
