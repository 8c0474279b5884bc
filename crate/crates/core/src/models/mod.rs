//! The built-in example systems and a name-based catalog with parameter overrides.

mod fhn;
mod lindemann;
mod linear;
mod reciprocal;
mod toy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use fhn::FitzHughNagumo;
pub use lindemann::{Lindemann, LindemannCanonical};
pub use linear::LinearBvp;
pub use reciprocal::{ReciprocalInhibition, HORIZON, Q_END, Q_START, V_END, V_START};
pub use toy::Toy;

use crate::error::{Error, Result};
use crate::system::SlowFastSystem;

/// Flat name -> number parameter map, as read from `--params FILE.json`.
pub type Params = BTreeMap<String, f64>;

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Reported in the literature for this model.
    Published,
    /// Computed independently in this repository's tests.
    Derived,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnownValue {
    pub name: &'static str,
    pub value: f64,
    pub provenance: Provenance,
}

pub struct ModelCatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub default_params: Params,
    pub known_values: Vec<KnownValue>,
    pub builder: fn(&Params) -> Result<Box<dyn SlowFastSystem>>,
}

fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn known(name: &'static str, value: f64) -> KnownValue {
    KnownValue { name, value, provenance: Provenance::Published }
}

pub fn catalog() -> Vec<ModelCatalogEntry> {
    vec![
        ModelCatalogEntry {
            name: "toy",
            description: "two slow, two fast variables with a saddle-type slow manifold",
            default_params: params(&[("eps", 1e-3)]),
            known_values: vec![known("x1(0)", -0.5), known("x2(0)", -0.7)],
            builder: |p| Ok(Box::new(Toy::new(p["eps"]))),
        },
        ModelCatalogEntry {
            name: "linear-bvp",
            description: "eps u'' + u' = 1 in first-order form (x, y) = (u, u')",
            default_params: params(&[("eps", 0.1)]),
            known_values: vec![known("eta", 1.0)],
            builder: |p| Ok(Box::new(LinearBvp::new(p["eps"]))),
        },
        ModelCatalogEntry {
            name: "reciprocal-inhibition",
            description: "pair of neurons coupled by reciprocal inhibition",
            default_params: params(&[
                ("eps", 1e-3),
                ("omega", 0.03),
                ("gamma", 10.0),
                ("r", -4.0),
                ("theta", 0.01333),
                ("a", 1.0),
                ("s", 1.0),
                ("sigma1", 3.0),
                ("sigma2", 1.2652372051),
            ]),
            known_values: vec![
                known("q1(0)", Q_START[0]),
                known("q2(0)", Q_START[1]),
                known("v1(0)", V_START[0]),
                known("v2(0)", V_START[1]),
                known("q1(T)", Q_END[0]),
                known("q2(T)", Q_END[1]),
                known("v1(T)", V_END[0]),
                known("v2(T)", V_END[1]),
                known("v1(T) exit pin as printed", -0.025410414452),
                known("T", HORIZON),
            ],
            builder: |p| Ok(Box::new(reciprocal_from(p))),
        },
        ModelCatalogEntry {
            name: "fhn",
            description: "FitzHugh-Nagumo traveling-wave system",
            default_params: params(&[
                ("eps", 1e-3),
                ("a", 0.1),
                ("d", 5.0),
                ("p", 0.0),
                ("c", 1.2462875),
                ("gamma", 1.0),
            ]),
            known_values: vec![
                known("c_star", 1.2462875),
                known("z_lm.x", -0.0024),
                known("z_lm.y1", 0.049),
                known("z_mr.x", 0.13),
                known("z_mr.y1", 0.68),
            ],
            builder: |p| Ok(Box::new(fhn_from(p)?)),
        },
        ModelCatalogEntry {
            name: "lindemann",
            description: "Lindemann mechanism in the original (x, y) chart",
            default_params: params(&[("eps", 0.1)]),
            known_values: vec![],
            builder: |p| Ok(Box::new(Lindemann::new(p["eps"]))),
        },
        ModelCatalogEntry {
            name: "lindemann-wz",
            description: "Lindemann mechanism in canonical coordinates (w, z) = (x + y, 2y)",
            default_params: params(&[("eps", 0.1)]),
            known_values: vec![],
            builder: |p| Ok(Box::new(LindemannCanonical::new(p["eps"]))),
        },
    ]
}

/// Reciprocal inhibition from a complete parameter map of that model.
pub fn reciprocal_from(p: &Params) -> ReciprocalInhibition {
    ReciprocalInhibition {
        epsilon: p["eps"],
        omega: p["omega"],
        gamma: p["gamma"],
        r: p["r"],
        theta: p["theta"],
        a: p["a"],
        s: p["s"],
        sigma1: p["sigma1"],
        sigma2: p["sigma2"],
    }
}

/// FitzHugh-Nagumo from a complete parameter map; the wave speed must be nonzero.
pub fn fhn_from(p: &Params) -> Result<FitzHughNagumo> {
    if p["c"] == 0.0 {
        return Err(Error::BadParams("wave speed c must be nonzero".into()));
    }
    Ok(FitzHughNagumo { epsilon: p["eps"], a: p["a"], d: p["d"], p: p["p"], c: p["c"], gamma: p["gamma"] })
}

pub fn entry(name: &str) -> Result<ModelCatalogEntry> {
    catalog().into_iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownModel(name.to_string()))
}

/// Defaults of `name` with `overrides` applied; unknown keys are rejected.
pub fn resolve_params(name: &str, overrides: &Params) -> Result<Params> {
    let e = entry(name)?;
    let mut p = e.default_params.clone();
    for (k, v) in overrides {
        if !p.contains_key(k) {
            return Err(Error::BadParams(format!("model `{name}` has no parameter `{k}`")));
        }
        if !v.is_finite() {
            return Err(Error::BadParams(format!("parameter `{k}` must be finite")));
        }
        p.insert(k.clone(), *v);
    }
    if !(p["eps"] > 0.0) {
        return Err(Error::BadParams("eps must be positive".into()));
    }
    Ok(p)
}

pub fn build(name: &str, overrides: &Params) -> Result<Box<dyn SlowFastSystem>> {
    let p = resolve_params(name, overrides)?;
    (entry(name)?.builder)(&p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dvector, DVector};

    use crate::system::{validate_jacobians, State};

    #[test]
    fn reciprocal_defaults_round_trip() {
        let p = resolve_params("reciprocal-inhibition", &Params::new()).unwrap();
        let sys = reciprocal_from(&p);
        let d = ReciprocalInhibition::new(1e-3);
        assert_eq!((sys.omega, sys.gamma, sys.r, sys.theta), (d.omega, d.gamma, d.r, d.theta));
        assert_eq!((sys.a, sys.s, sys.sigma1, sys.sigma2), (d.a, d.s, d.sigma1, d.sigma2));
        assert_abs_diff_eq!(sys.sigmoid(sys.theta), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn overrides_are_checked() {
        let mut o = Params::new();
        o.insert("gamma".into(), 2.0);
        assert_eq!(resolve_params("reciprocal-inhibition", &o).unwrap()["gamma"], 2.0);
        o.insert("bogus".into(), 1.0);
        assert!(resolve_params("reciprocal-inhibition", &o).is_err());
        assert!(matches!(build("nope", &Params::new()), Err(Error::UnknownModel(_))));
        let mut c = Params::new();
        c.insert("c".into(), 0.0);
        assert!(build("fhn", &c).is_err());
    }

    #[test]
    fn fhn_folds_near_listed_corners() {
        let sys = FitzHughNagumo::new(1e-3, 1.25);
        let disc = ((1.0 + sys.a).powi(2) - 3.0 * sys.a).sqrt();
        // on the critical manifold y2 = 0 and x = f_a(y1); folds where f_a' vanishes
        for (y, x_listed, y_listed) in [((1.0 + sys.a + disc) / 3.0, 0.13, 0.68), ((1.0 + sys.a - disc) / 3.0, -0.0024, 0.049)] {
            assert_abs_diff_eq!(sys.cubic_prime(y), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(sys.cubic(y), x_listed, epsilon = 5e-3);
            assert_abs_diff_eq!(y, y_listed, epsilon = 5e-3);
        }
    }

    #[test]
    fn lindemann_origin_eigenvalues() {
        let sys = Lindemann::new(0.1);
        let j = sys.full_jacobian(&dvector![0.0, 0.0]);
        let mut ev: Vec<f64> = j.complex_eigenvalues().iter().map(|c| c.re).collect();
        ev.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ev[0], -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lindemann_charts_agree() {
        let (orig, canon) = (Lindemann::new(0.2), LindemannCanonical::new(0.2));
        for (x, y) in [(1.0, 0.3), (0.4, 0.9), (-0.2, 0.1)] {
            let f = orig.full_field(&dvector![x, y]);
            let (w, z) = LindemannCanonical::from_original(x, y);
            let g = canon.full_field(&dvector![w, z]);
            assert_abs_diff_eq!(g[0], f[0] + f[1], epsilon = 1e-14);
            assert_abs_diff_eq!(g[1], 2.0 * f[1], epsilon = 1e-14);
            let back = LindemannCanonical::to_original(w, z);
            assert_abs_diff_eq!(back.0, x, epsilon = 1e-15);
            assert_abs_diff_eq!(back.1, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn catalog_jacobians_match_differences() {
        for e in catalog() {
            let sys = build(e.name, &Params::new()).unwrap();
            let probes: Vec<State> = [0.3, -0.6, 0.9]
                .iter()
                .map(|s| {
                    let x = DVector::from_fn(sys.n_slow(), |i, _| s + 0.1 * i as f64);
                    let y = DVector::from_fn(sys.n_fast(), |i, _| 0.5 - s * (i + 1) as f64);
                    State::new(x, y)
                })
                .collect();
            let worst = validate_jacobians(sys.as_ref(), &probes, 1e-6).worst();
            assert!(worst < 1e-6, "{}: {worst:e}", e.name);
        }
    }
}
