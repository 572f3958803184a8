use serde::{Deserialize, Serialize};

use super::stencil::Stencil;
use super::tables::*;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Level-1 biorthogonal filters (odd length, linear phase).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiorthogonalFilters {
    pub name: String,
    /// analysis lowpass
    pub h0o: Vec<f64>,
    /// analysis highpass
    pub h1o: Vec<f64>,
    /// synthesis lowpass
    pub g0o: Vec<f64>,
    /// synthesis highpass
    pub g1o: Vec<f64>,
}

/// Quarter-sample-shift filters for levels two and up (even length).
///
/// Tree `b` filters are the time reverse of tree `a` filters, and each
/// synthesis filter is the time reverse of its analysis filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QshiftFilters {
    pub name: String,
    pub h0a: Vec<f64>,
    pub h0b: Vec<f64>,
    pub h1a: Vec<f64>,
    pub h1b: Vec<f64>,
    pub g0a: Vec<f64>,
    pub g0b: Vec<f64>,
    pub g1a: Vec<f64>,
    pub g1b: Vec<f64>,
}

/// Complete coefficient set for a 2-D dual-tree transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSet {
    /// Canonical `"<level1>+<qshift>"` name.
    pub name: String,
    pub level1: BiorthogonalFilters,
    pub qshift: QshiftFilters,
}

pub const DEFAULT_LEVEL1: &str = "near_sym_a";
pub const DEFAULT_QSHIFT: &str = "qshift_a";
pub const LEVEL1_NAMES: &[&str] = &["near_sym_a", "near_sym_b", "legall"];
pub const QSHIFT_NAMES: &[&str] = &["qshift_06", "qshift_a", "qshift_b", "qshift_c"];

/// Largest reconstruction error tolerated by load-time validation.
pub const STAGE_PR_TOLERANCE: f64 = 1e-10;

fn reversed(h: &[f64]) -> Vec<f64> {
    h.iter().rev().copied().collect()
}

impl BiorthogonalFilters {
    pub fn named(name: &str) -> Result<Self> {
        let (h0o, g0o, h1o, g1o): (&[f64], &[f64], &[f64], &[f64]) = match name {
            "near_sym_a" => (
                &NEAR_SYM_A_H0O,
                &NEAR_SYM_A_G0O,
                &NEAR_SYM_A_H1O,
                &NEAR_SYM_A_G1O,
            ),
            "near_sym_b" => (
                &NEAR_SYM_B_H0O,
                &NEAR_SYM_B_G0O,
                &NEAR_SYM_B_H1O,
                &NEAR_SYM_B_G1O,
            ),
            "legall" => (&LEGALL_H0O, &LEGALL_G0O, &LEGALL_H1O, &LEGALL_G1O),
            _ => {
                return Err(Error::config(format!(
                    "unknown level-1 filter set '{name}'"
                )))
            }
        };
        Ok(Self {
            name: name.to_owned(),
            h0o: h0o.to_vec(),
            h1o: h1o.to_vec(),
            g0o: g0o.to_vec(),
            g1o: g1o.to_vec(),
        })
    }

    /// Worst reconstruction error of one analysis + synthesis stage, both
    /// trees, on a seeded length-64 signal.
    pub fn stage_reconstruction_error(&self) -> f64 {
        let n = 64;
        let x: Vec<f64> = {
            let mut rng = SeededRng::new(0x5eed);
            (0..n).map(|_| rng.normal()).collect()
        };
        let mut y = vec![0.0; n];
        for (h, g) in [(&self.h0o, &self.g0o), (&self.h1o, &self.g1o)] {
            for phase in 0..2 {
                let tree = Stencil::<f64>::filter_decimate(n, h, phase).apply(&x, 1, 1);
                let back = Stencil::<f64>::upsample_filter(n / 2, g, phase).apply(&tree, 1, 1);
                y.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
            }
        }
        max_abs_diff(&x, &y)
    }

    pub fn validate(&self) -> Result<()> {
        for (label, h) in [
            ("h0o", &self.h0o),
            ("h1o", &self.h1o),
            ("g0o", &self.g0o),
            ("g1o", &self.g1o),
        ] {
            if h.len() % 2 == 0 {
                return Err(Error::Verification(format!(
                    "{}: level-1 filter {label} must have odd length, got {}",
                    self.name,
                    h.len()
                )));
            }
        }
        let err = self.stage_reconstruction_error();
        if !(err <= STAGE_PR_TOLERANCE) {
            return Err(Error::Verification(format!(
                "{}: level-1 stage reconstruction error {err:.3e} exceeds {STAGE_PR_TOLERANCE:.0e}",
                self.name
            )));
        }
        Ok(())
    }
}

impl QshiftFilters {
    pub fn named(name: &str) -> Result<Self> {
        let (h0a, h1a): (&[f64], &[f64]) = match name {
            "qshift_06" => (&QSHIFT_06_H0A, &QSHIFT_06_H1A),
            "qshift_a" => (&QSHIFT_A_H0A, &QSHIFT_A_H1A),
            "qshift_b" => (&QSHIFT_B_H0A, &QSHIFT_B_H1A),
            "qshift_c" => (&QSHIFT_C_H0A, &QSHIFT_C_H1A),
            _ => {
                return Err(Error::config(format!(
                    "unknown q-shift filter set '{name}'"
                )))
            }
        };
        Ok(Self::from_tree_a(name, h0a, h1a))
    }

    /// Derives the remaining six filters from the tree-a analysis pair.
    pub fn from_tree_a(name: &str, h0a: &[f64], h1a: &[f64]) -> Self {
        Self {
            name: name.to_owned(),
            h0a: h0a.to_vec(),
            h0b: reversed(h0a),
            h1a: h1a.to_vec(),
            h1b: reversed(h1a),
            g0a: reversed(h0a),
            g0b: h0a.to_vec(),
            g1a: reversed(h1a),
            g1b: h1a.to_vec(),
        }
    }

    /// Worst reconstruction error of one decimating + interpolating q-shift
    /// stage on a seeded length-64 interleaved signal.
    pub fn stage_reconstruction_error(&self) -> f64 {
        let n = 64;
        let x: Vec<f64> = {
            let mut rng = SeededRng::new(0x9e5);
            (0..n).map(|_| rng.normal()).collect()
        };
        let lo = Stencil::<f64>::qshift_decimate(n, &self.h0b, &self.h0a).apply(&x, 1, 1);
        let hi = Stencil::<f64>::qshift_decimate(n, &self.h1b, &self.h1a).apply(&x, 1, 1);
        let mut y =
            Stencil::<f64>::qshift_interpolate(n / 2, &self.g0b, &self.g0a).apply(&lo, 1, 1);
        let yh = Stencil::<f64>::qshift_interpolate(n / 2, &self.g1b, &self.g1a).apply(&hi, 1, 1);
        y.iter_mut().zip(&yh).for_each(|(a, b)| *a += b);
        max_abs_diff(&x, &y)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.h0a.len();
        let all = [
            &self.h0a, &self.h0b, &self.h1a, &self.h1b, &self.g0a, &self.g0b, &self.g1a, &self.g1b,
        ];
        if len % 2 != 0 || all.iter().any(|h| h.len() != len) {
            return Err(Error::Verification(format!(
                "{}: q-shift filters must share one even length",
                self.name
            )));
        }
        let pairs = [
            ("g0a", &self.g0a, &self.h0a),
            ("g0b", &self.g0b, &self.h0b),
            ("g1a", &self.g1a, &self.h1a),
            ("g1b", &self.g1b, &self.h1b),
        ];
        for (label, g, h) in pairs {
            if *g != reversed(h) {
                return Err(Error::Verification(format!(
                    "{}: synthesis filter {label} is not the time reverse of its analysis filter",
                    self.name
                )));
            }
        }
        let err = self.stage_reconstruction_error();
        if !(err <= STAGE_PR_TOLERANCE) {
            return Err(Error::Verification(format!(
                "{}: q-shift stage reconstruction error {err:.3e} exceeds {STAGE_PR_TOLERANCE:.0e}",
                self.name
            )));
        }
        Ok(())
    }
}

impl FilterSet {
    /// Builds a set from its two halves without validating it.
    pub fn from_parts(level1: BiorthogonalFilters, qshift: QshiftFilters) -> Self {
        Self {
            name: format!("{}+{}", level1.name, qshift.name),
            level1,
            qshift,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.level1.validate()?;
        self.qshift.validate()
    }
}

impl Default for FilterSet {
    fn default() -> Self {
        load_filter_set(DEFAULT_LEVEL1).expect("built-in filter tables are valid")
    }
}

/// Loads an embedded filter set and checks both reconstruction invariants.
///
/// `name` is a level-1 name (`near_sym_a`, `near_sym_b`, `legall`), a
/// q-shift name (`qshift_06`, `qshift_a`, `qshift_b`, `qshift_c`), or both
/// joined by `+`. A missing half takes the default (`near_sym_a` or
/// `qshift_a`).
///
/// ```
/// let fs = wavegain::transform::load_filter_set("near_sym_a").unwrap();
/// assert_eq!(fs.level1.h0o.len(), 5);
/// assert_eq!(fs.level1.h1o.len(), 7);
/// assert_eq!(fs.name, "near_sym_a+qshift_a");
/// assert!(wavegain::transform::load_filter_set("bogus").is_err());
/// ```
pub fn load_filter_set(name: &str) -> Result<FilterSet> {
    let mut level1 = None;
    let mut qshift = None;
    for part in name.split('+').map(str::trim) {
        if LEVEL1_NAMES.contains(&part) && level1.is_none() {
            level1 = Some(part);
        } else if QSHIFT_NAMES.contains(&part) && qshift.is_none() {
            qshift = Some(part);
        } else {
            return Err(Error::config(format!(
                "unknown filter set '{name}' (level-1: {LEVEL1_NAMES:?}, q-shift: {QSHIFT_NAMES:?})"
            )));
        }
    }
    let set = FilterSet::from_parts(
        BiorthogonalFilters::named(level1.unwrap_or(DEFAULT_LEVEL1))?,
        QshiftFilters::named(qshift.unwrap_or(DEFAULT_QSHIFT))?,
    );
    set.validate()?;
    Ok(set)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lengths() {
        let fs = load_filter_set("near_sym_a").unwrap();
        assert_eq!(fs.level1.h0o.len(), 5);
        assert_eq!(fs.level1.h1o.len(), 7);
        let q = load_filter_set("qshift_a").unwrap().qshift;
        assert_eq!(q.h0a.len(), 10);
        assert_eq!(q.g0a, reversed(&q.h0a));
        assert_eq!(q.g1b, reversed(&q.h1b));
    }

    #[test]
    fn every_builtin_combination_validates() {
        for l in LEVEL1_NAMES {
            for q in QSHIFT_NAMES {
                let fs = load_filter_set(&format!("{l}+{q}")).unwrap();
                assert!(
                    fs.level1.stage_reconstruction_error() <= STAGE_PR_TOLERANCE,
                    "{l}"
                );
                assert!(
                    fs.qshift.stage_reconstruction_error() <= STAGE_PR_TOLERANCE,
                    "{q}"
                );
            }
        }
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(load_filter_set("bogus"), Err(Error::Config(_))));
        assert!(matches!(
            load_filter_set("near_sym_a+near_sym_b"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dc_gains() {
        let fs = FilterSet::default();
        let s: f64 = fs.level1.h0o.iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        let s: f64 = fs.qshift.h0a.iter().sum();
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn corrupted_tables_fail_validation() {
        let mut fs = FilterSet::default();
        fs.level1.g0o[2] += 1e-3;
        assert!(matches!(fs.validate(), Err(Error::Verification(_))));

        let mut fs = FilterSet::default();
        fs.qshift.h0a[4] += 1e-3;
        assert!(matches!(fs.validate(), Err(Error::Verification(_))));
    }
}
