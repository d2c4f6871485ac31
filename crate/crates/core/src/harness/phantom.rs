use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ParamBox;
use crate::transform::{ScalarField, Smoothness};

use super::config::SurfaceSpec;

/// `amplitude · exp(1 − 1/(1 − |u − c|²/w²))` inside the ball of radius `width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomSpec {
    Zero,
    Bump(BumpSpec),
    SumOfBumps { bumps: Vec<BumpSpec> },
    /// Bump profile in the last ambient coordinate, centered at `level` with half width `half_width`.
    Zonal { level: f64, half_width: f64, amplitude: f64 },
    /// Indicator of the ball `|u − c| ≤ radius`, smoothed over `radius ± transition`.
    SmoothedIndicator { center: Vec<f64>, radius: f64, transition: f64, amplitude: f64 },
}

/// Unit-height C^∞ bump `exp(1 − 1/(1 − t))`, `t = |u − c|²/w²`.
pub fn bump_profile(center: &[f64], width: f64, u: &[f64]) -> f64 {
    let t = center.iter().zip(u).map(|(c, x)| (x - c) * (x - c)).sum::<f64>() / (width * width);
    if t < 1.0 {
        (1.0 - 1.0 / (1.0 - t)).exp()
    } else {
        0.0
    }
}

fn smooth_step(t: f64) -> f64 {
    let g = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        g(t) / (g(t) + g(1.0 - t))
    }
}

fn ball_box(center: &[f64], radius: f64) -> ParamBox<f64> {
    ParamBox::new(center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
}

/// A phantom field with the specification it was built from.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub field: ScalarField<f64>,
}

/// Builds the phantom and checks that its support stays at least two grid cells inside U.
pub fn make_phantom(spec: &PhantomSpec, surface: &SurfaceSpec, domain: &ParamBox<f64>, cells: &[usize]) -> Result<Phantom> {
    let n = domain.dim();
    let desc = serde_json::to_value(spec).expect("phantom spec serializes");
    let check_dim = |c: &[f64]| -> Result<()> {
        if c.len() != n {
            return Err(Error::InvalidPhantom(format!("center {c:?} is not in R^{n}")));
        }
        Ok(())
    };
    let positive = |name: &str, v: f64| -> Result<()> {
        if !(v > 0.0) {
            return Err(Error::InvalidPhantom(format!("{name} must be positive, got {v}")));
        }
        Ok(())
    };
    let field = match spec {
        PhantomSpec::Zero => ScalarField::zero(),
        PhantomSpec::Bump(b) if b.amplitude == 0.0 => ScalarField::zero(),
        PhantomSpec::Bump(b) => {
            check_dim(&b.center)?;
            positive("width", b.width)?;
            let b2 = b.clone();
            ScalarField::new(
                move |u: &[f64]| b2.amplitude * bump_profile(&b2.center, b2.width, u),
                vec![ball_box(&b.center, b.width)],
                Smoothness::Infinite,
                desc,
            )
        }
        PhantomSpec::SumOfBumps { bumps } => {
            let mut support = Vec::new();
            for b in bumps.iter().filter(|b| b.amplitude != 0.0) {
                check_dim(&b.center)?;
                positive("width", b.width)?;
                support.push(ball_box(&b.center, b.width));
            }
            if support.is_empty() {
                ScalarField::zero()
            } else {
                let bs = bumps.clone();
                ScalarField::new(
                    move |u: &[f64]| bs.iter().map(|b| b.amplitude * bump_profile(&b.center, b.width, u)).sum(),
                    support,
                    Smoothness::Infinite,
                    desc,
                )
            }
        }
        PhantomSpec::Zonal { amplitude, .. } if *amplitude == 0.0 => ScalarField::zero(),
        PhantomSpec::Zonal { level, half_width, amplitude } => {
            positive("half_width", *half_width)?;
            let (semi, offset) = surface
                .polar_profile()
                .ok_or_else(|| Error::InvalidPhantom("zonal phantoms need a stereographic patch".into()))?;
            // x_{n+1} = offset + semi (1 − ρ²)/(1 + ρ²) decreases with ρ = |u|.
            let t = level - half_width - offset;
            if t <= -semi {
                return Err(Error::InvalidPhantom("zonal support reaches the patch boundary".into()));
            }
            let rho = ((semi - t) / (semi + t)).max(0.0).sqrt();
            let chart = surface.chart()?;
            let (lv, hw, a) = (*level, *half_width, *amplitude);
            ScalarField::new(
                move |u: &[f64]| {
                    let mut x = [0.0; 4];
                    chart.point(u, &mut x[..n + 1]);
                    let s = (x[n] - lv) / hw;
                    if s.abs() < 1.0 {
                        a * (1.0 - 1.0 / (1.0 - s * s)).exp()
                    } else {
                        0.0
                    }
                },
                vec![ball_box(&vec![0.0; n], rho)],
                Smoothness::Infinite,
                desc,
            )
        }
        PhantomSpec::SmoothedIndicator { amplitude, .. } if *amplitude == 0.0 => ScalarField::zero(),
        PhantomSpec::SmoothedIndicator { center, radius, transition, amplitude } => {
            check_dim(center)?;
            positive("transition", *transition)?;
            if *transition >= *radius {
                return Err(Error::InvalidPhantom("transition must be smaller than the radius".into()));
            }
            let (c, r, d, a) = (center.clone(), *radius, *transition, *amplitude);
            ScalarField::new(
                move |u: &[f64]| {
                    let rho = c.iter().zip(u).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
                    a * smooth_step((r + d - rho) / (2.0 * d))
                },
                vec![ball_box(center, radius + transition)],
                Smoothness::Infinite,
                desc,
            )
        }
    };
    for b in field.support() {
        for a in 0..n {
            let cell = domain.width(a) / cells[a] as f64;
            if b.lo[a] < domain.lo[a] + 2.0 * cell || b.hi[a] > domain.hi[a] - 2.0 * cell {
                return Err(Error::InvalidPhantom(format!(
                    "support box [{:?}, {:?}] is not two grid cells inside the chart domain",
                    b.lo, b.hi
                )));
            }
        }
    }
    Ok(Phantom { spec: spec.clone(), field })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap() -> (SurfaceSpec, ParamBox<f64>) {
        let s = SurfaceSpec::SphericalCap { n: 2, radius: 1.0, height: 0.4 };
        let d = s.chart().unwrap().domain();
        (s, d)
    }

    #[test]
    fn zero_amplitude_is_the_zero_field() {
        let (s, d) = cap();
        let p = make_phantom(&PhantomSpec::Bump(BumpSpec { center: vec![0.0, 0.0], width: 0.2, amplitude: 0.0 }), &s, &d, &[64, 64])
            .unwrap();
        assert!(p.field.support().is_empty());
        assert_eq!(p.field.eval(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn bump_center_value_is_the_amplitude() {
        let (s, d) = cap();
        let p = make_phantom(&PhantomSpec::Bump(BumpSpec { center: vec![0.1, 0.05], width: 0.3, amplitude: 2.5 }), &s, &d, &[64, 64])
            .unwrap();
        assert_eq!(p.field.eval(&[0.1, 0.05]), 2.5);
    }

    #[test]
    fn disjoint_bumps_have_union_support() {
        let (s, d) = cap();
        let bumps = vec![
            BumpSpec { center: vec![-0.2, 0.0], width: 0.1, amplitude: 1.0 },
            BumpSpec { center: vec![0.2, 0.0], width: 0.1, amplitude: 1.0 },
        ];
        let p = make_phantom(&PhantomSpec::SumOfBumps { bumps }, &s, &d, &[64, 64]).unwrap();
        assert_eq!(p.field.support().len(), 2);
        assert!(!p.field.in_support(&[0.0, 0.0]));
        assert!(p.field.in_support(&[0.2, 0.05]));
    }

    #[test]
    fn support_outside_u_is_rejected() {
        let (s, d) = cap();
        let spec = PhantomSpec::Bump(BumpSpec { center: vec![0.3, 0.0], width: 0.2, amplitude: 1.0 });
        assert!(matches!(make_phantom(&spec, &s, &d, &[64, 64]), Err(Error::InvalidPhantom(_))));
    }

    #[test]
    fn zonal_depends_on_latitude_only() {
        let (s, d) = cap();
        let p = make_phantom(&PhantomSpec::Zonal { level: 0.85, half_width: 0.1, amplitude: 1.0 }, &s, &d, &[64, 64]).unwrap();
        let r: f64 = 0.2;
        let a = p.field.eval(&[r, 0.0]);
        let b = p.field.eval(&[r * 0.6, r * 0.8]);
        assert!(a > 0.0 && (a - b).abs() < 1e-14);
    }

    #[test]
    fn smoothed_indicator_plateau() {
        let (s, d) = cap();
        let spec = PhantomSpec::SmoothedIndicator { center: vec![0.0, 0.0], radius: 0.2, transition: 0.05, amplitude: 1.0 };
        let p = make_phantom(&spec, &s, &d, &[64, 64]).unwrap();
        assert_eq!(p.field.eval(&[0.1, 0.0]), 1.0);
        assert_eq!(p.field.eval(&[0.26, 0.0]), 0.0);
        assert!((p.field.eval(&[0.2, 0.0]) - 0.5).abs() < 1e-12);
    }
}
