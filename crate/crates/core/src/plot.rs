//! Static SVG rendering of trajectory datasets.
//!
//! Output depends only on the inputs: coordinates are printed with a fixed
//! number of decimals and there is no timestamp or random id, so identical
//! datasets give identical files.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryDataset;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
/// Number of color bands along the time axis.
const TIME_BANDS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub title: String,
    /// Reference point drawn as a cross, in plotted coordinates' source space.
    pub reference: Option<Vec<f64>>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            title: "trajectories".into(),
            reference: None,
        }
    }
}

/// Maps a D-dimensional weight vector to the plane.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    /// First two coordinates (D = 2).
    Identity,
    /// Centered projection onto two principal axes.
    Pca { mean: Vec<f64>, axes: [Vec<f64>; 2] },
}

impl Projection {
    pub fn fit(ds: &TrajectoryDataset) -> Result<Self> {
        let d = ds.d();
        if d < 2 {
            return Err(Error::invalid(format!("cannot plot {d}-dimensional weights")));
        }
        if ds.n() == 0 || ds.t() == 0 {
            return Err(Error::invalid("cannot plot an empty dataset"));
        }
        if d == 2 {
            return Ok(Projection::Identity);
        }
        let rows = ds.data.len() / d;
        let mut mean = vec![0.0; d];
        for r in ds.data.chunks_exact(d) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut cov = vec![0.0; d * d];
        for r in ds.data.chunks_exact(d) {
            for i in 0..d {
                let a = r[i] - mean[i];
                for j in 0..d {
                    cov[i * d + j] += a * (r[j] - mean[j]);
                }
            }
        }
        let first = power_iteration(&cov, d, None);
        let second = power_iteration(&cov, d, Some(&first));
        Ok(Projection::Pca {
            mean,
            axes: [first, second],
        })
    }

    pub fn apply(&self, w: &[f64]) -> (f64, f64) {
        match self {
            Projection::Identity => (w[0], w[1]),
            Projection::Pca { mean, axes } => {
                let dot = |a: &[f64]| w.iter().zip(mean).zip(a).map(|((x, m), v)| (x - m) * v).sum();
                (dot(&axes[0]), dot(&axes[1]))
            }
        }
    }
}

/// Leading eigenvector of a symmetric matrix, optionally deflated against
/// `orth`. The sign is fixed so the largest-magnitude entry is positive.
fn power_iteration(a: &[f64], d: usize, orth: Option<&[f64]>) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 / d as f64).collect();
    let project_out = |v: &mut Vec<f64>| {
        if let Some(u) = orth {
            let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
    };
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
    };
    project_out(&mut v);
    normalize(&mut v);
    for _ in 0..500 {
        let mut next = vec![0.0; d];
        for i in 0..d {
            next[i] = (0..d).map(|j| a[i * d + j] * v[j]).sum();
        }
        project_out(&mut next);
        normalize(&mut next);
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if delta < 1e-13 {
            break;
        }
    }
    let (mut big, mut sign) = (0.0, 1.0);
    for &x in &v {
        if x.abs() > big {
            big = x.abs();
            sign = x.signum();
        }
    }
    v.iter_mut().for_each(|x| *x *= sign);
    v
}

fn band_color(band: usize) -> String {
    // dark blue → orange
    let f = band as f64 / (TIME_BANDS - 1) as f64;
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(33.0, 240.0), lerp(64.0, 128.0), lerp(154.0, 24.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders every trajectory as a time-colored polyline. `forecasts`, if given,
/// holds one endpoint per trajectory (row-major, D values each) and is drawn
/// as hollow circles; true endpoints are drawn as filled dots.
pub fn render_svg(ds: &TrajectoryDataset, forecasts: Option<&[f64]>, opts: &PlotOptions) -> Result<String> {
    let proj = Projection::fit(ds)?;
    let d = ds.d();
    if let Some(f) = forecasts {
        if f.len() % d != 0 || f.len() / d > ds.n() {
            return Err(Error::shape("forecast endpoints", ds.n() * d, f.len()));
        }
    }
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::with_capacity(ds.n());
    for traj in ds.trajectories() {
        pts.push((0..traj.len()).map(|i| proj.apply(traj.step(i))).collect());
    }
    let fc: Vec<(f64, f64)> = forecasts
        .map(|f| f.chunks_exact(d).map(|w| proj.apply(w)).collect())
        .unwrap_or_default();
    let reference = match &opts.reference {
        Some(r) if r.len() == d => Some(proj.apply(r)),
        Some(r) => return Err(Error::shape("plot reference", d, r.len())),
        None => None,
    };

    let all = pts.iter().flatten().chain(&fc).chain(reference.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite("plot coordinate".into()));
        }
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-9);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let title = match proj {
        Projection::Identity => opts.title.clone(),
        Projection::Pca { .. } => format!("{} (first two principal coordinates of {d}-dim weights)", opts.title),
    };
    let (xl, yl) = match proj {
        Projection::Identity if d == 2 && ds.meta.architectures.len() == 1 && ds.meta.architectures[0].input_dim == 1 => {
            ("slope", "intercept")
        }
        Projection::Identity => ("w[0]", "w[1]"),
        Projection::Pca { .. } => ("PC1", "PC2"),
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(&title));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&title)
    );
    // axes and tick labels
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{xv:.3}</text>"#,
            sx(xv),
            HEIGHT - MARGIN + 14.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{yv:.3}</text>"#,
            MARGIN - 4.0,
            sy(yv) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{xl}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{yl}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (i, line) in pts.iter().enumerate() {
        let _ = writeln!(s, r#"<g id="traj{i}" fill="none" stroke-width="1">"#);
        let t = line.len();
        let band_len = t.div_ceil(TIME_BANDS).max(1);
        let mut start = 0;
        while start + 1 < t {
            let end = (start + band_len).min(t - 1);
            let band = (start / band_len).min(TIME_BANDS - 1);
            let _ = write!(s, r#"<polyline stroke="{}" points=""#, band_color(band));
            for (j, &(x, y)) in line[start..=end].iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{:.2},{:.2}", sx(x), sy(y));
            }
            s.push_str("\"/>\n");
            start = end;
        }
        if let Some(&(x, y)) = line.last() {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#, sx(x), sy(y), band_color(TIME_BANDS - 1));
        }
        s.push_str("</g>\n");
    }
    for &(x, y) in &fc {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="none" stroke="#c0142a" stroke-width="1.2"/>"##,
            sx(x),
            sy(y)
        );
    }
    if let Some((x, y)) = reference {
        let (cx, cy) = (sx(x), sy(y));
        let _ = writeln!(
            s,
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="black" stroke-width="1.5"/>"#,
            cx - 6.0,
            cy,
            cx + 6.0,
            cy,
            cx,
            cy - 6.0,
            cx,
            cy + 6.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{OptimizerConfig, OptimizerKind};
    use crate::smallnet::{Activation, InitScheme};
    use crate::trajectory::{default_mlp_mix, generate_linreg_trajectories, generate_mlp_trajectories};

    #[test]
    fn one_group_per_trajectory_and_deterministic() {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::Sgd);
        let ds = generate_linreg_trajectories(&cfg, 5, 1, InitScheme::StdNormal).unwrap();
        let a = render_svg(&ds, None, &PlotOptions::default()).unwrap();
        let b = render_svg(&ds, None, &PlotOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<g id=\"traj").count(), 5);
        assert!(a.contains(">slope<"));
    }

    #[test]
    fn pca_title_for_wide_weights() {
        let mix = default_mlp_mix(Activation::Relu)
            .into_iter()
            .map(|(s, _)| (s, 2))
            .collect::<Vec<_>>();
        let ds = generate_mlp_trajectories(&mix, &OptimizerConfig::trajectory_default(OptimizerKind::Adam), 0, InitScheme::StdNormal)
            .unwrap();
        let svg = render_svg(&ds, None, &PlotOptions::default()).unwrap();
        assert!(svg.contains("principal coordinates of 15-dim"));
        let Projection::Pca { axes, .. } = Projection::fit(&ds).unwrap() else {
            panic!("expected pca")
        };
        let dot: f64 = axes[0].iter().zip(&axes[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-8);
    }

    #[test]
    fn forecast_shape_checked() {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::Sgd);
        let ds = generate_linreg_trajectories(&cfg, 2, 1, InitScheme::StdNormal).unwrap();
        assert!(render_svg(&ds, Some(&[1.0, 2.0, 3.0]), &PlotOptions::default()).is_err());
        let svg = render_svg(&ds, Some(&[2.0, 1.0, 2.0, 1.0]), &PlotOptions::default()).unwrap();
        assert_eq!(svg.matches("#c0142a").count(), 2);
    }
}
