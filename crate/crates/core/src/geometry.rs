//! Chaotic planar array layouts.
//!
//! A device array starts as an `h_count × v_count` grid of square patches
//! (edge `λ_g/2`) whose centres sit on a `λ_0/2` pitch. Every vertex of every
//! patch is then moved independently in x and y by a uniform draw from
//! `[−λ_g/4, (λ_0−λ_g)/4)`, which translates, rotates, scales or skews each
//! patch.
//!
//! Conventions:
//! * element `m = ih · v_count + iv`, matching the Kronecker ordering used by
//!   [`crate::signature::planar_unit_signature`];
//! * element `(ih, iv)` is centred at `(ih · λ_0/2, iv · λ_0/2)`;
//! * vertices run counter-clockwise starting from the bottom-left corner.
//!
//! The layout is enrollment metadata. It does not feed the signature model.

use std::fmt::Write as _;

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hexfloat;
use crate::seeding::rng_from_seed;

/// Free-space wavelength at 2.4 GHz, in metres.
pub const DEFAULT_LAMBDA0: f64 = 0.125;
/// Guided wavelength as a fraction of the free-space wavelength.
pub const DEFAULT_GUIDED_RATIO: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub h_count: usize,
    pub v_count: usize,
    pub lambda0: f64,
    pub lambdag: f64,
    pub seed: u64,
}

impl PerturbationParams {
    /// Parameters with the default 2.4 GHz wavelengths.
    pub fn new(h_count: usize, v_count: usize, seed: u64) -> Self {
        Self {
            h_count,
            v_count,
            lambda0: DEFAULT_LAMBDA0,
            lambdag: DEFAULT_GUIDED_RATIO * DEFAULT_LAMBDA0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_count == 0 || self.v_count == 0 {
            return Err(invalid(format!(
                "array needs at least one element per edge, got {}x{}",
                self.h_count, self.v_count
            )));
        }
        if !(self.lambdag > 0.0 && self.lambdag < self.lambda0 && self.lambda0.is_finite()) {
            return Err(invalid(format!(
                "need 0 < lambdag < lambda0, got lambdag={} lambda0={}",
                self.lambdag, self.lambda0
            )));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.h_count * self.v_count
    }

    /// Support `[lo, hi)` of every vertex displacement component.
    pub fn displacement_bounds(&self) -> (f64, f64) {
        (-self.lambdag / 4.0, (self.lambda0 - self.lambdag) / 4.0)
    }

    /// Undisplaced vertices of element `m`.
    pub fn nominal_element(&self, m: usize) -> Quad {
        let ih = m / self.v_count;
        let iv = m % self.v_count;
        let cx = ih as f64 * self.lambda0 / 2.0;
        let cy = iv as f64 * self.lambda0 / 2.0;
        let a = self.lambdag / 4.0;
        Quad([
            Point::new(cx - a, cy - a),
            Point::new(cx + a, cy - a),
            Point::new(cx + a, cy + a),
            Point::new(cx - a, cy + a),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    #[serde(with = "hexfloat")]
    pub x: f64,
    #[serde(with = "hexfloat")]
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Four vertices, counter-clockwise from bottom-left before perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad(pub [Point; 4]);

impl Quad {
    /// True when a pair of opposite edges cross, i.e. the outline is a bow-tie.
    pub fn is_self_intersecting(&self) -> bool {
        let v = &self.0;
        segments_cross(v[0], v[1], v[2], v[3]) || segments_cross(v[1], v[2], v[3], v[0])
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub params: PerturbationParams,
    pub elements: Vec<Quad>,
    /// `displacements[m][α] = (u_x, u_y)`.
    pub displacements: Vec<[Point; 4]>,
}

impl ArrayGeometry {
    /// Geometry with every displacement set to zero.
    pub fn nominal(params: PerturbationParams) -> Result<Self> {
        params.validate()?;
        let zero = [Point::new(0.0, 0.0); 4];
        Ok(Self::from_displacements(
            params,
            vec![zero; params.element_count()],
        ))
    }

    /// Builds vertices as nominal position plus the given displacement.
    pub fn from_displacements(params: PerturbationParams, displacements: Vec<[Point; 4]>) -> Self {
        let elements = displacements
            .iter()
            .enumerate()
            .map(|(m, d)| {
                let nominal = params.nominal_element(m);
                Quad(std::array::from_fn(|a| {
                    Point::new(nominal.0[a].x + d[a].x, nominal.0[a].y + d[a].y)
                }))
            })
            .collect();
        Self {
            params,
            elements,
            displacements,
        }
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex_count(&self) -> usize {
        4 * self.elements.len()
    }
}

/// Draws `8·M` independent displacements and applies them to the nominal grid.
pub fn generate_chaotic_geometry(params: &PerturbationParams) -> Result<ArrayGeometry> {
    params.validate()?;
    let (lo, hi) = params.displacement_bounds();
    let law = Uniform::new(lo, hi).map_err(|e| invalid(e.to_string()))?;
    let mut rng = rng_from_seed(params.seed);
    let displacements = (0..params.element_count())
        .map(|_| {
            std::array::from_fn(|_| {
                let ux = law.sample(&mut rng);
                let uy = law.sample(&mut rng);
                Point::new(ux, uy)
            })
        })
        .collect();
    Ok(ArrayGeometry::from_displacements(*params, displacements))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    DisplacementOutOfBounds {
        element: usize,
        vertex: usize,
        axis: char,
        value: f64,
    },
    VertexMismatch {
        element: usize,
        vertex: usize,
    },
    SelfIntersecting {
        element: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn out_of_bounds(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| matches!(f, Finding::DisplacementOutOfBounds { .. }))
            .count()
    }

    pub fn self_intersecting(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| matches!(f, Finding::SelfIntersecting { .. }))
            .count()
    }
}

/// Lists bound violations, vertex/displacement inconsistencies and bow-tie
/// elements. Nothing is rejected.
pub fn validate_geometry(geom: &ArrayGeometry) -> ValidationReport {
    let (lo, hi) = geom.params.displacement_bounds();
    let mut findings = Vec::new();
    for (m, (quad, disp)) in geom.elements.iter().zip(&geom.displacements).enumerate() {
        let nominal = geom.params.nominal_element(m);
        for (a, d) in disp.iter().enumerate() {
            for (axis, value) in [('x', d.x), ('y', d.y)] {
                if !(lo..=hi).contains(&value) {
                    findings.push(Finding::DisplacementOutOfBounds {
                        element: m,
                        vertex: a,
                        axis,
                        value,
                    });
                }
            }
            let expect = Point::new(nominal.0[a].x + d.x, nominal.0[a].y + d.y);
            if quad.0[a] != expect {
                findings.push(Finding::VertexMismatch {
                    element: m,
                    vertex: a,
                });
            }
        }
        if quad.is_self_intersecting() {
            findings.push(Finding::SelfIntersecting { element: m });
        }
    }
    if geom.elements.len() != geom.params.element_count() {
        findings.push(Finding::VertexMismatch {
            element: geom.elements.len(),
            vertex: 0,
        });
    }
    ValidationReport { findings }
}

fn polygon_points(quad: &Quad, scale: f64, height: f64) -> String {
    let mut s = String::new();
    for (i, p) in quad.0.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        // y grows downwards in SVG
        let _ = write!(s, "{:.4},{:.4}", p.x * scale, height - p.y * scale);
    }
    s
}

/// SVG drawing of the nominal grid (dashed) under the perturbed patches
/// (solid). Coordinates are in millimetres.
pub fn render_geometry(geom: &ArrayGeometry) -> String {
    const MM: f64 = 1000.0;
    let p = &geom.params;
    let margin = p.lambda0 / 2.0;
    let (lo, _) = p.displacement_bounds();
    let min = lo - p.lambdag / 4.0 - margin;
    let width = ((p.h_count as f64 - 1.0) * p.lambda0 / 2.0 + 2.0 * (margin - min)) * MM;
    let height = ((p.v_count as f64 - 1.0) * p.lambda0 / 2.0 + 2.0 * (margin - min)) * MM;
    let offset = -min * MM;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.4}mm" height="{height:.4}mm" viewBox="0 0 {width:.4} {height:.4}">"#
    );
    let _ = writeln!(
        svg,
        "<title>chaotic {}x{} array, seed {}</title>",
        p.h_count, p.v_count, p.seed
    );
    let _ = writeln!(
        svg,
        r##"<g id="nominal" fill="none" stroke="#888888" stroke-width="0.3" stroke-dasharray="1.5,1">"##
    );
    let shift = |q: Quad| Quad(q.0.map(|v| Point::new(v.x + offset / MM, v.y + offset / MM)));
    for m in 0..p.element_count() {
        let q = shift(p.nominal_element(m));
        let _ = writeln!(
            svg,
            r#"<polygon class="nominal" data-element="{m}" points="{}"/>"#,
            polygon_points(&q, MM, height)
        );
    }
    svg.push_str("</g>\n");
    let _ = writeln!(
        svg,
        r##"<g id="perturbed" fill="#c8702a" fill-opacity="0.35" stroke="#7a3a0c" stroke-width="0.4">"##
    );
    for (m, q) in geom.elements.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<polygon class="element" data-element="{m}" points="{}"/>"#,
            polygon_points(&shift(*q), MM, height)
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
