//! Parametric longitudinal (y-z) cross-section of a slow pneu-net.
//!
//! Layout, from the bottom up: a sealing base strip with the strain-limiting
//! layer embedded at its mid-height, then the chamber body. The body holds
//! `n_chambers` rectangular cavities separated by interior walls, with an
//! end wall and a solid end cap at each end. All boundaries are axis aligned.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[y0, y1] x [z0, z1]` in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub y0: f64,
    pub y1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Rect {
    pub fn new(y0: f64, y1: f64, z0: f64, z1: f64) -> Self {
        Rect { y0, y1, z0, z1 }
    }

    pub fn area(&self) -> f64 {
        (self.y1 - self.y0) * (self.z1 - self.z0)
    }

    pub fn contains(&self, y: f64, z: f64) -> bool {
        y >= self.y0 && y <= self.y1 && z >= self.z0 && z <= self.z1
    }

    fn is_degenerate(&self) -> bool {
        !(self.y1 > self.y0 && self.z1 > self.z0)
    }

    fn overlap_area(&self, other: &Rect) -> f64 {
        let dy = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let dz = (self.z1.min(other.z1) - self.z0.max(other.z0)).max(0.0);
        dy * dz
    }
}

/// Material region of a mesh element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionTag {
    Body,
    Sealing,
    Limiting,
    /// Interior wall `k`, numbered from 1 starting at the fixed end.
    InteriorWall(usize),
}

impl RegionTag {
    pub fn is_interior_wall(self) -> bool {
        matches!(self, RegionTag::InteriorWall(_))
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionTag::Body => f.write_str("body"),
            RegionTag::Sealing => f.write_str("sealing"),
            RegionTag::Limiting => f.write_str("limiting"),
            RegionTag::InteriorWall(k) => write!(f, "interior_wall_{k}"),
        }
    }
}

impl FromStr for RegionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "body" => Ok(RegionTag::Body),
            "sealing" => Ok(RegionTag::Sealing),
            "limiting" => Ok(RegionTag::Limiting),
            _ => s
                .strip_prefix("interior_wall_")
                .and_then(|k| k.parse().ok())
                .map(RegionTag::InteriorWall)
                .ok_or_else(|| Error::Geometry(format!("unknown region tag '{s}'"))),
        }
    }
}

impl Serialize for RegionTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RegionTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the connecting air channel appears in the modelled plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// The channel runs beside the section plane: chambers show as separate
    /// cavities, interior walls stay bonded to the base, and every cavity is
    /// loaded with the same pressure.
    #[default]
    OutOfPlane,
    /// The channel is cut by the section plane: a strip of `channel_height`
    /// along the cavity floors joins all chambers into one cavity and
    /// separates the interior walls from the base.
    InPlane,
}

/// Dimensions in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PneuNetGeometry {
    pub n_chambers: usize,
    pub chamber_width: f64,
    pub chamber_height: f64,
    pub wall_thickness: f64,
    pub top_thickness: f64,
    pub channel_height: f64,
    pub base_thickness: f64,
    pub limiting_layer_thickness: f64,
    pub end_cap_length: f64,
    #[serde(default)]
    pub channel_mode: ChannelMode,
}

impl Default for PneuNetGeometry {
    fn default() -> Self {
        PneuNetGeometry {
            n_chambers: 11,
            chamber_width: 4.0,
            chamber_height: 10.0,
            wall_thickness: 2.0,
            top_thickness: 2.0,
            channel_height: 2.0,
            base_thickness: 3.0,
            limiting_layer_thickness: 0.3,
            end_cap_length: 4.0,
            channel_mode: ChannelMode::OutOfPlane,
        }
    }
}

impl PneuNetGeometry {
    pub fn total_length(&self) -> f64 {
        let n = self.n_chambers as f64;
        n * self.chamber_width + (n + 1.0) * self.wall_thickness + 2.0 * self.end_cap_length
    }

    pub fn total_height(&self) -> f64 {
        self.base_thickness + self.chamber_height + self.top_thickness
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chambers == 0 {
            return Err(Error::Geometry("n_chambers must be at least 1".into()));
        }
        let lengths = [
            ("chamber_width", self.chamber_width),
            ("chamber_height", self.chamber_height),
            ("wall_thickness", self.wall_thickness),
            ("top_thickness", self.top_thickness),
            ("channel_height", self.channel_height),
            ("base_thickness", self.base_thickness),
            ("limiting_layer_thickness", self.limiting_layer_thickness),
            ("end_cap_length", self.end_cap_length),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        if self.channel_height >= self.chamber_height {
            return Err(Error::Geometry(format!(
                "channel_height ({}) must be below chamber_height ({})",
                self.channel_height, self.chamber_height
            )));
        }
        if self.limiting_layer_thickness >= self.base_thickness {
            return Err(Error::Geometry(format!(
                "limiting layer ({}) must fit inside the base ({})",
                self.limiting_layer_thickness, self.base_thickness
            )));
        }
        Ok(())
    }

    /// Vertical extent of the limiting layer (centred in the base).
    pub fn limiting_layer_span(&self) -> (f64, f64) {
        let z0 = 0.5 * (self.base_thickness - self.limiting_layer_thickness);
        (z0, z0 + self.limiting_layer_thickness)
    }

    pub fn chamber_rect(&self, k: usize) -> Rect {
        let y0 = self.end_cap_length
            + self.wall_thickness
            + k as f64 * (self.chamber_width + self.wall_thickness);
        Rect::new(
            y0,
            y0 + self.chamber_width,
            self.base_thickness,
            self.base_thickness + self.chamber_height,
        )
    }

    pub fn build_cross_section(&self) -> Result<CrossSection> {
        self.validate()?;
        let length = self.total_length();
        let height = self.total_height();
        let outline = Rect::new(0.0, length, 0.0, height);
        let chambers: Vec<Rect> = (0..self.n_chambers).map(|k| self.chamber_rect(k)).collect();
        let tb = self.base_thickness;
        let channel = match self.channel_mode {
            ChannelMode::InPlane => Some(Rect::new(
                chambers[0].y0,
                chambers[self.n_chambers - 1].y1,
                tb,
                tb + self.channel_height,
            )),
            ChannelMode::OutOfPlane => None,
        };
        let wall_floor = match self.channel_mode {
            ChannelMode::InPlane => tb + self.channel_height,
            ChannelMode::OutOfPlane => tb,
        };

        let (zl0, zl1) = self.limiting_layer_span();
        let mut regions = vec![
            (Rect::new(0.0, length, zl0, zl1), RegionTag::Limiting),
            (Rect::new(0.0, length, 0.0, tb), RegionTag::Sealing),
        ];
        for k in 1..self.n_chambers {
            let y0 = chambers[k - 1].y1;
            regions.push((
                Rect::new(y0, y0 + self.wall_thickness, wall_floor, tb + self.chamber_height),
                RegionTag::InteriorWall(k),
            ));
        }
        regions.push((Rect::new(0.0, length, tb, height), RegionTag::Body));

        let section = CrossSection {
            outline,
            chambers,
            channel,
            regions,
        };
        section.check_simple()?;
        Ok(section)
    }
}

/// Outline, cavities and region map of the cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub outline: Rect,
    /// Chamber cavities (the holes of the outline polygon).
    pub chambers: Vec<Rect>,
    /// Connecting channel strip when it lies in the section plane.
    pub channel: Option<Rect>,
    /// Region rectangles in priority order; the first match wins.
    pub regions: Vec<(Rect, RegionTag)>,
}

impl CrossSection {
    pub fn hole_count(&self) -> usize {
        self.chambers.len()
    }

    pub fn cavities(&self) -> impl Iterator<Item = &Rect> {
        self.chambers.iter().chain(self.channel.iter())
    }

    pub fn is_cavity(&self, y: f64, z: f64) -> bool {
        self.cavities().any(|r| r.contains(y, z))
    }

    /// Region of a point strictly inside the solid, if any.
    pub fn region_at(&self, y: f64, z: f64) -> Option<RegionTag> {
        if !self.outline.contains(y, z) || self.is_cavity(y, z) {
            return None;
        }
        self.regions
            .iter()
            .find(|(r, _)| r.contains(y, z))
            .map(|(_, t)| *t)
    }

    /// Solid area: outline minus the union of cavities.
    pub fn area(&self) -> f64 {
        let mut area = self.outline.area();
        for c in &self.chambers {
            area -= c.area();
        }
        if let Some(ch) = &self.channel {
            area -= ch.area();
            for c in &self.chambers {
                area += ch.overlap_area(c);
            }
        }
        area
    }

    /// Every cavity must sit strictly inside the outline and chambers must not
    /// touch each other, otherwise the outline would self-intersect.
    fn check_simple(&self) -> Result<()> {
        for (i, c) in self.cavities().enumerate() {
            if c.is_degenerate() {
                return Err(Error::Geometry(format!("cavity {i} is degenerate")));
            }
            let inside = c.y0 > self.outline.y0
                && c.y1 < self.outline.y1
                && c.z0 > self.outline.z0
                && c.z1 < self.outline.z1;
            if !inside {
                return Err(Error::Geometry(format!(
                    "cavity {i} touches the outer boundary"
                )));
            }
        }
        for w in self.chambers.windows(2) {
            if w[1].y0 <= w[0].y1 {
                return Err(Error::Geometry(
                    "adjacent chambers overlap (wall_thickness too small)".into(),
                ));
            }
        }
        Ok(())
    }
}
