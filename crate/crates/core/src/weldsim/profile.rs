use std::fmt;
use std::str::FromStr;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Brushed,
    Sandblasted,
}

impl SurfaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceKind::Brushed => "brushed",
            SurfaceKind::Sandblasted => "sandblasted",
        }
    }
}

impl FromStr for SurfaceKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "brushed" => Ok(SurfaceKind::Brushed),
            "sandblasted" => Ok(SurfaceKind::Sandblasted),
            other => Err(SimError::Profile(format!("unknown surface kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub length_mm: f64,
    pub sa_um: f64,
    pub noise_sd_volts: f64,
    pub kind: SurfaceKind,
}

/// Named surface presets.
impl Segment {
    /// Parse `length_mm, sa_um, noise_sd_volts, kind`.
    pub fn parse(value: &str) -> Result<Self, String> {
        let fields: Vec<&str> = value.split(',').map(str::trim).collect();
        let [len, sa, noise, kind] = fields[..] else {
            return Err("segment needs 4 fields".into());
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
        Ok(Segment {
            length_mm: num(len)?,
            sa_um: num(sa)?,
            noise_sd_volts: num(noise)?,
            kind: kind.parse::<SurfaceKind>().map_err(|e| e.to_string())?,
        })
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}, {:?}, {:?}, {}",
            self.length_mm,
            self.sa_um,
            self.noise_sd_volts,
            self.kind.as_str()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Brushed,
    Sandblasted,
    Mixed,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Brushed, Preset::Sandblasted, Preset::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Brushed => "brushed",
            Preset::Sandblasted => "sandblasted",
            Preset::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "brushed" => Ok(Preset::Brushed),
            "sandblasted" => Ok(Preset::Sandblasted),
            "mixed" => Ok(Preset::Mixed),
            other => Err(SimError::UnknownPreset(other.to_string())),
        }
    }
}

/// Ordered roughness segments along the 40 mm weld line.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProfile {
    pub segments: Vec<Segment>,
}

pub const BRUSHED_SA: f64 = 1.47;
pub const SANDBLASTED_SA: f64 = 1.20;
pub const MIXED_SANDBLASTED_SA: f64 = 1.23;

impl SurfaceProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self, SimError> {
        if segments.is_empty() {
            return Err(SimError::Profile("no segments".into()));
        }
        for s in &segments {
            if !(s.length_mm > 0.0 && s.sa_um >= 0.0 && s.noise_sd_volts >= 0.0)
                || !(s.length_mm.is_finite() && s.sa_um.is_finite() && s.noise_sd_volts.is_finite())
            {
                return Err(SimError::Profile(format!("invalid segment {s:?}")));
            }
        }
        Ok(Self { segments })
    }

    pub fn preset(preset: Preset, brushed_noise: f64, sandblasted_noise: f64) -> Self {
        let brushed = |len| Segment {
            length_mm: len,
            sa_um: BRUSHED_SA,
            noise_sd_volts: brushed_noise,
            kind: SurfaceKind::Brushed,
        };
        let sand = |len, sa| Segment {
            length_mm: len,
            sa_um: sa,
            noise_sd_volts: sandblasted_noise,
            kind: SurfaceKind::Sandblasted,
        };
        let segments = match preset {
            Preset::Brushed => vec![brushed(40.0)],
            Preset::Sandblasted => vec![sand(40.0, SANDBLASTED_SA)],
            Preset::Mixed => vec![brushed(10.0), sand(20.0, MIXED_SANDBLASTED_SA), brushed(10.0)],
        };
        Self { segments }
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length_mm).sum()
    }

    /// Segment under position `x`; past the end the last segment applies.
    pub fn segment_at(&self, x: f64) -> &Segment {
        let mut end = 0.0;
        for s in &self.segments {
            end += s.length_mm;
            if x < end {
                return s;
            }
        }
        self.segments.last().expect("profile is non-empty")
    }

    /// Parse a segment list. One segment per non-empty line:
    /// `segment = <length_mm>, <sa_um>, <noise_sd_volts>, <brushed|sandblasted>`.
    /// Lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut segments = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| SimError::Profile(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            if key.trim() != "segment" {
                return Err(bad(&format!("unknown key {:?}", key.trim())));
            }
            segments.push(Segment::parse(value).map_err(|e| bad(&e))?);
        }
        Self::new(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_40mm() {
        for p in Preset::ALL {
            assert_eq!(SurfaceProfile::preset(p, 0.4, 0.15).total_length(), 40.0);
        }
    }

    #[test]
    fn mixed_boundaries() {
        let p = SurfaceProfile::preset(Preset::Mixed, 0.4, 0.15);
        assert_eq!(p.segment_at(9.5).kind, SurfaceKind::Brushed);
        assert_eq!(p.segment_at(10.0).kind, SurfaceKind::Sandblasted);
        assert_eq!(p.segment_at(29.5).kind, SurfaceKind::Sandblasted);
        assert_eq!(p.segment_at(30.0).kind, SurfaceKind::Brushed);
        assert_eq!(p.segment_at(40.0).kind, SurfaceKind::Brushed);
    }

    #[test]
    fn parse_segment_file() {
        let text = "# mixed\nsegment = 10, 1.47, 0.4, brushed\n\nsegment=30,1.2,0.15,sandblasted\n";
        let p = SurfaceProfile::parse(text).unwrap();
        assert_eq!(p.segments.len(), 2);
        assert_eq!(p.segments[1].kind, SurfaceKind::Sandblasted);
        assert_eq!(p.total_length(), 40.0);
        assert!(SurfaceProfile::parse("segment = 1, 2").is_err());
        assert!(SurfaceProfile::parse("width = 3").is_err());
        assert!(SurfaceProfile::parse("").is_err());
        assert!(SurfaceProfile::parse("segment = -1, 1, 1, brushed").is_err());
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!("polished".parse::<Preset>(), Err(SimError::UnknownPreset(_))));
    }
}
