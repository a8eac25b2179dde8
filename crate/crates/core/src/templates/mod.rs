//! Accessibility prompt templates, visual styles and the structured prompts
//! generated from them.

mod bundle;
mod client;
mod meta;
mod offline;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bundle::{
    read_bundles, write_bundles, BundleOutcome, PromptBuilder, PromptBundle, PromptError, PromptOptions,
    StyleFailure, StylePrompt,
};
pub use client::{ChatClient, ChatError, ChatRequest, Message, Role, ScriptedChatClient};
pub use meta::build_meta_prompt;
pub use offline::{conforming_prompt, pick_objects, OfflineChatClient};
pub use validate::{validate_prompt, Rule, Severity, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateName {
    BasicObjectFocus,
    ContextualScene,
    EducationalLayout,
    MultiLevelDetail,
    GridLayout,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::BasicObjectFocus,
        TemplateName::ContextualScene,
        TemplateName::EducationalLayout,
        TemplateName::MultiLevelDetail,
        TemplateName::GridLayout,
    ];

    pub fn key(self) -> &'static str {
        match self {
            TemplateName::BasicObjectFocus => "basic_object_focus",
            TemplateName::ContextualScene => "contextual_scene",
            TemplateName::EducationalLayout => "educational_layout",
            TemplateName::MultiLevelDetail => "multi_level_detail",
            TemplateName::GridLayout => "grid_layout",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TemplateName::BasicObjectFocus => "Basic Object Focus",
            TemplateName::ContextualScene => "Contextual Scene",
            TemplateName::EducationalLayout => "Educational Layout",
            TemplateName::MultiLevelDetail => "Multi-Level Detail",
            TemplateName::GridLayout => "Grid Layout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateVersion {
    V1,
    V2,
}

/// A template name plus version, written as e.g. `basic_object_focus_v2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateSpec {
    pub name: TemplateName,
    pub version: TemplateVersion,
}

const BASIC_OBJECT_FOCUS: &[&str] = &[
    "Do not align or group objects (arrange them with neutral positioning).",
    "Avoid any suggestion of scene, narrative, or sequence.",
    "Ensure all objects are visually equal.",
    "No object should stand out more than the others.",
    "Background must be uniform and simple (e.g., white or gray).",
    "Emphasize maximum spacing between all objects.",
];

const BASIC_OBJECT_FOCUS_REFINED: &[&str] = &[
    "Include exactly four distinct objects.",
    "Keep at least 30% spacing between all objects.",
    "Limit size variation between objects to a 10% cap so every object keeps equal prominence.",
];

const CONTEXTUAL_SCENE: &[&str] = &[
    "Arrange all objects in a straight, horizontal line.",
    "Use a single perspective, no variation in object size or depth.",
    "Maintain equal size across all objects to avoid depth illusion.",
    "Include one minimal environmental element (e.g., surface, wall) when needed.",
    "Keep at least 20% spacing between each object to preserve separation.",
];

const EDUCATIONAL_LAYOUT: &[&str] = &[
    "Arrange objects in a strict left-to-right horizontal sequence.",
    "Visually connect each object to the next with a line or arrow.",
    "Gradually reduce object size from left to right by 10–15%.",
    "Include a visible numeric marker (1, 2, 3...) near each object.",
    "Limit the maximum object count to 4 to maintain consistency.",
    "Narrow spacing slightly with each subsequent object to guide visual flow.",
];

const MULTI_LEVEL_DETAIL: &[&str] = &[
    "Place objects across exactly three spatial layers: foreground, midground, and background.",
    "Foreground objects must be 2× larger than midground objects.",
    "Midground objects must be 2× larger than background objects.",
    "Each layer must use a unique lightness or brightness level.",
    "Position layers vertically: foreground at the bottom, background at the top.",
    "Avoid horizontal alignment across layers to emphasize separation.",
];

const GRID_LAYOUT: &[&str] = &[
    "Choose a 2×2 or 3×3 grid structure, depending on object count.",
    "Place one object per cell, centered precisely.",
    "Use equal-sized cells with clearly defined, thick borders.",
    "Ensure all objects are the same size and prominence.",
    "Maintain at least 25% margin around each object within its cell.",
    "Do not allow diagonal, overlapping, or asymmetrical arrangements.",
];

/// A required percentage clause and the instruction it enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpacingRequirement {
    pub min_percent: u32,
    pub citation: &'static str,
}

impl TemplateSpec {
    pub const fn new(name: TemplateName, version: TemplateVersion) -> Self {
        TemplateSpec { name, version }
    }

    /// Default production template.
    pub const fn production() -> Self {
        TemplateSpec::new(TemplateName::BasicObjectFocus, TemplateVersion::V2)
    }

    /// The five v1 templates compared in template selection.
    pub fn comparison_set() -> [TemplateSpec; 5] {
        TemplateName::ALL.map(|n| TemplateSpec::new(n, TemplateVersion::V1))
    }

    /// Ordered constraint sentences for this template.
    pub fn instruction_lines(&self) -> Vec<&'static str> {
        let base = match self.name {
            TemplateName::BasicObjectFocus => BASIC_OBJECT_FOCUS,
            TemplateName::ContextualScene => CONTEXTUAL_SCENE,
            TemplateName::EducationalLayout => EDUCATIONAL_LAYOUT,
            TemplateName::MultiLevelDetail => MULTI_LEVEL_DETAIL,
            TemplateName::GridLayout => GRID_LAYOUT,
        };
        let mut lines = base.to_vec();
        if self.is_refined_object_focus() {
            lines.extend_from_slice(BASIC_OBJECT_FOCUS_REFINED);
        }
        lines
    }

    fn is_refined_object_focus(&self) -> bool {
        self.name == TemplateName::BasicObjectFocus && self.version == TemplateVersion::V2
    }

    pub fn spacing_requirement(&self) -> Option<SpacingRequirement> {
        match self.name {
            TemplateName::ContextualScene => Some(SpacingRequirement {
                min_percent: 20,
                citation: "at least 20% spacing between each object",
            }),
            TemplateName::GridLayout => Some(SpacingRequirement {
                min_percent: 25,
                citation: "at least 25% margin around each object",
            }),
            TemplateName::BasicObjectFocus if self.is_refined_object_focus() => Some(SpacingRequirement {
                min_percent: 30,
                citation: "at least 30% spacing between all objects",
            }),
            _ => None,
        }
    }

    pub fn requires_plain_background(&self) -> bool {
        self.name == TemplateName::BasicObjectFocus
    }

    /// Only the educational layout may (and must) carry numeric markers.
    pub fn requires_numeric_markers(&self) -> bool {
        self.name == TemplateName::EducationalLayout
    }

    /// Allowed object count after template-specific overrides.
    pub fn object_range(&self) -> (u32, u32) {
        let general = GeneralConstraints::BASELINE;
        match self.name {
            TemplateName::BasicObjectFocus if self.is_refined_object_focus() => (4, 4),
            TemplateName::EducationalLayout => (general.object_min, 4),
            TemplateName::GridLayout => (general.object_min, 9),
            _ => (general.object_min, general.object_max),
        }
    }
}

impl fmt::Display for TemplateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.version {
            TemplateVersion::V1 => "v1",
            TemplateVersion::V2 => "v2",
        };
        write!(f, "{}_{v}", self.name.key())
    }
}

impl FromStr for TemplateSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let (stem, version) = if let Some(stem) = lower.strip_suffix("_v2") {
            (stem, TemplateVersion::V2)
        } else if let Some(stem) = lower.strip_suffix("_v1") {
            (stem, TemplateVersion::V1)
        } else {
            (lower.as_str(), TemplateVersion::V1)
        };
        TemplateName::ALL
            .into_iter()
            .find(|n| n.key() == stem)
            .map(|name| TemplateSpec { name, version })
            .ok_or_else(|| format!("unknown template `{s}`"))
    }
}

impl Serialize for TemplateSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TemplateSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Baseline constraints shared by every template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneralConstraints {
    pub object_min: u32,
    pub object_max: u32,
    pub require_spacing: bool,
    pub forbid_text_numbers_motion: bool,
    pub forbid_abstract_metaphor_bias: bool,
    pub require_plain_background: bool,
}

impl GeneralConstraints {
    pub const BASELINE: GeneralConstraints = GeneralConstraints {
        object_min: 3,
        object_max: 5,
        require_spacing: true,
        forbid_text_numbers_motion: true,
        forbid_abstract_metaphor_bias: true,
        require_plain_background: true,
    };

    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "Depict between {} and {} distinct objects per image to avoid cognitive overload.",
            self.object_min, self.object_max
        )];
        if self.require_spacing {
            out.push("Keep clear spatial separation between all objects.".into());
        }
        if self.forbid_text_numbers_motion {
            out.push("Do not include text, numbers, or motion effects.".into());
        }
        if self.forbid_abstract_metaphor_bias {
            out.push("Exclude abstract, metaphorical, or culturally biased elements.".into());
        }
        if self.require_plain_background {
            out.push("Use a plain or neutral background to minimize distraction.".into());
        }
        out.push("Give all objects balanced prominence unless an instruction says otherwise.".into());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Style {
    Cartoon,
    Realistic,
    Artistic,
    Minimalistic,
    DigitalArt,
    ThreeDRendered,
    Geometric,
    Retro,
    Storybook,
    Technical,
}

impl Style {
    pub const ALL: [Style; 10] = [
        Style::Cartoon,
        Style::Realistic,
        Style::Artistic,
        Style::Minimalistic,
        Style::DigitalArt,
        Style::ThreeDRendered,
        Style::Geometric,
        Style::Retro,
        Style::Storybook,
        Style::Technical,
    ];

    /// Display name as used in bundle and map files.
    pub fn name(self) -> &'static str {
        match self {
            Style::Cartoon => "Cartoon",
            Style::Realistic => "Realistic",
            Style::Artistic => "Artistic",
            Style::Minimalistic => "Minimalistic",
            Style::DigitalArt => "Digital Art",
            Style::ThreeDRendered => "3D Rendered",
            Style::Geometric => "Geometric",
            Style::Retro => "Retro",
            Style::Storybook => "Storybook",
            Style::Technical => "Technical",
        }
    }

    /// Lowercase key used in file names.
    pub fn key(self) -> &'static str {
        match self {
            Style::Cartoon => "cartoon",
            Style::Realistic => "realistic",
            Style::Artistic => "artistic",
            Style::Minimalistic => "minimalistic",
            Style::DigitalArt => "digital_art",
            Style::ThreeDRendered => "3d_rendered",
            Style::Geometric => "geometric",
            Style::Retro => "retro",
            Style::Storybook => "storybook",
            Style::Technical => "technical",
        }
    }

    /// Case-insensitive phrases; a conforming prompt contains at least one.
    pub fn keyword_markers(self) -> &'static [&'static str] {
        match self {
            Style::Cartoon => &["cartoon"],
            Style::Realistic => &["realistic"],
            Style::Artistic => &["artistic"],
            Style::Minimalistic => &["minimalistic", "minimalist"],
            Style::DigitalArt => &["digital art"],
            Style::ThreeDRendered => &["3d rendered", "3d-rendered"],
            Style::Geometric => &["geometric"],
            Style::Retro => &["retro"],
            Style::Storybook => &["storybook"],
            Style::Technical => &["technical illustration"],
        }
    }

    /// How the style should look, phrased for the chat model.
    pub fn directive(self) -> &'static str {
        match self {
            Style::Cartoon => "cartoon style with bold outlines and flat colors",
            Style::Realistic => "realistic style with natural lighting and true-to-life proportions",
            Style::Artistic => "artistic style with visible, painterly brushwork",
            Style::Minimalistic => "minimalistic style with clean shapes and very few details",
            Style::DigitalArt => "digital art style with crisp, smooth digital illustration",
            Style::ThreeDRendered => "3D rendered style with soft shading and clear volumes",
            Style::Geometric => "geometric style built from simple geometric shapes",
            Style::Retro => "retro style with a vintage aesthetic and muted colors",
            Style::Storybook => "storybook style like a children's picture book",
            Style::Technical => "technical illustration style with clear, precise lines and minimal shading",
        }
    }

    /// Resolve a style from a path-style key suffix such as `..._3d_rendered`.
    pub fn strip_key_suffix(stem: &str) -> Option<(&str, Style)> {
        Style::ALL.into_iter().find_map(|style| {
            stem.strip_suffix(style.key())
                .and_then(|rest| rest.strip_suffix('_'))
                .filter(|rest| !rest.is_empty())
                .map(|rest| (rest, style))
        })
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let squashed: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let style = match squashed.as_str() {
            "cartoon" => Style::Cartoon,
            "realistic" => Style::Realistic,
            "artistic" => Style::Artistic,
            "minimalistic" | "minimalist" => Style::Minimalistic,
            "digitalart" => Style::DigitalArt,
            "3drendered" | "threedrendered" | "3d" => Style::ThreeDRendered,
            "geometric" => Style::Geometric,
            "retro" => Style::Retro,
            "storybook" => Style::Storybook,
            "technical" | "technicalillustration" => Style::Technical,
            _ => return Err(format!("unknown style `{s}`")),
        };
        Ok(style)
    }
}

impl Serialize for Style {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Style {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse `all` or a comma-separated style list.
pub fn parse_style_list(s: &str) -> Result<Vec<Style>, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Style::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let style: Style = part.parse()?;
        if out.contains(&style) {
            return Err(format!("style `{part}` listed twice"));
        }
        out.push(style);
    }
    if out.is_empty() {
        return Err("no styles given".into());
    }
    Ok(out)
}
