use std::path::Path;

use crate::error::Result;
use crate::scatter::LightSource;

/// Parse a JSON array of `{position: [x, y, z], intensity: [r, g, b]}`.
pub fn parse_lights(text: &str) -> Result<Vec<LightSource>> {
    let lights: Vec<LightSource> = serde_json::from_str(text)?;
    for l in &lights {
        l.validate()?;
    }
    Ok(lights)
}

pub fn read_lights(path: &Path) -> Result<Vec<LightSource>> {
    parse_lights(&super::read_text(path)?)
}

pub fn lights_to_string(lights: &[LightSource]) -> String {
    serde_json::to_string_pretty(lights).expect("lights serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_reject_negative() {
        let l = parse_lights(r#"[{"position": [0, 1, 2], "intensity": [1, 1, 0.5]}]"#).unwrap();
        assert_eq!(l[0].position, [0.0, 1.0, 2.0]);
        assert!(parse_lights(r#"[{"position": [0, 1, 2], "intensity": [-1, 1, 0.5]}]"#).is_err());
        assert!(parse_lights(r#"[{"position": [0, 1, 2]}]"#).is_err());
    }
}
