//! Minimal 3x5 bitmap glyphs for annotating overlays with ranks and scores.

const GLYPH_W: usize = 3;

fn glyph(c: char) -> Option<[u8; 5]> {
    // each row is 3 bits, most significant bit leftmost
    Some(match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        ':' => [0b000, 0b010, 0b000, 0b010, 0b000],
        '#' => [0b101, 0b111, 0b101, 0b111, 0b101],
        ' ' => [0; 5],
        _ => return None,
    })
}

/// Draws `text` with the glyph origin at (x, y), calling `plot` for every lit
/// pixel. Unknown characters render as blanks.
pub fn draw_text(text: &str, x: usize, y: usize, scale: usize, mut plot: impl FnMut(usize, usize)) {
    let mut cx = x;
    for c in text.chars() {
        if let Some(rows) = glyph(c) {
            for (ry, row) in rows.iter().enumerate() {
                for rx in 0..GLYPH_W {
                    if row >> (GLYPH_W - 1 - rx) & 1 == 1 {
                        for sy in 0..scale {
                            for sx in 0..scale {
                                plot(cx + rx * scale + sx, y + ry * scale + sy);
                            }
                        }
                    }
                }
            }
        }
        cx += (GLYPH_W + 1) * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_render_distinctly() {
        let render = |c: char| {
            let mut px = Vec::new();
            draw_text(&c.to_string(), 0, 0, 1, |x, y| px.push((x, y)));
            px
        };
        for a in '0'..='9' {
            for b in '0'..='9' {
                if a != b {
                    assert_ne!(render(a), render(b), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn scale_multiplies_extent() {
        let mut max = (0, 0);
        draw_text("8", 0, 0, 3, |x, y| max = (max.0.max(x), max.1.max(y)));
        assert_eq!(max, (8, 14));
    }
}
