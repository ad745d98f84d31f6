//! Layer-string mini-language (`c-16 p-2x2 fc-1024 fc-3`) and shape algebra.

use std::fmt::Write as _;

use crate::{Error, Result};

/// One token of a layer string, before kernel sizes are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerToken {
    Conv { filters: usize },
    MaxPool { h: usize, w: usize },
    FullyConnected { units: usize },
}

/// Parses whitespace-separated `c-<n>`, `p-<h>x<w>` and `fc-<n>` tokens.
/// `×` is accepted in place of `x`.
pub fn parse_architecture(text: &str) -> Result<Vec<LayerToken>> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(Error::Parse {
            position: 0,
            token: String::new(),
            reason: "empty architecture".into(),
        });
    }
    tokens
        .iter()
        .enumerate()
        .map(|(pos, tok)| {
            parse_token(tok).map_err(|reason| Error::Parse {
                position: pos,
                token: tok.to_string(),
                reason,
            })
        })
        .collect()
}

fn count(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("{s:?} is not a count"))?;
    if n == 0 {
        return Err("counts must be positive".into());
    }
    Ok(n)
}

fn parse_token(tok: &str) -> std::result::Result<LayerToken, String> {
    let (kind, arg) = tok.split_once('-').ok_or("expected <kind>-<size>")?;
    match kind.to_ascii_lowercase().as_str() {
        "c" => Ok(LayerToken::Conv { filters: count(arg)? }),
        "fc" => Ok(LayerToken::FullyConnected { units: count(arg)? }),
        "p" => {
            let arg = arg.replace('×', "x");
            let (h, w) = arg.split_once(['x', 'X']).ok_or("pool size must be <h>x<w>")?;
            Ok(LayerToken::MaxPool {
                h: count(h)?,
                w: count(w)?,
            })
        }
        other => Err(format!("unknown layer kind {other:?}")),
    }
}

/// A resolved layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel_h: usize,
        kernel_w: usize,
    },
    MaxPool {
        h: usize,
        w: usize,
    },
    FullyConnected {
        units: usize,
    },
}

/// Activation shape `(channels, height, width)`; fully connected outputs are
/// `(units, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape3 {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How tokens become layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchOptions {
    /// Kernel of the first convolution (it sees the raw two-frame input).
    pub input_kernel: (usize, usize),
    /// Kernel of every other convolution.
    pub hidden_kernel: (usize, usize),
    /// Insert a same-width convolution after every listed convolution.
    pub depth_multiplier: bool,
    /// Required width of the final fully connected layer.
    pub outputs: usize,
}

impl Default for ArchOptions {
    fn default() -> Self {
        Self {
            input_kernel: (3, 3),
            hidden_kernel: (3, 3),
            depth_multiplier: false,
            outputs: 3,
        }
    }
}

/// Validated architecture: input shape, resolved layers and every
/// intermediate shape. Hidden layers are rectified, the output is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    input: Shape3,
    layers: Vec<LayerSpec>,
    shapes: Vec<Shape3>,
}

impl ArchitectureSpec {
    pub fn new(input: Shape3, layers: Vec<LayerSpec>) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::Shape(format!("empty input {input:?}")));
        }
        match layers.last() {
            Some(LayerSpec::FullyConnected { .. }) => {}
            _ => return Err(Error::Shape("the last layer must be fully connected".into())),
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut cur = input;
        for (i, l) in layers.iter().enumerate() {
            cur = match *l {
                LayerSpec::Conv {
                    filters,
                    kernel_h,
                    kernel_w,
                } => {
                    if kernel_h > cur.h || kernel_w > cur.w {
                        return Err(Error::Shape(format!(
                            "layer {i}: {kernel_h}x{kernel_w} kernel does not fit {}x{} input",
                            cur.h, cur.w
                        )));
                    }
                    Shape3::new(filters, cur.h - kernel_h + 1, cur.w - kernel_w + 1)
                }
                LayerSpec::MaxPool { h, w } => {
                    if h > cur.h || w > cur.w {
                        return Err(Error::Shape(format!(
                            "layer {i}: {h}x{w} pool does not fit {}x{} input",
                            cur.h, cur.w
                        )));
                    }
                    Shape3::new(cur.c, cur.h / h, cur.w / w)
                }
                LayerSpec::FullyConnected { units } => Shape3::new(units, 1, 1),
            };
            shapes.push(cur);
        }
        Ok(Self { input, layers, shapes })
    }

    /// Resolves kernels (and the optional depth multiplier) and validates.
    pub fn build(input: Shape3, tokens: &[LayerToken], opts: &ArchOptions) -> Result<Self> {
        let mut layers = Vec::new();
        let mut first_conv = true;
        for t in tokens {
            match *t {
                LayerToken::Conv { filters } => {
                    let (kh, kw) = if first_conv {
                        opts.input_kernel
                    } else {
                        opts.hidden_kernel
                    };
                    first_conv = false;
                    layers.push(LayerSpec::Conv {
                        filters,
                        kernel_h: kh,
                        kernel_w: kw,
                    });
                    if opts.depth_multiplier {
                        layers.push(LayerSpec::Conv {
                            filters,
                            kernel_h: opts.hidden_kernel.0,
                            kernel_w: opts.hidden_kernel.1,
                        });
                    }
                }
                LayerToken::MaxPool { h, w } => layers.push(LayerSpec::MaxPool { h, w }),
                LayerToken::FullyConnected { units } => layers.push(LayerSpec::FullyConnected { units }),
            }
        }
        let spec = Self::new(input, layers)?;
        if spec.outputs() != opts.outputs {
            return Err(Error::Shape(format!(
                "network ends in {} units, {} targets expected",
                spec.outputs(),
                opts.outputs
            )));
        }
        Ok(spec)
    }

    /// Parse-and-build convenience.
    pub fn from_layer_string(text: &str, input: Shape3, opts: &ArchOptions) -> Result<Self> {
        Self::build(input, &parse_architecture(text)?, opts)
    }

    pub fn input(&self) -> Shape3 {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Output shape of every layer.
    pub fn shapes(&self) -> &[Shape3] {
        &self.shapes
    }

    pub fn input_shape_of(&self, layer: usize) -> Shape3 {
        if layer == 0 {
            self.input
        } else {
            self.shapes[layer - 1]
        }
    }

    pub fn outputs(&self) -> usize {
        self.shapes.last().map_or(0, |s| s.len())
    }

    /// `(weight count, bias count)` of a layer.
    pub fn param_counts(&self, layer: usize) -> (usize, usize) {
        let inp = self.input_shape_of(layer);
        match self.layers[layer] {
            LayerSpec::Conv {
                filters,
                kernel_h,
                kernel_w,
            } => (filters * inp.c * kernel_h * kernel_w, filters),
            LayerSpec::MaxPool { .. } => (0, 0),
            LayerSpec::FullyConnected { units } => (units * inp.len(), units),
        }
    }

    pub fn fan_in(&self, layer: usize) -> usize {
        let inp = self.input_shape_of(layer);
        match self.layers[layer] {
            LayerSpec::Conv { kernel_h, kernel_w, .. } => kernel_h * kernel_w * inp.c,
            LayerSpec::MaxPool { .. } => 0,
            LayerSpec::FullyConnected { .. } => inp.len(),
        }
    }

    /// Indices of layers with weights, bottom to top.
    pub fn weighted_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| !matches!(self.layers[i], LayerSpec::MaxPool { .. }))
            .collect()
    }

    /// Line-oriented serialization used inside checkpoints.
    pub fn to_text(&self) -> String {
        let mut s = format!("input {} {} {}\n", self.input.c, self.input.h, self.input.w);
        for l in &self.layers {
            let _ = match *l {
                LayerSpec::Conv {
                    filters,
                    kernel_h,
                    kernel_w,
                } => writeln!(s, "conv {filters} {kernel_h} {kernel_w}"),
                LayerSpec::MaxPool { h, w } => writeln!(s, "pool {h} {w}"),
                LayerSpec::FullyConnected { units } => writeln!(s, "fc {units}"),
            };
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::CorruptDataset(format!("bad architecture line {line:?}"));
        let mut input = None;
        let mut layers = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let nums: Vec<usize> = parts[1..]
                .iter()
                .map(|p| p.parse().map_err(|_| bad(line)))
                .collect::<Result<_>>()?;
            match (parts[0], nums.as_slice()) {
                ("input", [c, h, w]) => input = Some(Shape3::new(*c, *h, *w)),
                ("conv", [f, kh, kw]) => layers.push(LayerSpec::Conv {
                    filters: *f,
                    kernel_h: *kh,
                    kernel_w: *kw,
                }),
                ("pool", [h, w]) => layers.push(LayerSpec::MaxPool { h: *h, w: *w }),
                ("fc", [u]) => layers.push(LayerSpec::FullyConnected { units: *u }),
                _ => return Err(bad(line)),
            }
        }
        let input = input.ok_or_else(|| Error::CorruptDataset("architecture has no input line".into()))?;
        Self::new(input, layers)
    }
}

/// Reference convolutional models A-D, sized for large scanner regions.
pub const REFERENCE_CNN_MODELS: [(&str, &str); 4] = [
    (
        "A",
        "c-16 p-2x2 c-36 p-2x2 c-64 p-2x2 c-121 p-2x2 c-169 p-2x2 c-225 p-2x2 c-289 p-2x2 fc-1024 fc-3",
    ),
    (
        "B",
        "c-36 p-2x2 c-64 p-2x2 c-121 p-2x2 c-169 p-2x2 c-225 p-2x2 c-289 p-2x2 c-361 p-2x2 fc-1024 fc-3",
    ),
    (
        "C",
        "c-49 p-2x2 c-81 p-2x2 c-144 p-2x2 c-324 p-2x2 c-484 p-2x2 fc-1024 fc-1024 fc-3",
    ),
    (
        "D",
        "c-64 p-2x2 c-121 p-2x2 c-169 p-2x2 c-225 p-2x2 c-289 p-2x2 c-361 p-2x2 c-441 p-2x2 fc-1024 fc-3",
    ),
];

/// The fully connected models fed by cluster motion vectors.
pub const REFERENCE_FC_MODELS: [(&str, &str); 3] = [
    ("A", "fc-256 fc-256 fc-3"),
    ("B", "fc-512 fc-512 fc-3"),
    ("C", "fc-1024 fc-1024 fc-3"),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_model_a_prefix() {
        let t = parse_architecture("c-16 p-2x2 fc-3").unwrap();
        assert_eq!(
            t,
            vec![
                LayerToken::Conv { filters: 16 },
                LayerToken::MaxPool { h: 2, w: 2 },
                LayerToken::FullyConnected { units: 3 }
            ]
        );
        assert_eq!(parse_architecture("c-16\np-2×2\nfc-3").unwrap(), t);
    }

    #[test]
    fn parses_model_c() {
        let t = parse_architecture(REFERENCE_CNN_MODELS[2].1).unwrap();
        assert_eq!(t.len(), 13);
        let convs = t.iter().filter(|l| matches!(l, LayerToken::Conv { .. })).count();
        let pools = t.iter().filter(|l| matches!(l, LayerToken::MaxPool { .. })).count();
        let fcs = t
            .iter()
            .filter(|l| matches!(l, LayerToken::FullyConnected { .. }))
            .count();
        assert_eq!((convs, pools, fcs), (5, 5, 3));
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_architecture("c-4 c-0").unwrap_err() {
            Error::Parse { position, token, .. } => {
                assert_eq!(position, 1);
                assert_eq!(token, "c-0");
            }
            e => panic!("unexpected {e}"),
        }
        assert_eq!(parse_architecture("q-3").unwrap_err().kind(), "parse-error");
        assert_eq!(parse_architecture("p-2").unwrap_err().kind(), "parse-error");
        assert_eq!(parse_architecture("").unwrap_err().kind(), "parse-error");
    }

    #[test]
    fn pools_floor_odd_dims() {
        let spec = ArchitectureSpec::from_layer_string(
            "c-2 p-2x2 p-2x2 p-2x2 fc-3",
            Shape3::new(2, 37, 51),
            &ArchOptions::default(),
        )
        .unwrap();
        let s = spec.shapes();
        assert_eq!((s[0].h, s[0].w), (35, 49));
        assert_eq!((s[1].h, s[1].w), (17, 24));
        assert_eq!((s[2].h, s[2].w), (8, 12));
        assert_eq!((s[3].h, s[3].w), (4, 6));
    }

    #[test]
    fn shape_errors() {
        let opts = ArchOptions::default();
        assert_eq!(
            ArchitectureSpec::from_layer_string("p-4x4 fc-3", Shape3::new(2, 3, 3), &opts)
                .unwrap_err()
                .kind(),
            "shape-error"
        );
        assert!(ArchitectureSpec::from_layer_string("c-4 fc-2", Shape3::new(2, 8, 8), &opts).is_err());
        assert!(ArchitectureSpec::from_layer_string("fc-3 c-4", Shape3::new(2, 8, 8), &opts).is_err());
    }

    #[test]
    fn reference_models_build_at_compatible_input() {
        // seven conv+pool blocks with 3x3 kernels need at least 382 pixels
        for (name, text) in REFERENCE_CNN_MODELS {
            let spec = ArchitectureSpec::from_layer_string(text, Shape3::new(2, 400, 400), &ArchOptions::default());
            assert!(spec.is_ok(), "model {name}: {spec:?}");
        }
        for (_, text) in REFERENCE_FC_MODELS {
            assert!(ArchitectureSpec::from_layer_string(text, Shape3::new(200, 1, 1), &ArchOptions::default()).is_ok());
        }
    }

    #[test]
    fn depth_multiplier_doubles_convs() {
        let opts = ArchOptions {
            depth_multiplier: true,
            input_kernel: (5, 5),
            ..Default::default()
        };
        let spec =
            ArchitectureSpec::from_layer_string("c-4 p-2x2 c-8 p-2x2 fc-3", Shape3::new(2, 40, 40), &opts).unwrap();
        let convs: Vec<&LayerSpec> = spec
            .layers()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv { .. }))
            .collect();
        assert_eq!(convs.len(), 4);
        assert_eq!(
            *convs[0],
            LayerSpec::Conv {
                filters: 4,
                kernel_h: 5,
                kernel_w: 5
            }
        );
        assert_eq!(
            *convs[1],
            LayerSpec::Conv {
                filters: 4,
                kernel_h: 3,
                kernel_w: 3
            }
        );
    }

    #[test]
    fn text_round_trip() {
        let spec = ArchitectureSpec::from_layer_string(
            "c-4 p-2x2 c-8 p-2x2 fc-16 fc-3",
            Shape3::new(2, 8, 8),
            &ArchOptions::default(),
        );
        // 8x8 -> 6x6 -> 3x3 -> 1x1 -> pool fails: shape error expected
        assert!(spec.is_err());
        let spec = ArchitectureSpec::from_layer_string(
            "c-4 p-2x2 c-8 p-2x2 fc-16 fc-3",
            Shape3::new(2, 14, 14),
            &ArchOptions::default(),
        )
        .unwrap();
        assert_eq!(ArchitectureSpec::from_text(&spec.to_text()).unwrap(), spec);
    }
}
