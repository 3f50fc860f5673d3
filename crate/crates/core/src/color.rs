//! sRGB, CIELab (D65) and BT.601 YUV conversions.
//!
//! All conversions clamp their outputs to the nominal range of the target
//! space, so slightly out-of-gamut chroma coming out of propagation is
//! tolerated rather than rejected.

use std::sync::LazyLock;

/// Gamma-encoded sRGB, components in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

/// CIELab relative to D65. `l` in `[0, 100]`, `a` and `b` in `[-128, 127]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

/// BT.601 YUV. `y` in `[0, 1]`, `u` in `[-0.436, 0.436]`, `v` in `[-0.615, 0.615]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Yuv {
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl Rgb {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb { r, g, b }
    }

    pub fn clamped(self) -> Self {
        Rgb::new(unit(self.r), unit(self.g), unit(self.b))
    }
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Lab { l, a, b }
    }

    /// Chroma magnitude `sqrt(a² + b²)`.
    pub fn chroma(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

impl Yuv {
    pub const fn new(y: f64, u: f64, v: f64) -> Self {
        Yuv { y, u, v }
    }
}

const U_MAX: f64 = 0.436;
const V_MAX: f64 = 0.615;
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

/// Linear sRGB -> XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

// The white point is taken as the image of linear (1, 1, 1) so that neutral
// inputs land exactly on the a = b = 0 axis.
static WHITE: LazyLock<[f64; 3]> = LazyLock::new(|| {
    let m = RGB_TO_XYZ;
    [
        m[0][0] + m[0][1] + m[0][2],
        m[1][0] + m[1][1] + m[1][2],
        m[2][0] + m[2][1] + m[2][2],
    ]
});

static XYZ_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&RGB_TO_XYZ));

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv = 1.0 / det;
    [
        [
            c00 * inv,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
        ],
        [
            c01 * inv,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
        ],
        [
            c02 * inv,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
        ],
    ]
}

#[inline]
fn unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// sRGB transfer function, encoded -> linear.
#[inline]
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB transfer function, linear -> encoded.
#[inline]
pub fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > LAB_EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

pub fn rgb_to_lab(c: Rgb) -> Lab {
    let lin = [
        srgb_to_linear(unit(c.r)),
        srgb_to_linear(unit(c.g)),
        srgb_to_linear(unit(c.b)),
    ];
    let m = &RGB_TO_XYZ;
    let w = &*WHITE;
    let xyz: [f64; 3] =
        std::array::from_fn(|i| (m[i][0] * lin[0] + m[i][1] * lin[1] + m[i][2] * lin[2]) / w[i]);
    let fx = lab_f(xyz[0]);
    let fy = lab_f(xyz[1]);
    let fz = lab_f(xyz[2]);
    Lab {
        l: (116.0 * fy - 16.0).clamp(0.0, 100.0),
        a: (500.0 * (fx - fy)).clamp(-128.0, 127.0),
        b: (200.0 * (fy - fz)).clamp(-128.0, 127.0),
    }
}

pub fn lab_to_rgb(c: Lab) -> Rgb {
    let fy = (c.l.clamp(0.0, 100.0) + 16.0) / 116.0;
    let fx = fy + c.a / 500.0;
    let fz = fy - c.b / 200.0;
    let w = &*WHITE;
    let xyz = [
        lab_f_inv(fx) * w[0],
        lab_f_inv(fy) * w[1],
        lab_f_inv(fz) * w[2],
    ];
    let m = &*XYZ_TO_RGB;
    let lin: [f64; 3] =
        std::array::from_fn(|i| m[i][0] * xyz[0] + m[i][1] * xyz[1] + m[i][2] * xyz[2]);
    Rgb {
        r: unit(linear_to_srgb(unit(lin[0]))),
        g: unit(linear_to_srgb(unit(lin[1]))),
        b: unit(linear_to_srgb(unit(lin[2]))),
    }
}

pub fn rgb_to_yuv(c: Rgb) -> Yuv {
    let (r, g, b) = (unit(c.r), unit(c.g), unit(c.b));
    let y = KR * r + KG * g + KB * b;
    Yuv {
        y: unit(y),
        u: (U_MAX * (b - y) / (1.0 - KB)).clamp(-U_MAX, U_MAX),
        v: (V_MAX * (r - y) / (1.0 - KR)).clamp(-V_MAX, V_MAX),
    }
}

/// Inverse of [`rgb_to_yuv`]; results outside the RGB cube are clamped.
pub fn yuv_to_rgb(c: Yuv) -> Rgb {
    let r = c.y + c.v * (1.0 - KR) / V_MAX;
    let b = c.y + c.u * (1.0 - KB) / U_MAX;
    let g = (c.y - KR * r - KB * b) / KG;
    Rgb::new(unit(r), unit(g), unit(b))
}

/// CIELab lightness of the neutral gray with encoded value `g`.
pub fn gray_lightness(g: f64) -> f64 {
    rgb_to_lab(Rgb::new(g, g, g)).l
}
