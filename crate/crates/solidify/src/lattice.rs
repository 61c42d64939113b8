//! Geometry of ℤᵈ windows: sup-norm balls, row-major indexing, continuum shapes and
//! their discrete blow-ups.

use crate::error::{domain, Error, Result};
use serde::Serialize;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Point(pub Vec<i64>);

impl Point {
    pub fn new(coords: Vec<i64>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

#[inline]
pub fn sup_dist(a: &[i64], b: &[i64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}

#[inline]
pub fn l1_dist(a: &[i64], b: &[i64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()
}

/// Axis-aligned cube `origin + [0, side)^dim`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Window {
    dim: usize,
    side: u64,
    origin: Point,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl Window {
    pub fn new(dim: usize, side: u64, origin: Point) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Usage(format!("dimension must be at least 2, got {dim}")));
        }
        if side < 1 {
            return Err(Error::Usage("window side must be positive".into()));
        }
        if origin.dim() != dim {
            return domain(format!("origin has {} coordinates, expected {dim}", origin.dim()));
        }
        let total = (side as u128).checked_pow(dim as u32);
        match total {
            Some(t) if t < u32::MAX as u128 => {}
            _ => return Err(Error::Capacity(format!("window {side}^{dim} has too many sites"))),
        }
        let mut strides = vec![1usize; dim];
        for k in (0..dim - 1).rev() {
            strides[k] = strides[k + 1] * side as usize;
        }
        Ok(Window { dim, side, origin, strides })
    }

    /// Window whose lower corner is `-(side-1)/2` on every axis; for odd sides the
    /// origin of ℤᵈ is the exact center.
    pub fn centered(dim: usize, side: u64) -> Result<Self> {
        let o = -(((side.max(1) - 1) / 2) as i64);
        Window::new(dim, side, Point(vec![o; dim]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn side(&self) -> u64 {
        self.side
    }

    pub fn origin(&self) -> &Point {
        &self.origin
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.strides[0] * self.side as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Largest coordinate on each axis.
    pub fn upper(&self) -> Vec<i64> {
        self.origin.0.iter().map(|o| o + self.side as i64 - 1).collect()
    }

    /// Center point, rounded toward the lower corner for even sides.
    pub fn center(&self) -> Point {
        Point(self.origin.0.iter().map(|o| o + (self.side as i64 - 1) / 2).collect())
    }

    #[inline]
    pub fn contains(&self, p: &[i64]) -> bool {
        p.len() == self.dim
            && p.iter().zip(&self.origin.0).all(|(x, o)| *x >= *o && *x < *o + self.side as i64)
    }

    #[inline]
    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = 0usize;
        for k in 0..self.dim {
            idx += (p[k] - self.origin.0[k]) as usize * self.strides[k];
        }
        Some(idx)
    }

    #[inline]
    pub fn coords_into(&self, mut idx: usize, out: &mut [i64]) {
        let side = self.side as usize;
        for k in (0..self.dim).rev() {
            out[k] = (idx % side) as i64 + self.origin.0[k];
            idx /= side;
        }
    }

    /// Local (origin-relative) coordinate along one axis.
    #[inline]
    pub fn local_coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.side as usize
    }

    pub fn point_index(&self, p: &Point) -> Result<usize> {
        self.index_of(&p.0)
            .ok_or_else(|| Error::Domain(format!("point {p} outside window")))
    }

    pub fn index_point(&self, idx: usize) -> Result<Point> {
        if idx >= self.len() {
            return domain(format!("index {idx} outside window of {} sites", self.len()));
        }
        let mut c = vec![0; self.dim];
        self.coords_into(idx, &mut c);
        Ok(Point(c))
    }

    /// True when some coordinate sits on the outer face of the window.
    #[inline]
    pub fn on_face(&self, idx: usize) -> bool {
        let s = self.side as usize;
        (0..self.dim).any(|k| {
            let c = self.local_coord(idx, k);
            c == 0 || c + 1 == s
        })
    }

    /// Clips the sup-ball B(center, r) to the window. Returns inclusive bounds and
    /// whether any part of the ball was cut off.
    pub fn clip_ball(&self, center: &[i64], r: u64) -> (Vec<i64>, Vec<i64>, bool) {
        let r = r as i64;
        let up = self.upper();
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        let mut truncated = false;
        for k in 0..self.dim {
            let a = center[k] - r;
            let b = center[k] + r;
            truncated |= a < self.origin.0[k] || b > up[k];
            lo.push(a.max(self.origin.0[k]));
            hi.push(b.min(up[k]));
        }
        (lo, hi, truncated)
    }

    /// Calls `f(index)` for each site of the inclusive box `[lo, hi]`, row-major.
    /// The box must already be inside the window; empty boxes do nothing.
    pub fn for_each_in_box(&self, lo: &[i64], hi: &[i64], mut f: impl FnMut(usize)) {
        let d = self.dim;
        if (0..d).any(|k| lo[k] > hi[k]) {
            return;
        }
        let mut cur: Vec<i64> = lo.to_vec();
        let base = self.index_of(lo).expect("box corner inside window");
        let mut idx = base;
        let last = d - 1;
        loop {
            let run = (hi[last] - lo[last] + 1) as usize;
            for j in 0..run {
                f(idx + j);
            }
            // Advance the odometer on axes < last.
            let mut k = last;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    idx += self.strides[k];
                    break;
                } else {
                    idx -= (cur[k] - lo[k]) as usize * self.strides[k];
                    cur[k] = lo[k];
                }
            }
        }
    }

    pub fn ball_indices(&self, center: &[i64], r: u64) -> Result<Vec<usize>> {
        if !self.contains(center) {
            return domain(format!("ball center {} outside window", Point(center.to_vec())));
        }
        let (lo, hi, _) = self.clip_ball(center, r);
        let mut out = Vec::new();
        self.for_each_in_box(&lo, &hi, |i| out.push(i));
        Ok(out)
    }

    /// B(center, r) ∩ window.
    pub fn ball_points(&self, center: &Point, r: u64) -> Result<Vec<Point>> {
        let idx = self.ball_indices(&center.0, r)?;
        Ok(idx.into_iter().map(|i| self.index_point(i).expect("in range")).collect())
    }
}

/// Compact continuum shape in ℝᵈ. Balls are sup-norm balls.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Box { center: Vec<f64>, half: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Union { parts: Vec<ShapeSpec> },
}

const SHAPE_TOL: f64 = 1e-9;

impl ShapeSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            ShapeSpec::Box { center, half } => (center.len() == half.len()).then_some(center.len()),
            ShapeSpec::Ball { center, .. } => Some(center.len()),
            ShapeSpec::Union { parts } => {
                let mut d = None;
                for p in parts {
                    let pd = p.dim()?;
                    if d.is_some_and(|x| x != pd) {
                        return None;
                    }
                    d = Some(pd);
                }
                d
            }
        }
    }

    pub fn has_nonempty_interior(&self) -> bool {
        match self {
            ShapeSpec::Box { half, .. } => half.iter().all(|h| *h > 0.0),
            ShapeSpec::Ball { radius, .. } => *radius > 0.0,
            ShapeSpec::Union { parts } => parts.iter().any(|p| p.has_nonempty_interior()),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ShapeSpec::Box { center, half } => {
                x.iter().zip(center).zip(half).all(|((x, c), h)| (x - c).abs() <= h + SHAPE_TOL)
            }
            ShapeSpec::Ball { center, radius } => {
                x.iter().zip(center).all(|(x, c)| (x - c).abs() <= radius + SHAPE_TOL)
            }
            ShapeSpec::Union { parts } => parts.iter().any(|p| p.contains(x)),
        }
    }

    /// Membership of `p / n` without dividing, so exact lattice multiples stay exact.
    pub fn contains_scaled(&self, p: &[i64], n: f64) -> bool {
        let tol = SHAPE_TOL * n.max(1.0);
        match self {
            ShapeSpec::Box { center, half } => p
                .iter()
                .zip(center)
                .zip(half)
                .all(|((&x, c), h)| (x as f64 - n * c).abs() <= n * h + tol),
            ShapeSpec::Ball { center, radius } => {
                p.iter().zip(center).all(|(&x, c)| (x as f64 - n * c).abs() <= n * radius + tol)
            }
            ShapeSpec::Union { parts } => parts.iter().any(|s| s.contains_scaled(p, n)),
        }
    }

    /// Integer bounding box of `n·A ∩ ℤᵈ`; `None` for an empty union.
    pub fn scaled_bbox(&self, n: f64) -> Option<(Vec<i64>, Vec<i64>)> {
        let tol = SHAPE_TOL * n.max(1.0);
        let span = |c: f64, h: f64| ((n * (c - h) - tol).ceil() as i64, (n * (c + h) + tol).floor() as i64);
        match self {
            ShapeSpec::Box { center, half } => {
                let (lo, hi) = center.iter().zip(half).map(|(c, h)| span(*c, *h)).unzip();
                Some((lo, hi))
            }
            ShapeSpec::Ball { center, radius } => {
                let (lo, hi) = center.iter().map(|c| span(*c, *radius)).unzip();
                Some((lo, hi))
            }
            ShapeSpec::Union { parts } => {
                let mut acc: Option<(Vec<i64>, Vec<i64>)> = None;
                for p in parts {
                    if let Some((l, h)) = p.scaled_bbox(n) {
                        acc = Some(match acc {
                            None => (l, h),
                            Some((al, ah)) => (
                                al.iter().zip(&l).map(|(a, b)| *a.min(b)).collect(),
                                ah.iter().zip(&h).map(|(a, b)| *a.max(b)).collect(),
                            ),
                        });
                    }
                }
                acc
            }
        }
    }

    pub fn parse(text: &str) -> Result<ShapeSpec> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let mut shapes = Vec::new();
        while pos < tokens.len() {
            shapes.push(parse_shape(&tokens, &mut pos)?);
        }
        let shape = match shapes.len() {
            0 => return Err(Error::Parse("empty shape description".into())),
            1 => shapes.pop().unwrap(),
            _ => ShapeSpec::Union { parts: shapes },
        };
        if shape.dim().is_none() {
            return Err(Error::Parse("shape parts disagree on dimension".into()));
        }
        Ok(shape)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out, 0);
        out
    }

    fn write_text(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        let nums = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        match self {
            ShapeSpec::Box { center, half } => {
                out.push_str(&format!("{pad}box {} {}\n", nums(center), nums(half)))
            }
            ShapeSpec::Ball { center, radius } => {
                out.push_str(&format!("{pad}ball {} {radius}\n", nums(center)))
            }
            ShapeSpec::Union { parts } => {
                out.push_str(&format!("{pad}union {{\n"));
                for p in parts {
                    p.write_text(out, indent + 1);
                }
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for raw in line.split_whitespace() {
            let mut cur = String::new();
            for ch in raw.chars() {
                if ch == '{' || ch == '}' {
                    if !cur.is_empty() {
                        tokens.push(std::mem::take(&mut cur));
                    }
                    tokens.push(ch.to_string());
                } else {
                    cur.push(ch);
                }
            }
            if !cur.is_empty() {
                tokens.push(cur);
            }
        }
    }
    tokens
}

fn parse_numbers(tokens: &[String], pos: &mut usize) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    while *pos < tokens.len() {
        match tokens[*pos].parse::<f64>() {
            Ok(x) if x.is_finite() => {
                v.push(x);
                *pos += 1;
            }
            Ok(_) => return Err(Error::Parse(format!("non-finite number '{}'", tokens[*pos]))),
            Err(_) => break,
        }
    }
    Ok(v)
}

fn parse_shape(tokens: &[String], pos: &mut usize) -> Result<ShapeSpec> {
    let kw = tokens[*pos].as_str();
    *pos += 1;
    match kw {
        "box" => {
            let v = parse_numbers(tokens, pos)?;
            if v.len() < 4 || v.len() % 2 != 0 {
                return Err(Error::Parse(format!("box needs 2d numbers, got {}", v.len())));
            }
            let d = v.len() / 2;
            Ok(ShapeSpec::Box { center: v[..d].to_vec(), half: v[d..].to_vec() })
        }
        "ball" => {
            let v = parse_numbers(tokens, pos)?;
            if v.len() < 3 {
                return Err(Error::Parse(format!("ball needs d+1 numbers, got {}", v.len())));
            }
            let d = v.len() - 1;
            Ok(ShapeSpec::Ball { center: v[..d].to_vec(), radius: v[d] })
        }
        "union" => {
            if tokens.get(*pos).map(String::as_str) != Some("{") {
                return Err(Error::Parse("expected '{' after union".into()));
            }
            *pos += 1;
            let mut parts = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    None => return Err(Error::Parse("unterminated union".into())),
                    Some("}") => {
                        *pos += 1;
                        break;
                    }
                    Some(_) => parts.push(parse_shape(tokens, pos)?),
                }
            }
            Ok(ShapeSpec::Union { parts })
        }
        other => Err(Error::Parse(format!("unknown shape keyword '{other}'"))),
    }
}

/// Discrete blow-up `A_N = (N·A) ∩ ℤᵈ`, in row-major order.
pub fn blow_up(a: &ShapeSpec, n: u64, w: &Window) -> Result<Vec<Point>> {
    if n < 1 {
        return Err(Error::Usage("blow-up factor must be at least 1".into()));
    }
    if a.dim() != Some(w.dim()) {
        return domain("shape dimension does not match window");
    }
    if !a.has_nonempty_interior() {
        return domain("shape has empty interior");
    }
    let nf = n as f64;
    let (lo, hi) = a.scaled_bbox(nf).ok_or_else(|| Error::Domain("empty shape".into()))?;
    if !w.contains(&lo) || !w.contains(&hi) {
        let up = w.upper();
        let need = (0..w.dim())
            .map(|k| (hi[k].max(up[k]) - lo[k].min(w.origin().0[k]) + 1) as u64)
            .max()
            .unwrap_or(0);
        let centered = (0..w.dim()).map(|k| 2 * lo[k].unsigned_abs().max(hi[k].unsigned_abs()) + 1).max().unwrap_or(0);
        return domain(format!(
            "N·A spans {:?}..{:?}, outside the window; required side {need} at this origin ({centered} for a centered window)",
            lo, hi
        ));
    }
    let mut out = Vec::new();
    let mut c = vec![0i64; w.dim()];
    w.for_each_in_box(&lo, &hi, |i| {
        w.coords_into(i, &mut c);
        if a.contains_scaled(&c, nf) {
            out.push(Point(c.clone()));
        }
    });
    Ok(out)
}
