//! Exact piecewise-affine function algebra over a clock interval.
//!
//! [`Pwa`] carries every cost function and every computed optimal-cost map.
//! A function is stored as breakpoints with extended-rational values plus a
//! provenance tag per segment. Three representational extras are needed to
//! stay exact on the games this library solves:
//!
//! * **Infinite regions.** A breakpoint may hold `+inf`/`-inf`. A segment
//!   whose two endpoint values are the same infinity is that infinity on the
//!   whole closed segment. A segment joining a finite value to an infinity is
//!   the infinity on its interior and the finite value at its finite end; no
//!   segment ever interpolates to or from an infinity.
//! * **Jumps.** A breakpoint `x` may appear twice: the first entry is the
//!   left limit, the second the right limit. Unless an override says
//!   otherwise the attained value is the left limit. Jumps appear where a
//!   point-constrained move is strictly better than every alternative and
//!   waiting extends it leftward only.
//! * **Overrides.** An isolated `(x, value)` pair that differs from the
//!   surrounding limits, e.g. the contribution of a move guarded by `x = c`
//!   before any waiting pass has run.
//!
//! On finite regions the default value rule keeps functions single-valued and
//! left-continuous, and all operations preserve that shape.

use crate::rational::{Ext, Q};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Where a segment of a computed function came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    /// No provenance recorded (inputs, goal functions, plain algebra).
    None,
    /// The segment is a piece of the `i`-th input function.
    Source(usize),
    /// Wait until the clock reaches `until`, then continue via input `via`.
    Delay { until: Q, via: usize },
    /// Wait exactly `dur` time units, then continue via input `via`.
    DelayFor { dur: Q, via: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum PwaError {
    #[error("point {0} outside domain [{1}, {2}]")]
    OutsideDomain(Q, Q, Q),
    #[error("domains differ: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(Q, Q, Q, Q),
    #[error("concat endpoint values differ at {0}: {1} vs {2}")]
    ContinuityMismatch(Q, Ext, Ext),
    #[error("empty function list")]
    EmptyList,
    #[error("delay {0} exceeds domain width {1}")]
    DelayTooLong(Q, Q),
    #[error("invalid function: {0}")]
    Invalid(String),
}

/// Piecewise-affine function with provenance tags.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pwa {
    /// Breakpoints `(x, value)`; `x` nondecreasing, at most two entries per
    /// `x`. Entries at a duplicated `x` are the left and right limits.
    points: Vec<(Q, Ext)>,
    /// One tag per segment (`points.len() - 1`); zero-width jump segments
    /// carry `Tag::None`.
    tags: Vec<Tag>,
    /// Isolated point values that differ from the limit-based default.
    overrides: Vec<(Q, Ext, Tag)>,
}

/// Interior behaviour of one segment.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Body {
    /// Finite affine interpolation between the endpoint limits.
    Line(Q, Q),
    Inf(bool), // true = +inf
}

/// A segment of a [`Pwa`]: its interval, endpoint limits and provenance.
#[derive(Clone, Debug)]
pub struct Segment {
    pub lo: Q,
    pub hi: Q,
    pub lo_value: Ext,
    pub hi_value: Ext,
    pub tag: Tag,
}

impl Segment {
    /// Slope of a finite segment of nonzero width.
    pub fn slope(&self) -> Option<Q> {
        match (&self.lo_value, &self.hi_value) {
            (Ext::Fin(a), Ext::Fin(b)) if self.lo < self.hi => {
                Some(&(b - a) / &(&self.hi - &self.lo))
            }
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lo_value.is_finite() && self.hi_value.is_finite()
    }
}

fn interp(x0: &Q, y0: &Q, x1: &Q, y1: &Q, x: &Q) -> Q {
    if x0 == x1 {
        return y0.clone();
    }
    y0 + &(&(y1 - y0) * &(&(x - x0) / &(x1 - x0)))
}

fn seg_body(a: &Ext, b: &Ext) -> Body {
    match (a, b) {
        (Ext::Fin(p), Ext::Fin(q)) => Body::Line(p.clone(), q.clone()),
        (Ext::PlusInf, _) | (_, Ext::PlusInf) => Body::Inf(true),
        _ => Body::Inf(false),
    }
}

impl Pwa {
    // ------------------------------------------------------------------
    // construction
    // ------------------------------------------------------------------

    /// Builds a function from raw breakpoints, canonicalizing.
    pub fn from_points(points: Vec<(Q, Ext)>) -> Pwa {
        let n = points.len();
        assert!(n >= 1, "a function needs at least one breakpoint");
        let tags = vec![Tag::None; n.saturating_sub(1)];
        let mut f = Pwa { points, tags, overrides: Vec::new() };
        f.assert_well_formed();
        f.canonicalize();
        f
    }

    pub fn from_points_tagged(points: Vec<(Q, Ext)>, tags: Vec<Tag>) -> Pwa {
        assert_eq!(tags.len(), points.len().saturating_sub(1));
        let mut f = Pwa { points, tags, overrides: Vec::new() };
        f.assert_well_formed();
        f.canonicalize();
        f
    }

    /// Constant function on `[lo, hi]`.
    pub fn constant(lo: Q, hi: Q, value: Ext) -> Pwa {
        assert!(lo <= hi);
        if lo == hi {
            Pwa::from_points(vec![(lo, value)])
        } else {
            Pwa::from_points(vec![(lo, value.clone()), (hi, value)])
        }
    }

    /// Affine function `x -> slope*x + intercept` on `[lo, hi]`.
    pub fn affine(lo: Q, hi: Q, slope: &Q, intercept: &Q) -> Pwa {
        assert!(lo <= hi);
        let ylo = Ext::Fin(slope * &lo + intercept);
        if lo == hi {
            return Pwa::from_points(vec![(lo, ylo)]);
        }
        let yhi = Ext::Fin(slope * &hi + intercept);
        Pwa::from_points(vec![(lo, ylo), (hi, yhi)])
    }

    /// Single point `(x, value)`.
    pub fn point(x: Q, value: Ext) -> Pwa {
        Pwa::from_points(vec![(x, value)])
    }

    /// Adds an isolated point value (used for point-guard contributions).
    pub fn with_override(mut self, x: Q, value: Ext, tag: Tag) -> Pwa {
        let (lo, hi) = self.domain();
        assert!(x >= lo && x <= hi, "override outside domain");
        self.overrides.retain(|(ox, _, _)| *ox != x);
        self.overrides.push((x, value, tag));
        self.overrides.sort_by(|a, b| a.0.cmp(&b.0));
        self.canonicalize();
        self
    }

    // ------------------------------------------------------------------
    // basic queries
    // ------------------------------------------------------------------

    pub fn domain(&self) -> (Q, Q) {
        (
            self.points.first().unwrap().0.clone(),
            self.points.last().unwrap().0.clone(),
        )
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        for i in 0..self.tags.len() {
            let (lo, lv) = self.points[i].clone();
            let (hi, hv) = self.points[i + 1].clone();
            if lo == hi {
                continue; // jump marker
            }
            out.push(Segment { lo, hi, lo_value: lv, hi_value: hv, tag: self.tags[i].clone() });
        }
        out
    }

    pub fn segment_count(&self) -> usize {
        self.segments().len()
    }

    pub fn breakpoints(&self) -> &[(Q, Ext)] {
        &self.points
    }

    pub fn overrides(&self) -> &[(Q, Ext, Tag)] {
        &self.overrides
    }

    /// The attained value at `x`.
    pub fn evaluate(&self, x: &Q) -> Result<Ext, PwaError> {
        let (lo, hi) = self.domain();
        if *x < lo || *x > hi {
            return Err(PwaError::OutsideDomain(x.clone(), lo, hi));
        }
        if let Some((_, v, _)) = self.overrides.iter().find(|(ox, _, _)| ox == x) {
            return Ok(v.clone());
        }
        Ok(self.body_value(x))
    }

    /// The default (override-free) value: the first entry at a breakpoint,
    /// otherwise the segment interior.
    fn body_value(&self, x: &Q) -> Ext {
        if let Some(i) = (0..self.points.len()).find(|&i| self.points[i].0 == *x) {
            return self.points[i].1.clone();
        }
        self.limit_value(x, false)
    }

    /// Provenance of the attained value at `x`: the override tag, else the
    /// tag of an adjacent segment whose closure attains the value there
    /// (preferring tagged segments, then the left one).
    pub fn tag_at(&self, x: &Q) -> Tag {
        if let Some((_, _, t)) = self.overrides.iter().find(|(ox, _, _)| ox == x) {
            return t.clone();
        }
        let v = match self.evaluate(x) {
            Ok(v) => v,
            Err(_) => return Tag::None,
        };
        let mut fallback = Tag::None;
        for (i, t) in self.tags.iter().enumerate() {
            let (ref x0, ref y0) = self.points[i];
            let (ref x1, ref y1) = self.points[i + 1];
            if x0 == x1 || x < x0 || x > x1 {
                continue;
            }
            let at_x = match seg_body(y0, y1) {
                Body::Line(a, b) => Ext::Fin(interp(x0, &a, x1, &b, x)),
                Body::Inf(plus) => {
                    if x == x0 && y0.is_finite() {
                        y0.clone()
                    } else if x == x1 && y1.is_finite() {
                        y1.clone()
                    } else if plus {
                        Ext::PlusInf
                    } else {
                        Ext::MinusInf
                    }
                }
            };
            if at_x != v {
                continue;
            }
            if !matches!(t, Tag::None) {
                return t.clone();
            }
            fallback = t.clone();
        }
        fallback
    }

    fn tag_at_segments(&self, x: &Q) -> Tag {
        let mut candidate = Tag::None;
        for (i, t) in self.tags.iter().enumerate() {
            let (ref x0, _) = self.points[i];
            let (ref x1, _) = self.points[i + 1];
            if x0 == x1 {
                continue;
            }
            if x0 < x && x <= x1 {
                return t.clone();
            }
            if x0 == x {
                candidate = t.clone();
            }
        }
        candidate
    }

    /// Left (`from_right = false`) or right limit at `x`. At the finite end
    /// of a segment with an infinite interior, the limit from the infinite
    /// side is that infinity.
    fn limit_value(&self, x: &Q, from_right: bool) -> Ext {
        let n = self.points.len();
        let idxs: Vec<usize> =
            (0..n).filter(|&i| self.points[i].0 == *x).collect();
        if !idxs.is_empty() {
            if from_right {
                let i = *idxs.last().unwrap();
                if i + 1 < n {
                    let (_, ref y0) = self.points[i];
                    let (_, ref y1) = self.points[i + 1];
                    return match seg_body(y0, y1) {
                        Body::Line(a, _) => Ext::Fin(a),
                        Body::Inf(true) => Ext::PlusInf,
                        Body::Inf(false) => Ext::MinusInf,
                    };
                }
                return self.points[i].1.clone();
            }
            let i = idxs[0];
            if i > 0 {
                let (_, ref y0) = self.points[i - 1];
                let (_, ref y1) = self.points[i];
                return match seg_body(y0, y1) {
                    Body::Line(_, b) => Ext::Fin(b),
                    Body::Inf(true) => Ext::PlusInf,
                    Body::Inf(false) => Ext::MinusInf,
                };
            }
            return self.points[i].1.clone();
        }
        // interior of a segment
        for i in 0..self.tags.len() {
            let (ref x0, ref y0) = self.points[i];
            let (ref x1, ref y1) = self.points[i + 1];
            if x0 < x && x < x1 {
                return match seg_body(y0, y1) {
                    Body::Line(a, b) => Ext::Fin(interp(x0, &a, x1, &b, x)),
                    Body::Inf(true) => Ext::PlusInf,
                    Body::Inf(false) => Ext::MinusInf,
                };
            }
        }
        unreachable!("limit_value: {x} not located in domain");
    }

    // ------------------------------------------------------------------
    // canonical form
    // ------------------------------------------------------------------

    fn assert_well_formed(&self) {
        for w in self.points.windows(2) {
            assert!(w[0].0 <= w[1].0, "breakpoints must be nondecreasing");
        }
        for i in 0..self.points.len().saturating_sub(2) {
            assert!(
                !(self.points[i].0 == self.points[i + 1].0
                    && self.points[i + 1].0 == self.points[i + 2].0),
                "at most two entries per breakpoint"
            );
        }
        for w in self.points.windows(2) {
            if w[0].0 == w[1].0 {
                assert!(
                    w[0].1.is_finite() && w[1].1.is_finite(),
                    "jumps must join finite limits"
                );
            }
            let plus = matches!(w[0].1, Ext::PlusInf) || matches!(w[1].1, Ext::PlusInf);
            let minus = matches!(w[0].1, Ext::MinusInf) || matches!(w[1].1, Ext::MinusInf);
            assert!(!(plus && minus), "segment joins opposite infinities");
        }
    }

    fn canonicalize(&mut self) {
        // drop zero-width "jumps" with equal limits
        let mut pts: Vec<(Q, Ext)> = Vec::with_capacity(self.points.len());
        let mut tags: Vec<Tag> = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            if let Some(last) = pts.last() {
                if last.0 == p.0 && last.1 == p.1 {
                    // merged; keep previous tag continuity
                    continue;
                }
            }
            if !pts.is_empty() {
                tags.push(self.tags[i - 1].clone());
            }
            pts.push(p.clone());
        }

        // normalize tags on zero-width and fully infinite segments; mixed
        // segments keep theirs (the tag describes the finite endpoint)
        for i in 0..tags.len() {
            let (ref x0, ref y0) = pts[i];
            let (ref x1, ref y1) = pts[i + 1];
            if x0 == x1 || (!y0.is_finite() && !y1.is_finite()) {
                tags[i] = Tag::None;
            }
        }

        // merge adjacent segments with identical body and tag
        let mut out_pts: Vec<(Q, Ext)> = Vec::with_capacity(pts.len());
        let mut out_tags: Vec<Tag> = Vec::new();
        for i in 0..pts.len() {
            out_pts.push(pts[i].clone());
            if i > 0 {
                out_tags.push(tags[i - 1].clone());
            }
            while out_pts.len() >= 3 {
                let n = out_pts.len();
                let (ref xa, ref ya) = out_pts[n - 3];
                let (ref xb, ref yb) = out_pts[n - 2];
                let (ref xc, ref yc) = out_pts[n - 1];
                if xa == xb || xb == xc {
                    break;
                }
                if out_tags[n - 3] != out_tags[n - 2] {
                    break;
                }
                // a middle breakpoint is redundant when the two segments
                // around it interpolate (or stay infinite) identically
                let same_tag = out_tags[n - 3] == out_tags[n - 2];
                let keep_tag = match (ya, yb, yc) {
                    (Ext::Fin(a), Ext::Fin(b), Ext::Fin(c)) => {
                        // collinear: (b-a)/(xb-xa) == (c-b)/(xc-xb)
                        if same_tag && (b - a) * (xc - xb) == (c - b) * (xb - xa) {
                            Some(out_tags[n - 3].clone())
                        } else {
                            None
                        }
                    }
                    (Ext::PlusInf, Ext::PlusInf, Ext::PlusInf)
                    | (Ext::MinusInf, Ext::MinusInf, Ext::MinusInf) => {
                        Some(Tag::None)
                    }
                    // an infinite run bordering a finite value absorbs its
                    // interior breakpoints; the mixed segment keeps the tag
                    // of the side that owns the finite endpoint
                    (Ext::Fin(_), Ext::PlusInf, Ext::PlusInf)
                    | (Ext::Fin(_), Ext::MinusInf, Ext::MinusInf)
                        if ya.is_finite() && yb == yc =>
                    {
                        Some(out_tags[n - 3].clone())
                    }
                    (Ext::PlusInf, Ext::PlusInf, Ext::Fin(_))
                    | (Ext::MinusInf, Ext::MinusInf, Ext::Fin(_))
                        if ya == yb =>
                    {
                        Some(out_tags[n - 2].clone())
                    }
                    _ => None,
                };
                if let Some(tag) = keep_tag {
                    out_pts.remove(n - 2);
                    out_tags.remove(n - 2);
                    out_tags[n - 3] = tag;
                } else {
                    break;
                }
            }
        }

        // a lone infinite breakpoint strictly between two finite ones sits
        // anywhere inside its region; pin it to the midpoint so the
        // canonical form is unique
        for i in 1..out_pts.len().saturating_sub(1) {
            if out_pts[i].1.is_finite()
                || !out_pts[i - 1].1.is_finite()
                || !out_pts[i + 1].1.is_finite()
            {
                continue;
            }
            let mid = Q::midpoint(&out_pts[i - 1].0, &out_pts[i + 1].0);
            out_pts[i].0 = mid;
        }

        self.points = out_pts;
        self.tags = out_tags;

        // isolated finite values amid a single infinity normalize to the
        // override encoding (unique canonical form, provenance kept)
        if self.points.len() > 1 {
            let mut converted: Vec<(Q, Ext, Tag)> = Vec::new();
            for i in 0..self.points.len() {
                let (ref x, ref v) = self.points[i];
                if !v.is_finite() {
                    continue;
                }
                let left = if i == 0 { None } else { Some(&self.points[i - 1].1) };
                let right = if i + 1 == self.points.len() {
                    None
                } else {
                    Some(&self.points[i + 1].1)
                };
                let inf_side = match (left, right) {
                    (Some(Ext::PlusInf), Some(Ext::PlusInf))
                    | (None, Some(Ext::PlusInf))
                    | (Some(Ext::PlusInf), None) => Some(Ext::PlusInf),
                    (Some(Ext::MinusInf), Some(Ext::MinusInf))
                    | (None, Some(Ext::MinusInf))
                    | (Some(Ext::MinusInf), None) => Some(Ext::MinusInf),
                    _ => None,
                };
                if let Some(inf) = inf_side {
                    let shadowed = self.overrides.iter().any(|(ox, _, _)| ox == x);
                    if !shadowed {
                        converted.push((x.clone(), v.clone(), self.tag_at_segments(x)));
                    }
                    self.points[i].1 = inf;
                }
            }
            for (x, v, t) in converted {
                self.overrides.push((x, v, t));
            }
            self.overrides.sort_by(|a, b| a.0.cmp(&b.0));
        }

        // drop overrides equal to the default value rule
        let body = Pwa { points: self.points.clone(), tags: self.tags.clone(), overrides: vec![] };
        self.overrides.retain(|(x, v, _)| body.body_value(x) != *v);
        self.overrides.sort_by(|a, b| a.0.cmp(&b.0));
        self.overrides.dedup_by(|a, b| a.0 == b.0);
    }

    /// Provenance-free canonical geometry; the representation compared by
    /// pointwise-equality properties.
    pub fn geometry(&self) -> Pwa {
        let mut g = self.clone();
        for t in g.tags.iter_mut() {
            *t = Tag::None;
        }
        for o in g.overrides.iter_mut() {
            o.2 = Tag::None;
        }
        g.canonicalize();
        g
    }

    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn validate(&self) -> Result<(), PwaError> {
        if self.points.is_empty() {
            return Err(PwaError::Invalid("no breakpoints".into()));
        }
        for w in self.points.windows(2) {
            if w[0].0 > w[1].0 {
                return Err(PwaError::Invalid("breakpoints not sorted".into()));
            }
            if w[0].0 == w[1].0 && (!w[0].1.is_finite() || !w[1].1.is_finite()) {
                return Err(PwaError::Invalid("jump with infinite limit".into()));
            }
            let plus = matches!(w[0].1, Ext::PlusInf) || matches!(w[1].1, Ext::PlusInf);
            let minus = matches!(w[0].1, Ext::MinusInf) || matches!(w[1].1, Ext::MinusInf);
            if plus && minus {
                return Err(PwaError::Invalid("segment joins opposite infinities".into()));
            }
        }
        if self.tags.len() != self.points.len() - 1 {
            return Err(PwaError::Invalid("tag count mismatch".into()));
        }
        for (x, _, _) in &self.overrides {
            let (lo, hi) = self.domain();
            if *x < lo || *x > hi {
                return Err(PwaError::Invalid("override outside domain".into()));
            }
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // restriction / concatenation / shifting
    // ------------------------------------------------------------------

    pub fn restrict(&self, u: &Q, v: &Q) -> Result<Pwa, PwaError> {
        let (lo, hi) = self.domain();
        if u > v || *u < lo || *v > hi {
            return Err(PwaError::OutsideDomain(u.clone(), lo, hi));
        }
        if u == v {
            let lim = self.limit_value(u, false);
            let val = self.evaluate(u)?;
            let mut f = Pwa::point(u.clone(), lim.clone());
            if val != lim {
                f = f.with_override(u.clone(), val, self.tag_at(u));
            }
            return Ok(f);
        }
        let mut pts: Vec<(Q, Ext)> = Vec::new();
        let mut tags: Vec<Tag> = Vec::new();
        let mut boundary_overrides: Vec<(Q, Ext, Tag)> = Vec::new();
        // left boundary: attained value, with a jump entry only when both
        // sides are finite (a finite value against an infinite right limit
        // is a mixed segment; an infinite value is an override)
        let val_u = self.evaluate(u)?;
        let rlim_u = self.limit_value(u, true);
        if val_u == rlim_u {
            pts.push((u.clone(), val_u));
        } else if val_u.is_finite() && rlim_u.is_finite() {
            pts.push((u.clone(), val_u));
            tags.push(Tag::None);
            pts.push((u.clone(), rlim_u));
        } else {
            // a value differing from an infinite right limit (or an infinite
            // value over a finite limit) lives as an override
            pts.push((u.clone(), rlim_u));
            boundary_overrides.push((u.clone(), val_u, self.tag_at(u)));
        }
        let tag_after_u = self.tag_covering(u, true);
        for i in 0..self.tags.len() {
            let (ref x0, _) = self.points[i];
            let (ref x1, ref y1) = self.points[i + 1];
            if x1 <= u || x0 >= v {
                continue;
            }
            // this segment overlaps (u, v)
            let end = if x1 < v { (x1.clone(), y1.clone()) } else { (v.clone(), self.limit_value(v, false)) };
            let tag = if pts.len() == 1 || pts.last().unwrap().0 == *u {
                tag_after_u.clone()
            } else {
                self.tags[i].clone()
            };
            if pts.last().unwrap().0 < end.0 || pts.last().unwrap().1 != end.1 {
                tags.push(tag);
                pts.push(end);
            }
            if *x1 >= *v {
                break;
            }
        }
        let mut f = Pwa { points: pts, tags, overrides: vec![] };
        f.overrides = boundary_overrides;
        // boundary value at v
        let val_v = self.evaluate(v)?;
        if f.limit_value(v, false) != val_v && f.overrides.iter().all(|(x, _, _)| x != v) {
            f.overrides.push((v.clone(), val_v, self.tag_at(v)));
        }
        for (x, ov, t) in &self.overrides {
            if x > u && x < v {
                f.overrides.push((x.clone(), ov.clone(), t.clone()));
            }
        }
        f.overrides.sort_by(|a, b| a.0.cmp(&b.0));
        f.assert_well_formed();
        f.canonicalize();
        Ok(f)
    }

    /// Tag of the segment starting at `x` going right (or left).
    fn tag_covering(&self, x: &Q, to_right: bool) -> Tag {
        for i in 0..self.tags.len() {
            let (ref x0, _) = self.points[i];
            let (ref x1, _) = self.points[i + 1];
            if x0 == x1 {
                continue;
            }
            if to_right && x0 <= x && x < x1 {
                return self.tags[i].clone();
            }
            if !to_right && x0 < x && x <= x1 {
                return self.tags[i].clone();
            }
        }
        Tag::None
    }

    /// Joins `self` on `[a, m]` with `g` on `[m, b]`; the attained values at
    /// `m` must agree.
    pub fn concat(&self, g: &Pwa) -> Result<Pwa, PwaError> {
        let (_, m1) = self.domain();
        let (m2, _) = g.domain();
        if m1 != m2 {
            let (glo, ghi) = g.domain();
            let (lo, hi) = self.domain();
            return Err(PwaError::DomainMismatch(lo, hi, glo, ghi));
        }
        let va = self.evaluate(&m1)?;
        let vb = g.evaluate(&m1)?;
        if va != vb {
            return Err(PwaError::ContinuityMismatch(m1, va, vb));
        }
        let mut pts = self.points.clone();
        let mut tags = self.tags.clone();
        let mut overrides = self.overrides.clone();
        // junction: left limit from self, right limit from g; value = va
        let left_lim = self.limit_value(&m1, false);
        let right_lim = g.limit_value(&m1, true);
        // drop self's trailing entries at m and g's leading entries at m
        while pts.last().map(|p| p.0 == m1).unwrap_or(false) {
            pts.pop();
            tags.pop();
        }
        overrides.retain(|(x, _, _)| *x != m1);
        if left_lim.is_finite() && right_lim.is_finite() && left_lim != right_lim {
            if !pts.is_empty() {
                tags.push(self.tag_covering(&m1, false));
            }
            pts.push((m1.clone(), left_lim.clone()));
            tags.push(Tag::None);
            pts.push((m1.clone(), right_lim.clone()));
        } else {
            // continuous or infinite junction: one entry carries the value;
            // infinite interiors keep a marker breakpoint on their side
            let entry = if left_lim.is_finite() {
                left_lim.clone()
            } else if right_lim.is_finite() {
                right_lim.clone()
            } else {
                left_lim.clone()
            };
            if !left_lim.is_finite() && entry.is_finite() {
                if let Some(last) = pts.last() {
                    if last.1.is_finite() {
                        let mid = Q::midpoint(&last.0, &m1);
                        tags.push(Tag::None);
                        pts.push((mid, left_lim.clone()));
                    }
                }
            }
            if !pts.is_empty() {
                tags.push(self.tag_covering(&m1, false));
            }
            pts.push((m1.clone(), entry.clone()));
            if !right_lim.is_finite() && entry.is_finite() {
                if let Some(next) = g.points.iter().find(|p| p.0 > m1) {
                    if next.1.is_finite() {
                        let mid = Q::midpoint(&m1, &next.0);
                        tags.push(Tag::None);
                        pts.push((mid, right_lim.clone()));
                    }
                }
            }
        }
        if va != left_lim || (!left_lim.is_finite() && va != right_lim) {
            if va != *pts.last().map(|p| &p.1).unwrap() {
                overrides.push((m1.clone(), va, self.tag_at(&m1)));
            }
        }
        let g_skip = g.points.iter().take_while(|p| p.0 == m1).count();
        for (i, p) in g.points.iter().enumerate().skip(g_skip) {
            tags.push(if i == g_skip {
                g.tag_covering(&m1, true)
            } else {
                g.tags[i - 1].clone()
            });
            pts.push(p.clone());
        }
        for o in &g.overrides {
            if o.0 != m1 {
                overrides.push(o.clone());
            }
        }
        overrides.sort_by(|a, b| a.0.cmp(&b.0));
        let mut f = Pwa { points: pts, tags, overrides };
        f.assert_well_formed();
        f.canonicalize();
        Ok(f)
    }

    /// `x -> f(x + d) + price * d` on `[a, b - d]`: the cost of waiting
    /// exactly `d` at a location with the given price, then continuing per
    /// `f`.
    pub fn shift_by_delay(&self, d: &Q, price: &Q) -> Result<Pwa, PwaError> {
        let (a, b) = self.domain();
        let width = &b - &a;
        if d.is_negative() || *d > width {
            return Err(PwaError::DelayTooLong(d.clone(), width));
        }
        if d.is_zero() && price.is_zero() {
            return Ok(self.clone());
        }
        let add = price * d;
        let hi = &b - d;
        let restricted = self.restrict(&(&a + d), &b)?;
        let mut pts = Vec::with_capacity(restricted.points.len());
        for (x, v) in &restricted.points {
            pts.push((x - d, v.add_q(&add)));
        }
        let overrides = restricted
            .overrides
            .iter()
            .map(|(x, v, t)| (x - d, v.add_q(&add), t.clone()))
            .collect();
        let mut f = Pwa { points: pts, tags: restricted.tags.clone(), overrides };
        debug_assert!(f.domain() == (a, hi));
        f.assert_well_formed();
        f.canonicalize();
        Ok(f)
    }

    /// `x -> f(x) + slope * x + intercept` (infinities absorb).
    pub fn add_line(&self, slope: &Q, intercept: &Q) -> Pwa {
        let shift = |x: &Q, v: &Ext| v.add_q(&(slope * x + intercept));
        let pts = self.points.iter().map(|(x, v)| (x.clone(), shift(x, v))).collect();
        let overrides =
            self.overrides.iter().map(|(x, v, t)| (x.clone(), shift(x, v), t.clone())).collect();
        let mut f = Pwa { points: pts, tags: self.tags.clone(), overrides };
        f.canonicalize();
        f
    }

    /// Extends the domain to `[lo, hi]` by padding with `fill` on the new
    /// parts (used to align guard-restricted contributions).
    pub fn extend(&self, lo: &Q, hi: &Q, fill: &Ext) -> Pwa {
        let (a, b) = self.domain();
        assert!(*lo <= a && *hi >= b);
        let mut pts: Vec<(Q, Ext)> = Vec::new();
        let mut tags: Vec<Tag> = Vec::new();
        let mut overrides = self.overrides.clone();
        if *lo < a {
            pts.push((lo.clone(), fill.clone()));
            // pad up to the left edge of the original domain
            match (&self.points[0].1, fill) {
                (v, f) if v == f => {
                    // merge straight into the body
                }
                (Ext::Fin(v0), Ext::PlusInf) | (Ext::Fin(v0), Ext::MinusInf) => {
                    // infinite on [lo, a), finite value at a: mixed segment
                    let _ = v0;
                }
                (Ext::PlusInf, Ext::Fin(_)) | (Ext::MinusInf, Ext::Fin(_)) => {}
                (Ext::Fin(_), Ext::Fin(_)) => {
                    // finite fill joining a finite body: jump at a
                    tags.push(Tag::None);
                    pts.push((a.clone(), fill.clone()));
                    overrides.retain(|(x, _, _)| *x != a);
                    if self.evaluate(&a).unwrap() != self.points[0].1 {
                        // keep the original attained value
                    }
                    overrides.push((a.clone(), self.evaluate(&a).unwrap(), self.tag_at(&a)));
                    // jump entry: left limit = fill, right limit = body start
                }
                _ => {}
            }
        }
        let base = pts.len();
        for (i, p) in self.points.iter().enumerate() {
            if base > 0 && i == 0 {
                tags.push(Tag::None);
            }
            if i > 0 {
                tags.push(self.tags[i - 1].clone());
            }
            pts.push(p.clone());
        }
        if *hi > b {
            tags.push(Tag::None);
            if self.points.last().unwrap().1.is_finite() && fill.is_finite() {
                // finite fill after a finite body: jump at b
                pts.push((b.clone(), fill.clone()));
                tags.push(Tag::None);
            }
            pts.push((hi.clone(), fill.clone()));
        }
        overrides.sort_by(|a, b| a.0.cmp(&b.0));
        let mut f = Pwa { points: pts, tags, overrides };
        f.assert_well_formed();
        f.canonicalize();
        f
    }

    // ------------------------------------------------------------------
    // envelopes
    // ------------------------------------------------------------------

    /// Pointwise minimum of the two, keeping whichever input's tag attains
    /// the value (ties prefer `self`).
    pub fn min_with(&self, g: &Pwa) -> Result<Pwa, PwaError> {
        envelope2(self, g, true)
    }

    pub fn max_with(&self, g: &Pwa) -> Result<Pwa, PwaError> {
        envelope2(self, g, false)
    }

    /// Refines the breakpoint set so that every `x` in `xs` is a breakpoint.
    pub fn with_breakpoints(&self, xs: &[Q]) -> Pwa {
        let (lo, hi) = self.domain();
        let mut f = self.clone();
        for x in xs {
            if *x <= lo || *x >= hi {
                continue;
            }
            if f.points.iter().any(|(px, _)| px == x) {
                continue;
            }
            let idx = f
                .points
                .iter()
                .position(|(px, _)| px > x)
                .expect("interior point has a successor");
            let v = f.limit_value(x, false);
            f.points.insert(idx, (x.clone(), v));
            f.tags.insert(idx - 1, f.tags[idx - 1].clone());
        }
        f
    }
}

impl fmt::Debug for Pwa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pwa[")?;
        for (i, (x, v)) in self.points.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "({x},{v})")?;
        }
        for (x, v, _) in &self.overrides {
            write!(f, " @({x},{v})")?;
        }
        write!(f, "]")
    }
}

/// Pointwise minimum of a nonempty family on a common domain; output
/// segments carry `Tag::Source(i)` for an input attaining the minimum.
pub fn interior(fs: &[Pwa]) -> Result<Pwa, PwaError> {
    envelope_indexed(fs, true)
}

/// Pointwise maximum; dual of [`interior`].
pub fn exterior(fs: &[Pwa]) -> Result<Pwa, PwaError> {
    envelope_indexed(fs, false)
}

fn envelope_indexed(fs: &[Pwa], min: bool) -> Result<Pwa, PwaError> {
    if fs.is_empty() {
        return Err(PwaError::EmptyList);
    }
    let dom = fs[0].domain();
    for f in fs.iter().skip(1) {
        if f.domain() != dom {
            let (a, b) = f.domain();
            return Err(PwaError::DomainMismatch(dom.0, dom.1, a, b));
        }
    }
    let mut acc = retag_source(&fs[0], 0);
    for (i, f) in fs.iter().enumerate().skip(1) {
        acc = envelope2(&acc, &retag_source(f, i), min)?;
    }
    Ok(acc)
}

/// Pointwise envelope of a family that already carries meaningful tags.
pub fn envelope_tagged(fs: &[Pwa], min: bool) -> Result<Pwa, PwaError> {
    if fs.is_empty() {
        return Err(PwaError::EmptyList);
    }
    let mut acc = fs[0].clone();
    for f in fs.iter().skip(1) {
        acc = envelope2(&acc, f, min)?;
    }
    Ok(acc)
}

fn retag_source(f: &Pwa, idx: usize) -> Pwa {
    let mut g = f.clone();
    for (i, t) in g.tags.iter_mut().enumerate() {
        let (ref x0, ref y0) = g.points[i];
        let (ref x1, ref y1) = g.points[i + 1];
        if x0 < x1 && (y0.is_finite() || y1.is_finite()) {
            *t = Tag::Source(idx);
        }
    }
    for o in g.overrides.iter_mut() {
        o.2 = Tag::Source(idx);
    }
    g
}

/// Core two-function envelope on the common refinement.
fn envelope2(f: &Pwa, g: &Pwa, min: bool) -> Result<Pwa, PwaError> {
    let dom_f = f.domain();
    if dom_f != g.domain() {
        let (a, b) = g.domain();
        return Err(PwaError::DomainMismatch(dom_f.0, dom_f.1, a, b));
    }
    let better = |a: &Ext, b: &Ext| if min { a <= b } else { a >= b };
    let pick = |a: Ext, b: Ext| if min { a.min(b) } else { a.max(b) };

    // refinement grid: all xs of both functions and their overrides
    let mut xs: Vec<Q> = Vec::new();
    for (x, _) in f.points.iter().chain(g.points.iter()) {
        xs.push(x.clone());
    }
    for (x, _, _) in f.overrides.iter().chain(g.overrides.iter()) {
        xs.push(x.clone());
    }
    xs.sort();
    xs.dedup();

    if xs.len() == 1 {
        let x = xs.pop().unwrap();
        let va = f.evaluate(&x)?;
        let vb = g.evaluate(&x)?;
        let (v, t) = if better(&va, &vb) { (va, f.tag_at(&x)) } else { (vb, g.tag_at(&x)) };
        let mut out = Pwa::point(x.clone(), v.clone());
        out.tags = vec![];
        let _ = t;
        return Ok(out);
    }

    // assemble per-cell winning pieces: (x0, v0, x1, v1, tag)
    struct Piece {
        x0: Q,
        v0: Ext,
        x1: Q,
        v1: Ext,
        tag: Tag,
    }
    let mut pieces: Vec<Piece> = Vec::new();
    for w in xs.windows(2) {
        let (u, v) = (&w[0], &w[1]);
        let fu = f.limit_value(u, true);
        let fv = f.limit_value(v, false);
        let gu = g.limit_value(u, true);
        let gv = g.limit_value(v, false);
        let bf = seg_body(&fu, &fv);
        let bg = seg_body(&gu, &gv);
        let tf = f.tag_covering(u, true);
        let tg = g.tag_covering(u, true);
        match (bf, bg) {
            (Body::Line(a0, a1), Body::Line(b0, b1)) => {
                let d0 = &a0 - &b0;
                let d1 = &a1 - &b1;
                let f_wins_0 = if min { d0 <= Q::zero() } else { d0 >= Q::zero() };
                let f_wins_1 = if min { d1 <= Q::zero() } else { d1 >= Q::zero() };
                if f_wins_0 == f_wins_1 || d0.is_zero() || d1.is_zero() {
                    // no interior crossing (touching at an endpoint is fine)
                    let f_wins = if d0.is_zero() { f_wins_1 } else { f_wins_0 };
                    let (v0, v1, tag) = if f_wins {
                        (Ext::Fin(a0), Ext::Fin(a1), tf)
                    } else {
                        (Ext::Fin(b0), Ext::Fin(b1), tg)
                    };
                    pieces.push(Piece { x0: u.clone(), v0, x1: v.clone(), v1, tag });
                } else {
                    // one interior crossing
                    let t = &d0 / &(&d0 - &d1); // in (0,1)
                    let xc = u + &(&t * &(v - u));
                    let yc = interp(u, &a0, v, &a1, &xc);
                    let (first, second) = if f_wins_0 {
                        ((a0, tf), (b1, tg))
                    } else {
                        ((b0, tg), (a1, tf))
                    };
                    pieces.push(Piece {
                        x0: u.clone(),
                        v0: Ext::Fin(first.0),
                        x1: xc.clone(),
                        v1: Ext::Fin(yc.clone()),
                        tag: first.1,
                    });
                    pieces.push(Piece {
                        x0: xc,
                        v0: Ext::Fin(yc),
                        x1: v.clone(),
                        v1: Ext::Fin(second.0),
                        tag: second.1,
                    });
                }
            }
            (bf, bg) => {
                // at least one side is an infinity on the open interior
                let f_inf = matches!(bf, Body::Inf(_));
                let g_inf = matches!(bg, Body::Inf(_));
                let f_wins = match (&bf, &bg) {
                    (Body::Inf(fp), Body::Inf(gp)) => {
                        if min {
                            !fp || *gp
                        } else {
                            *fp || !gp
                        }
                    }
                    (Body::Inf(fp), Body::Line(..)) => {
                        if min {
                            !*fp
                        } else {
                            *fp
                        }
                    }
                    (Body::Line(..), Body::Inf(gp)) => {
                        if min {
                            *gp
                        } else {
                            !*gp
                        }
                    }
                    _ => unreachable!(),
                };
                let _ = (f_inf, g_inf);
                let (v0, v1, tag) = if f_wins { (fu, fv, tf) } else { (gu, gv, tg) };
                pieces.push(Piece { x0: u.clone(), v0, x1: v.clone(), v1, tag });
            }
        }
    }

    // stitch pieces, fixing junction limits and attained values
    let mut pts: Vec<(Q, Ext)> = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    let mut overrides: Vec<(Q, Ext, Tag)> = Vec::new();

    let push_junction = |pts: &mut Vec<(Q, Ext)>, tags: &mut Vec<Tag>, x: &Q, left: Option<Ext>, right: Option<Ext>| {
        match (left, right) {
            (Some(l), Some(r)) => {
                if l == r {
                    pts.push((x.clone(), l));
                } else if l.is_finite() && r.is_finite() {
                    pts.push((x.clone(), l));
                    tags.push(Tag::None);
                    pts.push((x.clone(), r));
                } else {
                    // an infinite side: a single entry; the finite side
                    // interpolates into a mixed segment automatically
                    let entry = if l.is_finite() { l } else { r };
                    pts.push((x.clone(), entry));
                }
            }
            (Some(l), None) => pts.push((x.clone(), l)),
            (None, Some(r)) => pts.push((x.clone(), r)),
            (None, None) => unreachable!(),
        }
    };

    for (i, p) in pieces.iter().enumerate() {
        if i == 0 {
            push_junction(&mut pts, &mut tags, &p.x0, None, Some(p.v0.clone()));
        }
        // an infinite piece needs an interior breakpoint of its own when
        // the junction entries on either side are finite
        if !p.v0.is_finite() && p.v0 == p.v1 && p.x0 < p.x1 {
            let mid = Q::midpoint(&p.x0, &p.x1);
            tags.push(Tag::None);
            pts.push((mid, p.v0.clone()));
        }
        tags.push(p.tag.clone());
        let right_next = pieces.get(i + 1).map(|n| n.v0.clone());
        push_junction(&mut pts, &mut tags, &p.x1, Some(p.v1.clone()), right_next);
    }

    // mixed-segment sanity: a jump entry pair with an infinity is impossible
    // by push_junction; opposite-infinity adjacency is ruled out by the
    // winner logic (the finite side wins against the losing infinity).

    let mut out = Pwa { points: pts, tags, overrides: vec![] };
    out.assert_well_formed();

    // attained values at every junction (overrides where they differ)
    for x in &xs {
        let va = f.evaluate(x)?;
        let vb = g.evaluate(x)?;
        let (v, t) = if better(&va, &vb) {
            (va.clone(), f.tag_at(x))
        } else {
            (vb.clone(), g.tag_at(x))
        };
        let _ = pick(va, vb);
        let default = out.limit_value(x, false);
        if v != default {
            overrides.push((x.clone(), v, t));
        }
    }
    out.overrides = overrides;
    out.canonicalize();
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

/// Sense of a waiting envelope: player 1 minimizes, player 2 maximizes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sense {
    Min,
    Max,
}

/// One-shot waiting envelope over an unbounded wait within `[lo, hi]`.
///
/// For `Sense::Min` this is the selective-replacement pass: on the window
/// the result is `min over v in [x, hi] of price*(v - x) + f(v)` (the best
/// cost achievable by waiting at a location of the given price and then
/// following `f`); outside the window `f` is returned unchanged. Segments
/// produced by waiting carry `Tag::Delay`. `Sense::Max` is the dual used for
/// maximizing locations with unrestricted dwell.
pub fn waiting_envelope(f: &Pwa, price: &Q, lo: &Q, hi: &Q, sense: Sense) -> Result<Pwa, PwaError> {
    let (a, b) = f.domain();
    if *lo < a || *hi > b || lo > hi {
        return Err(PwaError::OutsideDomain(lo.clone(), a, b));
    }
    assert!(*lo == a, "waiting window must start at the domain edge");
    if lo == hi {
        return Ok(f.clone());
    }

    let min = sense == Sense::Min;
    let better = |x: &Ext, y: &Ext| if min { x < y } else { x > y };

    // phi(v) = price*v + f(v) on [lo, hi], with point values as breakpoints
    let fw = f.restrict(lo, hi)?;
    let override_xs: Vec<Q> = fw.overrides.iter().map(|(x, _, _)| x.clone()).collect();
    let phi = fw.add_line(price, &Q::zero()).with_breakpoints(&override_xs);

    // sweep right-to-left, maintaining the running best of phi over [x, hi];
    // the running best tracks both attained values and the one-sided limits
    // reachable by waiting into an approaching point
    #[derive(Clone)]
    struct Best {
        value: Ext,
        at: Q,
        via: Tag,
    }
    let mut best = Best { value: phi.evaluate(hi)?, at: hi.clone(), via: phi.tag_at(hi) };
    let fold = |best: &mut Best, value: Ext, at: &Q, via: Tag| {
        if better(&value, &best.value) || (value == best.value && *at < best.at) {
            *best = Best { value, at: at.clone(), via };
        }
    };

    // output pieces right-to-left: (x0, v0, x1, v1, tag)
    let mut rev: Vec<(Q, Ext, Q, Ext, Tag)> = Vec::new();
    let n = phi.points.len();
    let mut emit = |x0: Q, v0: Ext, x1: Q, v1: Ext, tag: Tag| {
        if x0 == x1 && v0 == v1 {
            return;
        }
        rev.push((x0, v0, x1, v1, tag));
    };
    let line_val = |best: &Best, x: &Q| -> Ext { best.value.add_q(&(-(price * x))) };
    let delay_tag = |best: &Best| Tag::Delay { until: best.at.clone(), via: tag_via(&best.via) };

    for i in (0..n - 1).rev() {
        let (x0, y0) = phi.points[i].clone();
        let (x1, y1) = phi.points[i + 1].clone();
        if x0 == x1 {
            continue; // jump marker; limits are folded by the neighbours
        }
        let ftag = phi.tags[i].clone();
        match seg_body(&y0, &y1) {
            Body::Inf(plus) => {
                let inf = if plus { Ext::PlusInf } else { Ext::MinusInf };
                let absorbing = if min { !plus } else { plus };
                if absorbing {
                    best = Best { value: inf.clone(), at: x0.clone(), via: Tag::None };
                    emit(x0.clone(), inf.clone(), x1, inf, Tag::None);
                } else if best.value.is_finite() {
                    // waiting straight across the unavailable region
                    emit(
                        x0.clone(),
                        line_val(&best, &x0),
                        x1.clone(),
                        line_val(&best, &x1),
                        delay_tag(&best),
                    );
                } else {
                    emit(x0.clone(), inf.clone(), x1, inf, Tag::None);
                }
            }
            Body::Line(a0, a1) => {
                // the right-end limit a1 is reachable by waiting into x1
                fold(&mut best, Ext::Fin(a1.clone()), &x1, ftag.clone());
                match best.value.clone() {
                    v if !v.is_finite() => {
                        let absorbing = if min { v == Ext::MinusInf } else { v == Ext::PlusInf };
                        if absorbing {
                            emit(x0.clone(), v.clone(), x1, v, Tag::None);
                        } else {
                            // neutral best: follow phi entirely
                            emit(
                                x0.clone(),
                                Ext::Fin(&a0 - &(price * &x0)),
                                x1.clone(),
                                Ext::Fin(&a1 - &(price * &x1)),
                                ftag.clone(),
                            );
                        }
                    }
                    Ext::Fin(bv) => {
                        let w0 = if min { a0 <= bv } else { a0 >= bv };
                        if w0 && a0 != bv {
                            // crossing inside: right part waits, left follows phi
                            let t = &(&bv - &a1) / &(&a0 - &a1);
                            let xc = &x1 + &(&t * &(&x0 - &x1));
                            debug_assert!(x0 <= xc && xc <= x1);
                            emit(
                                xc.clone(),
                                line_val(&best, &xc),
                                x1.clone(),
                                line_val(&best, &x1),
                                delay_tag(&best),
                            );
                            emit(
                                x0.clone(),
                                Ext::Fin(&a0 - &(price * &x0)),
                                xc.clone(),
                                Ext::Fin(&bv - &(price * &xc)),
                                ftag.clone(),
                            );
                        } else if w0 {
                            // phi matches the best at the left end: follow phi
                            // across (ties avoid provenance churn)
                            emit(
                                x0.clone(),
                                Ext::Fin(&a0 - &(price * &x0)),
                                x1.clone(),
                                line_val(&best, &x1),
                                ftag.clone(),
                            );
                        } else {
                            emit(
                                x0.clone(),
                                line_val(&best, &x0),
                                x1.clone(),
                                line_val(&best, &x1),
                                delay_tag(&best),
                            );
                        }
                    }
                    _ => unreachable!(),
                }
                // the left-end limit stays reachable from everywhere leftward
                fold(&mut best, Ext::Fin(a0), &x0, ftag);
            }
        }
        // attained value at x0 (override or jump value)
        let attained = phi.evaluate(&x0)?;
        fold(&mut best, attained, &x0, phi.tag_at(&x0));
    }

    // assemble left-to-right
    rev.reverse();
    let mut pts: Vec<(Q, Ext)> = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    for (x0, v0, x1, v1, tag) in rev {
        if pts.is_empty() {
            pts.push((x0.clone(), v0.clone()));
        } else {
            let last = pts.last().unwrap().clone();
            if last.0 == x0 && last.1 != v0 {
                if last.1.is_finite() && v0.is_finite() {
                    tags.push(Tag::None);
                    pts.push((x0.clone(), v0.clone()));
                } else if !v0.is_finite() {
                    // finite value bordering an unavailable region: mixed
                    // segment forms from the piece's far endpoint
                } else {
                    // an infinite left limit next to a finite right limit
                    // cannot occur: the running best is monotone
                    debug_assert!(false, "non-monotone junction at {x0}");
                }
            }
        }
        tags.push(tag);
        pts.push((x1.clone(), v1.clone()));
    }
    let mut env = Pwa { points: pts, tags, overrides: vec![] };
    env.assert_well_formed();
    env.canonicalize();

    // attained values: the envelope includes v = x, so the value at a point
    // candidate is best-of(phi attained at x minus price*x, body)
    let mut overrides: Vec<(Q, Ext, Tag)> = Vec::new();
    for (x, _, _) in phi.overrides.iter() {
        let cand = phi.evaluate(x)?.add_q(&(-(price * x)));
        let body = env.evaluate(x)?;
        if better(&cand, &body) && cand.is_finite() {
            overrides.push((x.clone(), cand, phi.tag_at(x)));
        }
    }
    for (x, v, t) in overrides {
        env = env.with_override(x, v, t);
    }
    // the attained value at the window start includes the final best
    let start_val = line_val(&best, lo);
    if better(&start_val, &env.evaluate(lo)?) && start_val.is_finite() {
        let t = if best.at == *lo { phi.tag_at(lo) } else { delay_tag(&best) };
        env = env.with_override(lo.clone(), start_val, t);
    }

    if *hi < b {
        let rest = f.restrict(hi, &b)?;
        env = env.concat(&rest)?;
    }
    debug_assert!(env.validate().is_ok());
    Ok(env)
}

fn tag_via(t: &Tag) -> usize {
    match t {
        Tag::Source(i) => *i,
        Tag::Delay { via, .. } | Tag::DelayFor { via, .. } => *via,
        Tag::None => usize::MAX,
    }
}

/// Selective replacement: the minimizing waiting envelope with the given
/// price over `window`, per the right-to-left sweep that replaces segments
/// of slope steeper than `-price` with waiting lines through their right
/// endpoints.
pub fn selective_replace(f: &Pwa, price: &Q, window: (&Q, &Q)) -> Result<Pwa, PwaError> {
    waiting_envelope(f, price, window.0, window.1, Sense::Min)
}

/// Maximizing waiting envelope with a bounded wait: on `[lo, hi]` the result
/// is `max over v in [x, min(x + max_wait, hi)] of price*(v-x) + f(v)`.
///
/// The maximum over a window is attained at the window ends or at a
/// breakpoint of `f`, so the result is the upper envelope of: `f` itself
/// (leave immediately), the `max_wait`-shifted copy (wait the full bound),
/// and one waiting line per breakpoint (wait exactly until it).
pub fn bounded_wait_max(f: &Pwa, price: &Q, max_wait: &Q, lo: &Q, hi: &Q) -> Result<Pwa, PwaError> {
    let (a, b) = f.domain();
    assert!(*lo == a && *hi <= b && !max_wait.is_negative());
    if max_wait.is_zero() || lo == hi {
        return Ok(f.clone());
    }
    let fw = f.restrict(lo, hi)?;
    let mut family: Vec<Pwa> = vec![fw.clone()];
    // wait the full bound
    if *max_wait < (hi - lo) {
        let shifted = fw.shift_by_delay(max_wait, price)?;
        let shifted = retag_delay_for(&shifted, max_wait);
        family.push(shifted.extend(lo, hi, &Ext::MinusInf));
    }
    // wait exactly to a breakpoint / attained point
    let mut targets: Vec<Q> = fw.points.iter().map(|(x, _)| x.clone()).collect();
    targets.extend(fw.overrides.iter().map(|(x, _, _)| x.clone()));
    targets.sort();
    targets.dedup();
    for t in targets {
        // the supremum at a target uses the attained value and both limits
        // (one-sided limits are reachable by waiting arbitrarily close)
        let attained = fw.evaluate(&t)?;
        let llim = fw.limit_value(&t, false);
        let rlim = fw.limit_value(&t, true);
        let v = attained.clone().max(llim.clone()).max(rlim.clone());
        let start = (&t - max_wait).max(lo.clone());
        if !v.is_finite() {
            if v == Ext::PlusInf && start < t {
                // an available +inf exit dominates everything it can reach
                family.push(
                    Pwa::constant(start.clone(), t.clone(), Ext::PlusInf)
                        .extend(lo, hi, &Ext::MinusInf),
                );
            }
            continue;
        }
        let y = v.as_fin().unwrap();
        // line of slope -price through (t, y)
        let intercept = y + &(price * &t);
        let piece = if start == t {
            Pwa::point(t.clone(), v.clone())
        } else {
            Pwa::affine(start.clone(), t.clone(), &-price, &intercept)
        };
        let via = if v == attained {
            tag_via(&fw.tag_at(&t))
        } else if v == rlim {
            tag_via(&fw.tag_covering(&t, true))
        } else {
            tag_via(&fw.tag_covering(&t, false))
        };
        let tagged = retag_all(&piece, Tag::Delay { until: t.clone(), via });
        family.push(tagged.extend(lo, hi, &Ext::MinusInf));
    }
    let mut env = envelope_tagged(&family, false)?;
    if *hi < b {
        env = env.concat(&f.restrict(hi, &b)?)?;
    }
    debug_assert!(env.validate().is_ok());
    Ok(env)
}

fn retag_delay_for(f: &Pwa, dur: &Q) -> Pwa {
    let mut g = f.clone();
    for (i, t) in g.tags.iter_mut().enumerate() {
        let (ref x0, ref y0) = g.points[i];
        let (ref x1, ref y1) = g.points[i + 1];
        if x0 < x1 && (y0.is_finite() || y1.is_finite()) {
            let via = tag_via(t);
            *t = Tag::DelayFor { dur: dur.clone(), via };
        }
    }
    for o in g.overrides.iter_mut() {
        let via = tag_via(&o.2);
        o.2 = Tag::DelayFor { dur: dur.clone(), via };
    }
    g
}

fn retag_all(f: &Pwa, tag: Tag) -> Pwa {
    let mut g = f.clone();
    for (i, t) in g.tags.iter_mut().enumerate() {
        let (ref x0, ref y0) = g.points[i];
        let (ref x1, ref y1) = g.points[i + 1];
        if x0 < x1 && (y0.is_finite() || y1.is_finite()) {
            *t = tag.clone();
        }
    }
    for o in g.overrides.iter_mut() {
        o.2 = tag.clone();
    }
    g
}

/// Replaces every occurrence of the given infinity (breakpoints and
/// overrides) by `with`, canonicalizing afterwards.
pub fn replace_inf(f: &Pwa, plus: bool, with: &Ext) -> Pwa {
    let target = if plus { Ext::PlusInf } else { Ext::MinusInf };
    let map = |v: &Ext| if *v == target { with.clone() } else { v.clone() };
    let pts: Vec<(Q, Ext)> = f.points.iter().map(|(x, v)| (x.clone(), map(v))).collect();
    let overrides = f
        .overrides
        .iter()
        .map(|(x, v, t)| (x.clone(), map(v), t.clone()))
        .filter(|(_, v, _)| *v != target)
        .collect();
    let mut g = Pwa { points: pts, tags: f.tags.clone(), overrides };
    // collapse accidental duplicate entries created by the mapping
    let mut i = 0;
    while i + 1 < g.points.len() {
        if g.points[i] == g.points[i + 1] {
            g.points.remove(i + 1);
            g.tags.remove(i);
        } else {
            i += 1;
        }
    }
    g.assert_well_formed();
    g.canonicalize();
    g
}

/// A one-dimensional interval with independent endpoint strictness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    pub lo: Q,
    pub lo_strict: bool,
    pub hi: Q,
    pub hi_strict: bool,
}

impl Span {
    pub fn closed(lo: Q, hi: Q) -> Span {
        Span { lo, lo_strict: false, hi, hi_strict: false }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_strict || self.hi_strict))
    }

    pub fn contains(&self, x: &Q) -> bool {
        let lo_ok = if self.lo_strict { *x > self.lo } else { *x >= self.lo };
        let hi_ok = if self.hi_strict { *x < self.hi } else { *x <= self.hi };
        lo_ok && hi_ok
    }

    /// `x` such that `x + d` lies in the span for some `d` in
    /// `[dmin, dmax]` (`dmax = None` means unbounded).
    pub fn reach_back(&self, dmin: &Q, dmax: Option<&Q>, floor: &Q) -> Span {
        let (lo, lo_strict) = match dmax {
            None => (floor.clone(), false),
            Some(w) => (&self.lo - w, self.lo_strict),
        };
        Span { lo, lo_strict, hi: &self.hi - dmin, hi_strict: self.hi_strict }
    }
}

/// Forces the function to the given infinity on each span (respecting the
/// spans' endpoint strictness); used to overlay regions where a player can
/// force an infinite outcome.
pub fn overlay_inf(f: &Pwa, spans: &[Span], plus: bool) -> Pwa {
    let inf = if plus { Ext::PlusInf } else { Ext::MinusInf };
    let (lo, hi) = f.domain();
    let mut sorted: Vec<Span> = spans
        .iter()
        .filter(|s| s.hi >= lo && s.lo <= hi)
        .map(|s| {
            let mut c = s.clone();
            if c.lo < lo {
                c.lo = lo.clone();
                c.lo_strict = false;
            }
            if c.hi > hi {
                c.hi = hi.clone();
                c.hi_strict = false;
            }
            c
        })
        .filter(|s| !s.is_empty())
        .collect();
    sorted.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.lo_strict.cmp(&b.lo_strict)));
    // merge overlapping spans (strictness: keep the weaker bound)
    let mut merged: Vec<Span> = Vec::new();
    for s in sorted {
        if let Some(last) = merged.last_mut() {
            if s.lo < last.hi || (s.lo == last.hi && !(s.lo_strict && last.hi_strict)) {
                if s.hi > last.hi || (s.hi == last.hi && !s.hi_strict) {
                    last.hi = s.hi;
                    last.hi_strict = s.hi_strict;
                }
                continue;
            }
        }
        merged.push(s);
    }

    let mut out = f.clone();
    for s in merged {
        if s.lo == s.hi {
            out = out.with_override(s.lo, inf.clone(), Tag::None);
            continue;
        }
        let end_val = out.evaluate(&hi).unwrap();
        let mut pieces: Vec<Pwa> = Vec::new();
        if lo < s.lo {
            let mut left = out.restrict(&lo, &s.lo).expect("span inside domain");
            if !s.lo_strict {
                // keep the limit in the body; the attained infinity at the
                // closed boundary becomes an override after assembly
                left.overrides.retain(|(x, _, _)| *x != s.lo);
                left.canonicalize();
            }
            pieces.push(left);
        } else if !s.lo_strict {
            // overlay starts at the domain edge
            pieces.push(Pwa::point(lo.clone(), inf.clone()));
        } else {
            // the domain-edge value survives; keep its provenance through
            // the override encoding
            let val = out.evaluate(&lo).unwrap();
            let mut pt = Pwa::point(lo.clone(), inf.clone());
            if val != inf {
                pt = pt.with_override(lo.clone(), val, out.tag_at(&lo));
            }
            pieces.push(pt);
        }
        pieces.push(Pwa::constant(s.lo.clone(), s.hi.clone(), inf.clone()));
        if s.hi < hi {
            let mut right = out.restrict(&s.hi, &hi).expect("span inside domain");
            if !s.hi_strict {
                right.overrides.retain(|(x, _, _)| *x != s.hi);
                right.canonicalize();
            }
            pieces.push(right);
        }
        let mut acc: Option<Pwa> = None;
        for p in pieces {
            acc = Some(match acc {
                None => p,
                Some(prev) => splice(prev, p),
            });
        }
        out = acc.unwrap();
        if !s.lo_strict && lo < s.lo {
            out = out.with_override(s.lo.clone(), inf.clone(), Tag::None);
        }
        if !s.hi_strict && s.hi < hi {
            out = out.with_override(s.hi.clone(), inf.clone(), Tag::None);
        }
        if s.hi == hi && s.hi_strict {
            // the overlay stops short of the domain end
            let last = out.points.len() - 1;
            out.points[last].1 = end_val;
            out.canonicalize();
        }
    }
    debug_assert!(out.validate().is_ok());
    out
}

/// Joins adjacent pieces without a continuity requirement; attained values
/// at the junction follow the left piece, infinite regions keep their
/// mixed-segment encoding.
fn splice(prev: Pwa, p: Pwa) -> Pwa {
    let (_, m) = prev.domain();
    let mut pts = prev.points.clone();
    let _dbg = (prev.clone(), p.clone());
    let mut tags = prev.tags.clone();
    let mut overrides = prev.overrides.clone();
    // right entries paired with the tag of the segment entering them
    let mut rights: Vec<(Tag, (Q, Ext))> = p
        .points
        .iter()
        .enumerate()
        .map(|(i, pt)| {
            let tag = if i == 0 { Tag::None } else { p.tags[i - 1].clone() };
            (tag, pt.clone())
        })
        .collect();
    let right_overrides: Vec<(Q, Ext, Tag)> =
        p.overrides.iter().filter(|(x, _, _)| *x != m).cloned().collect();

    let lv = pts.last().unwrap().1.clone();
    let rv = rights.first().unwrap().1 .1.clone();
    if lv == rv {
        rights.remove(0);
    } else if lv.is_finite() && rv.is_finite() {
        // a jump: both entries stay, zero-width junction segment
    } else if !lv.is_finite() && rv.is_finite() {
        // the infinite region ends at m
        let prev_entry = if pts.len() >= 2 { Some(pts[pts.len() - 2].1.clone()) } else { None };
        match prev_entry {
            Some(v) if v == lv => {
                // (a, inf), (m, inf) + (m, rv): the finite value becomes the
                // mixed segment's closed end
                pts.pop();
                tags.pop();
            }
            None => {
                // single infinite point on the left: vacuous
                pts.pop();
            }
            Some(_) => {
                // finite entry before the infinity: the region is (a, m];
                // the attained value at m moves into an override
                overrides.retain(|(x, _, _)| *x != m);
                overrides.push((m.clone(), rv.clone(), p.tag_at(&m)));
                rights.remove(0);
            }
        }
    } else if lv.is_finite() && !rv.is_finite() {
        // the infinite region starts after m: drop its entries at m
        while rights.first().map(|e| e.1 .0 == m).unwrap_or(false) {
            rights.remove(0);
        }
        match rights.first().map(|e| e.1 .1.clone()) {
            Some(w) if w.is_finite() => {
                // inf on (m, first): the left value moves into an override
                overrides.retain(|(x, _, _)| *x != m);
                overrides.push((m.clone(), lv.clone(), prev.tag_at(&m)));
                let last = pts.len() - 1;
                pts[last].1 = rv.clone();
            }
            Some(_) => {}
            None => {
                // the right piece was a single infinite point
                overrides.retain(|(x, _, _)| *x != m);
                overrides.push((m.clone(), rv.clone(), Tag::None));
            }
        }
    } else {
        // opposite infinities: only legal when one side is width-zero
        let left_width_zero = pts.iter().all(|e| e.0 == m);
        debug_assert!(left_width_zero, "opposite infinite regions meet at {m}: {prev:?} | {p:?}");
        if left_width_zero {
            for e in pts.iter_mut() {
                e.1 = rv.clone();
            }
        }
        rights.remove(0);
    }

    for (tag, pt) in rights {
        if pts.last().map(|e| *e == pt).unwrap_or(false) {
            continue;
        }
        if pts.is_empty() {
            pts.push(pt);
        } else {
            tags.push(tag);
            pts.push(pt);
        }
    }
    overrides.extend(right_overrides);
    let mut g = Pwa { points: pts, tags, overrides };
    g.assert_well_formed();
    g.canonicalize();
    g
}

/// Maximal spans on which the function attains the given infinite value
/// (mixed segments attain it on their open side; isolated occurrences are
/// width-zero spans).
pub fn inf_regions(f: &Pwa, plus: bool) -> Vec<Span> {
    let inf = if plus { Ext::PlusInf } else { Ext::MinusInf };
    let mut raw: Vec<Span> = Vec::new();
    let n = f.points.len();
    let mut i = 0usize;
    while i < n {
        if f.points[i].1 != inf {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && f.points[j + 1].1 == inf {
            j += 1;
        }
        // extend over the open side of bordering mixed segments
        let (lo, lo_strict) = if i == 0 {
            (f.points[0].0.clone(), false)
        } else {
            (f.points[i - 1].0.clone(), true)
        };
        let (hi, hi_strict) = if j + 1 == n {
            (f.points[j].0.clone(), false)
        } else {
            (f.points[j + 1].0.clone(), true)
        };
        raw.push(Span { lo, lo_strict, hi, hi_strict });
        i = j + 1;
    }
    // overrides with a different value shadow the body at single points
    let mut out: Vec<Span> = Vec::new();
    for span in raw {
        let mut pieces = vec![span];
        for (x, v, _) in &f.overrides {
            if *v == inf {
                continue;
            }
            let mut next = Vec::new();
            for s in pieces {
                if !s.contains(x) {
                    next.push(s);
                    continue;
                }
                let left = Span {
                    lo: s.lo.clone(),
                    lo_strict: s.lo_strict,
                    hi: x.clone(),
                    hi_strict: true,
                };
                let right = Span {
                    lo: x.clone(),
                    lo_strict: true,
                    hi: s.hi.clone(),
                    hi_strict: s.hi_strict,
                };
                if !left.is_empty() {
                    next.push(left);
                }
                if !right.is_empty() {
                    next.push(right);
                }
            }
            pieces = next;
        }
        out.extend(pieces);
    }
    for (x, v, _) in &f.overrides {
        if *v == inf {
            out.push(Span::closed(x.clone(), x.clone()));
        }
    }
    out.sort_by(|a, b| a.lo.cmp(&b.lo));
    out
}

/// Replaces the function with `+inf` outside the union of closed intervals
/// (used to mark regions where a maximizing location has no move at all).
pub fn inf_outside(f: &Pwa, intervals: &[(Q, Q)]) -> Pwa {
    let (lo, hi) = f.domain();
    let mut sorted: Vec<(Q, Q)> = intervals
        .iter()
        .filter(|(a, b)| a <= b && *b >= lo && *a <= hi)
        .map(|(a, b)| (a.clone().max(lo.clone()), b.clone().min(hi.clone())))
        .collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Q, Q)> = Vec::new();
    for (a, b) in sorted {
        if let Some(last) = merged.last_mut() {
            if a <= last.1 {
                if b > last.1 {
                    last.1 = b;
                }
                continue;
            }
        }
        merged.push((a, b));
    }
    // complement spans, open at the kept boundaries
    let mut gaps: Vec<Span> = Vec::new();
    let mut cursor = (lo.clone(), false); // (position, strict)
    for (a, b) in &merged {
        let gap = Span { lo: cursor.0.clone(), lo_strict: cursor.1, hi: a.clone(), hi_strict: true };
        if !gap.is_empty() {
            gaps.push(gap);
        }
        cursor = (b.clone(), true);
    }
    let tail = Span { lo: cursor.0.clone(), lo_strict: cursor.1, hi: hi.clone(), hi_strict: false };
    if !tail.is_empty() {
        gaps.push(tail);
    }
    if merged.is_empty() {
        return Pwa::constant(lo, hi, Ext::PlusInf);
    }
    overlay_inf(f, &gaps, true)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> Q {
        Q::new(p, d)
    }

    fn qi(n: i64) -> Q {
        Q::int(n)
    }

    fn fin(p: i64, d: i64) -> Ext {
        Ext::Fin(Q::new(p, d))
    }

    /// The worked target function: 3 at 0, 0 from 1/2 on.
    fn goal_fn() -> Pwa {
        Pwa::from_points(vec![(qi(0), fin(3, 1)), (q(1, 2), fin(0, 1)), (qi(1), fin(0, 1))])
    }

    #[test]
    fn evaluate_interpolates_exactly() {
        let f = goal_fn();
        assert_eq!(f.evaluate(&q(1, 4)).unwrap(), fin(3, 2));
        assert_eq!(f.evaluate(&q(1, 2)).unwrap(), fin(0, 1));
        assert_eq!(f.evaluate(&qi(0)).unwrap(), fin(3, 1));
        assert!(f.evaluate(&qi(2)).is_err());
    }

    #[test]
    fn evaluate_infinite_region() {
        let f = Pwa::constant(qi(0), qi(1), Ext::PlusInf);
        assert_eq!(f.evaluate(&q(1, 3)).unwrap(), Ext::PlusInf);
    }

    #[test]
    fn canonical_merges_collinear() {
        let f = Pwa::from_points(vec![
            (qi(0), fin(0, 1)),
            (q(1, 2), fin(1, 2)),
            (qi(1), fin(1, 1)),
        ]);
        assert_eq!(f.segment_count(), 1);
        let g = Pwa::affine(qi(0), qi(1), &qi(1), &qi(0));
        assert_eq!(f.geometry(), g.geometry());
    }

    #[test]
    fn interior_of_crossing_lines() {
        // f1(x)=x, f2(x)=1-x on [0,1] -> x on [0,1/2], 1-x on [1/2,1]
        let f1 = Pwa::affine(qi(0), qi(1), &qi(1), &qi(0));
        let f2 = Pwa::affine(qi(0), qi(1), &qi(-1), &qi(1));
        let m = interior(&[f1.clone(), f2.clone()]).unwrap();
        assert_eq!(m.evaluate(&q(1, 4)).unwrap(), fin(1, 4));
        assert_eq!(m.evaluate(&q(1, 2)).unwrap(), fin(1, 2));
        assert_eq!(m.evaluate(&q(3, 4)).unwrap(), fin(1, 4));
        let e = exterior(&[f1, f2]).unwrap();
        assert_eq!(e.evaluate(&q(1, 4)).unwrap(), fin(3, 4));
        assert_eq!(e.evaluate(&q(3, 4)).unwrap(), fin(3, 4));
    }

    #[test]
    fn interior_idempotent_and_infinity_absorbs() {
        let f = goal_fn();
        let m = interior(&[f.clone(), f.clone()]).unwrap();
        assert_eq!(m.geometry(), f.geometry());
        let inf = Pwa::constant(qi(0), qi(1), Ext::PlusInf);
        let m = interior(&[inf, f.clone()]).unwrap();
        assert_eq!(m.geometry(), f.geometry());
        let ninf = Pwa::constant(qi(0), qi(1), Ext::MinusInf);
        let e = exterior(&[ninf, f.clone()]).unwrap();
        assert_eq!(e.geometry(), f.geometry());
    }

    #[test]
    fn shift_by_delay_formula() {
        // f(x) = -2x + 3 on [0,1], d = 1/8, price = 1 -> -2x + 23/8 on [0, 7/8]
        let f = Pwa::affine(qi(0), qi(1), &qi(-2), &qi(3));
        let g = f.shift_by_delay(&q(1, 8), &qi(1)).unwrap();
        assert_eq!(g.domain(), (qi(0), q(7, 8)));
        assert_eq!(g.evaluate(&qi(0)).unwrap(), fin(23, 8));
        assert_eq!(g.evaluate(&q(7, 8)).unwrap(), Ext::Fin(&q(23, 8) - &q(14, 8)));
        // d = 0 is the identity
        assert_eq!(f.shift_by_delay(&qi(0), &qi(5)).unwrap(), f);
        // constant f, price 0: restriction only
        let c = Pwa::constant(qi(0), qi(1), fin(7, 1));
        let g = c.shift_by_delay(&q(1, 2), &qi(0)).unwrap();
        assert_eq!(g.domain(), (qi(0), q(1, 2)));
        assert_eq!(g.evaluate(&q(1, 4)).unwrap(), fin(7, 1));
    }

    #[test]
    fn restrict_concat_round_trip() {
        let f = goal_fn();
        let left = f.restrict(&qi(0), &q(1, 3)).unwrap();
        let right = f.restrict(&q(1, 3), &qi(1)).unwrap();
        let back = left.concat(&right).unwrap();
        assert_eq!(back.geometry(), f.geometry());
        // restrict to a point
        let p = f.restrict(&q(1, 4), &q(1, 4)).unwrap();
        assert_eq!(p.domain(), (q(1, 4), q(1, 4)));
        assert_eq!(p.evaluate(&q(1, 4)).unwrap(), fin(3, 2));
        // concat mismatch errors
        let lo = Pwa::constant(qi(0), q(1, 2), fin(0, 1));
        let hi = Pwa::constant(q(1, 2), qi(1), fin(1, 1));
        assert!(matches!(lo.concat(&hi), Err(PwaError::ContinuityMismatch(..))));
    }

    #[test]
    fn selective_replace_single_segment() {
        // f(x) = -3x + 3 on [0,1], price 2, window [0,1] -> -2x + 2
        let f = Pwa::affine(qi(0), qi(1), &qi(-3), &qi(3));
        let r = selective_replace(&f, &qi(2), (&qi(0), &qi(1))).unwrap();
        assert_eq!(r.evaluate(&qi(0)).unwrap(), fin(2, 1));
        assert_eq!(r.evaluate(&q(1, 2)).unwrap(), fin(1, 1));
        assert_eq!(r.geometry(), Pwa::affine(qi(0), qi(1), &qi(-2), &qi(2)).geometry());
        let delay_segments: Vec<_> = r
            .segments()
            .into_iter()
            .filter(|s| matches!(s.tag, Tag::Delay { .. }))
            .collect();
        assert_eq!(delay_segments.len(), 1);
        if let Tag::Delay { until, .. } = &delay_segments[0].tag {
            assert_eq!(*until, qi(1));
        }
    }

    #[test]
    fn selective_replace_no_fire_when_shallow() {
        // all slopes > -price: unchanged
        let f = goal_fn(); // slopes -6, 0
        let r = selective_replace(&f, &qi(10), (&qi(0), &qi(1))).unwrap();
        assert_eq!(r.geometry(), f.geometry());
        // equality does not fire either (pointwise identical anyway)
        let g = Pwa::affine(qi(0), qi(1), &qi(-2), &qi(2));
        let r = selective_replace(&g, &qi(2), (&qi(0), &qi(1))).unwrap();
        assert_eq!(r.geometry(), g.geometry());
        assert!(r.segments().iter().all(|s| !matches!(s.tag, Tag::Delay { .. })));
    }

    #[test]
    fn selective_replace_two_segments_vs_oracle() {
        // slope -5 on [0,1/2], then 0 with f(1)=0; price 1
        let f = Pwa::from_points(vec![(qi(0), fin(5, 2)), (q(1, 2), fin(0, 1)), (qi(1), fin(0, 1))]);
        let r = selective_replace(&f, &qi(1), (&qi(0), &qi(1))).unwrap();
        // dense-grid waiting oracle
        let k = 64i64;
        for i in 0..=k {
            let x = Q::new(i, k);
            let mut best = Ext::PlusInf;
            for j in i..=k {
                let v = Q::new(j, k);
                let c = f.evaluate(&v).unwrap().add_q(&(&v - &x));
                best = best.min(c);
            }
            assert_eq!(r.evaluate(&x).unwrap(), best, "at x={x}");
        }
    }

    #[test]
    fn waiting_through_infinite_gap() {
        // f = +inf on [0,1/2), finite at and after 1/2; waiting crosses the gap
        let f = Pwa::from_points(vec![
            (qi(0), Ext::PlusInf),
            (q(1, 2), fin(1, 1)),
            (qi(1), fin(1, 1)),
        ]);
        let r = selective_replace(&f, &qi(1), (&qi(0), &qi(1))).unwrap();
        // at x=0: wait to 1/2 (cost 1/2) then 1
        assert_eq!(r.evaluate(&qi(0)).unwrap(), fin(3, 2));
        assert_eq!(r.evaluate(&q(1, 2)).unwrap(), fin(1, 1));
    }

    #[test]
    fn point_override_contributes_to_waiting() {
        // +inf everywhere except a point value 0 at x=3/4
        let f = Pwa::constant(qi(0), qi(1), Ext::PlusInf).with_override(
            q(3, 4),
            fin(0, 1),
            Tag::Source(7),
        );
        let r = selective_replace(&f, &qi(2), (&qi(0), &qi(1))).unwrap();
        // waiting line of slope -2 through (3/4, 0) on [0, 3/4]; +inf after
        assert_eq!(r.evaluate(&qi(0)).unwrap(), fin(3, 2));
        assert_eq!(r.evaluate(&q(3, 4)).unwrap(), fin(0, 1));
        assert_eq!(r.evaluate(&q(7, 8)).unwrap(), Ext::PlusInf);
        let seg = &r.segments()[0];
        assert!(matches!(seg.tag, Tag::Delay { via: 7, .. }));
    }

    #[test]
    fn bounded_wait_max_formulas() {
        // single segment g(x) = -(1/2)x + 1 on [0,1], price 1, max wait 1/8:
        // on [0,7/8]: -(1/2)x + 17/16; on [7/8, 1]: slope -1 through (1, 1/2)
        let g = Pwa::affine(qi(0), qi(1), &q(-1, 2), &qi(1));
        let v = bounded_wait_max(&g, &qi(1), &q(1, 8), &qi(0), &qi(1)).unwrap();
        assert_eq!(v.evaluate(&qi(0)).unwrap(), fin(17, 16));
        assert_eq!(v.evaluate(&q(7, 8)).unwrap(), Ext::Fin(&q(-7, 16) + &q(17, 16)));
        assert_eq!(v.evaluate(&qi(1)).unwrap(), fin(1, 2));
        // grid cross-check: max over waits in [0, 1/8]
        let k = 64i64;
        for i in 0..=k {
            let x = Q::new(i, k);
            let mut best = Ext::MinusInf;
            for j in 0..=8i64 {
                let w = Q::new(j, 64);
                let vx = &x + &w;
                if vx > qi(1) {
                    break;
                }
                best = best.max(g.evaluate(&vx).unwrap().add_q(&w));
            }
            assert_eq!(v.evaluate(&x).unwrap(), best, "at x={x}");
        }
    }

    #[test]
    fn bounded_wait_max_steep_slope_is_identity() {
        // slope <= -price everywhere: waiting never helps the maximizer
        let g = Pwa::affine(qi(0), qi(1), &qi(-3), &qi(3));
        let v = bounded_wait_max(&g, &qi(1), &q(1, 8), &qi(0), &qi(1)).unwrap();
        assert_eq!(v.geometry(), g.geometry());
    }

    #[test]
    fn jump_value_rule() {
        // left-attached jump at 1/2: value there is the left limit
        let f = Pwa::from_points_tagged(
            vec![
                (qi(0), fin(0, 1)),
                (q(1, 2), fin(1, 2)),
                (q(1, 2), fin(2, 1)),
                (qi(1), fin(2, 1)),
            ],
            vec![Tag::Source(0), Tag::None, Tag::Source(1)],
        );
        assert_eq!(f.evaluate(&q(1, 2)).unwrap(), fin(1, 2));
        assert_eq!(f.evaluate(&q(3, 4)).unwrap(), fin(2, 1));
        // min against a constant between the limits keeps the jump
        let c = Pwa::constant(qi(0), qi(1), fin(1, 1));
        let m = c.min_with(&f).unwrap();
        assert_eq!(m.evaluate(&q(1, 2)).unwrap(), fin(1, 2));
        assert_eq!(m.evaluate(&q(3, 4)).unwrap(), fin(1, 1));
        assert_eq!(m.evaluate(&q(1, 4)).unwrap(), fin(1, 4));
    }

    #[test]
    fn envelope_point_value_becomes_override() {
        // single cheap point at 1/2 against an expensive line
        let p = Pwa::constant(qi(0), qi(1), Ext::PlusInf).with_override(
            q(1, 2),
            fin(0, 1),
            Tag::None,
        );
        let f = Pwa::constant(qi(0), qi(1), fin(5, 1));
        let m = interior(&[p, f]).unwrap();
        assert_eq!(m.evaluate(&q(1, 2)).unwrap(), fin(0, 1));
        assert_eq!(m.evaluate(&q(1, 4)).unwrap(), fin(5, 1));
        assert_eq!(m.overrides().len(), 1);
    }

    #[test]
    fn inf_outside_masks_gaps() {
        let f = Pwa::affine(qi(0), qi(2), &qi(1), &qi(0));
        let masked = inf_outside(&f, &[(q(1, 2), qi(1))]);
        assert_eq!(masked.evaluate(&q(1, 4)).unwrap(), Ext::PlusInf);
        assert_eq!(masked.evaluate(&q(3, 4)).unwrap(), fin(3, 4));
        assert_eq!(masked.evaluate(&q(3, 2)).unwrap(), Ext::PlusInf);
        // boundary points keep their finite values
        assert_eq!(masked.evaluate(&q(1, 2)).unwrap(), fin(1, 2));
        assert_eq!(masked.evaluate(&qi(1)).unwrap(), fin(1, 1));
    }
}
