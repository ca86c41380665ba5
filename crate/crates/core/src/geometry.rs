//! Minimal well-known-text reader for area outlines.
//!
//! Only `POLYGON` and `MULTIPOLYGON` are accepted, which is all an area
//! profile can carry. The output is the GeoJSON geometry object.

use serde_json::{json, Value};

type Ring = Vec<[f64; 2]>;
type Polygon = Vec<Ring>;

/// Parses a WKT polygon or multipolygon into a GeoJSON geometry value.
pub fn wkt_to_geojson(wkt: &str) -> Result<Value, String> {
    let text = wkt.trim();
    let upper = text.to_ascii_uppercase();
    if let Some(rest) = strip_keyword(text, &upper, "MULTIPOLYGON") {
        let mut p = Parser::new(rest);
        let polys = p.list(|p| p.polygon())?;
        p.finish()?;
        Ok(json!({ "type": "MultiPolygon", "coordinates": polys }))
    } else if let Some(rest) = strip_keyword(text, &upper, "POLYGON") {
        let mut p = Parser::new(rest);
        let poly = p.polygon()?;
        p.finish()?;
        Ok(json!({ "type": "Polygon", "coordinates": poly }))
    } else {
        Err(format!("unsupported geometry `{}`", text.split('(').next().unwrap_or(text).trim()))
    }
}

fn strip_keyword<'a>(text: &'a str, upper: &str, keyword: &str) -> Option<&'a str> {
    upper
        .starts_with(keyword)
        .then(|| &text[keyword.len()..])
}

struct Parser<'a> {
    rest: &'a str,
}

impl<'a> Parser<'a> {
    fn new(rest: &'a str) -> Self {
        Parser { rest }
    }

    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        self.skip_ws();
        match self.rest.strip_prefix(c) {
            Some(r) => {
                self.rest = r;
                Ok(())
            }
            None => Err(format!("expected `{c}` near `{}`", preview(self.rest))),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        match self.rest.strip_prefix(c) {
            Some(r) => {
                self.rest = r;
                true
            }
            None => false,
        }
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, String>) -> Result<Vec<T>, String> {
        self.expect('(')?;
        let mut out = vec![item(self)?];
        while self.eat(',') {
            out.push(item(self)?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn number(&mut self) -> Result<f64, String> {
        self.skip_ws();
        let end = self
            .rest
            .find(|c: char| c.is_whitespace() || c == ',' || c == ')')
            .unwrap_or(self.rest.len());
        let (tok, rest) = self.rest.split_at(end);
        let v: f64 = tok
            .parse()
            .map_err(|_| format!("bad coordinate `{tok}`"))?;
        if !v.is_finite() {
            return Err(format!("bad coordinate `{tok}`"));
        }
        self.rest = rest;
        Ok(v)
    }

    fn point(&mut self) -> Result<[f64; 2], String> {
        Ok([self.number()?, self.number()?])
    }

    fn ring(&mut self) -> Result<Ring, String> {
        let ring = self.list(|p| p.point())?;
        if ring.len() < 4 {
            return Err("a ring needs at least 4 positions".into());
        }
        if ring.first() != ring.last() {
            return Err("ring is not closed".into());
        }
        Ok(ring)
    }

    fn polygon(&mut self) -> Result<Polygon, String> {
        self.list(|p| p.ring())
    }

    fn finish(&mut self) -> Result<(), String> {
        self.skip_ws();
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(format!("trailing input `{}`", preview(self.rest)))
        }
    }
}

fn preview(s: &str) -> &str {
    &s[..s.len().min(16)]
}

/// WKT for an axis-aligned square, used by the synthetic fixture generator.
pub fn square_wkt(x: f64, y: f64, side: f64) -> String {
    let snap = |v: f64| (v * 1e9).round() / 1e9;
    let (x, y) = (snap(x), snap(y));
    let (x1, y1) = (snap(x + side), snap(y + side));
    format!("POLYGON(({x} {y}, {x1} {y}, {x1} {y1}, {x} {y1}, {x} {y}))")
}
