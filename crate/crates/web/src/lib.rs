//! Browser bindings. Each export takes plain values and returns a JSON
//! string; errors surface as thrown strings.

use std::sync::Arc;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use metaset::cell2d::UnitCell2D;
use metaset::expr::{parse_catalog, FamilyForm, LevelSetExpr};
use metaset::isogen::{solidify, solve_isovalue};
use metaset::mech::{gen2d_dataset, Gen2dConfig};
use metaset::metrics::{descriptor2d, DEFAULT_ROUNDS};
use metaset::pipeline::{planar_property_kernel, planar_shape_kernel, select_weighted};

const DENSITY_TOL: f64 = 1e-3;

fn bits(cell: impl Iterator<Item = bool>) -> String {
    cell.map(|b| if b { '1' } else { '0' }).collect()
}

fn parse_form(form: &str) -> Result<FamilyForm, String> {
    form.parse()
}

/// Solves the isovalue of a 3D expression for a target density and returns
/// one z layer of the voxelized cell.
pub fn slice(expr: &str, form: &str, target: f64, n: usize, layer: usize) -> Result<Value, String> {
    let expr = LevelSetExpr::parse_with_dims(expr, 3).map_err(|e| e.to_string())?;
    let form = parse_form(form)?;
    if layer >= n {
        return Err(format!("layer {layer} out of range for n = {n}"));
    }
    let field = Arc::new(expr.evaluate_grid(n).map_err(|e| e.to_string())?);
    let sol = solve_isovalue(&field, form, target, DENSITY_TOL).map_err(|e| e.to_string())?;
    let cell = solidify(field, form, sol.t);
    let start = layer * n * n;
    Ok(json!({
        "t": sol.t,
        "density": sol.density,
        "pinned": sol.pinned,
        "n": n,
        "solid": bits(cell.solid[start..start + n * n].iter().copied()),
    }))
}

/// Thresholds a 2D expression at a target volume fraction and returns the
/// cell and its shape descriptor.
pub fn descriptor(expr: &str, form: &str, target: f64, n: usize) -> Result<Value, String> {
    let expr = LevelSetExpr::parse_with_dims(expr, 2).map_err(|e| e.to_string())?;
    let form = parse_form(form)?;
    let field = Arc::new(expr.evaluate_grid(n).map_err(|e| e.to_string())?);
    let sol = solve_isovalue(&field, form, target, DENSITY_TOL).map_err(|e| e.to_string())?;
    let cell = UnitCell2D::new(n, n, solidify(field, form, sol.t).solid);
    let d = descriptor2d(&cell, DEFAULT_ROUNDS).map_err(|e| e.to_string())?;
    Ok(json!({
        "density": cell.volume_fraction(),
        "n": n,
        "solid": bits(cell.solid.iter().copied()),
        "descriptor": d.values,
    }))
}

/// Builds a seeded 2D ground set from a catalog and selects `k` cells at
/// each shape weight in `0, 1/steps, ..., 1`.
pub fn tradeoff(catalog: &str, count: usize, n: usize, k: usize, steps: usize, seed: u64) -> Result<Value, String> {
    let catalog = parse_catalog(catalog, 2).map_err(|e| e.to_string())?;
    if steps == 0 {
        return Err("steps must be positive".into());
    }
    let cfg = Gen2dConfig {
        count,
        n,
        seed,
        ..Gen2dConfig::default()
    };
    let cells = gen2d_dataset(&catalog, &cfg).map_err(|e| e.to_string())?;
    let ls = planar_shape_kernel(&cells).map_err(|e| e.to_string())?.kernel;
    let lp = planar_property_kernel(&cells).map_err(|e| e.to_string())?.kernel;
    let selections = (0..=steps)
        .map(|s| {
            let w = s as f64 / steps as f64;
            select_weighted(&lp, &ls, w, k, seed)
                .map(|(r, _)| r)
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cells_json: Vec<Value> = cells
        .iter()
        .map(|c| {
            json!({
                "density": c.volume_fraction(),
                "properties": c.properties,
                "solid": bits(c.solid.iter().copied()),
            })
        })
        .collect();
    Ok(json!({ "n": n, "cells": cells_json, "selections": selections }))
}

fn export(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = slice)]
pub fn slice_js(expr: &str, form: &str, target: f64, n: usize, layer: usize) -> Result<String, JsValue> {
    export(slice(expr, form, target, n, layer))
}

#[wasm_bindgen(js_name = descriptor)]
pub fn descriptor_js(expr: &str, form: &str, target: f64, n: usize) -> Result<String, JsValue> {
    export(descriptor(expr, form, target, n))
}

#[wasm_bindgen(js_name = tradeoff)]
pub fn tradeoff_js(catalog: &str, count: usize, n: usize, k: usize, steps: usize, seed: u64) -> Result<String, JsValue> {
    export(tradeoff(catalog, count, n, k, steps, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_hits_target() {
        let v = slice("cos(X) + cos(Y) + cos(Z)", "LE", 0.3, 16, 4).unwrap();
        let close = (v["density"].as_f64().unwrap() - 0.3).abs() <= DENSITY_TOL;
        assert!(close || v["pinned"] == true);
        assert_eq!(v["solid"].as_str().unwrap().len(), 256);
    }

    #[test]
    fn slice_rejects_bad_input() {
        assert!(slice("cos(X", "LE", 0.3, 16, 0).is_err());
        assert!(slice("cos(X)", "XX", 0.3, 16, 0).is_err());
        assert!(slice("cos(X)", "LE", 0.3, 16, 16).is_err());
    }

    #[test]
    fn descriptor_length() {
        let v = descriptor("cos(X) * cos(Y)", "GE", 0.6, 32).unwrap();
        assert_eq!(v["descriptor"].as_array().unwrap().len(), metaset::metrics::DESCRIPTOR_LEN);
    }

    #[test]
    fn tradeoff_endpoints() {
        let cat = "a | cos(X) + cos(Y) | LE\nb | sin(X) * sin(Y) | GE\nc | cos(X) | LE\n";
        let v = tradeoff(cat, 12, 16, 3, 2, 1).unwrap();
        let sel = v["selections"].as_array().unwrap();
        assert_eq!(sel.len(), 3);
        assert_eq!(sel[0]["w"], 0.0);
        assert_eq!(sel[2]["w"], 1.0);
        assert!(sel.iter().all(|s| s["indices"].as_array().unwrap().len() == 3));
    }
}
